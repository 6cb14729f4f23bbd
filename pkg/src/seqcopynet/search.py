"""Greedy and beam decoding over mixed generate/copy actions, plus UNK replacement.

Both decoders score an action by its joint log-probability: a generated
word costs ``log p_g + log p(y)``, a copied span ``log p_c + log p_start +
log p_end``. Greedy takes the better of the best word and the best span
(ties go to generation), which is exactly beam search with one beam.

Finished beam paths are ranked by ``raw_score / length`` where the length
counts generated words plus copied spans; the closing end-of-sentence
token is not counted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .copymod import copy_distributions, copy_run, gate_forward
from .decoder import DecoderState, decode_step, generate_log_distribution, init_decoder, project_keys
from .encoder import EncoderOutput, encode_sentence
from .errors import ConsistencyError, InvalidArgumentError
from .numcore import log_sigmoid
from .spanoracle import BOS, EOS, UNK


@dataclass
class GenerateAction:
    token_id: int
    log_prob: float
    attention: np.ndarray | None = None


@dataclass
class CopyAction:
    src_start: int
    src_end: int
    log_prob: float
    tokens: list[str] | None = None

    @property
    def length(self) -> int:
        return self.src_end - self.src_start + 1


@dataclass
class Hypothesis:
    actions: list = field(default_factory=list)
    raw_score: float = 0.0
    state: DecoderState | None = None
    next_input: int = BOS
    finished: bool = False

    @property
    def action_count(self) -> int:
        return len(self.actions)

    @property
    def attention_trace(self) -> list[np.ndarray]:
        return [a.attention for a in self.actions if isinstance(a, GenerateAction)]

    @property
    def normalized_score(self) -> float:
        return self.raw_score / length_normalizer(self.actions)

    def signature(self) -> tuple:
        return tuple(("g", a.token_id) if isinstance(a, GenerateAction) else ("c", a.src_start, a.src_end)
                     for a in self.actions)


def length_normalizer(actions) -> int:
    """Generated words plus copied spans; a trailing EOS does not count."""
    n = len(actions)
    if n and isinstance(actions[-1], GenerateAction) and actions[-1].token_id == EOS:
        n -= 1
    return max(n, 1)


class _Session:
    """Per-sentence caches shared by all hypotheses."""

    def __init__(self, model, src_ids, max_copy_len, copy_ids, src_tokens):
        P = model.P
        self.model = model
        self.enc: EncoderOutput = encode_sentence(src_ids, P["src_emb"], model.gru("enc_fwd"), model.gru("enc_bwd"))
        self.att_keys = project_keys(model, self.enc, "att")
        self.ptr_keys = project_keys(model, self.enc, "pointer")
        self.max_copy_len = model.config.max_copy_len if max_copy_len is None else max_copy_len
        if self.max_copy_len < 1:
            raise InvalidArgumentError("max_copy_len must be at least 1")
        n = self.enc.n
        self.copy_ids = [UNK] * n if copy_ids is None else [int(i) for i in copy_ids]
        if len(self.copy_ids) != n:
            raise InvalidArgumentError("copy_ids must have one entry per source position")
        self.src_tokens = None if src_tokens is None else list(src_tokens)

    def initial(self) -> Hypothesis:
        return Hypothesis(state=init_decoder(self.model, self.enc), next_input=BOS)

    def step(self, hyp: Hypothesis):
        """Advance ``hyp`` one decoder step; returns everything needed to score actions."""
        model = self.model
        state, att, mem = decode_step(model, hyp.state, self.enc, hyp.next_input, keys=self.att_keys)
        logit, _ = gate_forward(model.P, mem.m)
        log_pc = float(log_sigmoid(logit))
        log_pg = float(log_sigmoid(-logit))
        log_gen = generate_log_distribution(model, mem)
        dist = copy_distributions(model, mem, self.enc, self.max_copy_len, keys=self.ptr_keys)
        return state, att, log_pc, log_pg, log_gen, dist

    def extend_generate(self, hyp, state, att, token, score) -> Hypothesis:
        act = GenerateAction(int(token), score, att.weights)
        return Hypothesis(hyp.actions + [act], hyp.raw_score + score, state, int(token), token == EOS)

    def extend_copy(self, hyp, state, start, end, score) -> Hypothesis:
        ids = self.copy_ids[start: end + 1]
        toks = None if self.src_tokens is None else self.src_tokens[start: end + 1]
        state = copy_run(self.model, state, self.enc, ids, len(ids), keys=self.att_keys)
        act = CopyAction(start, end, score, toks)
        return Hypothesis(hyp.actions + [act], hyp.raw_score + score, state, ids[-1], False)


def greedy_decode(model, src_ids, max_steps: int = 50, max_copy_len: int | None = None,
                  copy_ids=None, src_tokens=None) -> Hypothesis:
    if max_steps < 1:
        raise InvalidArgumentError("max_steps must be at least 1")
    sess = _Session(model, src_ids, max_copy_len, copy_ids, src_tokens)
    hyp = sess.initial()
    for _ in range(max_steps):
        state, att, log_pc, log_pg, log_gen, dist = sess.step(hyp)
        word = int(np.argmax(log_gen))
        g = log_pg + float(log_gen[word])
        start = int(np.argmax(dist.log_start))
        end, log_e = dist.best_end(start)
        c = log_pc + float(dist.log_start[start]) + log_e
        if hyp.raw_score + c > hyp.raw_score + g:
            hyp = sess.extend_copy(hyp, state, start, end, c)
        else:
            hyp = sess.extend_generate(hyp, state, att, word, g)
            if hyp.finished:
                break
    return hyp


def beam_decode(model, src_ids, beam_size: int = 8, max_steps: int = 50,
                max_copy_len: int | None = None, copy_ids=None, src_tokens=None,
                return_beam: bool = False):
    """Beam search; returns the best hypothesis (and the final pool if asked).

    Each live path proposes its ``beam_size`` best words and, for its
    ``beam_size`` best start positions, the span closed at the best end.
    The ``beam_size`` best proposals by raw score survive; those ending in
    EOS are set aside as finished.
    """
    if beam_size < 1:
        raise InvalidArgumentError("beam_size must be at least 1")
    if max_steps < 1:
        raise InvalidArgumentError("max_steps must be at least 1")
    sess = _Session(model, src_ids, max_copy_len, copy_ids, src_tokens)
    live = [sess.initial()]
    finished: list[Hypothesis] = []
    for _ in range(max_steps):
        candidates = []
        for hyp in live:
            state, att, log_pc, log_pg, log_gen, dist = sess.step(hyp)
            for word in np.argsort(-log_gen, kind="stable")[:beam_size]:
                score = log_pg + float(log_gen[word])
                candidates.append((hyp.raw_score + score, hyp, state, ("g", att, int(word)), score))
            for start in np.argsort(-dist.log_start, kind="stable")[:beam_size]:
                end, log_e = dist.best_end(int(start))
                score = log_pc + float(dist.log_start[start]) + log_e
                candidates.append((hyp.raw_score + score, hyp, state, ("c", int(start), end), score))
        # stable sort keeps generation ahead of copying on exact ties
        candidates.sort(key=lambda cand: -cand[0])
        live = []
        for _, parent, state, act, score in candidates[:beam_size]:
            if act[0] == "g":
                new = sess.extend_generate(parent, state, act[1], act[2], score)
            else:
                new = sess.extend_copy(parent, state, act[1], act[2], score)
            (finished if new.finished else live).append(new)
        if not live:
            break
    pool = finished if finished else live
    best = max(pool, key=lambda h: h.normalized_score)
    if return_beam:
        return best, finished + live
    return best


def copy_ids_for(src_tokens, tgt_vocab) -> list[int]:
    """Target-vocabulary ids fed to the decoder while running over copied words."""
    return [tgt_vocab.id(t) for t in src_tokens]


def replace_unk(hyp: Hypothesis, src_tokens, tgt_vocab) -> list[str]:
    """Surface tokens of ``hyp``; each generated UNK takes the most-attended source word."""
    out = []
    for act in hyp.actions:
        if isinstance(act, CopyAction):
            out.extend(act.tokens if act.tokens is not None else src_tokens[act.src_start: act.src_end + 1])
        elif act.token_id == EOS:
            continue
        elif act.token_id == UNK:
            if act.attention is None or len(act.attention) != len(src_tokens):
                raise ConsistencyError("attention trace does not line up with the source sentence")
            out.append(src_tokens[int(np.argmax(act.attention))])
        else:
            out.append(tgt_vocab.tokens[act.token_id])
    return out


def format_trace(hyp: Hypothesis, src_tokens, tgt_vocab) -> str:
    """Output with each copied span in brackets, e.g. ``w1 [w2 w3] w4``."""
    parts = []
    for act in hyp.actions:
        if isinstance(act, CopyAction):
            toks = act.tokens if act.tokens is not None else src_tokens[act.src_start: act.src_end + 1]
            parts.append("[" + " ".join(toks) + "]")
        elif act.token_id != EOS:
            if act.token_id == UNK:
                parts.append(src_tokens[int(np.argmax(act.attention))])
            else:
                parts.append(tgt_vocab.tokens[act.token_id])
    return " ".join(parts)
