"""Synthetic copy/generate corpus used by the demos and the end-to-end test.

Each source sentence has 15 tokens. Two spans of 2-4 content words are
marked in it: a cue word ``c<k>`` right before each span and ``</m>`` right
after. The target is ``g<a> span1 g<b> span2``: every cue ``c<k>`` must be
rewritten as the generator word ``g<k>`` (generate mode) and every span
reproduced verbatim (copy mode). Content words are ``w0..w149``, which the
target vocabulary knows, and ``r0..r49``, which it does not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .copymod import copy_distributions, copy_run, gate_forward
from .decoder import decode_step, generate_log_distribution, init_decoder, project_keys
from .encoder import encode_sentence
from .numcore import log_sigmoid, make_rng
from .search import CopyAction, copy_ids_for, greedy_decode, replace_unk
from .spanoracle import BOS, Vocabulary, make_instance

N_GENERATOR = 20
N_COMMON = 150
N_RARE = 50
SOURCE_LEN = 15
END_MARK = "</m>"

CUES = [f"c{k}" for k in range(N_GENERATOR)]
GENERATORS = [f"g{k}" for k in range(N_GENERATOR)]
COMMON = [f"w{k}" for k in range(N_COMMON)]
RARE = [f"r{k}" for k in range(N_RARE)]
CONTENT = COMMON + RARE


def vocabularies() -> tuple[Vocabulary, Vocabulary]:
    """Source and target vocabularies; rare content words are target-OOV."""
    src = Vocabulary(CONTENT + CUES + [END_MARK])
    tgt = Vocabulary(GENERATORS + COMMON)
    return src, tgt


def make_pair(rng: np.random.Generator) -> tuple[list[str], list[str]]:
    len1, len2 = (int(v) for v in rng.integers(2, 5, size=2))
    n_filler = SOURCE_LEN - 4 - len1 - len2
    words = [CONTENT[i] for i in rng.choice(len(CONTENT), size=len1 + len2 + n_filler, replace=False)]
    span1, span2, filler = words[:len1], words[len1:len1 + len2], words[len1 + len2:]
    cut = np.sort(rng.integers(0, n_filler + 1, size=2))
    gaps = filler[: cut[0]], filler[cut[0]: cut[1]], filler[cut[1]:]
    a, b = (int(v) for v in rng.integers(0, N_GENERATOR, size=2))
    src = (list(gaps[0]) + [CUES[a]] + span1 + [END_MARK] + list(gaps[1])
           + [CUES[b]] + span2 + [END_MARK] + list(gaps[2]))
    tgt = [GENERATORS[a]] + span1 + [GENERATORS[b]] + span2
    return src, tgt


def make_corpus(n: int, seed: int) -> list[tuple[list[str], list[str]]]:
    rng = make_rng(seed)
    return [make_pair(rng) for _ in range(n)]


def make_instances(n: int, seed: int, max_copy_len: int = 5):
    src_vocab, tgt_vocab = vocabularies()
    return [make_instance(s, t, src_vocab, tgt_vocab, max_copy_len) for s, t in make_corpus(n, seed)]


@dataclass
class CopyTaskReport:
    n: int
    exact_accuracy: float      # share of outputs equal to the reference
    token_accuracy: float      # share of reference positions reproduced
    gate_accuracy: float       # share of gold span starts where decoding picks copy
    span_fidelity: float       # share of emitted spans equal to their source slice
    n_spans_emitted: int


def _gate_decisions(model, inst, max_copy_len) -> tuple[int, int]:
    """Teacher-forced walk over the gold target; count span starts decided as copies."""
    P = model.P
    enc = encode_sentence(inst.x, P["src_emb"], model.gru("enc_fwd"), model.gru("enc_bwd"))
    att_keys = project_keys(model, enc, "att")
    ptr_keys = project_keys(model, enc, "pointer")
    starts = inst.span_starting_at()
    state = init_decoder(model, enc)
    y_prev, t, right = BOS, 0, 0
    while t < len(inst.y):
        state, _, mem = decode_step(model, state, enc, y_prev, keys=att_keys)
        if t not in starts:
            y_prev, t = inst.y[t], t + 1
            continue
        logit, _ = gate_forward(P, mem.m)
        log_gen = generate_log_distribution(model, mem)
        dist = copy_distributions(model, mem, enc, max_copy_len, keys=ptr_keys)
        start = int(np.argmax(dist.log_start))
        c = float(log_sigmoid(logit)) + float(dist.log_start[start]) + dist.best_end(start)[1]
        g = float(log_sigmoid(-logit)) + float(np.max(log_gen))
        right += c > g
        sp = starts[t]
        ids = inst.y[sp.tgt_start: sp.tgt_end + 1]
        state = copy_run(model, state, enc, ids, len(ids), keys=att_keys)
        y_prev, t = ids[-1], sp.tgt_end + 1
    return right, len(starts)


def evaluate_copy_task(model, instances, tgt_vocab, max_copy_len: int = 5,
                       max_steps: int = 30) -> CopyTaskReport:
    exact = tok_right = tok_total = gate_right = gate_total = spans = faithful = 0
    for inst in instances:
        hyp = greedy_decode(model, inst.x, max_steps, max_copy_len,
                            copy_ids=copy_ids_for(inst.src_tokens, tgt_vocab), src_tokens=inst.src_tokens)
        out = replace_unk(hyp, inst.src_tokens, tgt_vocab)
        exact += out == inst.tgt_tokens
        tok_right += sum(a == b for a, b in zip(out, inst.tgt_tokens))
        tok_total += len(inst.tgt_tokens)
        for act in hyp.actions:
            if isinstance(act, CopyAction):
                spans += 1
                faithful += act.tokens == inst.src_tokens[act.src_start: act.src_end + 1]
        r, k = _gate_decisions(model, inst, max_copy_len)
        gate_right += r
        gate_total += k
    n = len(instances)
    return CopyTaskReport(n, exact / n, tok_right / tok_total, gate_right / max(gate_total, 1),
                          faithful / spans if spans else 1.0, spans)
