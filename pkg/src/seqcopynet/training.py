"""Teacher-forced loss with mixed generate/copy supervision, and the training loop.

At each target step the decoder consumes the previous gold word (copied
words included, so the recurrent state runs over the whole target). A step
that starts a gold span contributes ``-log(p_c p_start p_end)``; a step
inside a span contributes nothing; every other step contributes
``-log(p_g p(y_t))``. Interior steps are excluded from the generation sum
so that no word is supervised twice.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np

from .copymod import copy_backward, copy_forward, gate_backward, gate_forward
from .decoder import dec_step_backward, dec_step_forward, readout_backward, readout_forward
from .encoder import encode_batch, encode_batch_backward
from .errors import DivergenceError, EmptyInputError, InvalidArgumentError, InvalidInstanceError
from .model import SeqCopyNet
from .numcore import AdamConfig, ParameterStore, adam_step, clip_gradients, dropout_mask, log_sigmoid, sigmoid
from .spanoracle import BOS, PAD, TrainingInstance

log = logging.getLogger(__name__)

GENERATE, COPY = 1, 2


@dataclass
class LossBreakdown:
    total: float
    gen_term: float
    copy_term: float
    n_generated: int = 0
    n_copy_spans: int = 0
    n_interior: int = 0


@dataclass
class TrainConfig:
    batch_size: int = 64
    lr: float = 0.001
    clip: float = 5.0
    dropout_p: float = 0.4
    eval_every: int = 2000
    decay_patience: int = 6
    max_copy_len: int = 5
    seed: int = 0
    max_epochs: int = 10
    max_steps: int | None = None
    dev_metric: str = "loss"   # or "rouge2"

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name in ("seed", "dropout_p", "max_steps", "dev_metric"):
                continue
            if not value > 0:
                raise InvalidArgumentError(f"{f.name} must be positive, got {value}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise InvalidArgumentError("dropout_p must lie in [0, 1)")
        if self.max_steps is not None and self.max_steps < 0:
            raise InvalidArgumentError("max_steps must be non-negative")
        if self.dev_metric not in ("loss", "rouge2"):
            raise InvalidArgumentError(f"unknown dev metric {self.dev_metric!r}")


# ---------------------------------------------------------------- batching

@dataclass
class Batch:
    x: np.ndarray          # (B, n) source ids, PAD beyond length
    x_mask: np.ndarray     # (B, n) bool
    y_in: np.ndarray       # (B, T) decoder inputs: BOS, y_0, ..., y_{T-2}
    y_out: np.ndarray      # (B, T) gold words
    kind: np.ndarray       # (B, T) GENERATE, COPY (span start) or 0
    span_start: np.ndarray
    span_end: np.ndarray


def make_batch(instances: list[TrainingInstance], max_copy_len: int) -> Batch:
    B = len(instances)
    n = max(len(inst.x) for inst in instances)
    T = max(len(inst.y) for inst in instances)
    x = np.full((B, n), PAD, dtype=np.int64)
    x_mask = np.zeros((B, n), dtype=bool)
    y_in = np.full((B, T), PAD, dtype=np.int64)
    y_out = np.full((B, T), PAD, dtype=np.int64)
    kind = np.zeros((B, T), dtype=np.int64)
    s_start = np.zeros((B, T), dtype=np.int64)
    s_end = np.zeros((B, T), dtype=np.int64)
    for b, inst in enumerate(instances):
        inst.validate(max_copy_len)
        x[b, : len(inst.x)] = inst.x
        x_mask[b, : len(inst.x)] = True
        L = len(inst.y)
        y_out[b, :L] = inst.y
        y_in[b, 0] = BOS
        y_in[b, 1:L] = inst.y[:-1]
        kind[b, :L] = GENERATE
        for sp in inst.spans:
            kind[b, sp.tgt_start: sp.tgt_end + 1] = 0
            kind[b, sp.tgt_start] = COPY
            s_start[b, sp.tgt_start] = sp.src_start
            s_end[b, sp.tgt_start] = sp.src_end
    return Batch(x, x_mask, y_in, y_out, kind, s_start, s_end)


# ---------------------------------------------------------------- loss

def batch_losses(model, instances, rng=None, dropout_p: float = 0.0,
                 compute_grad: bool = False) -> list[LossBreakdown]:
    """Per-instance losses; with ``compute_grad`` the gradient of their mean
    is accumulated into ``model.store.grads``.

    Dropout is active only when an ``rng`` is given and ``dropout_p > 0``.
    """
    if not instances:
        raise EmptyInputError("empty batch")
    cfg = model.config
    P, G = model.P, model.G
    E, d, M = cfg.emb_size, cfg.hidden_size, cfg.memory_size
    L = cfg.max_copy_len
    bt = make_batch(list(instances), L)
    B, n = bt.x.shape
    T = bt.y_in.shape[1]
    rows = np.arange(B)
    training = rng is not None and dropout_p > 0

    enc_drop = dropout_mask((B, n, E), dropout_p, rng, training) if training else None
    fwd, bwd = model.gru("enc_fwd"), model.gru("enc_bwd")
    states, enc_cache = encode_batch(bt.x, bt.x_mask, P["src_emb"], fwd, bwd, enc_drop)
    back_first = states[:, 0, d:]
    s = np.tanh(back_first @ P["dec_init.W"].T + P["dec_init.b"])
    s0 = s
    c = np.zeros((B, 2 * d))
    att_keys = states @ P["att.U"].T
    ptr_keys = states @ P["pointer.U"].T

    gen_loss = np.zeros(B, dtype=states.dtype)
    copy_loss = np.zeros(B, dtype=states.dtype)
    steps = []
    for t in range(T):
        emb = P["tgt_emb"][bt.y_in[:, t]]
        in_drop = dropout_mask((B, E), dropout_p, rng, training) if training else None
        emb_in = emb * in_drop if training else emb
        s, c, _, step_cache = dec_step_forward(model, s, c, emb_in, att_keys, states, bt.x_mask)
        m_raw = np.concatenate([emb, s, c], axis=1)
        mem_drop = dropout_mask((B, M), dropout_p, rng, training) if training else None
        m = m_raw * mem_drop if training else m_raw
        logit, gate_cache = gate_forward(P, m)

        is_gen = bt.kind[:, t] == GENERATE
        is_copy = bt.kind[:, t] == COPY
        ro = cp = None
        if is_gen.any():
            logp, ro_cache = readout_forward(P, m, E, d)
            gen_loss -= np.where(is_gen, log_sigmoid(-logit) + logp[rows, bt.y_out[:, t]], 0.0)
            ro = (logp, ro_cache)
        if is_copy.any():
            lps, lpe, cp_cache = copy_forward(model, m, ptr_keys, states, bt.x_mask,
                                              bt.span_start[:, t], bt.span_end[:, t], L)
            copy_loss -= np.where(is_copy, log_sigmoid(logit) + lps + lpe, 0.0)
            cp = cp_cache
        steps.append((emb_in, in_drop, mem_drop, step_cache, logit, gate_cache, is_gen, is_copy, ro, cp))

    total = gen_loss + copy_loss
    if not np.all(np.isfinite(total)):
        raise DivergenceError("non-finite loss encountered")
    n_gen = (bt.kind == GENERATE).sum(axis=1)
    n_copy = (bt.kind == COPY).sum(axis=1)
    # extended-precision parameters keep their precision in the reported loss
    scalar = float if states.dtype == np.float64 else states.dtype.type
    results = []
    for b, inst in enumerate(instances):
        interior = sum(sp.length - 1 for sp in inst.spans)
        results.append(LossBreakdown(scalar(total[b]), scalar(gen_loss[b]), scalar(copy_loss[b]),
                                     int(n_gen[b]), int(n_copy[b]), interior))
    if not compute_grad:
        return results

    # ------------------------------------------------------------ backward
    wb = 1.0 / B
    d_s = np.zeros((B, d))
    d_c = np.zeros((B, 2 * d))
    d_att_keys = np.zeros_like(att_keys)
    d_ptr_keys = np.zeros_like(ptr_keys)
    d_states = np.zeros_like(states)
    g_tgt_emb = G["tgt_emb"]
    for t in reversed(range(T)):
        emb_in, in_drop, mem_drop, step_cache, logit, gate_cache, is_gen, is_copy, ro, cp = steps[t]
        p_c = sigmoid(logit)
        d_logit = wb * np.where(is_gen, p_c, 0.0) + wb * np.where(is_copy, p_c - 1.0, 0.0)
        d_m = gate_backward(P, G, gate_cache, d_logit)
        if ro is not None:
            logp, ro_cache = ro
            d_logits = np.exp(logp)
            d_logits[rows, bt.y_out[:, t]] -= 1.0
            d_logits *= (wb * is_gen)[:, None]
            d_m += readout_backward(P, G, ro_cache, d_logits, E, d)
        if cp is not None:
            d_mc, d_k, d_st = copy_backward(model, cp, wb * is_copy)
            d_m += d_mc
            d_ptr_keys += d_k
            d_states += d_st
        if mem_drop is not None:
            d_m *= mem_drop
        np.add.at(g_tgt_emb, bt.y_in[:, t], d_m[:, :E])
        d_s = d_s + d_m[:, E:E + d]
        d_c = d_c + d_m[:, E + d:]
        d_s, d_c, d_emb_in, d_k, d_st = dec_step_backward(model, step_cache, d_s, d_c)
        d_att_keys += d_k
        d_states += d_st
        if in_drop is not None:
            d_emb_in = d_emb_in * in_drop
        np.add.at(g_tgt_emb, bt.y_in[:, t], d_emb_in)

    d_pre = d_s * (1.0 - s0 * s0)
    G["dec_init.W"] += d_pre.T @ back_first
    G["dec_init.b"] += d_pre.sum(axis=0)
    d_states[:, 0, d:] += d_pre @ P["dec_init.W"]
    G["att.U"] += np.einsum("bna,bnk->ak", d_att_keys, states)
    d_states += d_att_keys @ P["att.U"]
    G["pointer.U"] += np.einsum("bna,bnk->ak", d_ptr_keys, states)
    d_states += d_ptr_keys @ P["pointer.U"]
    encode_batch_backward(d_states, enc_cache, fwd, bwd, model.gru("enc_fwd", grads=True),
                          model.gru("enc_bwd", grads=True), G["src_emb"])
    return results


def instance_loss(model, instance: TrainingInstance, rng=None, dropout_p: float = 0.0,
                  compute_grad: bool = False) -> LossBreakdown:
    return batch_losses(model, [instance], rng, dropout_p, compute_grad)[0]


def loss_evaluator(model, instances, extended_precision: bool = True):
    """Deterministic ``store -> mean loss`` function for gradient checking.

    With ``extended_precision`` the forward pass runs in ``np.longdouble`` on
    a copy of the current float64 parameters. Central differences of a loss
    near 20 at eps=1e-5 only resolve about 2e-10 in float64, which swamps
    gradient components of order 1e-8; the wider mantissa removes that floor
    without touching the float64 analytic gradients under test.
    """
    instances = list(instances)

    def evaluate(store):
        shadow = ParameterStore()
        dtype = np.longdouble if extended_precision else np.float64
        shadow.params = {k: v.astype(dtype) for k, v in store.params.items()}
        losses = batch_losses(SeqCopyNet(model.config, shadow), instances)
        return sum(r.total for r in losses) / len(losses)

    return evaluate


def mean_loss(model, instances, batch_size: int = 64) -> float:
    total = 0.0
    for i in range(0, len(instances), batch_size):
        total += sum(r.total for r in batch_losses(model, instances[i: i + batch_size]))
    return total / len(instances)


# ---------------------------------------------------------------- schedule

class LearningRateSchedule:
    """Halve the rate after ``patience`` consecutive evaluations without a new best."""

    def __init__(self, lr: float, patience: int, higher_is_better: bool = False):
        self.lr = lr
        self.patience = patience
        self.higher_is_better = higher_is_better
        self.best: float | None = None
        self.bad_evals = 0

    def update(self, metric: float) -> float:
        if self.best is None or (metric > self.best if self.higher_is_better else metric < self.best):
            self.best = metric
            self.bad_evals = 0
        else:
            self.bad_evals += 1
            if self.bad_evals >= self.patience:
                self.lr /= 2.0
                self.bad_evals = 0
        return self.lr


@dataclass
class EvalRecord:
    step: int
    lr: float
    train_loss: float
    dev_metric: float

    def line(self) -> str:
        return f"{self.step}\t{self.lr:.6g}\t{self.train_loss:.6f}\t{self.dev_metric:.6f}"


@dataclass
class TrainResult:
    records: list[EvalRecord] = field(default_factory=list)
    checkpoints: list[Path] = field(default_factory=list)
    steps: int = 0


def _rouge2_metric(model, dev, max_copy_len, tgt_vocab):
    from .evalmetrics import rouge_n
    from .search import copy_ids_for, greedy_decode, replace_unk

    scores = []
    for inst in dev:
        hyp = greedy_decode(model, inst.x, max_steps=2 * len(inst.y) + 5, max_copy_len=max_copy_len,
                            copy_ids=copy_ids_for(inst.src_tokens, tgt_vocab), src_tokens=inst.src_tokens)
        scores.append(rouge_n(replace_unk(hyp, inst.src_tokens, tgt_vocab), inst.tgt_tokens, 2).f1)
    return float(np.mean(scores))


def train(config: TrainConfig, train_set: list[TrainingInstance], dev_set: list[TrainingInstance],
          model, checkpoint_dir=None, log_path=None,
          on_evaluate: Callable[[EvalRecord, object], None] | None = None,
          tgt_vocab=None) -> TrainResult:
    """Mini-batch Adam training with clipping, periodic dev evaluation and LR halving.

    Shuffling and dropout draw from two streams spawned from ``config.seed``,
    so a run is fully determined by its seed and inputs.
    """
    if not train_set:
        raise EmptyInputError("training corpus is empty")
    if config.max_copy_len != model.config.max_copy_len:
        raise InvalidArgumentError("train and model max_copy_len disagree")
    for inst in train_set:
        try:
            inst.validate(config.max_copy_len)
        except InvalidInstanceError as exc:
            raise InvalidInstanceError(f"bad training instance {inst.src_tokens!r}: {exc}") from None
    if config.dev_metric == "rouge2" and tgt_vocab is None:
        raise InvalidArgumentError("the rouge2 dev metric needs the target vocabulary")
    from .checkpoint import save_checkpoint

    shuffle_seq, drop_seq = np.random.SeedSequence(config.seed).spawn(2)
    shuffle_rng = np.random.Generator(np.random.PCG64(shuffle_seq))
    drop_rng = np.random.Generator(np.random.PCG64(drop_seq))
    higher = config.dev_metric == "rouge2"
    schedule = LearningRateSchedule(config.lr, config.decay_patience, higher_is_better=higher)
    total_steps = config.max_steps
    if total_steps is None:
        total_steps = config.max_epochs * math.ceil(len(train_set) / config.batch_size)

    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)
    log_file = open(log_path, "w", encoding="utf-8") if log_path is not None else None
    result = TrainResult()
    store = model.store
    running, running_n = 0.0, 0

    def evaluate(step):
        nonlocal running, running_n
        if not dev_set:
            metric = float("nan")
        elif config.dev_metric == "loss":
            metric = mean_loss(model, dev_set, config.batch_size)
        else:
            metric = _rouge2_metric(model, dev_set, config.max_copy_len, tgt_vocab)
        train_loss = running / max(running_n, 1)
        running, running_n = 0.0, 0
        lr_used = schedule.lr
        if not math.isnan(metric):
            schedule.update(metric)
        rec = EvalRecord(step, lr_used, train_loss, metric)
        result.records.append(rec)
        log.info("step %d lr %.6g train %.4f dev %.4f", step, lr_used, train_loss, metric)
        if log_file is not None:
            log_file.write(rec.line() + "\n")
            log_file.flush()
        if checkpoint_dir is not None:
            path = checkpoint_dir / f"ckpt_{step:07d}.bin"
            save_checkpoint(store, model.config, path)
            result.checkpoints.append(path)
        if on_evaluate is not None:
            on_evaluate(rec, model)

    try:
        step = 0
        last_eval = 0
        while step < total_steps:
            order = shuffle_rng.permutation(len(train_set))
            for i in range(0, len(order), config.batch_size):
                if step >= total_steps:
                    break
                batch = [train_set[j] for j in order[i: i + config.batch_size]]
                store.zero_grad()
                losses = batch_losses(model, batch, drop_rng, config.dropout_p, compute_grad=True)
                batch_loss = float(np.mean([r.total for r in losses]))
                if not math.isfinite(batch_loss):
                    raise DivergenceError(f"loss became {batch_loss} at step {step + 1}")
                running += batch_loss
                running_n += 1
                clip_gradients(store, config.clip)
                adam_step(store, AdamConfig(alpha=schedule.lr))
                step += 1
                if step % config.eval_every == 0:
                    evaluate(step)
                    last_eval = step
        if step > 0 and last_eval != step:
            evaluate(step)
    finally:
        if log_file is not None:
            log_file.close()
    result.steps = step
    return result
