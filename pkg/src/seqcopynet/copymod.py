"""Sequential copying: switch gate, start/end pointer, copy state transducer, Copy Run.

The start and end pointers share one scorer (``pointer.W``, ``pointer.U``,
``pointer.v``). End candidates are restricted to the window
``[start, start + max_copy_len - 1]`` so every predicted span is well formed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decoder import DecoderState, MemoryVector, attention_backward, attention_forward, decode_step
from .encoder import EncoderOutput, gru_backward, gru_forward
from .errors import EmptySupportError, InvalidArgumentError
from .numcore import sigmoid


# ---------------------------------------------------------------- gate

def gate_forward(P, m):
    hidden = np.tanh(m @ P["gate.W1"].T + P["gate.b1"])
    logit = (hidden @ P["gate.W2"].T + P["gate.b2"])[..., 0]
    return logit, (m, hidden)


def gate_backward(P, G, cache, d_logit):
    m, hidden = cache
    d_logit = d_logit[:, None]
    G["gate.W2"] += d_logit.T @ hidden
    G["gate.b2"] += d_logit.sum(axis=0)
    d_pre = (d_logit @ P["gate.W2"]) * (1.0 - hidden * hidden)
    G["gate.W1"] += d_pre.T @ m
    G["gate.b1"] += d_pre.sum(axis=0)
    return d_pre @ P["gate.W1"]


def copy_gate(model, mem: MemoryVector) -> float:
    """Copy probability p_c; the generate probability is ``1 - p_c``."""
    logit, _ = gate_forward(model.P, mem.m)
    return float(sigmoid(logit))


def span_probability(p_c: float, p_start: float, p_end: float) -> float:
    for p in (p_c, p_start, p_end):
        if not 0.0 <= p <= 1.0:
            raise InvalidArgumentError(f"probability out of range: {p}")
    return p_c * p_start * p_end


# ---------------------------------------------------------------- pointer

def end_window_mask(n: int, start, max_copy_len: int, src_mask=None):
    """Boolean mask of admissible end positions for each start (broadcasts over batch)."""
    pos = np.arange(n)
    start = np.asarray(start)[..., None]
    mask = (pos >= start) & (pos < start + max_copy_len)
    if src_mask is not None:
        mask &= src_mask
    return mask


def pointer_attend(model, query, enc: EncoderOutput, mask=None, keys=None):
    """Pointer distribution over source positions.

    Returns (weights, best, context); ``best`` is the lowest-index argmax.
    """
    if mask is not None and not np.any(mask):
        raise EmptySupportError("pointer mask leaves no admissible position")
    P = model.P
    if keys is None:
        keys = enc.states @ P["pointer.U"].T
    _, w, context, _ = attention_forward(query, keys, enc.states, P["pointer.W"], P["pointer.v"], mask)
    return w, int(np.argmax(w)), context


@dataclass
class SpanPrediction:
    start: int
    end: int
    p_start: float
    p_end: float
    start_weights: np.ndarray
    end_weights: np.ndarray
    start_context: np.ndarray


@dataclass
class CopyDistributions:
    """Everything the copy mode needs at one step, before a start is fixed.

    The end query depends on the soft start context, not on the chosen
    start, so one set of end scores serves every start; the start only
    changes which window of them is normalized.
    """

    log_start: np.ndarray
    start_context: np.ndarray
    end_query: np.ndarray
    end_scores: np.ndarray
    max_copy_len: int

    @property
    def n(self) -> int:
        return self.log_start.shape[0]

    def log_end(self, start: int) -> np.ndarray:
        mask = end_window_mask(self.n, start, self.max_copy_len)
        scores = np.where(mask, self.end_scores, -np.inf)
        top = scores.max()
        return scores - top - np.log(np.sum(np.exp(scores - top)))

    def best_end(self, start: int) -> tuple[int, float]:
        log_e = self.log_end(start)
        end = int(np.argmax(log_e))
        return end, float(log_e[end])


def copy_distributions(model, mem: MemoryVector, enc: EncoderOutput, max_copy_len: int,
                       keys=None) -> CopyDistributions:
    P = model.P
    if keys is None:
        keys = enc.states @ P["pointer.U"].T
    q_s = np.tanh(P["start_query.W"] @ mem.m + P["start_query.b"])
    log_s, _, c_s, _ = attention_forward(q_s, keys, enc.states, P["pointer.W"], P["pointer.v"])
    cst = np.tanh(P["transducer_init.W"] @ mem.m + P["transducer_init.b"])
    q_e, _ = gru_forward(c_s, cst, model.gru("transducer"))
    end_scores = np.tanh((P["pointer.W"] @ q_e)[None, :] + keys) @ P["pointer.v"]
    return CopyDistributions(log_s, c_s, q_e, end_scores, max_copy_len)


def predict_span(model, mem: MemoryVector, enc: EncoderOutput, max_copy_len: int,
                 keys=None) -> SpanPrediction:
    if max_copy_len < 1:
        raise InvalidArgumentError("max_copy_len must be at least 1")
    dist = copy_distributions(model, mem, enc, max_copy_len, keys)
    start_w = np.exp(dist.log_start)
    start = int(np.argmax(dist.log_start))
    end_w = np.exp(dist.log_end(start))
    end = int(np.argmax(end_w))
    return SpanPrediction(start, end, float(start_w[start]), float(end_w[end]),
                          start_w, end_w, dist.start_context)


# ---------------------------------------------------------------- batched copy branch

def copy_forward(model, m, keys, states, src_mask, start, end, max_copy_len):
    """Log-probabilities of gold (start, end) pairs for a batch of memory vectors."""
    P = model.P
    rows = np.arange(m.shape[0])
    q_s = np.tanh(m @ P["start_query.W"].T + P["start_query.b"])
    log_ws, ws, c_s, att_s = attention_forward(q_s, keys, states, P["pointer.W"], P["pointer.v"], src_mask)
    cst = np.tanh(m @ P["transducer_init.W"].T + P["transducer_init.b"])
    q_e, gru_cache = gru_forward(c_s, cst, model.gru("transducer"))
    e_mask = end_window_mask(states.shape[1], start, max_copy_len, src_mask)
    log_we, we, _, att_e = attention_forward(q_e, keys, states, P["pointer.W"], P["pointer.v"], e_mask)
    cache = (m, q_s, ws, att_s, cst, gru_cache, we, att_e, start, end)
    return log_ws[rows, start], log_we[rows, end], cache


def copy_backward(model, cache, weight):
    """Backprop ``-weight * (log p_start + log p_end)``.

    Returns (d_m, d_keys, d_states).
    """
    P, G = model.P, model.G
    m, q_s, ws, att_s, cst, gru_cache, we, att_e, start, end = cache
    rows = np.arange(m.shape[0])
    wt = weight[:, None]
    d_sc_e = we.copy()
    d_sc_e[rows, end] -= 1.0
    d_qe, d_keys, d_states = attention_backward(att_e, P["pointer.W"], P["pointer.v"],
                                                G["pointer.W"], G["pointer.v"], d_scores=wt * d_sc_e)
    d_cs, d_cst = gru_backward(d_qe, gru_cache, model.gru("transducer"), model.gru("transducer", grads=True))
    d_a = d_cst * (1.0 - cst * cst)
    G["transducer_init.W"] += d_a.T @ m
    G["transducer_init.b"] += d_a.sum(axis=0)
    d_m = d_a @ P["transducer_init.W"]

    d_sc_s = ws.copy()
    d_sc_s[rows, start] -= 1.0
    d_qs, d_keys_s, d_states_s = attention_backward(att_s, P["pointer.W"], P["pointer.v"],
                                                    G["pointer.W"], G["pointer.v"],
                                                    d_context=d_cs, d_scores=wt * d_sc_s)
    d_a = d_qs * (1.0 - q_s * q_s)
    G["start_query.W"] += d_a.T @ m
    G["start_query.b"] += d_a.sum(axis=0)
    d_m += d_a @ P["start_query.W"]
    return d_m, d_keys + d_keys_s, d_states + d_states_s


# ---------------------------------------------------------------- copy run

def copy_run(model, state: DecoderState, enc: EncoderOutput, copied_target_ids, length: int,
             keys=None) -> DecoderState:
    """Advance the decoder over the first ``length - 1`` copied words.

    The last copied word is left for the next ordinary step to consume;
    for a single-word span the input state is returned untouched.
    """
    ids = [int(i) for i in copied_target_ids]
    if length < 1 or len(ids) != length:
        raise InvalidArgumentError(f"span length {length} does not match {len(ids)} copied ids")
    for y in ids[:-1]:
        state, _, _ = decode_step(model, state, enc, y, keys=keys)
    return state
