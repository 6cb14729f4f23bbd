"""Attention GRU decoder: state init, step update, memory vector, generate mode.

Every ``*_forward`` helper works on arrays with arbitrary leading batch
dimensions; the matching ``*_backward`` helpers expect a single leading
batch axis and accumulate parameter gradients in place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import EncoderOutput, gru_backward, gru_forward
from .errors import ShapeError
from .numcore import as_float, log_softmax

from .spanoracle import BOS as BOS_ID


# ---------------------------------------------------------------- attention

def attention_forward(query, proj_keys, states, W, v, mask=None):
    """Concat attention ``e_i = v . tanh(W q + proj_keys_i)``.

    ``proj_keys`` is ``states @ U.T`` precomputed once per sentence.
    Returns (log_weights, weights, context, cache).
    """
    qp = query @ W.T
    act = np.tanh(qp[..., None, :] + proj_keys)
    scores = act @ v
    log_w = log_softmax(scores, mask)
    w = np.exp(log_w)
    context = np.einsum("...n,...nk->...k", w, states)
    return log_w, w, context, (query, act, w, states)


def attention_backward(cache, W, v, g_W, g_v, d_context=None, d_scores=None):
    """Returns (d_query, d_proj_keys, d_states)."""
    query, act, w, states = cache
    d_e = np.zeros_like(w)
    d_states = np.zeros_like(states)
    if d_context is not None:
        d_w = np.einsum("bk,bnk->bn", d_context, states)
        d_e += w * (d_w - np.sum(w * d_w, axis=-1, keepdims=True))
        d_states += w[..., None] * d_context[:, None, :]
    if d_scores is not None:
        d_e += d_scores
    g_v += np.einsum("bn,bna->a", d_e, act)
    d_pre = d_e[..., None] * v * (1.0 - act * act)
    d_qp = d_pre.sum(axis=1)
    g_W += d_qp.T @ query
    return d_qp @ W, d_pre, d_states


# ---------------------------------------------------------------- state types

@dataclass
class DecoderState:
    s: np.ndarray
    c: np.ndarray
    y_prev: int
    t: int = 0


@dataclass
class AttentionResult:
    weights: np.ndarray
    context: np.ndarray


@dataclass
class MemoryVector:
    """``[emb(y_prev); s_t; c_t]`` laid out contiguously."""

    m: np.ndarray
    emb_size: int
    hidden_size: int

    @classmethod
    def assemble(cls, emb, s, c) -> "MemoryVector":
        return cls(np.concatenate([emb, s, c], axis=-1), emb.shape[-1], s.shape[-1])

    @property
    def embedding(self):
        return self.m[..., : self.emb_size]

    @property
    def s(self):
        return self.m[..., self.emb_size: self.emb_size + self.hidden_size]

    @property
    def c(self):
        return self.m[..., self.emb_size + self.hidden_size:]


# ---------------------------------------------------------------- single-sentence API

def init_decoder(model, enc: EncoderOutput) -> DecoderState:
    P = model.P
    s0 = np.tanh(P["dec_init.W"] @ enc.backward_first + P["dec_init.b"])
    return DecoderState(s=s0, c=np.zeros(enc.states.shape[1]), y_prev=BOS_ID, t=0)


def project_keys(model, enc: EncoderOutput, which: str = "att"):
    """Cache ``U h_i`` for every source position (``which`` is 'att' or 'pointer')."""
    return enc.states @ model.P[f"{which}.U"].T


def decode_step(model, state: DecoderState, enc: EncoderOutput, y_prev: int | None = None,
                keys=None):
    """Consume ``y_prev`` (default ``state.y_prev``) and advance one step.

    Returns (new_state, AttentionResult, MemoryVector). The new state's
    ``y_prev`` records the token that was consumed.
    """
    P = model.P
    y = state.y_prev if y_prev is None else int(y_prev)
    if not 0 <= y < P["tgt_emb"].shape[0]:
        raise ShapeError(f"target id {y} outside vocabulary")
    if state.s.shape[-1] != model.config.hidden_size or state.c.shape[-1] != enc.states.shape[1]:
        raise ShapeError("decoder state does not match the model / encoder dimensions")
    emb = P["tgt_emb"][y]
    s, _ = gru_forward(np.concatenate([emb, state.c]), state.s, model.gru("dec_gru"))
    if keys is None:
        keys = project_keys(model, enc, "att")
    _, w, c, _ = attention_forward(s, keys, enc.states, P["att.W"], P["att.v"])
    mem = MemoryVector.assemble(emb, s, c)
    return DecoderState(s=s, c=c, y_prev=y, t=state.t + 1), AttentionResult(w, c), mem


def maxout(r):
    """Max over consecutive pairs ``(r[2j], r[2j+1])`` of the last axis."""
    r = as_float(r)
    if r.shape[-1] % 2:
        raise ShapeError(f"maxout needs an even length, got {r.shape[-1]}")
    return r.reshape(*r.shape[:-1], r.shape[-1] // 2, 2).max(axis=-1)


def generate_log_distribution(model, mem: MemoryVector):
    return readout_forward(model.P, mem.m, mem.emb_size, mem.hidden_size)[0]


def generate_distribution(model, mem: MemoryVector) -> np.ndarray:
    """Softmax over the target vocabulary from the maxout readout of ``mem``."""
    return np.exp(generate_log_distribution(model, mem))


# ---------------------------------------------------------------- batched pieces

def readout_forward(P, m, emb_size, hidden_size):
    E, d = emb_size, hidden_size
    m_e, m_s, m_c = m[..., :E], m[..., E:E + d], m[..., E + d:]
    r = m_e @ P["readout.W"].T + m_c @ P["readout.U"].T + m_s @ P["readout.V"].T + P["readout.b"]
    pairs = r.reshape(*r.shape[:-1], d, 2)
    pick = np.argmax(pairs, axis=-1)
    r_max = np.take_along_axis(pairs, pick[..., None], axis=-1)[..., 0]
    logits = r_max @ P["out.W"].T + P["out.b"]
    return log_softmax(logits), (m, pick, r_max)


def readout_backward(P, G, cache, d_logits, emb_size, hidden_size):
    """Backprop from logit gradients to the (dropped-out) memory vector."""
    m, pick, r_max = cache
    E, d = emb_size, hidden_size
    G["out.W"] += d_logits.T @ r_max
    G["out.b"] += d_logits.sum(axis=0)
    d_rmax = d_logits @ P["out.W"]
    d_pairs = np.zeros((m.shape[0], d, 2))
    np.put_along_axis(d_pairs, pick[..., None], d_rmax[..., None], axis=-1)
    d_r = d_pairs.reshape(m.shape[0], 2 * d)
    m_e, m_s, m_c = m[:, :E], m[:, E:E + d], m[:, E + d:]
    G["readout.W"] += d_r.T @ m_e
    G["readout.U"] += d_r.T @ m_c
    G["readout.V"] += d_r.T @ m_s
    G["readout.b"] += d_r.sum(axis=0)
    return np.concatenate([d_r @ P["readout.W"], d_r @ P["readout.V"], d_r @ P["readout.U"]], axis=1)


def dec_step_forward(model, s_prev, c_prev, emb_in, att_keys, states, src_mask):
    """Batched decoder GRU update plus attention. Returns (s, c, w, cache)."""
    P = model.P
    s, gru_cache = gru_forward(np.concatenate([emb_in, c_prev], axis=-1), s_prev, model.gru("dec_gru"))
    _, w, c, att_cache = attention_forward(s, att_keys, states, P["att.W"], P["att.v"], src_mask)
    return s, c, w, (gru_cache, att_cache)


def dec_step_backward(model, cache, d_s, d_c):
    """Returns (d_s_prev, d_c_prev, d_emb_in, d_att_keys, d_states)."""
    P, G = model.P, model.G
    gru_cache, att_cache = cache
    d_q, d_keys, d_states = attention_backward(att_cache, P["att.W"], P["att.v"],
                                               G["att.W"], G["att.v"], d_context=d_c)
    d_s = d_s + d_q
    d_in, d_s_prev = gru_backward(d_s, gru_cache, model.gru("dec_gru"), model.gru("dec_gru", grads=True))
    E = model.config.emb_size
    return d_s_prev, d_in[:, E:], d_in[:, :E], d_keys, d_states
