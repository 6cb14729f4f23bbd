"""GRU cell and bidirectional GRU sentence encoder.

Positions are 0-based here: ``states[i]`` is the representation of source
token ``i``; ``backward_first`` is the backward RNN's state at position 0,
i.e. after it has read the whole sentence right to left.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import EmptyInputError, OutOfVocabularyError, ShapeError
from .numcore import as_float, sigmoid


@dataclass
class GruParams:
    """Gate weights act on ``[input; hidden]``; each has shape (hidden, input + hidden)."""

    W_z: np.ndarray
    W_r: np.ndarray
    W_h: np.ndarray
    b_z: np.ndarray
    b_r: np.ndarray
    b_h: np.ndarray

    @classmethod
    def from_dict(cls, d, prefix: str) -> "GruParams":
        return cls(**{f.name: d[f"{prefix}.{f.name}"] for f in fields(cls)})

    @property
    def hidden_size(self) -> int:
        return self.W_z.shape[0]

    @property
    def input_size(self) -> int:
        return self.W_z.shape[1] - self.W_z.shape[0]


def gru_param_shapes(input_size: int, hidden_size: int) -> dict[str, tuple]:
    w = (hidden_size, input_size + hidden_size)
    return {"W_z": w, "W_r": w, "W_h": w,
            "b_z": (hidden_size,), "b_r": (hidden_size,), "b_h": (hidden_size,)}


def gru_forward(x, h, p: GruParams):
    """GRU update for any number of leading batch dims. Returns (h_new, cache)."""
    x = as_float(x)
    h = as_float(h)
    if x.shape[-1] != p.input_size or h.shape[-1] != p.hidden_size:
        raise ShapeError(
            f"GRU expects input {p.input_size} / hidden {p.hidden_size}, "
            f"got {x.shape[-1]} / {h.shape[-1]}"
        )
    xh = np.concatenate([x, h], axis=-1)
    z = sigmoid(xh @ p.W_z.T + p.b_z)
    r = sigmoid(xh @ p.W_r.T + p.b_r)
    xrh = np.concatenate([x, r * h], axis=-1)
    cand = np.tanh(xrh @ p.W_h.T + p.b_h)
    h_new = (1.0 - z) * h + z * cand
    return h_new, (h, xh, z, r, xrh, cand)


def gru_backward(d_h_new, cache, p: GruParams, g: GruParams):
    """Backprop through :func:`gru_forward` for 2-D (batch, features) inputs.

    Parameter gradients are accumulated into ``g``; returns (d_x, d_h).
    """
    h, xh, z, r, xrh, cand = cache
    n_in = p.input_size
    d_z = d_h_new * (cand - h)
    d_cand = d_h_new * z
    d_h = d_h_new * (1.0 - z)

    d_ah = d_cand * (1.0 - cand * cand)
    g.W_h += d_ah.T @ xrh
    g.b_h += d_ah.sum(axis=0)
    d_xrh = d_ah @ p.W_h
    d_x = d_xrh[:, :n_in].copy()
    d_rh = d_xrh[:, n_in:]
    d_r = d_rh * h
    d_h += d_rh * r

    d_az = d_z * z * (1.0 - z)
    d_ar = d_r * r * (1.0 - r)
    g.W_z += d_az.T @ xh
    g.b_z += d_az.sum(axis=0)
    g.W_r += d_ar.T @ xh
    g.b_r += d_ar.sum(axis=0)
    d_xh = d_az @ p.W_z + d_ar @ p.W_r
    d_x += d_xh[:, :n_in]
    d_h += d_xh[:, n_in:]
    return d_x, d_h


def gru_cell(x, h_prev, params: GruParams) -> np.ndarray:
    return gru_forward(x, h_prev, params)[0]


@dataclass
class EncoderOutput:
    states: np.ndarray          # (n, 2d): [forward ; backward] per position
    backward_first: np.ndarray  # (d,)

    @property
    def n(self) -> int:
        return self.states.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.backward_first.shape[0]


def encode_sentence(token_ids, embeddings, fwd: GruParams, bwd: GruParams) -> EncoderOutput:
    ids = np.asarray(token_ids, dtype=np.int64)
    if ids.size == 0:
        raise EmptyInputError("cannot encode an empty sentence")
    if ids.min() < 0 or ids.max() >= embeddings.shape[0]:
        raise OutOfVocabularyError(f"token id outside source vocabulary of size {embeddings.shape[0]}")
    states, _ = encode_batch(ids[None, :], np.ones((1, ids.size), dtype=bool), embeddings, fwd, bwd)
    d = fwd.hidden_size
    return EncoderOutput(states=states[0], backward_first=states[0, 0, d:].copy())


# ---------------------------------------------------------------- batched

def encode_batch(src, src_mask, embeddings, fwd: GruParams, bwd: GruParams, emb_dropout=None):
    """Encode a padded batch ``src`` (B, n). Returns (states (B, n, 2d), cache).

    Padded positions get zero states in both directions, so each backward
    pass starts from a zero vector at its own sentence end.
    """
    B, n = src.shape
    d = fwd.hidden_size
    x = embeddings[src]
    if emb_dropout is not None:
        x = x * emb_dropout
    dtype = embeddings.dtype
    mask = src_mask.astype(dtype)[..., None]
    hf = np.zeros((B, n, d), dtype=dtype)
    hb = np.zeros((B, n, d), dtype=dtype)
    fwd_caches, bwd_caches = [None] * n, [None] * n
    h = np.zeros((B, d), dtype=dtype)
    for i in range(n):
        h, fwd_caches[i] = gru_forward(x[:, i], h, fwd)
        h = h * mask[:, i]
        hf[:, i] = h
    h = np.zeros((B, d), dtype=dtype)
    for i in reversed(range(n)):
        h, bwd_caches[i] = gru_forward(x[:, i], h, bwd)
        h = h * mask[:, i]
        hb[:, i] = h
    states = np.concatenate([hf, hb], axis=-1)
    return states, (src, mask, emb_dropout, fwd_caches, bwd_caches)


def encode_batch_backward(d_states, cache, fwd: GruParams, bwd: GruParams,
                          g_fwd: GruParams, g_bwd: GruParams, g_embeddings):
    src, mask, emb_dropout, fwd_caches, bwd_caches = cache
    B, n = src.shape
    d = fwd.hidden_size
    d_x = np.zeros((B, n, fwd.input_size))
    d_h = np.zeros((B, d))
    for i in reversed(range(n)):
        d_h = (d_h + d_states[:, i, :d]) * mask[:, i]
        d_xi, d_h = gru_backward(d_h, fwd_caches[i], fwd, g_fwd)
        d_x[:, i] += d_xi
    d_h = np.zeros((B, d))
    for i in range(n):
        d_h = (d_h + d_states[:, i, d:]) * mask[:, i]
        d_xi, d_h = gru_backward(d_h, bwd_caches[i], bwd, g_bwd)
        d_x[:, i] += d_xi
    if emb_dropout is not None:
        d_x = d_x * emb_dropout
    np.add.at(g_embeddings, src, d_x)
