"""Numeric substrate: parameter storage, init, Adam, clipping, dropout, grad check.

Tensors are plain float64 numpy arrays. Random draws come from numpy's
``Generator`` with the PCG64 bit generator, seeded explicitly, so the same
seed always gives the same stream on every platform numpy supports.
"""

from __future__ import annotations

from collections.abc import Callable, Iterator
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConsistencyError,
    DeterminismError,
    InvalidArgumentError,
    ShapeError,
)

DTYPE = np.float64


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


# ---------------------------------------------------------------- activations

def as_float(x):
    # keeps extended precision inputs extended; everything else becomes float64
    x = np.asarray(x)
    return x if x.dtype.kind == "f" else x.astype(DTYPE)


def sigmoid(x):
    # exp of log-sigmoid never overflows and keeps relative precision in the tails
    return np.exp(log_sigmoid(x))


def log_sigmoid(x):
    """log(sigmoid(x)) without cancellation; log(1 - sigmoid(x)) is log_sigmoid(-x)."""
    x = as_float(x)
    return -np.logaddexp(0.0, -x)


def log_softmax(scores, mask=None):
    """Log-softmax over the last axis. Masked-out entries come back as -inf."""
    scores = as_float(scores)
    if mask is not None:
        scores = np.where(mask, scores, -np.inf)
    top = np.max(scores, axis=-1, keepdims=True)
    shifted = scores - top
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def softmax(scores, mask=None):
    return np.exp(log_softmax(scores, mask))


# ---------------------------------------------------------------- parameters

class ParameterStore:
    """Named parameters with their gradient and Adam moment buffers.

    Iteration order is insertion order, which fixes checkpoint layout.
    Arrays are only ever updated in place, so views handed out by
    :meth:`get` stay valid across optimizer steps.
    """

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.adam_m: dict[str, np.ndarray] = {}
        self.adam_v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, value) -> np.ndarray:
        if name in self.params:
            raise InvalidArgumentError(f"duplicate parameter name {name!r}")
        value = np.array(value, dtype=DTYPE)
        self.params[name] = value
        self.grads[name] = np.zeros_like(value)
        self.adam_m[name] = np.zeros_like(value)
        self.adam_v[name] = np.zeros_like(value)
        return value

    def get(self, name: str) -> np.ndarray:
        return self.params[name]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __iter__(self) -> Iterator[str]:
        return iter(self.params)

    def __len__(self) -> int:
        return len(self.params)

    def names(self) -> list[str]:
        return list(self.params)

    def size(self) -> int:
        return sum(p.size for p in self.params.values())

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def copy(self) -> "ParameterStore":
        out = ParameterStore()
        for name in self.params:
            out.add(name, self.params[name])
            out.grads[name][...] = self.grads[name]
            out.adam_m[name][...] = self.adam_m[name]
            out.adam_v[name][...] = self.adam_v[name]
        out.step_count = self.step_count
        return out


@dataclass
class AdamConfig:
    alpha: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.alpha > 0 or not self.epsilon > 0:
            raise InvalidArgumentError("alpha and epsilon must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise InvalidArgumentError("beta1 and beta2 must lie in (0, 1)")


def xavier_init(shape, rng: np.random.Generator) -> np.ndarray:
    """Gaussian Xavier init: N(0, 2 / (fan_in + fan_out)).

    For a 2-D ``(rows, cols)`` weight, fan_out = rows and fan_in = cols.
    A 1-D shape of length L uses fan_in = fan_out = L.
    """
    shape = tuple(int(s) for s in np.atleast_1d(shape))
    if len(shape) not in (1, 2) or any(s <= 0 for s in shape):
        raise ShapeError(f"xavier_init needs a 1-D or 2-D shape of positive sizes, got {shape}")
    if len(shape) == 1:
        fan_in = fan_out = shape[0]
    else:
        fan_out, fan_in = shape
    std = np.sqrt(2.0 / (fan_in + fan_out))
    return rng.standard_normal(shape) * std


def clip_gradients(store: ParameterStore, bound: float) -> ParameterStore:
    """Element-wise clamp of every gradient component to [-bound, bound]."""
    if not bound > 0:
        raise InvalidArgumentError(f"clip bound must be positive, got {bound}")
    for g in store.grads.values():
        np.clip(g, -bound, bound, out=g)
    return store


def adam_step(store: ParameterStore, cfg: AdamConfig) -> ParameterStore:
    """One bias-corrected Adam update over every parameter; zeroes gradients."""
    store.step_count += 1
    t = store.step_count
    corr1 = 1.0 - cfg.beta1 ** t
    corr2 = 1.0 - cfg.beta2 ** t
    for name, p in store.params.items():
        g = store.grads[name]
        if g.shape != p.shape:
            raise ConsistencyError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
        m = store.adam_m[name]
        v = store.adam_v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        p -= cfg.alpha * (m / corr1) / (np.sqrt(v / corr2) + cfg.epsilon)
        g.fill(0.0)
    return store


def dropout_mask(shape, p: float, rng: np.random.Generator | None, training: bool) -> np.ndarray:
    """Inverted-dropout mask: 0 w.p. ``p`` else 1/(1-p); all ones outside training."""
    if not 0.0 <= p < 1.0:
        raise InvalidArgumentError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return np.ones(shape, dtype=DTYPE)
    keep = rng.random(shape) >= p
    return keep / (1.0 - p)


def gradient_errors(
    loss_evaluator: Callable[[ParameterStore], float],
    store: ParameterStore,
    epsilon: float = 1e-5,
) -> dict[str, float]:
    """Per-tensor max relative error between stored and central-difference gradients.

    The analytic gradients must already sit in ``store.grads``.
    """
    base = loss_evaluator(store)
    if loss_evaluator(store) != base:
        raise DeterminismError("loss evaluator returned different values for identical parameters")
    errors = {}
    for name, p in store.params.items():
        analytic = store.grads[name]
        worst = 0.0
        flat = p.reshape(-1)
        aflat = analytic.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            f_plus = loss_evaluator(store)
            flat[i] = orig - epsilon
            f_minus = loss_evaluator(store)
            flat[i] = orig
            a = aflat[i]
            n = (f_plus - f_minus) / (2.0 * epsilon)
            rel = abs(a - n) / max(abs(a), abs(n), 1e-8)
            worst = max(worst, rel)
        errors[name] = worst
    return errors


def check_gradients(
    loss_evaluator: Callable[[ParameterStore], float],
    store: ParameterStore,
    epsilon: float = 1e-5,
) -> float:
    """Max relative error of analytic vs. numeric gradient over all components."""
    errors = gradient_errors(loss_evaluator, store, epsilon)
    return max(errors.values(), default=0.0)
