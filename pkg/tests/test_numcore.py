import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import adam as adam_oracle
from seqcopynet.errors import ConsistencyError, DeterminismError, InvalidArgumentError, ShapeError
from seqcopynet.numcore import (AdamConfig, ParameterStore, adam_step, check_gradients, clip_gradients,
                                dropout_mask, gradient_errors, log_sigmoid, log_softmax, make_rng,
                                sigmoid, softmax, xavier_init)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def store_with(name, value, grad=None):
    s = ParameterStore()
    s.add(name, value)
    if grad is not None:
        s.grads[name][...] = grad
    return s


# ---------------------------------------------------------------- xavier

@pytest.mark.parametrize("shape", [(0,), (3, 0), (), (2, 2, 2)])
def test_xavier_rejects_bad_shapes(shape):
    with pytest.raises(ShapeError):
        xavier_init(shape, make_rng(0))


def test_xavier_variance():
    w = xavier_init((100, 100), make_rng(42))
    assert abs(w.var() / 0.01 - 1.0) < 0.15


def test_xavier_matches_reference_generator():
    # independent path: numpy's own normal(loc, scale) on a fresh PCG64 stream
    ref = np.random.Generator(np.random.PCG64(7)).normal(0.0, math.sqrt(2.0 / (4 + 6)), size=(4, 6))
    np.testing.assert_allclose(xavier_init((4, 6), make_rng(7)), ref, rtol=1e-15, atol=0)


def test_xavier_vector_fans():
    ref = np.random.Generator(np.random.PCG64(3)).normal(0.0, math.sqrt(2.0 / 10), size=5)
    np.testing.assert_allclose(xavier_init((5,), make_rng(3)), ref, rtol=1e-15, atol=0)


@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 6))
def test_xavier_seed_reproducible(seed, r, c):
    assert np.array_equal(xavier_init((r, c), make_rng(seed)), xavier_init((r, c), make_rng(seed)))


# ---------------------------------------------------------------- clipping

@pytest.mark.parametrize("g, want", [(7.0, 5.0), (-3.2, -3.2), (-9.9, -5.0)])
def test_clip_examples(g, want):
    s = clip_gradients(store_with("w", [0.0], [g]), 5.0)
    assert s.grads["w"][0] == want


def test_clip_rejects_nonpositive_bound():
    with pytest.raises(InvalidArgumentError):
        clip_gradients(store_with("w", [0.0]), 0.0)


@given(arrays(np.float64, st.integers(1, 20), elements=finite), st.floats(0.01, 100))
def test_clip_idempotent_and_bounded(g, bound):
    s = clip_gradients(store_with("w", np.zeros_like(g), g), bound)
    once = s.grads["w"].copy()
    clip_gradients(s, bound)
    assert np.array_equal(once, s.grads["w"])
    assert np.all(np.abs(once) <= bound)


# ---------------------------------------------------------------- adam

def test_adam_first_step_closed_form():
    s = adam_step(store_with("w", [0.0], [1.0]), AdamConfig())
    assert s.params["w"][0] == pytest.approx(-0.001 / (1 + 1e-8), rel=1e-12)
    assert s.step_count == 1
    assert s.grads["w"][0] == 0.0


def test_adam_three_steps_match_scalar_recurrence():
    s = store_with("w", [0.25])
    for _ in range(3):
        s.grads["w"][...] = 1.0
        adam_step(s, AdamConfig())
    assert s.params["w"][0] == pytest.approx(adam_oracle(0.25, [1.0, 1.0, 1.0]), abs=1e-15)


def test_adam_varying_gradients_match_scalar_recurrence():
    gs = [0.3, -1.2, 2.5, 0.0, -0.7]
    s = store_with("w", [1.0])
    for g in gs:
        s.grads["w"][...] = g
        adam_step(s, AdamConfig(alpha=0.01))
    assert s.params["w"][0] == pytest.approx(adam_oracle(1.0, gs, alpha=0.01), abs=1e-14)


@given(arrays(np.float64, st.integers(1, 10), elements=finite), st.integers(0, 20))
def test_adam_zero_gradient_fixed_point(theta, prior_steps):
    s = store_with("w", theta)
    s.step_count = prior_steps
    adam_step(s, AdamConfig())
    assert np.array_equal(s.params["w"], theta)


def test_adam_shape_mismatch():
    s = store_with("w", [0.0, 0.0])
    s.grads["w"] = np.zeros(3)
    with pytest.raises(ConsistencyError):
        adam_step(s, AdamConfig())


def test_adam_config_validation():
    with pytest.raises(InvalidArgumentError):
        AdamConfig(beta1=1.0)
    with pytest.raises(InvalidArgumentError):
        AdamConfig(alpha=0.0)


# ---------------------------------------------------------------- dropout

def test_dropout_identity_cases():
    assert np.array_equal(dropout_mask((3, 4), 0.0, make_rng(0), True), np.ones((3, 4)))
    assert np.array_equal(dropout_mask((3, 4), 0.4, make_rng(0), False), np.ones((3, 4)))


def test_dropout_statistics():
    mask = dropout_mask((10_000,), 0.4, make_rng(0), True)
    assert abs(np.mean(mask == 0) - 0.4) < 0.02
    assert set(np.unique(mask[mask != 0])) == {1 / 0.6}


def test_dropout_rejects_p_one():
    with pytest.raises(InvalidArgumentError):
        dropout_mask((2,), 1.0, make_rng(0), True)


# ---------------------------------------------------------------- activations

@given(arrays(np.float64, st.integers(1, 12), elements=finite), st.floats(-50, 50))
def test_log_softmax_normalized_and_shift_invariant(x, shift):
    p = softmax(x)
    assert abs(p.sum() - 1.0) < 1e-12
    np.testing.assert_allclose(log_softmax(x + shift), log_softmax(x), atol=1e-9)


def test_log_softmax_mask():
    lp = log_softmax(np.array([1.0, 2.0, 3.0]), np.array([True, False, True]))
    assert lp[1] == -np.inf
    assert np.exp(lp[[0, 2]]).sum() == pytest.approx(1.0, abs=1e-15)


@given(st.floats(-700, 700))
def test_sigmoid_complement(x):
    assert float(sigmoid(np.array([x]))[0] + sigmoid(np.array([-x]))[0]) == pytest.approx(1.0, abs=1e-15)
    assert float(log_sigmoid(np.array(x))) == pytest.approx(-math.log1p(math.exp(-x)) if x > -30 else x,
                                                            rel=1e-12, abs=1e-300)


# ---------------------------------------------------------------- gradient checker

def test_check_gradients_quadratic():
    s = store_with("theta", [3.0], [3.0])
    err = check_gradients(lambda st_: 0.5 * float(st_["theta"][0]) ** 2, s, 1e-5)
    assert err < 1e-9


def test_check_gradients_constant():
    s = store_with("theta", [1.0, 2.0])
    assert check_gradients(lambda st_: 4.0, s, 1e-5) == 0.0


def test_check_gradients_reports_wrong_gradient():
    s = store_with("theta", [2.0], [1.0])
    errs = gradient_errors(lambda st_: float(st_["theta"][0]) ** 2, s, 1e-5)
    assert errs["theta"] == pytest.approx(0.75, rel=1e-6)


def test_check_gradients_detects_nondeterminism():
    rng = make_rng(0)
    with pytest.raises(DeterminismError):
        check_gradients(lambda st_: float(rng.random()), store_with("theta", [0.0]), 1e-5)


def test_parameter_store_order_and_copy():
    s = ParameterStore()
    for name in ("b", "a", "c"):
        s.add(name, np.ones(2))
    assert s.names() == ["b", "a", "c"]
    with pytest.raises(InvalidArgumentError):
        s.add("a", [0.0])
    t = s.copy()
    t.params["a"][0] = 5.0
    assert s.params["a"][0] == 1.0
    assert s.size() == 6
