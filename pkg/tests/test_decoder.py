import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from conftest import random_model
from seqcopynet.decoder import (MemoryVector, attention_forward, decode_step, generate_distribution,
                                generate_log_distribution, init_decoder, maxout)
from seqcopynet.encoder import encode_sentence
from seqcopynet.errors import ShapeError
from seqcopynet.numcore import softmax
from seqcopynet.spanoracle import BOS


def encode(model, ids):
    return encode_sentence(ids, model.P["src_emb"], model.gru("enc_fwd"), model.gru("enc_bwd"))


def test_init_decoder_zero_weights(model):
    model.P["dec_init.W"][...] = 0
    model.P["dec_init.b"][...] = 0
    st0 = init_decoder(model, encode(model, [4, 5]))
    assert np.array_equal(st0.s, np.zeros(12))
    assert np.array_equal(st0.c, np.zeros(24))
    assert st0.y_prev == BOS and st0.t == 0


def test_init_decoder_matches_oracle(model):
    ids = [4, 5, 6]
    st0 = init_decoder(model, encode(model, ids))
    want = oracles.init_state(model.P, oracles.encode(model.P, ids))
    np.testing.assert_allclose(st0.s, want, rtol=0, atol=1e-13)
    assert np.all(np.abs(st0.s) < 1)


def test_uniform_attention_when_v_zero(model):
    model.P["att.v"][...] = 0
    enc = encode(model, [4, 5, 6, 7])
    _, att, _ = decode_step(model, init_decoder(model, enc), enc)
    np.testing.assert_array_equal(att.weights, np.full(4, 0.25))


def test_single_position_attention(model):
    enc = encode(model, [9])
    _, att, _ = decode_step(model, init_decoder(model, enc), enc)
    assert att.weights.tolist() == [1.0]
    np.testing.assert_array_equal(att.context, enc.states[0])


def test_two_step_rollout_matches_oracle(model):
    ids = [4, 9, 13, 6]
    enc = encode(model, ids)
    state = init_decoder(model, enc)
    state, _, _ = decode_step(model, state, enc, BOS)
    state, att, mem = decode_step(model, state, enc, 11)

    states = oracles.encode(model.P, ids)
    s = oracles.init_state(model.P, states)
    c = [0.0] * 24
    s, _, c, _ = oracles.dec_step(model.P, s, c, BOS, states)
    s, w, c, m = oracles.dec_step(model.P, s, c, 11, states)
    np.testing.assert_allclose(state.s, s, rtol=0, atol=1e-13)
    np.testing.assert_allclose(att.weights, w, rtol=0, atol=1e-13)
    np.testing.assert_allclose(state.c, c, rtol=0, atol=1e-13)
    np.testing.assert_allclose(mem.m, m, rtol=0, atol=1e-13)
    assert state.t == 2 and state.y_prev == 11


def test_decode_step_shape_errors(model):
    enc = encode(model, [4, 5])
    state = init_decoder(model, enc)
    with pytest.raises(ShapeError):
        decode_step(model, state, enc, 18)
    state.s = np.zeros(5)
    with pytest.raises(ShapeError):
        decode_step(model, state, enc, 4)


@pytest.mark.parametrize("r, want", [([1, 3, 2, 0], [3, 2]), ([-5, -7], [-5]), ([2.5] * 8, [2.5] * 4)])
def test_maxout_examples(r, want):
    assert maxout(np.array(r, dtype=float)).tolist() == want


def test_maxout_odd_length():
    with pytest.raises(ShapeError):
        maxout(np.zeros(3))


def test_generate_uniform_when_output_zero(model):
    model.P["out.W"][...] = 0
    model.P["out.b"][...] = 0
    enc = encode(model, [4, 5])
    _, _, mem = decode_step(model, init_decoder(model, enc), enc)
    np.testing.assert_allclose(generate_distribution(model, mem), np.full(18, 1 / 18), rtol=0, atol=1e-15)


def test_generate_matches_oracle_small_vocab():
    model = random_model(5, tgt=7)
    enc = encode(model, [4, 5, 6])
    _, _, mem = decode_step(model, init_decoder(model, enc), enc)
    want = oracles.generate(model.P, mem.m.tolist(), 8, 12)
    np.testing.assert_allclose(generate_distribution(model, mem), want, rtol=0, atol=1e-14)


@given(st.integers(0, 500), st.lists(st.integers(4, 19), min_size=1, max_size=7), st.integers(0, 17))
def test_distributions_normalized(seed, ids, y):
    model = random_model(seed % 5)
    enc = encode(model, ids)
    state, att, mem = decode_step(model, init_decoder(model, enc), enc, y)
    assert abs(att.weights.sum() - 1) < 1e-9 and np.all(att.weights >= 0)
    np.testing.assert_allclose(att.context, att.weights @ enc.states, atol=1e-14)
    p = generate_distribution(model, mem)
    assert abs(p.sum() - 1) < 1e-9 and np.all(p > 0)


@given(arrays(np.float64, st.integers(1, 8), elements=st.floats(-3, 3)), st.floats(-100, 100))
def test_attention_shift_invariance(keys_1d, shift):
    # with W = I and v = e_0 the scores are tanh(keys[:, 0]); adding a constant
    # to every score must not move the weights
    n = keys_1d.shape[0]
    keys = np.zeros((n, 3))
    keys[:, 0] = keys_1d
    states = np.arange(n * 2, dtype=float).reshape(n, 2)
    _, w, ctx, _ = attention_forward(np.zeros(3), keys, states, np.eye(3), np.array([1.0, 0.0, 0.0]))
    assert abs(w.sum() - 1) < 1e-12 and np.all(w >= 0)
    np.testing.assert_allclose(softmax(np.tanh(keys_1d) + shift), w, rtol=0, atol=1e-12)
    np.testing.assert_allclose(ctx, w @ states, atol=1e-12)


def test_generate_argmax_shift_invariant(model):
    enc = encode(model, [4, 5, 6])
    _, _, mem = decode_step(model, init_decoder(model, enc), enc)
    before = generate_log_distribution(model, mem)
    model.P["out.b"] += 7.5
    after = generate_log_distribution(model, mem)
    np.testing.assert_allclose(before, after, atol=1e-12)


@given(arrays(np.float64, 3, elements=st.floats(-9, 9)), arrays(np.float64, 2, elements=st.floats(-9, 9)),
       arrays(np.float64, 4, elements=st.floats(-9, 9)))
def test_memory_vector_round_trip(emb, s, c):
    mem = MemoryVector.assemble(emb, s, c)
    assert mem.m.shape == (9,)
    assert np.array_equal(mem.embedding, emb) and np.array_equal(mem.s, s) and np.array_equal(mem.c, c)
