import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from conftest import random_model, tiny_instance
from seqcopynet.copymod import copy_gate
from seqcopynet.decoder import decode_step, init_decoder
from seqcopynet.encoder import encode_sentence
from seqcopynet.errors import DivergenceError, EmptyInputError, InvalidArgumentError, InvalidInstanceError
from seqcopynet.numcore import check_gradients, make_rng
from seqcopynet.spanoracle import EOS, CopySpan, TrainingInstance
from seqcopynet.model import ModelConfig, SeqCopyNet
from seqcopynet.synthetic import make_instances, vocabularies
from seqcopynet.training import (LearningRateSchedule, TrainConfig, batch_losses, instance_loss,
                                 loss_evaluator, mean_loss, train)


def test_generated_step_with_half_probabilities():
    model = random_model(0)
    for k in ("gate.W1", "gate.b1", "gate.W2", "gate.b2", "out.W", "out.b"):
        model.P[k][...] = 0
    model.P["out.b"][EOS] = math.log(17)          # p(EOS) = 17 / (17 + 17) = 0.5
    loss = instance_loss(model, TrainingInstance([], [], [4, 5], [EOS], []))
    assert loss.total == pytest.approx(-math.log(0.25), abs=1e-12)
    assert loss.copy_term == 0.0 and loss.n_generated == 1


def test_single_source_span_costs_only_the_gate(model):
    inst = TrainingInstance([], [], [7], [9, EOS], [CopySpan(0, 0, 0, 0)])
    loss = instance_loss(model, inst)
    enc = encode_sentence([7], model.P["src_emb"], model.gru("enc_fwd"), model.gru("enc_bwd"))
    _, _, mem = decode_step(model, init_decoder(model, enc), enc)
    assert loss.copy_term == pytest.approx(-math.log(copy_gate(model, mem)), abs=1e-12)
    assert loss.n_copy_spans == 1


def test_loss_matches_scalar_recomputation(model, instance):
    loss = instance_loss(model, instance)
    spans = [(s.tgt_start, s.tgt_end, s.src_start, s.src_end) for s in instance.spans]
    want = oracles.instance_loss(model.P, instance.x, instance.y, spans, 8, 12, 5)
    assert loss.total == pytest.approx(want, abs=1e-11)
    assert abs(loss.total - loss.gen_term - loss.copy_term) < 1e-9
    assert (loss.n_generated, loss.n_copy_spans, loss.n_interior) == (4, 1, 1)


def test_gradients_on_padded_batch():
    # two instances of different lengths exercise padding and masking in backprop
    model = random_model(2, src=9, tgt=8, emb=3, hidden=4, max_copy_len=3)
    batch = [TrainingInstance([], [], [4, 5, 6, 7], [4, 5, 6, 3, EOS], [CopySpan(1, 2, 1, 2)]),
             TrainingInstance([], [], [8, 5], [5, EOS], [CopySpan(0, 0, 1, 1)])]
    model.store.zero_grad()
    batch_losses(model, batch, compute_grad=True)
    assert check_gradients(loss_evaluator(model, batch), model.store, 1e-5) < 1e-4


def test_batch_equals_mean_of_instances(model):
    batch = [tiny_instance(), TrainingInstance([], [], [4, 8], [6, 8, EOS], [CopySpan(1, 1, 1, 1)]),
             TrainingInstance([], [], [9], [EOS], [])]
    together = batch_losses(model, batch)
    alone = [instance_loss(model, inst) for inst in batch]
    for a, b in zip(together, alone):
        assert abs(a.total - b.total) < 1e-9
    assert abs(mean_loss(model, batch, 2) - np.mean([b.total for b in alone])) < 1e-9


def test_loss_deterministic_without_dropout(model, instance):
    a = instance_loss(model, instance).total
    b = instance_loss(model, instance).total
    assert a == b


def test_dropout_changes_loss_only_when_active(model, instance):
    base = instance_loss(model, instance).total
    assert instance_loss(model, instance, make_rng(0), 0.0).total == base
    assert instance_loss(model, instance, make_rng(0), 0.4).total != base


@given(st.integers(0, 50), st.integers(0, 3))
def test_loss_nonnegative(seed, shift):
    model = random_model(seed % 5, bias_scale=1.0)
    inst = TrainingInstance([], [], [4 + shift, 5, 6, 7], [9, 5, 6, EOS], [CopySpan(1, 2, 1, 2)])
    loss = instance_loss(model, inst)
    assert loss.total >= 0 and loss.gen_term >= 0 and loss.copy_term >= 0


def test_invalid_instance_rejected(model):
    bad = TrainingInstance([], [], [4, 5], [4, 5, EOS], [CopySpan(0, 1, 0, 2)])
    with pytest.raises(InvalidInstanceError):
        instance_loss(model, bad)


# ---------------------------------------------------------------- schedule

def test_lr_halves_after_six_bad_evaluations():
    sched = LearningRateSchedule(0.001, 6)
    sched.update(1.0)
    for k in range(5):
        assert sched.update(1.0 + k) == 0.001
    assert sched.update(9.0) == 0.0005


def test_lr_improvement_resets_counter():
    sched = LearningRateSchedule(0.001, 2, higher_is_better=True)
    for m in (0.1, 0.05, 0.2, 0.1, 0.1):
        sched.update(m)
    assert sched.lr == 0.0005


def test_train_config_validation():
    with pytest.raises(InvalidArgumentError):
        TrainConfig(batch_size=0)
    with pytest.raises(InvalidArgumentError):
        TrainConfig(dropout_p=1.0)
    with pytest.raises(InvalidArgumentError):
        TrainConfig(dev_metric="bleu")


# ---------------------------------------------------------------- loop

def test_zero_length_run(tmp_path, model, instance):
    before = {k: v.copy() for k, v in model.P.items()}
    result = train(TrainConfig(max_steps=0), [instance], [], model, checkpoint_dir=tmp_path)
    assert result.steps == 0 and result.checkpoints == []
    assert all(np.array_equal(before[k], model.P[k]) for k in before)
    assert list(tmp_path.iterdir()) == []


def test_empty_corpus(model):
    with pytest.raises(EmptyInputError):
        train(TrainConfig(), [], [], model)


def test_nan_loss_aborts(model, instance):
    model.P["out.W"][0, 0] = np.nan
    with pytest.raises(DivergenceError):
        train(TrainConfig(max_steps=1, batch_size=1), [instance], [], model)


def test_log_and_checkpoints(tmp_path, instance):
    model = random_model(1)
    cfg = TrainConfig(batch_size=1, eval_every=2, max_steps=5, dropout_p=0.0)
    result = train(cfg, [instance, tiny_instance()], [instance], model, checkpoint_dir=tmp_path,
                   log_path=tmp_path / "log.txt")
    assert [r.step for r in result.records] == [2, 4, 5]
    assert [p.name for p in result.checkpoints] == ["ckpt_0000002.bin", "ckpt_0000004.bin", "ckpt_0000005.bin"]
    rows = [line.split("\t") for line in (tmp_path / "log.txt").read_text(encoding="utf-8").splitlines()]
    assert [r[0] for r in rows] == ["2", "4", "5"] and all(len(r) == 4 for r in rows)


def test_training_reduces_loss(instance):
    model = random_model(3)
    before = instance_loss(model, instance).total
    train(TrainConfig(batch_size=1, max_steps=30, eval_every=100, dropout_p=0.0, lr=0.01), [instance], [], model)
    assert instance_loss(model, instance).total < 0.5 * before


def test_synthetic_dev_loss_decreases():
    train_set, dev = make_instances(1500, 1), make_instances(100, 3)
    src, tgt = vocabularies()
    model = SeqCopyNet.initialize(ModelConfig(len(src), len(tgt), 32, 64, 5), seed=0)
    result = train(TrainConfig(batch_size=32, eval_every=40, max_steps=120, seed=0), train_set, dev, model)
    devs = [r.dev_metric for r in result.records]
    assert len(devs) == 3 and devs[0] > devs[1] > devs[2]
