import pytest
from hypothesis import settings

from seqcopynet.model import ModelConfig, SeqCopyNet, parameter_shapes
from seqcopynet.numcore import make_rng
from seqcopynet.spanoracle import EOS, CopySpan, TrainingInstance

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def random_model(seed=0, src=20, tgt=18, emb=8, hidden=12, max_copy_len=5, bias_scale=0.3):
    """Xavier weights plus small random biases so bias paths are exercised too."""
    model = SeqCopyNet.initialize(ModelConfig(src, tgt, emb, hidden, max_copy_len), seed)
    rng = make_rng(seed + 1000)
    for name in parameter_shapes(model.config):
        if name.rsplit(".", 1)[-1].startswith("b"):
            p = model.P[name]
            p[...] = bias_scale * rng.standard_normal(p.shape)
    return model


def tiny_instance():
    """6 source tokens, one 2-token copy span."""
    x = [4, 5, 6, 7, 8, 9]
    y = [10, 6, 7, 11, 12, EOS]
    return TrainingInstance([], [], x, y, [CopySpan(1, 2, 2, 3)])


@pytest.fixture
def model():
    return random_model(0)


@pytest.fixture
def instance():
    return tiny_instance()


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
