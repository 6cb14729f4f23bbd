"""Model hyperparameters and the full parameter layout."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .encoder import GruParams, gru_param_shapes
from .errors import InvalidArgumentError
from .numcore import ParameterStore, make_rng, xavier_init


@dataclass
class ModelConfig:
    src_vocab_size: int
    tgt_vocab_size: int
    emb_size: int = 300
    hidden_size: int = 512
    max_copy_len: int = 5

    def __post_init__(self):
        for key, value in asdict(self).items():
            if int(value) <= 0:
                raise InvalidArgumentError(f"{key} must be positive, got {value}")

    @property
    def memory_size(self) -> int:
        return self.emb_size + 3 * self.hidden_size


def parameter_shapes(cfg: ModelConfig) -> dict[str, tuple]:
    """Ordered name -> shape map. Order is the checkpoint order."""
    E, d, M = cfg.emb_size, cfg.hidden_size, cfg.memory_size
    shapes: dict[str, tuple] = {
        "src_emb": (cfg.src_vocab_size, E),
        "tgt_emb": (cfg.tgt_vocab_size, E),
    }
    for prefix, n_in in (("enc_fwd", E), ("enc_bwd", E)):
        for k, v in gru_param_shapes(n_in, d).items():
            shapes[f"{prefix}.{k}"] = v
    shapes["dec_init.W"] = (d, d)
    shapes["dec_init.b"] = (d,)
    # decoder GRU input is [emb(y_prev); c_prev]
    for k, v in gru_param_shapes(E + 2 * d, d).items():
        shapes[f"dec_gru.{k}"] = v
    shapes["att.W"] = (d, d)
    shapes["att.U"] = (d, 2 * d)
    shapes["att.v"] = (d,)
    shapes["gate.W1"] = (d, M)
    shapes["gate.b1"] = (d,)
    shapes["gate.W2"] = (1, d)
    shapes["gate.b2"] = (1,)
    shapes["readout.W"] = (2 * d, E)
    shapes["readout.U"] = (2 * d, 2 * d)
    shapes["readout.V"] = (2 * d, d)
    shapes["readout.b"] = (2 * d,)
    shapes["out.W"] = (cfg.tgt_vocab_size, d)
    shapes["out.b"] = (cfg.tgt_vocab_size,)
    shapes["start_query.W"] = (d, M)
    shapes["start_query.b"] = (d,)
    shapes["pointer.W"] = (d, d)
    shapes["pointer.U"] = (d, 2 * d)
    shapes["pointer.v"] = (d,)
    shapes["transducer_init.W"] = (d, M)
    shapes["transducer_init.b"] = (d,)
    for k, v in gru_param_shapes(2 * d, d).items():
        shapes[f"transducer.{k}"] = v
    return shapes


def _is_bias(name: str) -> bool:
    leaf = name.rsplit(".", 1)[-1]
    return leaf.startswith("b")


class SeqCopyNet:
    """Container for the configuration and parameters of one model.

    The computations live in the encoder/decoder/copymod modules; this class
    only owns the weights and hands out named views of them.
    """

    def __init__(self, config: ModelConfig, store: ParameterStore | None = None):
        self.config = config
        if store is None:
            store = ParameterStore()
            for name, shape in parameter_shapes(config).items():
                store.add(name, np.zeros(shape))
        self.store = store

    @classmethod
    def initialize(cls, config: ModelConfig, seed: int) -> "SeqCopyNet":
        """Xavier-initialized weights, zero biases."""
        rng = make_rng(seed)
        store = ParameterStore()
        for name, shape in parameter_shapes(config).items():
            store.add(name, np.zeros(shape) if _is_bias(name) else xavier_init(shape, rng))
        return cls(config, store)

    @property
    def P(self) -> dict[str, np.ndarray]:
        return self.store.params

    @property
    def G(self) -> dict[str, np.ndarray]:
        return self.store.grads

    def gru(self, prefix: str, grads: bool = False) -> GruParams:
        return GruParams.from_dict(self.G if grads else self.P, prefix)

    def copy(self) -> "SeqCopyNet":
        return SeqCopyNet(self.config, self.store.copy())
