"""Greedy search against beam search on an untrained model.

    python3 demos/beam_vs_greedy.py

With random weights the scores are flat, so the two searches disagree often.
Beam size 1 always reproduces greedy exactly.
"""

import numpy as np

from seqcopynet.model import ModelConfig, SeqCopyNet
from seqcopynet.search import beam_decode, greedy_decode, length_normalizer

model = SeqCopyNet.initialize(ModelConfig(30, 25, 8, 16, 3), seed=4)
model.P["gate.b2"][...] = 0.5          # nudge the gate so copies show up
rng = np.random.default_rng(0)

for k in range(5):
    src = rng.integers(4, 30, size=8).tolist()
    g = greedy_decode(model, src, max_steps=10)
    b1 = beam_decode(model, src, beam_size=1, max_steps=10)
    b8 = beam_decode(model, src, beam_size=8, max_steps=10)
    assert g.signature() == b1.signature()
    print(f"source {src}")
    for name, h in (("greedy", g), ("beam 8", b8)):
        print(f"  {name}: score {h.normalized_score:8.4f} over {length_normalizer(h.actions)} tokens, "
              f"{h.signature()}")
