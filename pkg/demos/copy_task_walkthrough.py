"""Train a small model on the synthetic copy task and watch it learn.

    python3 demos/copy_task_walkthrough.py [steps]

Defaults to 1000 batches of 32, which takes a little over a minute on one
core. Decoded outputs are printed with copied spans in brackets.
"""

import sys
import time

from seqcopynet.model import ModelConfig, SeqCopyNet
from seqcopynet.search import copy_ids_for, format_trace, greedy_decode
from seqcopynet.spanoracle import corpus_stats
from seqcopynet.synthetic import evaluate_copy_task, make_instances, vocabularies
from seqcopynet.training import TrainConfig, train

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
src_vocab, tgt_vocab = vocabularies()
train_set, dev, test = make_instances(5000, 1), make_instances(200, 3), make_instances(500, 2)

stats = corpus_stats(train_set)
print(f"target tokens: {stats.fraction_generated:.1%} generated, "
      f"{stats.fraction_multi_copy:.1%} in copied runs, {stats.fraction_single_copy:.1%} single copies")

model = SeqCopyNet.initialize(ModelConfig(len(src_vocab), len(tgt_vocab), 32, 64, 5), seed=0)
print(f"{model.store.size()} parameters")

sample = test[:3]


def show(rec, model):
    print(f"\nstep {rec.step}: train loss {rec.train_loss:.3f}, dev loss {rec.dev_metric:.3f}")
    for inst in sample:
        hyp = greedy_decode(model, inst.x, 30, copy_ids=copy_ids_for(inst.src_tokens, tgt_vocab),
                            src_tokens=inst.src_tokens)
        print("   ", format_trace(hyp, inst.src_tokens, tgt_vocab))


for inst in sample:
    print("source:", " ".join(inst.src_tokens))
    print("target:", " ".join(inst.tgt_tokens))

t0 = time.perf_counter()
train(TrainConfig(batch_size=32, max_steps=steps, eval_every=max(steps // 4, 1), seed=0),
      train_set, dev, model, on_evaluate=show)
print(f"\ntrained in {time.perf_counter() - t0:.0f}s")

rep = evaluate_copy_task(model, test, tgt_vocab)
print(f"held-out: exact {rep.exact_accuracy:.3f}  token {rep.token_accuracy:.3f}  "
      f"gate {rep.gate_accuracy:.3f}  span fidelity {rep.span_fidelity:.3f} ({rep.n_spans_emitted} spans)")
