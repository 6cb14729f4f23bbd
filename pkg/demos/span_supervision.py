"""How a target sentence is split into copy spans and generated words.

    python3 demos/span_supervision.py

A target token starts a span when it begins a run of two or more tokens that
also appears in the source, or when it is a single token the target
vocabulary does not know. Everything else is generated.
"""

from seqcopynet.spanoracle import Vocabulary, annotate_spans, corpus_stats, make_instance

src = "city council on monday voted to extend the night bus service to kestrel heath".split()
tgt = "council votes to extend night bus service to kestrel heath".split()
vocab = Vocabulary("council votes to extend night bus service the on".split())

for max_len in (5, 2, 1):
    spans = annotate_spans(src, tgt, max_len, vocab)
    marked, j = [], 0
    for sp in spans:
        marked += tgt[j: sp.tgt_start]
        marked.append("[" + " ".join(tgt[sp.tgt_start: sp.tgt_end + 1]) + "]")
        j = sp.tgt_end + 1
    marked += tgt[j:]
    print(f"max copy length {max_len}: {' '.join(marked)}")

# "kestrel" and "heath" are unknown to the target side, so even a lone
# occurrence is copied; "council" is known, so on its own it is generated.
inst = make_instance(src, tgt, Vocabulary(sorted(set(src))), vocab, 5)
print("target ids:", inst.y)
print("spans:", [(s.tgt_start, s.tgt_end, s.src_start, s.src_end) for s in inst.spans])
stats = corpus_stats([inst])
print(f"generated {stats.fraction_generated:.2f}, copied {stats.fraction_copied:.2f}")
