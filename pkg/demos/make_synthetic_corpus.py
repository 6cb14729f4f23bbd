"""Write the synthetic copy corpus as train/dev/test TSV files.

    python3 demos/make_synthetic_corpus.py work/corpus

Each line is ``source<TAB>target``. Sources hold two marked spans
(``c<k> ... </m>``); targets rewrite each cue as ``g<k>`` and copy the span.
"""

import sys
from pathlib import Path

from seqcopynet.spanoracle import write_corpus
from seqcopynet.synthetic import make_corpus

out = Path(sys.argv[1] if len(sys.argv) > 1 else "work/corpus")
out.mkdir(parents=True, exist_ok=True)
for name, n, seed in (("train", 5000, 1), ("dev", 200, 3), ("test", 500, 2)):
    write_corpus(out / f"{name}.tsv", make_corpus(n, seed))
    print(f"wrote {n} pairs to {out / name}.tsv")
