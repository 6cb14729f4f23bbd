"""Vocabularies, copy-span supervision and corpus copy statistics.

Corpora are pre-tokenized: one ``source<TAB>target`` pair per line with
space-separated tokens.

Span supervision is derived greedily, left to right over the target: at each
position take the longest run (at most ``max_copy_len``) that also occurs
contiguously in the source, earliest source occurrence on ties. Runs of two
or more words always become copy spans; a single word only does when the
target vocabulary lacks it.
"""

from __future__ import annotations

import json
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from .errors import EmptyInputError, InvalidArgumentError, InvalidInstanceError

PAD, BOS, EOS, UNK = 0, 1, 2, 3
RESERVED = ("<pad>", "<s>", "</s>", "<unk>")


class Vocabulary:
    def __init__(self, tokens: Sequence[str] = (), counts: Sequence[int] | None = None):
        self.tokens: list[str] = list(RESERVED)
        self.counts: list[int] = [0] * len(RESERVED)
        self.ids: dict[str, int] = {t: i for i, t in enumerate(RESERVED)}
        counts = [0] * len(tokens) if counts is None else list(counts)
        for tok, cnt in zip(tokens, counts):
            if tok in self.ids:
                raise InvalidArgumentError(f"duplicate vocabulary entry {tok!r}")
            self.ids[tok] = len(self.tokens)
            self.tokens.append(tok)
            self.counts.append(int(cnt))

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.ids

    def id(self, token: str) -> int:
        return self.ids.get(token, UNK)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.ids.get(t, UNK) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[i] for i in ids]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for tok, cnt in zip(self.tokens, self.counts):
                f.write(f"{tok}\t{cnt}\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        rows = []
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.rstrip("\n")
                if line:
                    tok, cnt = line.rsplit("\t", 1)
                    rows.append((tok, int(cnt)))
        if [t for t, _ in rows[: len(RESERVED)]] != list(RESERVED):
            raise InvalidArgumentError(f"{path}: vocabulary must start with {RESERVED}")
        rest = rows[len(RESERVED):]
        return cls([t for t, _ in rest], [c for _, c in rest])


def build_vocab(corpus: Sequence[tuple[Sequence[str], Sequence[str]]], min_count: int,
                side: str = "source") -> Vocabulary:
    """Keep tokens seen at least ``min_count`` times on one side of the corpus.

    Order after the reserved symbols: descending count, then lexicographic.
    """
    if side not in ("source", "target"):
        raise InvalidArgumentError(f"side must be 'source' or 'target', got {side!r}")
    if min_count < 1:
        raise InvalidArgumentError("min_count must be positive")
    if not corpus:
        raise EmptyInputError("cannot build a vocabulary from an empty corpus")
    col = 0 if side == "source" else 1
    freq = Counter(tok for pair in corpus for tok in pair[col] if tok not in RESERVED)
    kept = sorted((t for t, c in freq.items() if c >= min_count), key=lambda t: (-freq[t], t))
    return Vocabulary(kept, [freq[t] for t in kept])


def read_corpus(path) -> list[tuple[list[str], list[str]]]:
    pairs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise InvalidArgumentError(f"{path}:{lineno}: expected 'source<TAB>target'")
            src, tgt = line.split("\t", 1)
            pairs.append((src.split(), tgt.split()))
    return pairs


def write_corpus(path, pairs) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for src, tgt in pairs:
            f.write(" ".join(src) + "\t" + " ".join(tgt) + "\n")


# ---------------------------------------------------------------- spans

@dataclass(frozen=True)
class CopySpan:
    """Inclusive target span ``[tgt_start, tgt_end]`` aligned to source ``[src_start, src_end]``."""

    tgt_start: int
    tgt_end: int
    src_start: int
    src_end: int

    @property
    def length(self) -> int:
        return self.tgt_end - self.tgt_start + 1


def _match_length(x, y, i, j, limit):
    k = 0
    while k < limit and i + k < len(x) and j + k < len(y) and x[i + k] == y[j + k]:
        k += 1
    return k


def annotate_spans(x_tokens: Sequence[str], y_tokens: Sequence[str], max_copy_len: int = 5,
                   target_vocab: Vocabulary | None = None) -> list[CopySpan]:
    if max_copy_len < 1:
        raise InvalidArgumentError("max_copy_len must be at least 1")
    spans = []
    j = 0
    while j < len(y_tokens):
        best_len, best_src = 0, -1
        for i in range(len(x_tokens)):
            k = _match_length(x_tokens, y_tokens, i, j, max_copy_len)
            if k > best_len:
                best_len, best_src = k, i
        oov = target_vocab is not None and y_tokens[j] not in target_vocab
        if best_len >= 2 or (best_len == 1 and oov):
            spans.append(CopySpan(j, j + best_len - 1, best_src, best_src + best_len - 1))
            j += best_len
        else:
            j += 1
    return spans


@dataclass
class TrainingInstance:
    src_tokens: list[str]
    tgt_tokens: list[str]
    x: list[int]
    y: list[int]                      # target ids, EOS appended
    spans: list[CopySpan] = field(default_factory=list)

    def span_starting_at(self) -> dict[int, CopySpan]:
        return {sp.tgt_start: sp for sp in self.spans}

    def validate(self, max_copy_len: int | None = None) -> None:
        if not self.x:
            raise InvalidInstanceError("empty source")
        if not self.y or self.y[-1] != EOS:
            raise InvalidInstanceError("target must end with EOS")
        last = -1
        for sp in self.spans:
            if sp.tgt_start <= last:
                raise InvalidInstanceError(f"spans overlap or are unsorted at {sp}")
            if sp.tgt_end - sp.tgt_start != sp.src_end - sp.src_start or sp.tgt_end < sp.tgt_start:
                raise InvalidInstanceError(f"span sides differ in length: {sp}")
            if sp.src_start < 0 or sp.src_end >= len(self.x):
                raise InvalidInstanceError(f"span outside source: {sp}")
            if sp.tgt_start < 0 or sp.tgt_end >= len(self.y) - 1:
                raise InvalidInstanceError(f"span outside target or covers EOS: {sp}")
            if max_copy_len is not None and sp.length > max_copy_len:
                raise InvalidInstanceError(f"span longer than {max_copy_len}: {sp}")
            if self.src_tokens and self.tgt_tokens:
                if (self.src_tokens[sp.src_start: sp.src_end + 1]
                        != self.tgt_tokens[sp.tgt_start: sp.tgt_end + 1]):
                    raise InvalidInstanceError(f"span tokens differ between source and target: {sp}")
            last = sp.tgt_end

    def to_json(self) -> str:
        return json.dumps({
            "src": self.src_tokens, "tgt": self.tgt_tokens,
            "spans": [[s.tgt_start, s.tgt_end, s.src_start, s.src_end] for s in self.spans],
        }, ensure_ascii=False)


def make_instance(src_tokens, tgt_tokens, src_vocab: Vocabulary, tgt_vocab: Vocabulary,
                  max_copy_len: int = 5, spans=None) -> TrainingInstance:
    src_tokens, tgt_tokens = list(src_tokens), list(tgt_tokens)
    if spans is None:
        spans = annotate_spans(src_tokens, tgt_tokens, max_copy_len, tgt_vocab)
    inst = TrainingInstance(src_tokens, tgt_tokens, src_vocab.encode(src_tokens),
                            tgt_vocab.encode(tgt_tokens) + [EOS], list(spans))
    inst.validate(max_copy_len)
    return inst


def save_instances(path, instances) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for inst in instances:
            f.write(inst.to_json() + "\n")


def load_instances(path, src_vocab: Vocabulary, tgt_vocab: Vocabulary,
                   max_copy_len: int | None = None) -> list[TrainingInstance]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                rec = json.loads(line)
                spans = [CopySpan(*s) for s in rec["spans"]]
                inst = TrainingInstance(rec["src"], rec["tgt"], src_vocab.encode(rec["src"]),
                                        tgt_vocab.encode(rec["tgt"]) + [EOS], spans)
                inst.validate(max_copy_len)
                out.append(inst)
    return out


# ---------------------------------------------------------------- statistics

@dataclass
class CorpusStats:
    fraction_generated: float
    fraction_single_copy: float
    fraction_multi_copy: float

    @property
    def fraction_copied(self) -> float:
        return self.fraction_single_copy + self.fraction_multi_copy


def corpus_stats(instances: Sequence[TrainingInstance]) -> CorpusStats:
    """Share of target tokens (EOS excluded) generated, copied alone, or copied in a run."""
    if not instances:
        raise EmptyInputError("corpus_stats needs at least one instance")
    total = single = multi = 0
    for inst in instances:
        total += len(inst.y) - 1
        for sp in inst.spans:
            if sp.length >= 2:
                multi += sp.length
            else:
                single += 1
    if total == 0:
        raise EmptyInputError("corpus has no target tokens")
    return CorpusStats((total - single - multi) / total, single / total, multi / total)
