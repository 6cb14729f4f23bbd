"""ROUGE-1/2/L and corpus BLEU-4 over whitespace tokens.

These are plain re-implementations for regression tracking: no stemming,
no stopword removal, F1 with beta = 1, unsmoothed BLEU. Scores are not
comparable with the official ROUGE-1.5.5 script.
"""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass

from .errors import InvalidArgumentError


@dataclass
class PrfScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_pr(cls, precision: float, recall: float) -> "PrfScore":
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        return cls(precision, recall, f1)


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i: i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int = 1) -> PrfScore:
    if n < 1:
        raise InvalidArgumentError("n must be at least 1")
    cand, ref = ngrams(candidate, n), ngrams(reference, n)
    n_cand, n_ref = sum(cand.values()), sum(ref.values())
    if n_cand == 0 or n_ref == 0:
        return PrfScore(0.0, 0.0, 0.0)
    overlap = sum((cand & ref).values())
    return PrfScore.from_pr(overlap / n_cand, overlap / n_ref)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> PrfScore:
    if not candidate or not reference:
        return PrfScore(0.0, 0.0, 0.0)
    ell = lcs_length(candidate, reference)
    return PrfScore.from_pr(ell / len(candidate), ell / len(reference))


def bleu4(candidates: Sequence[Sequence[str]], references: Sequence[Sequence[str]]) -> float:
    """Corpus BLEU-4 with one reference per candidate; zero if any precision is zero."""
    if len(candidates) != len(references):
        raise InvalidArgumentError(f"{len(candidates)} candidates vs {len(references)} references")
    matches = [0] * 4
    totals = [0] * 4
    cand_len = ref_len = 0
    for cand, ref in zip(candidates, references):
        cand_len += len(cand)
        ref_len += len(ref)
        for n in range(1, 5):
            c, r = ngrams(cand, n), ngrams(ref, n)
            matches[n - 1] += sum((c & r).values())
            totals[n - 1] += sum(c.values())
    if min(totals) == 0 or min(matches) == 0:
        return 0.0
    log_prec = sum(math.log(m / t) for m, t in zip(matches, totals)) / 4
    bp = 1.0 if cand_len > ref_len else math.exp(1 - ref_len / cand_len)
    return bp * math.exp(log_prec)


def corpus_rouge(candidates, references) -> dict[str, PrfScore]:
    """Macro-averaged ROUGE-1, ROUGE-2 and ROUGE-L over sentence pairs."""
    if len(candidates) != len(references):
        raise InvalidArgumentError(f"{len(candidates)} candidates vs {len(references)} references")
    out = {}
    for name, fn in (("rouge1", lambda c, r: rouge_n(c, r, 1)),
                     ("rouge2", lambda c, r: rouge_n(c, r, 2)),
                     ("rougeL", rouge_l)):
        scores = [fn(c, r) for c, r in zip(candidates, references)]
        k = max(len(scores), 1)
        out[name] = PrfScore(sum(s.precision for s in scores) / k,
                             sum(s.recall for s in scores) / k,
                             sum(s.f1 for s in scores) / k)
    return out


def format_report(rouge: dict[str, PrfScore], bleu: float | None = None) -> str:
    lines = [f"{name}\t{s.precision:.6f}\t{s.recall:.6f}\t{s.f1:.6f}" for name, s in rouge.items()]
    if bleu is not None:
        lines.append(f"bleu4\t{bleu:.6f}")
    return "\n".join(lines) + "\n"
