import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import lcs_brute
from seqcopynet.errors import InvalidArgumentError
from seqcopynet.evalmetrics import PrfScore, bleu4, corpus_rouge, format_report, lcs_length, rouge_l, rouge_n

words = st.lists(st.sampled_from("abcde"), max_size=10)


def prf(s):
    return (s.precision, s.recall, s.f1)


def test_rouge_identical_and_disjoint():
    x = "a b c d".split()
    assert prf(rouge_n(x, x, 1)) == prf(rouge_n(x, x, 2)) == prf(rouge_l(x, x)) == (1.0, 1.0, 1.0)
    assert prf(rouge_n(["a"], ["b"], 1)) == (0.0, 0.0, 0.0)


def test_rouge1_hand_example():
    s = rouge_n("the cat".split(), "the cat sat".split(), 1)
    assert s.precision == 1.0 and s.recall == pytest.approx(2 / 3, abs=1e-15) and s.f1 == pytest.approx(0.8, abs=1e-15)


def test_rouge2_clipping():
    s = rouge_n("a b a b a b".split(), "a b c".split(), 2)
    assert (s.precision, s.recall) == (1 / 5, 1 / 2)     # "a b" counted once on both sides


def test_rouge_l_hand_example():
    s = rouge_l("a x b".split(), "a b c".split())
    assert (s.precision, s.recall) == (2 / 3, 2 / 3) and s.f1 == pytest.approx(2 / 3, abs=1e-15)


def test_rouge_empty_cases():
    assert prf(rouge_l([], ["a"])) == (0.0, 0.0, 0.0)
    assert prf(rouge_n(["a"], ["a"], 2)) == (0.0, 0.0, 0.0)
    with pytest.raises(InvalidArgumentError):
        rouge_n(["a"], ["a"], 0)


def test_bleu_hand_example():
    cand, ref = "the cat sat on the mat".split(), "the cat sat on a mat".split()
    # clipped precisions 5/6, 3/5, 2/4, 1/3; equal lengths so BP = 1
    want = (5 / 6 * 3 / 5 * 2 / 4 * 1 / 3) ** 0.25
    assert bleu4([cand], [ref]) == pytest.approx(want, rel=1e-14)
    assert want == pytest.approx((1 / 12) ** 0.25, rel=1e-14)


def test_bleu_brevity_penalty():
    cand, ref = "a b c d e".split(), "a b c d e f g".split()
    assert bleu4([cand], [ref]) == pytest.approx(math.exp(1 - 7 / 5), rel=1e-14)


def test_bleu_identity_zero_and_errors():
    x = "w x y z".split()
    assert bleu4([x], [x]) == 1.0
    assert bleu4([x], ["w x y q".split()]) == 0.0
    with pytest.raises(InvalidArgumentError):
        bleu4([x], [])


@given(words, words)
def test_lcs_matches_brute_force(a, b):
    assert lcs_length(a, b) == lcs_brute(a, b)


@given(words, words)
def test_scores_bounded_and_consistent(a, b):
    for s in (rouge_n(a, b, 1), rouge_n(a, b, 2), rouge_l(a, b)):
        assert 0 <= s.precision <= 1 and 0 <= s.recall <= 1 and 0 <= s.f1 <= 1
        p, r = s.precision, s.recall
        assert s.f1 == pytest.approx(2 * p * r / (p + r) if p + r else 0.0, abs=1e-15)
    if a:
        assert rouge_l(a, a).f1 == 1.0 and rouge_n(a, a, 1).f1 == 1.0


@given(words, words, st.permutations("abcde"))
def test_rouge_renaming_invariance(a, b, perm):
    rename = dict(zip("abcde", perm))
    ra, rb = [rename[t] for t in a], [rename[t] for t in b]
    for n in (1, 2):
        assert prf(rouge_n(a, b, n)) == prf(rouge_n(ra, rb, n))


def test_corpus_rouge_and_report():
    hyps = ["a b c".split(), "x y".split()]
    refs = ["a b c".split(), "x z".split()]
    scores = corpus_rouge(hyps, refs)
    assert scores["rouge1"].f1 == pytest.approx((1.0 + 0.5) / 2, abs=1e-15)
    report = format_report(scores, 0.25).splitlines()
    assert report[0].split("\t")[0] == "rouge1" and len(report[0].split("\t")) == 4
    assert report[-1] == "bleu4\t0.250000"
    assert PrfScore.from_pr(0.0, 0.0).f1 == 0.0
