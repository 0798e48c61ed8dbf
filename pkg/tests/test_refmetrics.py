import math
import random

import pytest
import scipy.stats
from hypothesis import given
from hypothesis import strategies as st

from argead.refmetrics import (
    CiderScorer,
    cider,
    correlate,
    kendall_tau,
    pearson,
    read_references,
    read_score_csv,
    rouge_l,
    token_set_iou,
)
from tests import oracles


# ---- ROUGE-L

def test_rouge_examples():
    assert rouge_l("the cat sat".split(), "the cat sat".split()) == 1.0
    assert rouge_l("the cat sat".split(), "the cat sat on the mat".split()) == pytest.approx(2 / 3)
    assert rouge_l(["a", "b"], ["c", "d"]) == 0.0


def test_rouge_accepts_strings():
    assert rouge_l("The cat sat.", "the cat sat on the mat") == pytest.approx(2 / 3)


def test_rouge_empty_reference():
    with pytest.raises(ValueError):
        rouge_l(["a"], [])


def test_rouge_beta_weights_recall():
    cand, ref = "the cat sat".split(), "the cat sat on the mat".split()
    assert rouge_l(cand, ref, beta=1e6) == pytest.approx(0.5)


def test_rouge_matches_oracle_random():
    rng = random.Random(3)
    for _ in range(200):
        a = [rng.choice("abcdef") for _ in range(rng.randint(1, 20))]
        b = [rng.choice("abcdef") for _ in range(rng.randint(1, 20))]
        beta = rng.choice([0.5, 1.0, 1.2, 2.0])
        assert abs(rouge_l(a, b, beta) - oracles.rouge_l(a, b, beta)) < 1e-12


# ---- CIDEr

def test_identical_candidate_scores_ten():
    corpus = [["alpha beta gamma delta epsilon"], ["one two three four"], ["red green blue"]]
    assert CiderScorer(corpus).score(corpus[0][0], corpus[0]) == pytest.approx(10.0, abs=1e-9)


def test_disjoint_scores_zero():
    corpus = [["alpha beta gamma delta"], ["one two three four"]]
    assert CiderScorer(corpus).score("zulu yankee xray whiskey", corpus[0]) == 0.0


def test_unigram_hand_value():
    # docs: {a b}, {a c}, {d}; candidate "a c" against "a b", unigrams only
    scorer = CiderScorer([["a b"], ["a c"], ["d"]], n=1)
    ia, ic, ib = math.log(3) - math.log(2), math.log(3) - math.log(1), math.log(3)
    expected = 10 * (ia * ia) / (math.sqrt(ia**2 + ic**2) * math.sqrt(ia**2 + ib**2))
    assert scorer.score("a c", ["a b"]) == pytest.approx(expected, abs=1e-12)


def test_three_document_oracle():
    refs = {
        "d1": ["the keeper saves the shot", "the goalkeeper saves it"],
        "d2": ["rooney shoots at the keeper", "rooney takes a shot"],
        "d3": ["the ball goes out for a corner"],
    }
    cands = {"d1": "the keeper saves a shot", "d2": "rooney shoots the ball", "d3": "a corner for the keeper"}
    mean, per = cider(cands, refs)
    docs = [[r.split() for r in refs[k]] for k in sorted(refs)]
    for i, k in enumerate(sorted(refs)):
        assert per[k] == pytest.approx(oracles.cider(cands[k].split(), docs, i), abs=1e-9)
    assert mean == pytest.approx(sum(per.values()) / 3, abs=1e-12)


def test_cider_missing_reference():
    with pytest.raises(KeyError):
        cider({"x": "a"}, {"y": ["a"]})


def test_cider_duplicate_reference_invariant():
    # duplicating a reference leaves the score unchanged when every candidate n-gram is in the corpus
    corpus = [["a b c d e"], ["a b x y"], ["q r s t"]]
    s = CiderScorer(corpus)
    assert s.score("a b c d", ["a b c d e"]) == pytest.approx(s.score("a b c d", ["a b c d e"] * 2), abs=1e-12)


# ---- correlations

def test_correlation_examples():
    x = [1.0, 2.0, 3.0, 4.0]
    assert pearson(x, x) == 1.0 and kendall_tau(x, x) == 1.0
    assert kendall_tau(x, x[::-1]) == -1.0


def test_correlations_match_oracles():
    rng = random.Random(11)
    for _ in range(200):
        n = rng.randint(2, 25)
        x = [rng.choice([0, 0.2, 0.4, 0.6, 0.8, 1.0]) for _ in range(n)]
        y = [rng.random() if rng.random() < 0.5 else rng.choice([0.0, 1.0]) for _ in range(n)]
        if len(set(x)) < 2 or len(set(y)) < 2:
            continue
        assert abs(kendall_tau(x, y) - oracles.kendall_tau_b(x, y)) < 1e-12
        assert abs(pearson(x, y) - oracles.pearson(x, y)) < 1e-12
        assert abs(kendall_tau(x, y) - scipy.stats.kendalltau(x, y).statistic) < 1e-9
        assert abs(pearson(x, y) - scipy.stats.pearsonr(x, y).statistic) < 1e-9


def test_constant_series_rejected():
    with pytest.raises(ValueError):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        kendall_tau([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        pearson([1], [1])


@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=2, max_size=20))
def test_correlations_bounded(pairs):
    x, y = [p[0] for p in pairs], [p[1] for p in pairs]
    if len(set(x)) > 1 and len(set(y)) > 1:
        assert -1.0 <= kendall_tau(x, y) <= 1.0
        assert -1.0 <= pearson(x, y) <= 1.0


# ---- token-set IoU

def test_iou():
    assert token_set_iou("Rooney shoots wide", "Rooney shoots wide") == 1.0
    assert token_set_iou("Rooney shoots", "Mata passes") == 0.0
    # shared {rooney, ball}; union of 8 content words
    a = "Rooney ball alpha bravo charlie"
    b = "Rooney ball delta echo foxtrot"
    assert token_set_iou(a, b) == 0.25
    assert token_set_iou("", "the") == 1.0


# ---- files

def test_score_csv_and_correlate(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    a.write_text("clip_id,score\nc1,0.2\nc2,0.4\nc3,1.0\n")
    b.write_text("clip_id,score\nc1,0.1\nc2,0.8\nc3,0.9\nc4,0.0\n")
    r = correlate(read_score_csv(a), read_score_csv(b))
    assert r["n"] == 3 and r["kendall"] == pytest.approx(1.0)


def test_references_file(tmp_path):
    p = tmp_path / "r.jsonl"
    p.write_text('{"clip_id": "c1", "references": ["a b"]}\n{"clip_id": "c2", "references": []}\n')
    with pytest.raises(ValueError, match="references"):
        read_references(p)
