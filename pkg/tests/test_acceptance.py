"""Acceptance criteria, one test each.

Every test prints a single ``[PASS]``/``[FAIL]``/``[SKIP]`` line with its
runtime, so ``pytest tests/test_acceptance.py`` doubles as a checklist.
"""

import contextlib
import itertools
import json
import math
import os
import random
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from argead.client import EndpointConfig, MockServer
from argead.config import InputPaths, PipelineConfig
from argead.metric import (
    ComponentScores,
    aggregate,
    evaluate_corpus,
    read_candidates,
    score_originality,
)
from argead.pipeline import read_prompts, run_pipeline
from argead.prompting import PROFILES, VARIANTS
from argead.refmetrics import CiderScorer, kendall_tau, pearson, rouge_l
from argead.segmentation import FrameFeature, SegmentationConfig, detect_scenes, split_into_clips
from argead.store import ingest
from argead.text import levenshtein_ratio
from tests import oracles
from tests.test_metric import EXPECTED


@pytest.fixture
def criterion(capsys):
    @contextlib.contextmanager
    def run(name, limit_s=None):
        start = time.perf_counter()
        status = "FAIL"
        try:
            yield
            elapsed = time.perf_counter() - start
            if limit_s is not None:
                assert elapsed < limit_s, f"took {elapsed:.2f}s, limit {limit_s}s"
            status = "PASS"
        finally:
            elapsed = time.perf_counter() - start
            limit = f", limit {limit_s:g}s" if limit_s is not None else ""
            with capsys.disabled():
                print(f"\n[{status}] {name} ({elapsed:.3f}s{limit})")

    return run


def test_compliance_suite(criterion, data_dir):
    with criterion("ARGE-AD compliance suite: 10-clip fixture, exact per-clip and corpus scores", 1.0):
        store = ingest(*(data_dir / n for n in ("games.json", "rosters.json", "clips.jsonl", "context.jsonl", "action_lexicon.json")))
        report = evaluate_corpus(read_candidates(data_dir / "candidates.jsonl"), store)
        assert report.clip_count == 10
        for c in report.clips:
            assert c.components.as_tuple() == tuple(map(float, EXPECTED[c.clip_id])), c.clip_id
            assert c.clip_score == float(Fraction(sum(EXPECTED[c.clip_id]), 5)), c.clip_id
        assert report.corpus_score == float(Fraction(sum(map(sum, EXPECTED.values())), 50))


def test_linearity(criterion):
    with criterion("Corpus score equals mean of per-component means on 1,000 random matrices (1e-12)", 1.0):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            n = int(rng.integers(1, 60))
            m = rng.integers(0, 2, size=(n, 5)).astype(float) if rng.random() < 0.5 else rng.random((n, 5))
            corpus, means, _ = aggregate([ComponentScores(*row) for row in m.tolist()])
            assert abs(corpus - math.fsum(means.values()) / 5) < 1e-12


def test_levenshtein_oracle(criterion):
    with criterion("Levenshtein ratio equals O(nm) DP oracle on 1,000 pairs; z_o flips at 0.5", 5.0):
        rng = random.Random(42)
        alphabet = "abcdefgh ÀÉ.,'"
        for _ in range(1000):
            a = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 50)))
            b = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 50)))
            assert levenshtein_ratio(a, b) == oracles.ratio(a, b), (a, b)
        for k in range(1, 21):
            a, at, below = "a" * k + "b" * k, "a" * k + "c" * k, "a" * k + "c" * (k + 1)
            assert oracles.ratio(a, at) == 0.5 and score_originality(a, at) == (0.0, 0.5)
            assert oracles.ratio(a, below) < 0.5 and score_originality(a, below)[0] == 1.0


def test_rouge_and_correlation_oracles(criterion):
    with criterion("ROUGE-L, Kendall tau-b and Pearson agree with brute-force oracles on 500 instances (1e-9)", 10.0):
        rng = random.Random(7)
        for _ in range(500):
            cand = [rng.choice("abcdefg") for _ in range(rng.randint(1, 30))]
            ref = [rng.choice("abcdefg") for _ in range(rng.randint(1, 30))]
            assert abs(rouge_l(cand, ref) - oracles.rouge_l(cand, ref)) < 1e-9
        done = 0
        while done < 500:
            n = rng.randint(2, 40)
            x = [rng.choice([0, 0.2, 0.4, 0.6, 0.8, 1]) for _ in range(n)]
            y = [rng.random() if rng.random() < 0.7 else rng.randint(1, 5) for _ in range(n)]
            if len(set(x)) < 2 or len(set(y)) < 2:
                continue
            assert abs(kendall_tau(x, y) - oracles.kendall_tau_b(x, y)) < 1e-9
            assert abs(pearson(x, y) - oracles.pearson(x, y)) < 1e-9
            done += 1


def test_cider_sanity(criterion):
    with criterion("CIDEr: identity 10.0, disjoint 0.0, 3-document TF-IDF oracle (1e-9)"):
        corpus = [["rooney curls the free kick home"], ["the keeper parries it wide"], ["fans cheer in the stand"]]
        scorer = CiderScorer(corpus)
        assert abs(scorer.score(corpus[0][0], corpus[0]) - 10.0) < 1e-9
        assert scorer.score("zebra yak xylophone walrus", corpus[0]) == 0.0
        toy = {
            0: ["the keeper saves the shot", "the goalkeeper saves it"],
            1: ["rooney shoots at the keeper", "rooney takes a shot"],
            2: ["the ball goes out for a corner"],
        }
        cands = {0: "the keeper saves a shot", 1: "rooney shoots the ball", 2: "a corner for the keeper"}
        scorer = CiderScorer([toy[i] for i in range(3)])
        docs = [[r.split() for r in toy[i]] for i in range(3)]
        for i in range(3):
            assert abs(scorer.score(cands[i], toy[i]) - oracles.cider(cands[i].split(), docs, i)) < 1e-9


def _steps(segments, fps=1.0):
    levels = [v for n, v in segments for _ in range(n)]
    return [FrameFeature(i, i / fps, 40.0, 60.0, float(v)) for i, v in enumerate(levels)]


def test_scene_segmentation(criterion):
    with criterion("Scene cuts exact on step streams; tiling (1e-9); threshold monotone on 100 streams"):
        assert [c.at_frame for c in detect_scenes(_steps([(100, 10), (100, 200)]))] == [100]
        no_max = SegmentationConfig(max_scene_s=None)
        assert [c.at_frame for c in detect_scenes(_steps([(30, 0), (20, 100), (16, 0), (40, 255)]), no_max)] == [30, 50, 66]
        assert [c.at_frame for c in detect_scenes(_steps([(40, 0), (40, 90), (30, 180)], fps=2.0), no_max)] == [40, 80]
        assert [c.at_s for c in detect_scenes(_steps([(20, 10), (5, 200), (30, 10)]))] == [20.0]

        rng = random.Random(3)
        for _ in range(100):
            n = rng.randint(2, 500)
            fps = rng.choice([1.0, 5.0, 25.0])
            level, frames = rng.uniform(0, 255), []
            for i in range(n):
                if rng.random() < 0.04:
                    level = rng.uniform(0, 255)
                frames.append(FrameFeature(i, i / fps, 40.0, 60.0, level))
            clips = split_into_clips("g", frames)
            assert abs(math.fsum(c.duration for c in clips) - (frames[-1].t_s - frames[0].t_s)) < 1e-9
            counts = [len(detect_scenes(frames, SegmentationConfig(t, 2.0, None))) for t in (5, 15, 27, 50, 100)]
            assert counts == sorted(counts, reverse=True)


def _fast(url):
    return EndpointConfig(url, backoff_base_s=0.0, backoff_max_s=0.0)


def test_end_to_end_determinism(criterion, data_dir, tmp_path, fixture_ads):
    with criterion("run_pipeline twice against fixture mock: byte-identical candidates.jsonl and report.json", 10.0):
        with MockServer(fixture_ads) as srv:
            for run in ("a", "b"):
                run_pipeline(PipelineConfig(InputPaths.from_dir(data_dir), tmp_path / run, endpoint=_fast(srv.url)))
        for name in ("candidates.jsonl", "report.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert json.loads((tmp_path / "a" / "report.json").read_text())["corpus_score"] == 0.7


def test_ablation_surface(criterion, data_dir, tmp_path, fixture_ads):
    with criterion("All 4 context profiles x 3 prompt variants run end to end with distinct prompts"):
        prompts = {}
        with MockServer(fixture_ads) as srv:
            for variant, profile in itertools.product(VARIANTS, PROFILES):
                out = tmp_path / f"{variant}_{profile}"
                cfg = PipelineConfig(InputPaths.from_dir(data_dir), out, prompt=variant, context=profile, endpoint=_fast(srv.url))
                result = run_pipeline(cfg)
                assert result.report.clip_count == 10 and not result.failures
                prompts[variant, profile] = {p.clip_id: p.prompt for p in read_prompts(out / "prompts.jsonl")}
        assert len(prompts) == 12
        for clip_id in fixture_ads:
            assert len({p[clip_id] for p in prompts.values()}) == 12, clip_id


EXPERT_DIR = os.environ.get("ARGEAD_EXPERT_DIR")


def test_expert_annotations(criterion, capsys):
    """Optional: released expert ADs and rosters, placed in ``$ARGEAD_EXPERT_DIR``.

    Expected layout: the five store files plus ``expert1.jsonl`` and
    ``expert2.jsonl`` candidate files. Targets 0.88 and 0.95, each within 0.05.
    """
    if not EXPERT_DIR:
        with capsys.disabled():
            print("\n[SKIP] Expert-annotation corpus scores near 0.88 / 0.95 (set ARGEAD_EXPERT_DIR to run)")
        pytest.skip("expert annotation data not available")
    d = Path(EXPERT_DIR)
    with criterion("Expert-annotation corpus ARGE-AD within 0.05 of 0.88 and 0.95"):
        store = ingest(*(d / n for n in ("games.json", "rosters.json", "clips.jsonl", "context.jsonl", "action_lexicon.json")))
        for name, target in (("expert1.jsonl", 0.88), ("expert2.jsonl", 0.95)):
            report = evaluate_corpus(read_candidates(d / name), store)
            assert abs(report.corpus_score - target) <= 0.05, (name, report.corpus_score)
