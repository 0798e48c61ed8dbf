"""Reference-based baselines and agreement statistics.

ROUGE-L and plain CIDEr (no length penalty, no clipping) score candidates
against reference ADs; Pearson and Kendall tau-b compare two score series;
token-set IoU compares two ADs.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from pathlib import Path
from typing import Hashable, Mapping, Sequence, Union

import numpy as np

from argead.store import IngestError, iter_jsonl
from argead.text import DEFAULT_LEXICONS, Lexicons, content_words, lcs_length, word_norms

Text = Union[str, Sequence[str]]


def _tokens(text: Text) -> list[str]:
    return word_norms(text) if isinstance(text, str) else list(text)


def rouge_l(candidate: Text, reference: Text, beta: float = 1.0) -> float:
    """LCS-based F-measure; ``beta`` weights recall over precision."""
    cand, ref = _tokens(candidate), _tokens(reference)
    if not ref:
        raise ValueError("reference must be non-empty")
    lcs = lcs_length(cand, ref)
    if lcs == 0:
        return 0.0
    p, r = lcs / len(cand), lcs / len(ref)
    b2 = beta * beta
    return (1 + b2) * p * r / (r + b2 * p)


def ngrams(tokens: Sequence[Hashable], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


class CiderScorer:
    """CIDEr with document frequencies taken from ``corpus``.

    ``corpus`` is a sequence of documents, each a list of reference texts;
    an n-gram's document frequency counts the documents whose references
    contain it. The IDF table is built once in the constructor.
    """

    def __init__(self, corpus: Sequence[Sequence[Text]], n: int = 4, scale: float = 10.0):
        if not corpus:
            raise ValueError("CIDEr needs a non-empty corpus")
        self.n = n
        self.scale = scale
        self.num_docs = len(corpus)
        self.df: Counter = Counter()
        for refs in corpus:
            grams = set()
            for ref in refs:
                toks = _tokens(ref)
                for k in range(1, n + 1):
                    grams.update(ngrams(toks, k))
            self.df.update(grams)
        self._log_docs = math.log(float(self.num_docs))

    def idf(self, gram: tuple) -> float:
        return self._log_docs - math.log(max(1.0, float(self.df.get(gram, 0))))

    def _vectors(self, text: Text) -> list[dict[tuple, float]]:
        toks = _tokens(text)
        return [{g: c * self.idf(g) for g, c in ngrams(toks, k).items()} for k in range(1, self.n + 1)]

    @staticmethod
    def _cosine(u: Mapping[tuple, float], v: Mapping[tuple, float]) -> float:
        nu = math.sqrt(math.fsum(x * x for x in u.values()))
        nv = math.sqrt(math.fsum(x * x for x in v.values()))
        if nu == 0.0 or nv == 0.0:
            return 0.0
        dot = math.fsum(x * v[g] for g, x in u.items() if g in v)
        return dot / (nu * nv)

    def score(self, candidate: Text, references: Sequence[Text]) -> float:
        if not references:
            raise ValueError("at least one reference is required")
        cand = self._vectors(candidate)
        refs = [self._vectors(r) for r in references]
        per_n = [math.fsum(self._cosine(cand[k], r[k]) for r in refs) / len(refs) for k in range(self.n)]
        return self.scale * math.fsum(per_n) / self.n


def cider(
    candidates: Mapping[str, Text],
    references: Mapping[str, Sequence[Text]],
    corpus: Sequence[Sequence[Text]] | None = None,
    n: int = 4,
) -> tuple[float, dict[str, float]]:
    """Corpus CIDEr and per-candidate scores.

    Without an explicit ``corpus`` the references themselves (one document
    per key) supply document frequencies.
    """
    missing = sorted(set(candidates) - set(references))
    if missing:
        raise KeyError(f"no references for {missing[:5]}")
    if corpus is None:
        corpus = [references[k] for k in sorted(references)]
    scorer = CiderScorer(corpus, n=n)
    scores = {k: scorer.score(candidates[k], references[k]) for k in sorted(candidates)}
    if not scores:
        raise ValueError("no candidates to score")
    return math.fsum(scores.values()) / len(scores), scores


def _paired(x: Sequence[float], y: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError("series must be one-dimensional and of equal length")
    if len(x) < 2:
        raise ValueError("need at least two paired observations")
    return x, y


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x, y = _paired(x, y)
    dx, dy = x - math.fsum(x) / len(x), y - math.fsum(y) / len(y)
    vx, vy = math.fsum(dx * dx), math.fsum(dy * dy)
    if vx == 0.0 or vy == 0.0:
        raise ValueError("Pearson correlation is undefined for a zero-variance series")
    r = math.fsum(dx * dy) / math.sqrt(vx * vy)
    return max(-1.0, min(1.0, r))


def kendall_tau(x: Sequence[float], y: Sequence[float]) -> float:
    """Kendall tau-b, which corrects for ties in either series."""
    x, y = _paired(x, y)
    i, j = np.triu_indices(len(x), 1)
    sx, sy = np.sign(x[i] - x[j]), np.sign(y[i] - y[j])
    pairs = len(i)
    tied_x, tied_y = int(np.count_nonzero(sx == 0)), int(np.count_nonzero(sy == 0))
    denom = (pairs - tied_x) * (pairs - tied_y)
    if denom == 0:
        raise ValueError("Kendall tau is undefined when a series is constant")
    s = int(np.sum(sx * sy))
    return max(-1.0, min(1.0, s / math.sqrt(denom)))


def token_set_iou(ad_a: str, ad_b: str, lexicons: Lexicons = DEFAULT_LEXICONS) -> float:
    """Jaccard overlap of the two ADs' content-word sets (1.0 if both are empty)."""
    a, b = content_words(ad_a, lexicons), content_words(ad_b, lexicons)
    union = a | b
    if not union:
        return 1.0
    return len(a & b) / len(union)


# ---------------------------------------------------------------- file helpers


def read_references(path: str | Path) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    for lineno, rec in iter_jsonl(path):
        refs = rec.get("references") if isinstance(rec, dict) else None
        clip_id = rec.get("clip_id") if isinstance(rec, dict) else None
        if not isinstance(clip_id, str):
            raise IngestError(str(path), "clip_id must be a string", line=lineno, field="clip_id")
        if not isinstance(refs, list) or not refs or not all(isinstance(r, str) for r in refs):
            raise IngestError(str(path), "references must be a non-empty list of strings", line=lineno, field="references")
        if clip_id in out:
            raise IngestError(str(path), f"duplicate clip_id {clip_id!r}", line=lineno, field="clip_id")
        out[clip_id] = refs
    return out


def read_score_csv(path: str | Path, column: str = "score") -> dict[str, float]:
    """``clip_id -> value`` from a CSV with a ``clip_id`` column."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        if "clip_id" not in fields or column not in fields:
            raise IngestError(str(path), f"CSV needs 'clip_id' and {column!r} columns, has {fields}")
        out = {}
        for lineno, row in enumerate(reader, 2):
            try:
                out[row["clip_id"]] = float(row[column])
            except (TypeError, ValueError):
                raise IngestError(str(path), f"non-numeric {column!r}", line=lineno, field=column) from None
    return out


def correlate(a: Mapping[str, float], b: Mapping[str, float]) -> dict[str, float | int]:
    """Pearson and Kendall tau-b over the clips present in both mappings."""
    shared = sorted(set(a) & set(b))
    x, y = [a[k] for k in shared], [b[k] for k in shared]
    return {"n": len(shared), "pearson": pearson(x, y), "kendall": kendall_tau(x, y)}
