"""ARGE-AD: five guideline checks per clip, averaged over clips.

Per clip the components are

* ``z_p``  a roster player is named,
* ``z_a``  a soccer action verb is used,
* ``z_l``  the spoken AD fits inside the clip,
* ``z_pr`` players are not referred to by pronouns alone,
* ``z_o``  the AD is not a near copy of the commentary,

and the clip score is their (weighted) mean. The corpus score is the mean
of clip scores.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from argead.duration import DurationProvider, RateDurationProvider, SpeechRateModel
from argead.store import ActionLexicon, Clip, ClipContext, IngestError, Store, iter_jsonl, nfc, write_jsonl
from argead.text import (
    DEFAULT_LEXICONS,
    Lexicons,
    NameMatch,
    Tag,
    TaggedToken,
    levenshtein_ratio,
    match_actions,
    match_player_names,
    pos_tag,
    tokenize,
)

log = logging.getLogger(__name__)

COMPONENTS = ("z_p", "z_a", "z_l", "z_pr", "z_o")
ACTION_MODES = ("strict", "lenient")
CANDIDATE_SOURCES = ("model", "expert")


class ScoringError(ValueError):
    pass


@dataclass(frozen=True)
class ScoringConfig:
    action_mode: str = "lenient"
    all_nouns: bool = False
    strict_full_name: bool = False
    graded: bool = False
    weights: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0, 1.0)
    originality_threshold: float = 0.5
    on_unknown_clip: str = "skip"
    speech: SpeechRateModel = SpeechRateModel()
    lexicons: Lexicons = field(default=DEFAULT_LEXICONS, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.action_mode not in ACTION_MODES:
            raise ValueError(f"action_mode must be one of {ACTION_MODES}")
        if self.on_unknown_clip not in ("skip", "fail"):
            raise ValueError("on_unknown_clip must be 'skip' or 'fail'")
        if len(self.weights) != len(COMPONENTS) or any(w < 0 for w in self.weights) or not sum(self.weights) > 0:
            raise ValueError("weights must be five non-negative numbers with a positive sum")

    def to_dict(self) -> dict[str, Any]:
        return {
            "action_mode": self.action_mode,
            "all_nouns": self.all_nouns,
            "strict_full_name": self.strict_full_name,
            "graded": self.graded,
            "weights": list(self.weights),
            "originality_threshold": self.originality_threshold,
            "on_unknown_clip": self.on_unknown_clip,
            "wpm": self.speech.words_per_minute,
            "pause_s": self.speech.per_punctuation_pause_s,
        }


@dataclass(frozen=True)
class ADCandidate:
    clip_id: str
    ad_text: str
    source: str = "model"

    def to_record(self) -> dict[str, Any]:
        return {"clip_id": self.clip_id, "ad_text": self.ad_text, "source": self.source}


@dataclass(frozen=True)
class ComponentScores:
    z_p: float
    z_a: float
    z_l: float
    z_pr: float
    z_o: float

    def as_tuple(self) -> tuple[float, ...]:
        return (self.z_p, self.z_a, self.z_l, self.z_pr, self.z_o)


@dataclass(frozen=True)
class ClipEvaluation:
    clip_id: str
    components: ComponentScores
    clip_score: float
    matched_names: tuple[str, ...] = ()
    ambiguous_names: tuple[str, ...] = ()
    matched_actions: tuple[str, ...] = ()
    estimated_s: float = 0.0
    clip_s: float = 0.0
    levenshtein_ratio: float | None = None
    source: str = "model"

    def to_dict(self) -> dict[str, Any]:
        return {
            "clip_id": self.clip_id,
            "source": self.source,
            "score": self.clip_score,
            "components": dict(zip(COMPONENTS, self.components.as_tuple())),
            "diagnostics": {
                "matched_names": list(self.matched_names),
                "ambiguous_names": list(self.ambiguous_names),
                "matched_actions": list(self.matched_actions),
                "estimated_s": self.estimated_s,
                "clip_s": self.clip_s,
                "levenshtein_ratio": self.levenshtein_ratio,
            },
        }


@dataclass(frozen=True)
class CorpusReport:
    clip_count: int
    corpus_score: float | None
    per_component_means: Mapping[str, float]
    clips: tuple[ClipEvaluation, ...]
    skipped: tuple[str, ...] = ()
    config: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "clip_count": self.clip_count,
            "corpus_score": self.corpus_score,
            "per_component_means": dict(self.per_component_means),
            "skipped": list(self.skipped),
            "config": dict(self.config),
            "clips": [c.to_dict() for c in self.clips],
        }


# ---------------------------------------------------------------- components


def _tag(ad_text: str, roster: Iterable[str], lexicon: ActionLexicon | None, lexicons: Lexicons) -> list[TaggedToken]:
    return pos_tag(tokenize(ad_text), frozenset(roster), lexicon, lexicons)


def score_players(
    ad_text: str,
    roster: Iterable[str],
    context: ClipContext | None = None,
    config: ScoringConfig = ScoringConfig(),
    *,
    game_id: str | None = None,
    lexicon: ActionLexicon | None = None,
) -> tuple[float, NameMatch]:
    """``z_p``: 1 when the AD names at least one roster player.

    With ``all_nouns`` every nominal token outside the stopword nouns must
    also belong to a matched name. With ``graded`` the score is the share of
    the clip's context players that are named.
    """
    roster = frozenset(roster)
    if not roster:
        raise ScoringError(f"no roster available for game {game_id!r}")
    tagged = _tag(ad_text, roster, lexicon, config.lexicons)
    found = match_player_names(tagged, roster, config.strict_full_name)
    z = 1.0 if found else 0.0
    if z and config.all_nouns:
        for i, t in enumerate(tagged):
            if t.tag in (Tag.PROPER_NOUN, Tag.NOUN) and i not in found.covered and t.norm not in config.lexicons.stopword_nouns:
                z = 0.0
                break
    if config.graded and context is not None and context.players:
        expected = {nfc(p) for p in context.players}
        z = len(expected & found.names) / len(expected)
    return z, found


def score_actions(
    ad_text: str,
    lexicon: ActionLexicon,
    detected: Sequence[str] = (),
    mode: str = "lenient",
    *,
    graded: bool = False,
    lexicons: Lexicons = DEFAULT_LEXICONS,
) -> tuple[float, frozenset[str]]:
    """``z_a``: 1 when an action verb from the lexicon is used.

    ``strict`` additionally requires the action to be among the clip's
    detected actions (if any were detected).
    """
    tagged = _tag(ad_text, (), lexicon, lexicons)
    detected = tuple(dict.fromkeys(detected))
    labels = match_actions(tagged, lexicon, detected if mode == "strict" else ())
    if graded and detected:
        covered = match_actions(tagged, lexicon, detected)
        return len(covered) / len(detected), labels
    return (1.0 if labels else 0.0), labels


def score_length(
    ad_text: str, clip: Clip, provider: DurationProvider = RateDurationProvider()
) -> tuple[float, float]:
    """``z_l``: 1 when the spoken AD is no longer than the clip."""
    if not clip.duration > 0:
        raise ScoringError(f"clip {clip.clip_id!r} has non-positive duration")
    estimated = provider.duration(clip.clip_id, ad_text)
    return (1.0 if estimated <= clip.duration else 0.0), estimated


def score_pronouns(
    ad_text: str,
    roster: Iterable[str],
    *,
    lexicons: Lexicons = DEFAULT_LEXICONS,
    strict_full_name: bool = False,
    lexicon: ActionLexicon | None = None,
) -> float:
    """``z_pr``: 0 only when pronouns appear and no player is named."""
    roster = frozenset(roster)
    tagged = _tag(ad_text, roster, lexicon, lexicons)
    has_pronoun = any(t.tag is Tag.PRONOUN for t in tagged)
    if has_pronoun and not match_player_names(tagged, roster, strict_full_name):
        return 0.0
    return 1.0


def score_originality(ad_text: str, commentary: str, threshold: float = 0.5) -> tuple[float, float | None]:
    """``z_o``: 1 when the AD's similarity ratio to the commentary is below ``threshold``.

    Empty commentary leaves nothing to copy, so the score is 1 and no ratio
    is reported.
    """
    if not commentary.strip():
        return 1.0, None
    ratio = levenshtein_ratio(ad_text, commentary)
    return (1.0 if ratio < threshold else 0.0), ratio


def weighted_score(components: ComponentScores, weights: Sequence[float] = (1.0,) * 5) -> float:
    values = components.as_tuple()
    if all(w == weights[0] for w in weights):
        return math.fsum(values) / len(values)
    return math.fsum(w * z for w, z in zip(weights, values)) / math.fsum(weights)


# ---------------------------------------------------------------- clip / corpus


def evaluate_clip(
    ad: ADCandidate | str,
    clip: Clip,
    context: ClipContext,
    store: Store,
    config: ScoringConfig = ScoringConfig(),
    durations: DurationProvider | None = None,
) -> ClipEvaluation:
    if isinstance(ad, str):
        ad = ADCandidate(clip.clip_id, ad)
    text = ad.ad_text
    roster = store.roster_names(clip.game_id)
    provider = durations or RateDurationProvider(config.speech)

    z_p, names = score_players(text, roster, context, config, game_id=clip.game_id, lexicon=store.lexicon)
    detected = [a.label for a in context.actions]
    z_a, actions = score_actions(
        text, store.lexicon, detected, config.action_mode, graded=config.graded, lexicons=config.lexicons
    )
    z_l, estimated = score_length(text, clip, provider)
    z_pr = score_pronouns(
        text, roster, lexicons=config.lexicons, strict_full_name=config.strict_full_name, lexicon=store.lexicon
    )
    z_o, ratio = score_originality(text, context.commentary, config.originality_threshold)

    components = ComponentScores(z_p, z_a, z_l, z_pr, z_o)
    return ClipEvaluation(
        clip_id=clip.clip_id,
        components=components,
        clip_score=weighted_score(components, config.weights),
        matched_names=tuple(sorted(names.names)),
        ambiguous_names=tuple(sorted(names.ambiguous)),
        matched_actions=tuple(sorted(actions)),
        estimated_s=estimated,
        clip_s=clip.duration,
        levenshtein_ratio=ratio,
        source=ad.source,
    )


def aggregate(
    rows: Sequence[ComponentScores], weights: Sequence[float] = (1.0,) * 5
) -> tuple[float, dict[str, float], list[float]]:
    """Corpus score, per-component means and clip scores for a score matrix."""
    if not rows:
        raise ValueError("no clips to aggregate")
    clip_scores = [weighted_score(r, weights) for r in rows]
    n = len(rows)
    means = {name: math.fsum(r.as_tuple()[k] for r in rows) / n for k, name in enumerate(COMPONENTS)}
    # one correctly rounded sum over the whole matrix instead of a mean of rounded clip scores
    if all(w == weights[0] for w in weights):
        corpus = math.fsum(z for r in rows for z in r.as_tuple()) / (n * len(COMPONENTS))
    else:
        corpus = math.fsum(w * z for r in rows for w, z in zip(weights, r.as_tuple())) / (n * math.fsum(weights))
    return corpus, means, clip_scores


def evaluate_corpus(
    candidates: Iterable[ADCandidate],
    store: Store,
    config: ScoringConfig = ScoringConfig(),
    durations: DurationProvider | None = None,
) -> CorpusReport:
    """Score every candidate and average.

    Candidates for unknown clips are skipped with a warning, or raise when
    ``config.on_unknown_clip == "fail"``. The result does not depend on the
    order of ``candidates``.
    """
    evaluations = []
    skipped = []
    seen = set()
    for cand in candidates:
        if cand.clip_id in seen:
            raise ScoringError(f"duplicate candidate for clip {cand.clip_id!r}")
        seen.add(cand.clip_id)
        if not store.has_clip(cand.clip_id):
            if config.on_unknown_clip == "fail":
                raise ScoringError(f"candidate references unknown clip {cand.clip_id!r}")
            log.warning("skipping candidate for unknown clip %r", cand.clip_id)
            skipped.append(cand.clip_id)
            continue
        clip = store.clip(cand.clip_id)
        evaluations.append(evaluate_clip(cand, clip, store.context(clip.clip_id), store, config, durations))

    evaluations.sort(key=lambda e: e.clip_id)
    skipped.sort()
    if not evaluations:
        return CorpusReport(0, None, {}, (), tuple(skipped), config.to_dict())
    corpus, means, _ = aggregate([e.components for e in evaluations], config.weights)
    return CorpusReport(len(evaluations), corpus, means, tuple(evaluations), tuple(skipped), config.to_dict())


# ---------------------------------------------------------------- candidate files


def read_candidates(path: str | Path) -> list[ADCandidate]:
    out = []
    for lineno, rec in iter_jsonl(path):
        if not isinstance(rec, dict):
            raise IngestError(str(path), "record must be a JSON object", line=lineno)
        clip_id, text = rec.get("clip_id"), rec.get("ad_text")
        if not isinstance(clip_id, str):
            raise IngestError(str(path), "clip_id must be a string", line=lineno, field="clip_id")
        if not isinstance(text, str):
            raise IngestError(str(path), "ad_text must be a string", line=lineno, field="ad_text")
        source = rec.get("source", "model")
        if source not in CANDIDATE_SOURCES:
            raise IngestError(str(path), f"source must be one of {CANDIDATE_SOURCES}", line=lineno, field="source")
        out.append(ADCandidate(clip_id, text, source))
    return out


def write_candidates(path: str | Path, candidates: Iterable[ADCandidate]) -> int:
    ordered = sorted(candidates, key=lambda c: c.clip_id)
    return write_jsonl(path, (c.to_record() for c in ordered))
