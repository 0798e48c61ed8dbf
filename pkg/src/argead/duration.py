"""Spoken-duration estimates for AD text.

A words-per-minute model stands in for synthesizing the AD with a TTS voice.
Measured durations, when available, can be supplied per clip instead.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Protocol

from argead.store import IngestError, iter_jsonl
from argead.text import tokenize

_SENTENCE_END = re.compile(r"[.!?…]+")


@dataclass(frozen=True)
class SpeechRateModel:
    words_per_minute: float = 160.0
    per_punctuation_pause_s: float = 0.3

    def __post_init__(self) -> None:
        if not self.words_per_minute > 0:
            raise ValueError("words_per_minute must be positive")
        if self.per_punctuation_pause_s < 0:
            raise ValueError("per_punctuation_pause_s must be non-negative")


def estimate_duration(text: str, model: SpeechRateModel = SpeechRateModel()) -> float:
    """Seconds needed to speak ``text``.

    Every run of sentence-ending marks adds one pause, wherever it occurs, so
    appending text never shortens the estimate.
    """
    words = sum(1 for t in tokenize(text) if t.is_word)
    pauses = len(_SENTENCE_END.findall(text))
    return words / model.words_per_minute * 60.0 + pauses * model.per_punctuation_pause_s


class DurationProvider(Protocol):
    def duration(self, clip_id: str, text: str) -> float: ...


@dataclass(frozen=True)
class RateDurationProvider:
    model: SpeechRateModel = SpeechRateModel()

    def duration(self, clip_id: str, text: str) -> float:
        return estimate_duration(text, self.model)


@dataclass(frozen=True)
class MeasuredDurationProvider:
    """Per-clip measured durations, falling back to a rate model for other clips."""

    measured: Mapping[str, float]
    fallback: DurationProvider = RateDurationProvider()

    def duration(self, clip_id: str, text: str) -> float:
        if clip_id in self.measured:
            return self.measured[clip_id]
        return self.fallback.duration(clip_id, text)

    @classmethod
    def from_jsonl(cls, path: str | Path, fallback: DurationProvider = RateDurationProvider()) -> "MeasuredDurationProvider":
        measured = {}
        for lineno, rec in iter_jsonl(path):
            clip_id, value = rec.get("clip_id"), rec.get("measured_s")
            if not isinstance(clip_id, str):
                raise IngestError(str(path), "clip_id must be a string", line=lineno, field="clip_id")
            if isinstance(value, bool) or not isinstance(value, (int, float)) or value < 0:
                raise IngestError(str(path), "measured_s must be a non-negative number", line=lineno, field="measured_s")
            measured[clip_id] = float(value)
        return cls(measured, fallback)
