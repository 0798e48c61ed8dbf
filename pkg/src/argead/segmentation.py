"""Threshold scene-cut detection over per-frame colour statistics.

Input is a stream of per-frame HSV channel means (``frames.csv``), not
encoded video. Any frame producer that can emit those four numbers per
frame plugs in unchanged.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from argead.store import Clip, IngestError

FRAME_COLUMNS = ("frame_idx", "t_s", "h_mean", "s_mean", "v_mean")


class SegmentationError(ValueError):
    pass


@dataclass(frozen=True)
class FrameFeature:
    frame_idx: int
    t_s: float
    h_mean: float
    s_mean: float
    v_mean: float


@dataclass(frozen=True)
class SegmentationConfig:
    threshold: float = 27.0
    min_scene_s: float = 15.0
    max_scene_s: float | None = 40.0

    def __post_init__(self) -> None:
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        if self.min_scene_s < 0:
            raise ValueError("min_scene_s must be non-negative")
        if self.max_scene_s is not None and not self.min_scene_s < self.max_scene_s:
            raise ValueError("min_scene_s must be smaller than max_scene_s")


@dataclass(frozen=True)
class SceneCut:
    at_frame: int
    at_s: float
    delta: float


def frame_delta(a: FrameFeature, b: FrameFeature) -> float:
    """Mean absolute change of the three channel means."""
    return (abs(b.h_mean - a.h_mean) + abs(b.s_mean - a.s_mean) + abs(b.v_mean - a.v_mean)) / 3.0


def _checked(features: Iterable[FrameFeature]) -> Iterator[FrameFeature]:
    prev = None
    for f in features:
        if prev is not None:
            if f.frame_idx <= prev.frame_idx:
                raise SegmentationError(f"frame_idx not increasing at frame {f.frame_idx}")
            if f.t_s < prev.t_s:
                raise SegmentationError(f"t_s decreasing at frame {f.frame_idx}")
        prev = f
        yield f


def detect_scenes(features: Iterable[FrameFeature], config: SegmentationConfig = SegmentationConfig()) -> list[SceneCut]:
    """Frames whose change from the previous frame exceeds the threshold.

    A candidate only becomes a cut if at least ``min_scene_s`` has passed
    since the previous cut (or since the first frame). Single pass, constant
    state per frame.
    """
    cuts = []
    prev = None
    last_cut_s = 0.0
    n = 0
    for f in _checked(features):
        n += 1
        if prev is None:
            last_cut_s = f.t_s
        else:
            delta = frame_delta(prev, f)
            if delta > config.threshold and f.t_s - last_cut_s >= config.min_scene_s:
                cuts.append(SceneCut(f.frame_idx, f.t_s, delta))
                last_cut_s = f.t_s
        prev = f
    if n < 2:
        raise SegmentationError("need at least two frames")
    return cuts


def split_into_clips(
    game_id: str, features: Iterable[FrameFeature], config: SegmentationConfig = SegmentationConfig()
) -> list[Clip]:
    """Tile the stream's time span into clips bounded by scene cuts.

    The span runs from the first to the last frame timestamp. Segments
    longer than ``max_scene_s`` are split every ``max_scene_s`` seconds, so
    the piece after a forced split may be shorter than ``min_scene_s``.
    """
    frames = list(features)
    if not frames:
        raise SegmentationError("empty feature stream")
    cuts = detect_scenes(frames, config)
    start, end = frames[0].t_s, frames[-1].t_s
    if not end > start:
        raise SegmentationError("feature stream spans zero time")

    bounds = [start] + [c.at_s for c in cuts if start < c.at_s < end] + [end]
    edges = [start]
    for lo, hi in zip(bounds, bounds[1:]):
        if config.max_scene_s is not None:
            k = 1
            while lo + k * config.max_scene_s < hi:
                edges.append(lo + k * config.max_scene_s)
                k += 1
        edges.append(hi)

    width = max(4, int(math.log10(len(edges))) + 1)
    return [
        Clip(f"{game_id}_{i:0{width}d}", game_id, lo, hi)
        for i, (lo, hi) in enumerate(zip(edges, edges[1:]))
    ]


def read_frames_csv(path: str | Path) -> Iterator[FrameFeature]:
    """Stream ``frames.csv`` rows (header ``frame_idx,t_s,h_mean,s_mean,v_mean``)."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != FRAME_COLUMNS:
            raise IngestError(str(path), f"header must be {','.join(FRAME_COLUMNS)}", line=1)
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != len(FRAME_COLUMNS):
                raise IngestError(str(path), f"expected {len(FRAME_COLUMNS)} columns", line=lineno)
            try:
                idx = int(row[0])
                values = [float(v) for v in row[1:]]
            except ValueError:
                raise IngestError(str(path), "non-numeric value", line=lineno) from None
            for name, v in zip(FRAME_COLUMNS[2:], values[1:]):
                if not 0.0 <= v <= 255.0:
                    raise IngestError(str(path), "channel mean outside [0, 255]", line=lineno, field=name)
            yield FrameFeature(idx, *values)


def write_frames_csv(path: str | Path, features: Iterable[FrameFeature]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FRAME_COLUMNS)
        for f in features:
            w.writerow([f.frame_idx, repr(f.t_s), repr(f.h_mean), repr(f.s_mean), repr(f.v_mean)])
