"""Stage-by-stage inference and scoring run with file handoff between stages.

Stages run in the order segment, context, prompt, generate, evaluate. Each
one reads its upstream artifact from disk and writes its own, so any stage
can be rerun standalone:

============  ======================================
stage         writes
============  ======================================
segment       ``segmented_clips.jsonl``
context       ``contexts.jsonl``
prompt        ``prompts.jsonl``
generate      ``candidates.jsonl``, ``failures.jsonl``
evaluate      ``report.json``, ``report.csv``, ``components.csv``
============  ======================================

``manifest.json`` records digests, counts and timestamps for the run.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import httpx

from argead import __version__
from argead.client import (
    EndpointConfig,
    EndpointError,
    EndpointUnavailable,
    GenerationRequest,
    InferenceClient,
)
from argead.config import ConfigError, PipelineConfig
from argead.duration import DurationProvider, MeasuredDurationProvider, RateDurationProvider
from argead.metric import (
    COMPONENTS,
    ADCandidate,
    CorpusReport,
    ScoringConfig,
    ScoringError,
    evaluate_corpus,
    read_candidates,
    write_candidates,
)
from argead.prompting import (
    ContextBundle,
    ContextFlags,
    PromptError,
    PromptTemplate,
    build_prompt,
    context_flags_from_profile,
)
from argead.segmentation import SegmentationConfig, SegmentationError, read_frames_csv, split_into_clips
from argead.store import (
    Action,
    Clip,
    ClipContext,
    IngestError,
    Store,
    UnknownKeyError,
    ingest,
    iter_jsonl,
    load_snapshot,
    parse_clip,
    parse_context,
    write_jsonl,
)
from argead.text import Lexicons

log = logging.getLogger(__name__)

STAGES = ("segment", "context", "prompt", "generate", "evaluate")
NO_CLIPS = "no clips evaluated"

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ENDPOINT = 0, 1, 2, 3


class StageError(RuntimeError):
    """A stage could not complete; ``stage`` names it and ``cause`` is the underlying error."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage} stage failed: {cause}")
        self.stage = stage
        self.cause = cause


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, (ConfigError, PromptError)):
        return EXIT_USAGE
    if isinstance(exc, EndpointError):
        return EXIT_ENDPOINT
    return EXIT_DATA


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------- stage: segment


def stage_segment(
    frames: Mapping[str, str | Path], config: SegmentationConfig, out_path: str | Path
) -> list[Clip]:
    """Segment each game's ``frames.csv`` and write the clips as JSONL."""
    clips = []
    for game_id in sorted(frames):
        clips.extend(split_into_clips(game_id, read_frames_csv(frames[game_id]), config))
    write_jsonl(out_path, (c.to_record() for c in clips))
    return clips


# ---------------------------------------------------------------- stage: context


def load_store(config: PipelineConfig, clips_file: Path | None = None) -> Store:
    i = config.inputs
    if i.snapshot is not None:
        return load_snapshot(i.snapshot)
    return ingest(i.games, i.rosters, clips_file or i.clips, i.context, i.lexicon)


def joined_record(clip: Clip, context: ClipContext) -> dict[str, Any]:
    rec = clip.to_record()
    rec.update({k: v for k, v in context.to_record().items() if k != "clip_id"})
    return rec


def stage_context(store: Store, out_path: str | Path) -> list[tuple[Clip, ClipContext]]:
    """Join each clip with its annotations (empty context if none) and write ``contexts.jsonl``."""
    joined = [(c, store.context(c.clip_id)) for c in sorted(store.clips, key=lambda c: c.clip_id)]
    write_jsonl(out_path, (joined_record(c, ctx) for c, ctx in joined))
    return joined


def read_joined(path: str | Path) -> list[tuple[Clip, ClipContext]]:
    out = []
    for lineno, rec in iter_jsonl(path):
        clip = parse_clip(rec, str(path), lineno)
        ctx_rec = {k: v for k, v in rec.items() if k not in ("game_id", "start_s", "end_s")}
        out.append((clip, parse_context(ctx_rec, str(path), lineno)))
    return out


# ---------------------------------------------------------------- stage: prompt


@dataclass(frozen=True)
class PromptRecord:
    clip_id: str
    variant: str
    profile: str
    prompt: str
    context: Mapping[str, Any] = field(default_factory=dict)
    video_uri: str | None = None

    def to_record(self) -> dict[str, Any]:
        return {
            "clip_id": self.clip_id,
            "variant": self.variant,
            "profile": self.profile,
            "prompt": self.prompt,
            "context": dict(self.context),
            "video_uri": self.video_uri,
        }

    @classmethod
    def from_record(cls, rec: Any, source: str, line: int) -> "PromptRecord":
        if not isinstance(rec, dict):
            raise IngestError(source, "record must be a JSON object", line=line)
        for key in ("clip_id", "variant", "profile", "prompt"):
            if not isinstance(rec.get(key), str):
                raise IngestError(source, f"{key} must be a string", line=line, field=key)
        if not isinstance(rec.get("context", {}), dict):
            raise IngestError(source, "context must be an object", line=line, field="context")
        return cls(rec["clip_id"], rec["variant"], rec["profile"], rec["prompt"], rec.get("context", {}), rec.get("video_uri"))

    def request(self, max_tokens: int = 128, frames: int | None = None) -> GenerationRequest:
        return GenerationRequest(self.clip_id, self.prompt, self.context, self.video_uri, max_tokens, 0.0, frames)


def request_context(context: ClipContext, flags: ContextFlags) -> dict[str, Any]:
    """The context cues sent alongside the prompt: only those the profile enables."""
    out: dict[str, Any] = {}
    if flags.players_actions:
        out["players"] = list(context.players)
        out["actions"] = [{"label": a.label, "t_s": a.t_s} for a in context.actions]
    if flags.commentary:
        out["commentary"] = context.commentary
    if flags.previous_ad:
        out["previous_ad"] = context.previous_ad
    return out


def make_prompts(
    joined: Iterable[tuple[Clip, ClipContext]],
    template: PromptTemplate,
    profile: str,
    video_uri_template: str | None = None,
) -> list[PromptRecord]:
    flags = context_flags_from_profile(profile)
    records = []
    for clip, ctx in joined:
        try:
            text = build_prompt(template, ContextBundle.from_context(ctx, flags))
        except PromptError as exc:
            raise PromptError(f"clip {clip.clip_id!r}: {exc}") from None
        uri = video_uri_template.format(clip_id=clip.clip_id, game_id=clip.game_id) if video_uri_template else None
        records.append(PromptRecord(clip.clip_id, template.variant, profile, text, request_context(ctx, flags), uri))
    return sorted(records, key=lambda r: r.clip_id)


def stage_prompt(
    joined: Iterable[tuple[Clip, ClipContext]],
    template: PromptTemplate,
    profile: str,
    out_path: str | Path,
    video_uri_template: str | None = None,
) -> list[PromptRecord]:
    records = make_prompts(joined, template, profile, video_uri_template)
    write_jsonl(out_path, (r.to_record() for r in records))
    return records


def read_prompts(path: str | Path) -> list[PromptRecord]:
    return [PromptRecord.from_record(rec, str(path), lineno) for lineno, rec in iter_jsonl(path)]


# ---------------------------------------------------------------- stage: generate


@dataclass(frozen=True)
class GenerationOutcome:
    candidates: tuple[ADCandidate, ...]
    failures: Mapping[str, str]


def stage_generate(
    prompts: Sequence[PromptRecord],
    endpoint: EndpointConfig,
    candidates_path: str | Path,
    failures_path: str | Path,
    *,
    max_tokens: int = 128,
    frames: int | None = None,
    transport: httpx.BaseTransport | None = None,
) -> GenerationOutcome:
    """Request an AD per prompt; per-clip failures are recorded, an unreachable endpoint aborts."""
    with InferenceClient(endpoint, transport=transport) as client:
        batch = client.generate_many(p.request(max_tokens, frames) for p in prompts)
    down = [e for e in batch.failures.values() if isinstance(e, EndpointUnavailable)]
    if down:
        raise down[0]
    candidates = tuple(ADCandidate(cid, r.ad_text) for cid, r in sorted(batch.responses.items()))
    failures = {cid: f"{type(e).__name__}: {e}" for cid, e in sorted(batch.failures.items())}
    write_candidates(candidates_path, candidates)
    write_jsonl(failures_path, ({"clip_id": cid, "error": msg} for cid, msg in failures.items()))
    for cid, msg in failures.items():
        log.warning("generation failed for %s: %s", cid, msg)
    return GenerationOutcome(candidates, failures)


# ---------------------------------------------------------------- stage: evaluate / report


def _num(x: float) -> str:
    return repr(float(x))


def report_document(report: CorpusReport) -> dict[str, Any]:
    doc = report.to_dict()
    doc["status"] = "ok" if report.clip_count else NO_CLIPS
    return doc


def emit_report(
    report: CorpusReport, out_dir: str | Path, formats: Iterable[str] = ("json", "csv", "components")
) -> dict[str, Path]:
    """Write ``report.json``, the per-clip ``report.csv`` and the ``components.csv`` table.

    An empty corpus still produces the files, with status ``no clips evaluated``.
    """
    out = Path(out_dir)
    formats = set(formats)
    unknown = formats - {"json", "csv", "components"}
    if unknown:
        raise ValueError(f"unknown report formats {sorted(unknown)}")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    paths: dict[str, Path] = {}
    if "json" in formats:
        paths["json"] = out / "report.json"
        text = json.dumps(report_document(report), sort_keys=True, indent=2, ensure_ascii=False)
        paths["json"].write_text(text + "\n", encoding="utf-8")
    if "csv" in formats:
        paths["csv"] = out / "report.csv"
        with paths["csv"].open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("clip_id", *COMPONENTS, "score"))
            for c in report.clips:
                w.writerow((c.clip_id, *map(_num, c.components.as_tuple()), _num(c.clip_score)))
    if "components" in formats:
        paths["components"] = out / "components.csv"
        with paths["components"].open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("component", "mean"))
            if report.clip_count:
                for name in COMPONENTS:
                    w.writerow((name, _num(report.per_component_means[name])))
                w.writerow(("arge_ad", _num(report.corpus_score)))
    return paths


def read_report(path: str | Path) -> dict[str, Any]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise IngestError(str(path), f"cannot read report: {exc}") from None
    if not isinstance(doc, dict) or "clips" not in doc:
        raise IngestError(str(path), "not a report document")
    return doc


def report_from_document(doc: Mapping[str, Any]) -> CorpusReport:
    """Rebuild a :class:`CorpusReport` from ``report.json`` (diagnostics included)."""
    from argead.metric import ClipEvaluation, ComponentScores

    clips = []
    for c in doc["clips"]:
        d = c.get("diagnostics", {})
        clips.append(
            ClipEvaluation(
                clip_id=c["clip_id"],
                components=ComponentScores(*(float(c["components"][k]) for k in COMPONENTS)),
                clip_score=float(c["score"]),
                matched_names=tuple(d.get("matched_names", ())),
                ambiguous_names=tuple(d.get("ambiguous_names", ())),
                matched_actions=tuple(d.get("matched_actions", ())),
                estimated_s=float(d.get("estimated_s", 0.0)),
                clip_s=float(d.get("clip_s", 0.0)),
                levenshtein_ratio=d.get("levenshtein_ratio"),
                source=c.get("source", "model"),
            )
        )
    return CorpusReport(
        clip_count=int(doc["clip_count"]),
        corpus_score=doc.get("corpus_score"),
        per_component_means=dict(doc.get("per_component_means", {})),
        clips=tuple(clips),
        skipped=tuple(doc.get("skipped", ())),
        config=dict(doc.get("config", {})),
    )


def scoring_for(config: PipelineConfig) -> tuple[ScoringConfig, DurationProvider]:
    scoring = config.scoring
    if config.inputs.lexicons is not None:
        scoring = dataclasses.replace(scoring, lexicons=Lexicons.from_file(config.inputs.lexicons))
    durations: DurationProvider = RateDurationProvider(scoring.speech)
    if config.inputs.durations is not None:
        durations = MeasuredDurationProvider.from_jsonl(config.inputs.durations, fallback=durations)
    return scoring, durations


# ---------------------------------------------------------------- orchestration


@dataclass
class RunManifest:
    config_sha256: str
    version: str
    inputs: dict[str, str]
    stages: dict[str, dict[str, Any]] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    started_at: str = ""
    finished_at: str = ""

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class PipelineResult:
    candidates_path: Path
    report: CorpusReport
    manifest: RunManifest
    failures: Mapping[str, str] = field(default_factory=dict)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (IngestError, UnknownKeyError, ScoringError, SegmentationError, PromptError, EndpointError, OSError, ValueError) as exc:
        raise StageError(name, exc) from exc


def run_pipeline(config: PipelineConfig, *, transport: httpx.BaseTransport | None = None) -> PipelineResult:
    """Run every enabled stage and write all artifacts into ``config.out_dir``.

    With ``config.generate`` off the prompt and generate stages are skipped
    and the candidates come from ``config.inputs.candidates``.
    """
    config.validate()
    out = config.out_dir
    manifest = RunManifest(
        config_sha256=config.digest(),
        version=__version__,
        inputs={name: file_digest(p) for name, p in sorted(config.inputs.files().items())},
        started_at=_now(),
    )
    stages = manifest.stages

    clips_file = None
    if config.inputs.frames:
        clips_file = out / "segmented_clips.jsonl"
        segmented = _stage("segment", stage_segment, config.inputs.frames, config.segmentation, clips_file)
        stages["segment"] = {"status": "ok", "clips": len(segmented)}
    else:
        stages["segment"] = {"status": "skipped"}

    store = _stage("context", load_store, config, clips_file)
    joined = _stage("context", stage_context, store, out / "contexts.jsonl")
    stages["context"] = {"status": "ok", "clips": len(joined), "annotated": len(store.contexts)}

    failures: Mapping[str, str] = {}
    candidates_path = out / "candidates.jsonl"
    if config.generate:
        if config.endpoint is None:
            raise StageError("generate", ConfigError("generation enabled but no endpoint configured"))
        template = _stage("prompt", PromptTemplate.load, config.prompt, config.inputs.prompt_dir)
        prompts = _stage(
            "prompt", stage_prompt, joined, template, config.context, out / "prompts.jsonl", config.video_uri_template
        )
        stages["prompt"] = {"status": "ok", "prompts": len(prompts), "variant": template.variant, "profile": config.context}
        outcome = _stage(
            "generate",
            stage_generate,
            prompts,
            config.endpoint,
            candidates_path,
            out / "failures.jsonl",
            max_tokens=config.max_tokens,
            frames=config.frames_hint,
            transport=transport,
        )
        candidates, failures = outcome.candidates, outcome.failures
        stages["generate"] = {"status": "ok", "candidates": len(candidates), "failures": len(failures)}
    else:
        candidates = _stage("evaluate", read_candidates, config.inputs.candidates)
        _stage("evaluate", write_candidates, candidates_path, candidates)
        stages["prompt"] = {"status": "skipped"}
        stages["generate"] = {"status": "skipped"}

    scoring, durations = _stage("evaluate", scoring_for, config)
    report = _stage("evaluate", evaluate_corpus, candidates, store, scoring, durations)
    paths = _stage("evaluate", emit_report, report, out)
    stages["evaluate"] = {"status": "ok" if report.clip_count else NO_CLIPS, "clips": report.clip_count, "skipped": len(report.skipped)}

    for p in sorted([candidates_path, *paths.values()]):
        manifest.outputs[p.name] = file_digest(p)
    manifest.finished_at = _now()
    manifest.write(out / "manifest.json")
    return PipelineResult(candidates_path, report, manifest, failures)
