"""Pipeline configuration: one YAML or JSON file describing a run."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from argead.client import ENV_TOKEN, ENV_URL, EndpointConfig
from argead.duration import SpeechRateModel
from argead.metric import ScoringConfig
from argead.prompting import PromptError, context_flags_from_profile, normalize_variant
from argead.segmentation import SegmentationConfig

STANDARD_NAMES = {
    "games": "games.json",
    "rosters": "rosters.json",
    "clips": "clips.jsonl",
    "context": "context.jsonl",
    "lexicon": "action_lexicon.json",
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class InputPaths:
    games: Path | None = None
    rosters: Path | None = None
    clips: Path | None = None
    context: Path | None = None
    lexicon: Path | None = None
    snapshot: Path | None = None
    candidates: Path | None = None
    durations: Path | None = None
    lexicons: Path | None = None
    prompt_dir: Path | None = None
    frames: Mapping[str, Path] = field(default_factory=dict)

    @classmethod
    def from_dir(cls, directory: str | Path, **extra) -> "InputPaths":
        d = Path(directory)
        found = {k: d / name for k, name in STANDARD_NAMES.items() if (d / name).exists()}
        return cls(**found, **extra)

    def files(self) -> dict[str, Path]:
        out = {k: v for k, v in vars(self).items() if isinstance(v, Path) and k != "prompt_dir"}
        out.update({f"frames:{g}": p for g, p in sorted(self.frames.items())})
        return out


@dataclass(frozen=True)
class PipelineConfig:
    inputs: InputPaths = field(default_factory=InputPaths)
    out_dir: Path = Path("out")
    prompt: str = "P3"
    context: str = "pa"
    generate: bool = True
    scoring: ScoringConfig = field(default_factory=ScoringConfig)
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    endpoint: EndpointConfig | None = None
    video_uri_template: str | None = None
    frames_hint: int | None = None
    max_tokens: int = 128

    def validate(self) -> "PipelineConfig":
        """Check that every referenced input exists and the output directory is usable."""
        try:
            normalize_variant(self.prompt)
            context_flags_from_profile(self.context)
        except PromptError as exc:
            raise ConfigError(str(exc)) from None
        i = self.inputs
        if i.snapshot is None:
            missing = [k for k in ("games", "rosters", "context") if getattr(i, k) is None]
            if i.clips is None and not i.frames:
                missing.append("clips")
            if missing:
                raise ConfigError(f"missing input paths: {', '.join(missing)}")
        for name, path in i.files().items():
            if not path.is_file():
                raise ConfigError(f"input {name} not found: {path}")
        if i.prompt_dir is not None and not i.prompt_dir.is_dir():
            raise ConfigError(f"prompt_dir not found: {i.prompt_dir}")
        if not self.generate and i.candidates is None:
            raise ConfigError("generation disabled but no candidates file given")
        if self.out_dir.exists() and not self.out_dir.is_dir():
            raise ConfigError(f"output path {self.out_dir} is not a directory")
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {self.out_dir}: {exc}") from None
        if not os.access(self.out_dir, os.W_OK):
            raise ConfigError(f"output directory {self.out_dir} is not writable")
        return self

    def to_dict(self) -> dict[str, Any]:
        inputs = {k: str(v) for k, v in vars(self.inputs).items() if isinstance(v, Path)}
        if self.inputs.frames:
            inputs["frames"] = {g: str(p) for g, p in sorted(self.inputs.frames.items())}
        endpoint = None
        if self.endpoint is not None:
            endpoint = {
                "url": self.endpoint.url,
                "timeout_s": self.endpoint.timeout_s,
                "max_attempts": self.endpoint.max_attempts,
                "backoff_base_s": self.endpoint.backoff_base_s,
                "backoff_max_s": self.endpoint.backoff_max_s,
                "concurrency": self.endpoint.concurrency,
            }
        return {
            "inputs": inputs,
            "out": str(self.out_dir),
            "prompt": normalize_variant(self.prompt),
            "context": self.context,
            "generate": self.generate,
            "scoring": self.scoring.to_dict(),
            "segmentation": {
                "threshold": self.segmentation.threshold,
                "min_scene_s": self.segmentation.min_scene_s,
                "max_scene_s": self.segmentation.max_scene_s,
            },
            "endpoint": endpoint,
            "video_uri_template": self.video_uri_template,
            "frames_hint": self.frames_hint,
            "max_tokens": self.max_tokens,
        }

    def digest(self) -> str:
        # the endpoint URL changes with every mock port, so it is left out of the hash
        data = self.to_dict()
        if data["endpoint"]:
            data["endpoint"] = {k: v for k, v in data["endpoint"].items() if k != "url"}
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode("utf-8")).hexdigest()

    def with_overrides(self, **kwargs) -> "PipelineConfig":
        return replace(self, **kwargs)


def _path(base: Path, value: Any, key: str) -> Path | None:
    if value is None:
        return None
    if not isinstance(value, str):
        raise ConfigError(f"{key} must be a path string")
    p = Path(os.path.expandvars(value)).expanduser()
    return p if p.is_absolute() else base / p


def _build(cls, data: Mapping[str, Any], key: str, **renames):
    if not isinstance(data, Mapping):
        raise ConfigError(f"{key} must be a mapping")
    kwargs = {renames.get(k, k): v for k, v in data.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {key}: {exc}") from None


def config_from_dict(data: Mapping[str, Any], base: str | Path = ".") -> PipelineConfig:
    base = Path(base)
    known = {"inputs", "out", "prompt", "context", "generate", "scoring", "segmentation", "endpoint",
             "video_uri_template", "frames_hint", "max_tokens"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    raw_inputs = dict(data.get("inputs") or {})
    data_dir = raw_inputs.pop("data_dir", None)
    frames = raw_inputs.pop("frames", None) or {}
    paths = {}
    if data_dir is not None:
        d = _path(base, data_dir, "inputs.data_dir")
        paths.update({k: d / n for k, n in STANDARD_NAMES.items() if (d / n).exists()})
    for k, v in raw_inputs.items():
        if k not in InputPaths.__dataclass_fields__ or k == "frames":
            raise ConfigError(f"unknown input {k!r}")
        paths[k] = _path(base, v, f"inputs.{k}")
    paths["frames"] = {g: _path(base, p, f"inputs.frames.{g}") for g, p in frames.items()}
    inputs = InputPaths(**paths)

    scoring_raw = dict(data.get("scoring") or {})
    try:
        speech = SpeechRateModel(float(scoring_raw.pop("wpm", 160.0)), float(scoring_raw.pop("pause_s", 0.3)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scoring speech model: {exc}") from None
    if "weights" in scoring_raw:
        scoring_raw["weights"] = tuple(float(w) for w in scoring_raw["weights"])
    scoring = _build(ScoringConfig, {**scoring_raw, "speech": speech}, "scoring")
    segmentation = _build(SegmentationConfig, data.get("segmentation") or {}, "segmentation")

    endpoint = None
    ep = data.get("endpoint")
    if ep:
        ep = dict(ep)
        token_env = ep.pop("token_env", ENV_TOKEN)
        ep.setdefault("url", os.environ.get(ENV_URL))
        ep.setdefault("token", os.environ.get(token_env))
        if not ep["url"]:
            raise ConfigError(f"endpoint.url missing and {ENV_URL} not set")
        endpoint = _build(EndpointConfig, ep, "endpoint")

    return PipelineConfig(
        inputs=inputs,
        out_dir=_path(base, data.get("out", "out"), "out"),
        prompt=str(data.get("prompt", "P3")),
        context=str(data.get("context", "pa")),
        generate=bool(data.get("generate", True)),
        scoring=scoring,
        segmentation=segmentation,
        endpoint=endpoint,
        video_uri_template=data.get("video_uri_template"),
        frames_hint=data.get("frames_hint"),
        max_tokens=int(data.get("max_tokens", 128)),
    )


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    return config_from_dict(data or {}, base=path.parent)
