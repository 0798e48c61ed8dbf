"""``argead`` command-line tool.

Every subcommand accepts the shared flags (``--config``, ``--prompt``,
``--context``, scorer switches, ``--wpm``, ``--out``) either before or after
the subcommand name. Exit codes: 0 success, 1 usage or config error,
2 data error, 3 endpoint error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from argead import __version__
from argead.client import ENV_URL, EndpointConfig, EndpointError, MockServer, MockServerError
from argead.config import ConfigError, InputPaths, PipelineConfig, load_config
from argead.duration import SpeechRateModel
from argead.metric import read_candidates
from argead.pipeline import (
    EXIT_DATA,
    EXIT_OK,
    EXIT_USAGE,
    NO_CLIPS,
    StageError,
    emit_report,
    exit_code_for,
    load_store,
    read_joined,
    read_prompts,
    read_report,
    report_from_document,
    run_pipeline,
    scoring_for,
    stage_context,
    stage_generate,
    stage_prompt,
    stage_segment,
)
from argead.prompting import PROFILES, PromptTemplate
from argead.refmetrics import correlate, read_score_csv
from argead.segmentation import SegmentationConfig
from argead.store import ActionLexicon, read_json_array
from argead.metric import evaluate_corpus

log = logging.getLogger("argead")


def _shared_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    flag = argparse.SUPPRESS if suppress else False
    g = parser.add_argument_group("shared options")
    g.add_argument("--config", type=Path, default=d, help="YAML or JSON run configuration")
    g.add_argument("--data-dir", type=Path, default=d, help="directory holding games.json, rosters.json, clips.jsonl, context.jsonl")
    g.add_argument("--snapshot", type=Path, default=d, help="read the store from a snapshot instead of source files")
    g.add_argument("--prompt", choices=("1", "2", "3"), default=d, help="prompt variant")
    g.add_argument("--context", choices=tuple(PROFILES), default=d, help="context profile")
    g.add_argument("--strict-actions", action="store_true", default=flag, help="z_a requires a detected action")
    g.add_argument("--all-nouns", action="store_true", default=flag, help="z_p requires every noun to be a player name")
    g.add_argument("--strict-full-name", action="store_true", default=flag, help="only full names count as player mentions")
    g.add_argument("--graded", action="store_true", default=flag, help="fractional z_p and z_a")
    g.add_argument("--wpm", type=float, default=d, help="speaking rate for the length check")
    g.add_argument("--out", type=Path, default=d, help="output directory")
    g.add_argument("--endpoint", default=d, help=f"generation endpoint URL (default ${ENV_URL})")
    g.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS if suppress else 0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="argead", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _shared_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name: str, help: str) -> argparse.ArgumentParser:  # noqa: A002
        p = sub.add_parser(name, help=help, description=help)
        _shared_flags(p, suppress=True)
        return p

    p = add("ingest", "validate source files and write a store snapshot")
    p.add_argument("--write-snapshot", type=Path, help="snapshot path (default OUT/store.json)")

    p = add("segment", "cut a frames.csv stream into clips")
    p.add_argument("frames", type=Path)
    p.add_argument("--game-id", required=True)
    p.add_argument("--threshold", type=float, default=SegmentationConfig.threshold)
    p.add_argument("--min-scene", type=float, default=SegmentationConfig.min_scene_s)
    p.add_argument("--max-scene", type=float, default=SegmentationConfig.max_scene_s)
    p.add_argument("-o", "--output", type=Path, help="clips JSONL (default OUT/segmented_clips.jsonl)")

    add("context", "join clips with their annotations into OUT/contexts.jsonl")

    p = add("prompt", "build prompts for every clip into OUT/prompts.jsonl")
    p.add_argument("--contexts", type=Path, help="joined contexts (default OUT/contexts.jsonl, else the store)")

    p = add("generate", "request an AD for every prompt")
    p.add_argument("--prompts", type=Path, help="prompts JSONL (default OUT/prompts.jsonl)")

    p = add("evaluate", "score candidate ADs and write the report")
    p.add_argument("--candidates", type=Path, help="candidates JSONL (default OUT/candidates.jsonl)")

    p = add("report", "re-emit CSV tables and print a summary from report.json")
    p.add_argument("--report", type=Path, help="report.json (default OUT/report.json)")

    p = add("corr", "Pearson and Kendall tau between two per-clip score CSVs")
    p.add_argument("a", type=Path)
    p.add_argument("b", type=Path)
    p.add_argument("--column", default="score")
    p.add_argument("--column-b", help="column in the second file (default: --column)")

    p = add("mock-serve", "serve the generation endpoint locally")
    p.add_argument("--fixtures", type=Path, help="candidates JSONL to replay; echo mode without it")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--token", help="require this bearer token")

    add("run", "run every stage end to end")
    return parser


# ---------------------------------------------------------------- config assembly


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    inputs = cfg.inputs
    if args.data_dir is not None:
        inputs = InputPaths.from_dir(args.data_dir, **{k: v for k, v in vars(inputs).items() if k not in ("games", "rosters", "clips", "context", "lexicon")})
    if args.snapshot is not None:
        inputs = dataclasses.replace(inputs, snapshot=args.snapshot)
    if getattr(args, "candidates", None) is not None:
        inputs = dataclasses.replace(inputs, candidates=args.candidates)

    scoring = cfg.scoring
    if args.strict_actions:
        scoring = dataclasses.replace(scoring, action_mode="strict")
    for flag in ("all_nouns", "strict_full_name", "graded"):
        if getattr(args, flag):
            scoring = dataclasses.replace(scoring, **{flag: True})
    if args.wpm is not None:
        try:
            speech = SpeechRateModel(args.wpm, scoring.speech.per_punctuation_pause_s)
        except ValueError as exc:
            raise ConfigError(f"--wpm: {exc}") from None
        scoring = dataclasses.replace(scoring, speech=speech)

    endpoint = cfg.endpoint
    if args.endpoint is not None:
        endpoint = dataclasses.replace(endpoint, url=args.endpoint) if endpoint else EndpointConfig.from_env(args.endpoint)
    elif endpoint is None:
        try:
            endpoint = EndpointConfig.from_env()
        except ValueError:
            endpoint = None

    return dataclasses.replace(
        cfg,
        inputs=inputs,
        scoring=scoring,
        endpoint=endpoint,
        prompt=args.prompt or cfg.prompt,
        context=args.context or cfg.context,
        out_dir=args.out or cfg.out_dir,
    )


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False))


def _need(path: Path | None, what: str) -> Path:
    if path is None or not path.is_file():
        raise ConfigError(f"{what} not found: {path}")
    return path


def _out(cfg: PipelineConfig) -> Path:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    return cfg.out_dir


def _summary(doc: dict) -> str:
    if not doc.get("clip_count"):
        return NO_CLIPS
    means = doc["per_component_means"]
    parts = [f"{k}={means[k]:.3f}" for k in ("z_p", "z_a", "z_l", "z_pr", "z_o")]
    return f"ARGE-AD {doc['corpus_score']:.4f} over {doc['clip_count']} clips ({', '.join(parts)})"


# ---------------------------------------------------------------- commands


def cmd_ingest(args, cfg: PipelineConfig) -> int:
    store = load_store(cfg)
    target = args.write_snapshot or _out(cfg) / "store.json"
    store.save_snapshot(target)
    _emit({"counts": store.counts(), "snapshot": str(target)})
    return EXIT_OK


def cmd_segment(args, cfg: PipelineConfig) -> int:
    try:
        seg = SegmentationConfig(args.threshold, args.min_scene, args.max_scene)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    target = args.output or _out(cfg) / "segmented_clips.jsonl"
    clips = stage_segment({args.game_id: args.frames}, seg, target)
    _emit({"clips": len(clips), "output": str(target)})
    return EXIT_OK


def cmd_context(args, cfg: PipelineConfig) -> int:
    joined = stage_context(load_store(cfg), _out(cfg) / "contexts.jsonl")
    _emit({"clips": len(joined), "output": str(cfg.out_dir / "contexts.jsonl")})
    return EXIT_OK


def cmd_prompt(args, cfg: PipelineConfig) -> int:
    source = args.contexts or cfg.out_dir / "contexts.jsonl"
    joined = read_joined(source) if source.is_file() else stage_context(load_store(cfg), _out(cfg) / "contexts.jsonl")
    template = PromptTemplate.load(cfg.prompt, cfg.inputs.prompt_dir)
    records = stage_prompt(joined, template, cfg.context, _out(cfg) / "prompts.jsonl", cfg.video_uri_template)
    _emit({"prompts": len(records), "variant": template.variant, "profile": cfg.context})
    return EXIT_OK


def cmd_generate(args, cfg: PipelineConfig) -> int:
    prompts = read_prompts(_need(args.prompts or cfg.out_dir / "prompts.jsonl", "prompts file"))
    if cfg.endpoint is None:
        raise ConfigError(f"no endpoint: pass --endpoint or set {ENV_URL}")
    out = _out(cfg)
    outcome = stage_generate(
        prompts, cfg.endpoint, out / "candidates.jsonl", out / "failures.jsonl",
        max_tokens=cfg.max_tokens, frames=cfg.frames_hint,
    )
    _emit({"candidates": len(outcome.candidates), "failures": len(outcome.failures)})
    return EXIT_OK


def cmd_evaluate(args, cfg: PipelineConfig) -> int:
    candidates = read_candidates(_need(cfg.inputs.candidates or cfg.out_dir / "candidates.jsonl", "candidates file"))
    store = load_store(cfg)
    scoring, durations = scoring_for(cfg)
    report = evaluate_corpus(candidates, store, scoring, durations)
    emit_report(report, _out(cfg))
    doc = report.to_dict()
    print(_summary(doc))
    return EXIT_OK if report.clip_count else EXIT_DATA


def cmd_report(args, cfg: PipelineConfig) -> int:
    doc = read_report(_need(args.report or cfg.out_dir / "report.json", "report"))
    report = report_from_document(doc)
    emit_report(report, _out(cfg), formats=("csv", "components"))
    print(_summary(doc))
    return EXIT_OK if report.clip_count else EXIT_DATA


def cmd_corr(args, cfg: PipelineConfig) -> int:
    a = read_score_csv(args.a, args.column)
    b = read_score_csv(args.b, args.column_b or args.column)
    _emit(correlate(a, b))
    return EXIT_OK


def cmd_mock_serve(args, cfg: PipelineConfig) -> int:
    fixtures = None
    if args.fixtures is not None:
        fixtures = {c.clip_id: c.ad_text for c in read_candidates(args.fixtures)}
    lexicon = None
    if cfg.inputs.lexicon is not None:
        lexicon = ActionLexicon.from_records(read_json_array(cfg.inputs.lexicon), source=str(cfg.inputs.lexicon))
    server = MockServer(fixtures, host=args.host, port=args.port, lexicon=lexicon, token=args.token)
    print(f"serving {server.mode} mock on {server.url}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server._server.server_close()
    return EXIT_OK


def cmd_run(args, cfg: PipelineConfig) -> int:
    result = run_pipeline(cfg)
    print(_summary(result.report.to_dict()))
    if result.failures:
        print(f"{len(result.failures)} clips failed generation; see {cfg.out_dir / 'failures.jsonl'}", file=sys.stderr)
    return EXIT_OK if result.report.clip_count else EXIT_DATA


COMMANDS = {
    "ingest": cmd_ingest,
    "segment": cmd_segment,
    "context": cmd_context,
    "prompt": cmd_prompt,
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
    "corr": cmd_corr,
    "mock-serve": cmd_mock_serve,
    "run": cmd_run,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, MockServerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    except EndpointError as exc:
        print(f"error: endpoint: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    except (ValueError, LookupError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
