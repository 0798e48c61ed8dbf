"""Run every stage on the bundled fixture corpus against an in-process fixture mock."""

import argparse
from pathlib import Path

from argead.client import EndpointConfig, MockServer
from argead.config import InputPaths, PipelineConfig
from argead.metric import read_candidates
from argead.pipeline import run_pipeline

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", type=Path, default=ROOT / "tests" / "data")
    ap.add_argument("--out", type=Path, default=ROOT / "runs" / "demo")
    ap.add_argument("--prompt", default="3")
    ap.add_argument("--context", default="pa")
    args = ap.parse_args()

    fixtures = {c.clip_id: c.ad_text for c in read_candidates(args.data / "candidates.jsonl")}
    with MockServer(fixtures) as srv:
        cfg = PipelineConfig(
            InputPaths.from_dir(args.data), args.out, prompt=args.prompt, context=args.context, endpoint=EndpointConfig(srv.url)
        )
        result = run_pipeline(cfg)

    report = result.report
    print(f"{'clip':<10} {'z_p':>4} {'z_a':>4} {'z_l':>4} {'z_pr':>4} {'z_o':>4} {'score':>6}")
    for c in report.clips:
        print(f"{c.clip_id:<10}" + "".join(f" {z:>4.0f}" for z in c.components.as_tuple()) + f" {c.clip_score:>6.2f}")
    print(f"ARGE-AD {report.corpus_score:.4f} over {report.clip_count} clips; artifacts in {args.out}")


if __name__ == "__main__":
    main()
