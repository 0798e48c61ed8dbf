"""Context-profile x prompt-variant sweep against the echo mock.

The echo mock builds its AD from whatever context cues the request
carries, so the sweep shows how each profile changes the scored output.
Point ``--endpoint`` at a real model server to run the same grid for real.
"""

import argparse
import csv
import itertools
from pathlib import Path

from argead.client import EndpointConfig, MockServer
from argead.config import InputPaths, PipelineConfig
from argead.metric import COMPONENTS
from argead.pipeline import run_pipeline
from argead.prompting import PROFILES, VARIANTS

ROOT = Path(__file__).resolve().parent.parent


def sweep(data: Path, out: Path, url: str):
    rows = []
    for variant, profile in itertools.product(VARIANTS, PROFILES):
        cfg = PipelineConfig(InputPaths.from_dir(data), out / f"{variant}_{profile}", prompt=variant, context=profile,
                             endpoint=EndpointConfig(url))
        report = run_pipeline(cfg).report
        rows.append({"variant": variant, "profile": profile, "arge_ad": report.corpus_score, **report.per_component_means})
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--data", type=Path, default=ROOT / "tests" / "data")
    ap.add_argument("--out", type=Path, default=ROOT / "runs" / "ablation")
    ap.add_argument("--endpoint", help="model endpoint; an echo mock is started when omitted")
    args = ap.parse_args()

    if args.endpoint:
        rows = sweep(args.data, args.out, args.endpoint)
    else:
        with MockServer() as srv:
            rows = sweep(args.data, args.out, srv.url)

    args.out.mkdir(parents=True, exist_ok=True)
    fields = ["variant", "profile", "arge_ad", *COMPONENTS]
    with (args.out / "ablation.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fields, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)

    print(f"{'variant':<8}{'profile':<11}" + "".join(f"{f:>8}" for f in fields[2:]))
    for r in rows:
        print(f"{r['variant']:<8}{r['profile']:<11}" + "".join(f"{r[f]:>8.3f}" for f in fields[2:]))


if __name__ == "__main__":
    main()
