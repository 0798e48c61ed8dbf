"""Write a synthetic frames.csv: piecewise-constant HSV means with small noise.

Scene lengths are drawn at random; every boundary changes v_mean by at
least ``--jump``, so with the default detector settings each boundary that
respects the minimum scene length becomes a cut. The true boundaries are
printed for comparison with ``argead segment``.
"""

import argparse

import numpy as np

from argead.segmentation import FrameFeature, write_frames_csv


def synth(seconds: float, fps: float, jump: float, noise: float, rng: np.random.Generator):
    n = int(seconds * fps) + 1
    boundaries, t = [], 0.0
    while True:
        t += float(rng.uniform(10.0, 60.0))
        if t >= seconds:
            break
        boundaries.append(t)
    v = np.empty(n)
    level = float(rng.uniform(0, 255))
    edges = iter(boundaries + [float("inf")])
    nxt = next(edges)
    for i in range(n):
        if i / fps >= nxt:
            level = (level + jump + float(rng.uniform(0, 255 - 2 * jump))) % 255
            nxt = next(edges)
        v[i] = level
    v = np.clip(v + rng.normal(0, noise, n), 0, 255)
    h = np.clip(90 + rng.normal(0, noise, n), 0, 255)
    s = np.clip(120 + rng.normal(0, noise, n), 0, 255)
    frames = [FrameFeature(i, i / fps, float(h[i]), float(s[i]), float(v[i])) for i in range(n)]
    return frames, boundaries


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("output")
    ap.add_argument("--seconds", type=float, default=300.0)
    ap.add_argument("--fps", type=float, default=5.0)
    ap.add_argument("--jump", type=float, default=100.0, help="minimum v_mean change at a boundary")
    ap.add_argument("--noise", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    frames, boundaries = synth(args.seconds, args.fps, args.jump, args.noise, np.random.default_rng(args.seed))
    write_frames_csv(args.output, frames)
    print(f"{len(frames)} frames; boundaries at " + ", ".join(f"{b:.1f}s" for b in boundaries))


if __name__ == "__main__":
    main()
