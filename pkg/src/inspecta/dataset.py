"""Labeled image emitter for classifier training.

Renders Crack/ and NonCrack/ folders from randomized wall scenes, including
the brick preset for the NonCrack class (brick mortar lines are the classic
false-positive source, so brick negatives belong in any training set).

Run as `python -m inspecta.dataset OUTDIR --per-class 200 --seed 3`.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from .geometry import Aabb, Pose
from .sensors import CameraModel, render_rgb, save_rgb_png
from .world import MATERIALS, CrackDecal, GroundTruthScene, SceneBox


def _random_crack_polyline(rng, hu, hv):
    n = rng.integers(3, 6)
    u = np.sort(rng.uniform(-hu * 0.8, hu * 0.8, n))
    v0 = rng.uniform(-hv * 0.5, hv * 0.5)
    v = v0 + np.cumsum(rng.uniform(-0.12, 0.12, n))
    v = np.clip(v, -hv * 0.9, hv * 0.9)
    return np.stack([u, v], axis=1)


def render_sample(rng, with_crack: bool, size: int = 120) -> np.ndarray:
    """One wall view; material, texture seed, pose and decal are random."""
    bounds = Aabb(np.zeros(3), np.array([7.0, 6.0, 3.0]))
    material = MATERIALS[rng.integers(0, len(MATERIALS))]
    wall = SceneBox([3.5, 3.0, 1.5], [0.5, 3.0, 1.5], material)
    decals = []
    if with_crack:
        poly = _random_crack_polyline(rng, 2.0, 1.0)
        decals.append(CrackDecal(0, "-x", poly, float(rng.uniform(0.03, 0.06))))
    scene = GroundTruthScene([wall], decals, bounds, seed=int(rng.integers(0, 10_000)))
    cam = CameraModel(width=size, height=size, max_range=6.0)
    pose = Pose([float(rng.uniform(1.0, 2.2)), float(rng.uniform(2.2, 3.8)),
                 float(rng.uniform(1.1, 1.9))], float(rng.uniform(-0.25, 0.25)))
    img, mask = render_rgb(pose, scene, cam)
    if with_crack and mask.mean() < 0.005:
        return render_sample(rng, True, size)  # decal out of view; redraw
    return img.pixels


def generate(out_dir, per_class: int = 200, size: int = 120, seed: int = 3) -> dict:
    out = Path(out_dir)
    rng = np.random.default_rng(seed)
    counts = {}
    for label, with_crack in (("Crack", True), ("NonCrack", False)):
        d = out / label
        d.mkdir(parents=True, exist_ok=True)
        for i in range(per_class):
            pixels = render_sample(rng, with_crack, size)
            from .sensors import RgbImage
            save_rgb_png(RgbImage(pixels, 0.0), d / f"{label.lower()}_{i:04d}.png")
        counts[label] = per_class
    return counts


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="emit a labeled crack dataset")
    parser.add_argument("out")
    parser.add_argument("--per-class", type=int, default=200)
    parser.add_argument("--size", type=int, default=120)
    parser.add_argument("--seed", type=int, default=3)
    args = parser.parse_args(argv)
    counts = generate(args.out, args.per_class, args.size, args.seed)
    print(f"wrote {counts} to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
