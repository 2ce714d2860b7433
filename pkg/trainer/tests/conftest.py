"""Synthetic Crack/NonCrack image generator shared across trainer tests.

Drawn with PIL only; the trainer talks to the mission toolkit exclusively
through file formats and the wire protocol, never through imports.
"""

import numpy as np
import pytest
from PIL import Image, ImageDraw


def draw_sample(rng, with_crack: bool, size: int = 96) -> Image.Image:
    base = int(rng.integers(140, 180))
    arr = np.full((size, size), base, dtype=np.float64)
    arr += rng.normal(0, 6, arr.shape)
    if rng.random() < 0.5:  # brick-ish horizontal banding
        rows = (np.arange(size) // int(rng.integers(10, 18))) % 2
        arr += rows[:, None] * rng.uniform(4, 10)
    img = Image.fromarray(np.clip(arr, 0, 255).astype(np.uint8)).convert("RGB")
    if with_crack:
        d = ImageDraw.Draw(img)
        x = rng.uniform(5, 20)
        y = rng.uniform(15, size - 15)
        pts = [(x, y)]
        while x < size - 6:
            x += rng.uniform(6, 14)
            y = np.clip(y + rng.uniform(-8, 8), 3, size - 3)
            pts.append((x, y))
        d.line(pts, fill=(22, 20, 20), width=int(rng.integers(2, 4)))
    return img


def make_dataset(root, per_class: int, seed: int = 0, size: int = 96):
    rng = np.random.default_rng(seed)
    for label, with_crack in (("Crack", True), ("NonCrack", False)):
        d = root / label
        d.mkdir(parents=True, exist_ok=True)
        for i in range(per_class):
            draw_sample(rng, with_crack, size).save(d / f"{i:04d}.png")
    return root


@pytest.fixture(scope="session")
def desk_dataset(tmp_path_factory):
    """200 + 200 synthetic images, the desk-scale training corpus."""
    root = tmp_path_factory.mktemp("desk_data")
    return make_dataset(root, per_class=200, seed=11)


@pytest.fixture(scope="session")
def holdout_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("holdout_data")
    return make_dataset(root, per_class=40, seed=77)


@pytest.fixture(scope="session")
def trained_model(desk_dataset, tmp_path_factory):
    from cracktrainer.data import DatasetSpec
    from cracktrainer.train import fine_tune
    out = tmp_path_factory.mktemp("model")
    report = fine_tune(DatasetSpec(root=desk_dataset, seed=3), epochs=20,
                       out_dir=out)
    return report, out
