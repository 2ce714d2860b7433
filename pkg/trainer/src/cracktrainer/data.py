"""Dataset handling: Crack/ and NonCrack/ folders, splits, augmentation."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image

CLASSES = ("Crack", "NonCrack")
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp"}


class DatasetError(ValueError):
    """Missing or empty class folders."""


@dataclass(frozen=True)
class AugmentConfig:
    hflip: bool = True
    vflip: bool = False
    rotate90: bool = True
    brightness_jitter: float = 0.15  # multiplicative range +-


@dataclass(frozen=True)
class DatasetSpec:
    root: Path
    val_fraction: float = 0.2
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "root", Path(self.root))
        if not 0.0 <= self.val_fraction < 1.0:
            raise DatasetError("val_fraction must lie in [0, 1)")


def list_samples(root: Path):
    """[(path, class_index)] sorted by path; raises on empty classes."""
    root = Path(root)
    samples = []
    for ci, cls in enumerate(CLASSES):
        folder = root / cls
        files = sorted(p for p in folder.glob("*")
                       if p.suffix.lower() in IMAGE_SUFFIXES) \
            if folder.is_dir() else []
        if not files:
            raise DatasetError(f"class folder {folder} is missing or empty")
        samples.extend((p, ci) for p in files)
    return samples


def load_image(path, input_size: int) -> torch.Tensor:
    img = Image.open(path).convert("RGB").resize((input_size, input_size),
                                                 Image.BILINEAR)
    arr = np.asarray(img, dtype=np.float32) / 255.0
    return torch.from_numpy(arr).permute(2, 0, 1)


class FolderDataset(torch.utils.data.Dataset):
    def __init__(self, samples, input_size: int, augment: AugmentConfig | None,
                 seed: int = 0):
        self.samples = samples
        self.input_size = input_size
        self.augment = augment
        self.rng = np.random.default_rng(seed)
        self._cache: dict = {}

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, i):
        path, label = self.samples[i]
        x = self._cache.get(i)
        if x is None:
            x = load_image(path, self.input_size)
            self._cache[i] = x
        a = self.augment
        if a is not None:
            if a.hflip and self.rng.random() < 0.5:
                x = torch.flip(x, dims=[2])
            if a.vflip and self.rng.random() < 0.5:
                x = torch.flip(x, dims=[1])
            if a.rotate90 and self.rng.random() < 0.5:
                x = torch.rot90(x, k=int(self.rng.integers(1, 4)), dims=[1, 2])
            if a.brightness_jitter > 0:
                scale = 1.0 + self.rng.uniform(-a.brightness_jitter,
                                               a.brightness_jitter)
                x = torch.clamp(x * scale, 0.0, 1.0)
        return x, label


def split_samples(spec: DatasetSpec):
    """Deterministic stratified train/val split."""
    samples = list_samples(spec.root)
    rng = np.random.default_rng(spec.seed)
    train, val = [], []
    for ci in range(len(CLASSES)):
        cls = [s for s in samples if s[1] == ci]
        order = rng.permutation(len(cls))
        n_val = int(round(len(cls) * spec.val_fraction))
        val.extend(cls[i] for i in order[:n_val])
        train.extend(cls[i] for i in order[n_val:])
    return train, val


def class_counts(samples) -> dict:
    return {cls: sum(1 for _, ci in samples if ci == k)
            for k, cls in enumerate(CLASSES)}
