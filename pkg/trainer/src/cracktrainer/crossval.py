"""Cross-validation against a held-out folder dataset."""

from __future__ import annotations

import torch
from torch.utils.data import DataLoader

from .data import FolderDataset, list_samples


def accuracy_report(n_correct: int, n_total: int) -> dict:
    """Exact-arithmetic accuracy record: accuracy = n_correct / n_total."""
    if n_total <= 0:
        raise ValueError("n_total must be positive")
    return {"n_total": int(n_total), "n_correct": int(n_correct),
            "accuracy": n_correct / n_total}


def cross_validate(model, dataset_dir, input_size: int,
                   batch_size: int = 64) -> dict:
    samples = list_samples(dataset_dir)
    loader = DataLoader(FolderDataset(samples, input_size, None),
                        batch_size=batch_size)
    model.eval()
    correct = 0
    predictions = []
    with torch.no_grad():
        for x, y in loader:
            p = model(x).argmax(dim=1)
            correct += int((p == y).sum())
            predictions.extend(p.tolist())
    report = accuracy_report(correct, len(samples))
    report["predictions"] = [
        (str(path), int(truth), int(pred))
        for (path, truth), pred in zip(samples, predictions)]
    return report
