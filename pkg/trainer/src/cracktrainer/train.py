"""Two-phase fine-tuning and the training report.

Phase 1 trains a fresh two-class head with the backbone frozen; phase 2
unfreezes the top blocks at a reduced learning rate. The report carries
per-epoch train/validation accuracy and loss, and per-sample validation
predictions so reported accuracies can be recounted exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn
from torch.utils.data import DataLoader

from .data import DatasetSpec, FolderDataset, class_counts, split_samples
from .model import build_model, save_artifact


@dataclass
class TrainReport:
    epochs: list = field(default_factory=list)  # per-epoch metric dicts
    class_counts: dict = field(default_factory=dict)
    model_path: str = ""
    backbone: str = ""
    val_predictions: list = field(default_factory=list)  # (path, truth, pred)

    def final_train_accuracy(self) -> float:
        return self.epochs[-1]["train_accuracy"] if self.epochs else 0.0

    def save(self, path) -> None:
        doc = {"backbone": self.backbone, "class_counts": self.class_counts,
               "model_path": self.model_path, "epochs": self.epochs,
               "val_predictions": self.val_predictions}
        Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _run_epoch(model, loader, optimizer=None, loss_fn=None):
    training = optimizer is not None
    model.train(training)
    total, correct, loss_sum = 0, 0, 0.0
    preds = []
    with torch.set_grad_enabled(training):
        for x, y in loader:
            logits = model(x)
            loss = loss_fn(logits, y)
            if training:
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
            p = logits.argmax(dim=1)
            total += len(y)
            correct += int((p == y).sum())
            loss_sum += float(loss.detach()) * len(y)
            preds.extend(p.tolist())
    return correct / max(total, 1), loss_sum / max(total, 1), preds


def fine_tune(dataset: DatasetSpec, backbone: str = "smallconv",
              epochs: int = 20, phase2_unfreeze_depth: int = 1,
              out_dir="model_out", lr: float = 1e-3,
              phase2_lr_scale: float = 0.1, batch_size: int = 32) -> TrainReport:
    """Train the classifier; returns the report, artifact lands in out_dir.

    Deterministic at the report level under a fixed dataset seed: splits,
    augmentation draws and weight init all derive from it.
    """
    torch.manual_seed(dataset.seed)
    model = build_model(backbone)
    input_size = model.input_size

    train_samples, val_samples = split_samples(dataset)
    train_ds = FolderDataset(train_samples, input_size, dataset.augment,
                             seed=dataset.seed + 1)
    val_ds = FolderDataset(val_samples, input_size, None)
    gen = torch.Generator().manual_seed(dataset.seed)
    train_loader = DataLoader(train_ds, batch_size=batch_size, shuffle=True,
                              generator=gen)
    val_loader = DataLoader(val_ds, batch_size=batch_size)

    loss_fn = nn.CrossEntropyLoss()
    report = TrainReport(class_counts=class_counts(train_samples + val_samples),
                         backbone=backbone)

    # phase 1: frozen backbone, fresh head
    for block in model.backbone_blocks():
        for p in block.parameters():
            p.requires_grad_(False)
    phase1_epochs = max(1, epochs // 2)
    optimizer = torch.optim.Adam(model.head_parameters(), lr=lr)
    for epoch in range(phase1_epochs):
        tr_acc, tr_loss, _ = _run_epoch(model, train_loader, optimizer, loss_fn)
        va_acc, va_loss, _ = _run_epoch(model, val_loader, loss_fn=loss_fn)
        report.epochs.append({"epoch": epoch + 1, "phase": 1,
                              "train_accuracy": tr_acc, "train_loss": tr_loss,
                              "val_accuracy": va_acc, "val_loss": va_loss})

    # phase 2: unfreeze the top blocks at reduced learning rate
    blocks = model.backbone_blocks()
    for block in blocks[len(blocks) - phase2_unfreeze_depth:]:
        for p in block.parameters():
            p.requires_grad_(True)
    optimizer = torch.optim.Adam(
        [p for p in model.parameters() if p.requires_grad],
        lr=lr * phase2_lr_scale)
    for epoch in range(phase1_epochs, epochs):
        tr_acc, tr_loss, _ = _run_epoch(model, train_loader, optimizer, loss_fn)
        va_acc, va_loss, _ = _run_epoch(model, val_loader, loss_fn=loss_fn)
        report.epochs.append({"epoch": epoch + 1, "phase": 2,
                              "train_accuracy": tr_acc, "train_loss": tr_loss,
                              "val_accuracy": va_acc, "val_loss": va_loss})

    _, _, val_preds = _run_epoch(model, val_loader, loss_fn=loss_fn)
    report.val_predictions = [
        (str(p), int(y), int(pred))
        for (p, y), pred in zip(val_samples, val_preds)]

    artifact = save_artifact(model, Path(out_dir), backbone, input_size)
    report.model_path = str(artifact)
    report.save(artifact / "train_report.json")
    return report
