"""Backbones and the model artifact format.

"smallconv" is the in-repo default: three conv blocks feeding a two-class
head, sized for desk-scale training on CPU. Torchvision backbones (e.g.
resnet18, inception_v3) plug in when torchvision and its pretrained weights
are available; the artifact records which backbone and preprocessing were
used so serve mode reproduces them exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import torch
from torch import nn

from .data import CLASSES


class DependencyError(RuntimeError):
    """Requested backbone is unavailable in this environment."""


class SmallConv(nn.Module):
    """Three frozen-able conv blocks + head; blocks count as unfreeze units."""

    input_size = 64
    name = "smallconv"

    def __init__(self):
        super().__init__()
        def block(cin, cout):
            return nn.Sequential(
                nn.Conv2d(cin, cout, 3, padding=1),
                nn.BatchNorm2d(cout),
                nn.ReLU(inplace=True),
                nn.MaxPool2d(2),
            )
        self.blocks = nn.ModuleList([block(3, 16), block(16, 32), block(32, 64)])
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.head = nn.Linear(64, len(CLASSES))

    def forward(self, x):
        for b in self.blocks:
            x = b(x)
        return self.head(self.pool(x).flatten(1))

    def backbone_blocks(self):
        return list(self.blocks)

    def head_parameters(self):
        return self.head.parameters()


def build_model(backbone: str) -> nn.Module:
    if backbone == "smallconv":
        return SmallConv()
    # torchvision path: optional, pretrained weights may not be mirrored
    try:
        import torchvision.models as tvm
    except ImportError as exc:
        raise DependencyError(f"backbone {backbone!r} needs torchvision") from exc
    if backbone == "resnet18":
        try:
            net = tvm.resnet18(weights=tvm.ResNet18_Weights.IMAGENET1K_V1)
        except Exception as exc:
            raise DependencyError(f"pretrained weights unavailable: {exc}") from exc
        net.fc = nn.Linear(net.fc.in_features, len(CLASSES))
        net.input_size = 224
        net.name = "resnet18"
        net.backbone_blocks = lambda: [net.layer1, net.layer2, net.layer3, net.layer4]
        net.head_parameters = lambda: net.fc.parameters()
        return net
    raise DependencyError(f"unknown backbone {backbone!r}")


def save_artifact(model: nn.Module, path, backbone: str, input_size: int) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), out / "weights.pt")
    meta = {
        "backbone": backbone,
        "input_size": input_size,
        "classes": list(CLASSES),
        "preprocessing": {"resize": input_size, "scale": "1/255", "order": "RGB"},
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n",
                                   encoding="utf-8")
    return out


def load_artifact(path):
    out = Path(path)
    meta = json.loads((out / "meta.json").read_text(encoding="utf-8"))
    model = build_model(meta["backbone"])
    model.load_state_dict(torch.load(out / "weights.pt", map_location="cpu",
                                     weights_only=True))
    model.eval()
    return model, meta
