"""Few-shot classifier training and evaluation."""

from __future__ import annotations

import contextlib
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable

import numpy as np
import torch
from torch import nn

from ..errors import ValidationError
from ..samples import CATEGORIES, NUM_CATEGORIES, Category, DatasetManifest, per_class_counts
from .metrics import EvalResult, f1_macro


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 16
    lr: float = 1e-4
    weight_decay: float = 1e-2
    seed: int = 0
    backbone: str = "smallcnn"
    deterministic: bool = True

    def __post_init__(self):
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if not self.lr > 0:
            raise ValidationError("lr must be > 0")
        if self.weight_decay < 0:
            raise ValidationError("weight_decay must be >= 0")
        if self.backbone not in BACKBONES:
            raise ValidationError(f"unknown backbone {self.backbone!r}; known: {sorted(BACKBONES)}")

    @classmethod
    def from_dict(cls, d: dict) -> TrainConfig:
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValidationError(f"unknown train config keys {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


class SmallCNN(nn.Module):
    """Four conv stages with pooling, then a linear head. About 0.1M parameters."""

    def __init__(self, in_channels: int = 1, num_classes: int = NUM_CATEGORIES):
        super().__init__()
        layers = []
        ch = in_channels
        for out in (16, 32, 64, 128):
            layers += [nn.Conv2d(ch, out, 3, padding=1), nn.BatchNorm2d(out), nn.ReLU(), nn.MaxPool2d(2)]
            ch = out
        self.features = nn.Sequential(*layers)
        self.head = nn.Linear(ch, num_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.features(x)
        return self.head(h.mean(dim=(2, 3)))


# Larger backbones plug in here: name -> factory(in_channels, num_classes).
BACKBONES: dict[str, Callable[[int, int], nn.Module]] = {"smallcnn": SmallCNN}


def register_backbone(name: str, factory: Callable[[int, int], nn.Module]) -> None:
    BACKBONES[name] = factory


def manifest_tensors(manifest: DatasetManifest) -> tuple[torch.Tensor, torch.Tensor]:
    """Stack a manifest's images (model convention, NCHW) and integer labels."""
    if len(manifest) == 0:
        raise ValidationError("manifest is empty")
    images = [manifest.load_image(r).to_model().values for r in manifest]
    shapes = {im.shape for im in images}
    if len(shapes) != 1:
        raise ValidationError(f"manifest images differ in shape: {sorted(shapes)}")
    x = torch.from_numpy(np.stack(images).transpose(0, 3, 1, 2).copy())
    y = torch.tensor([r.category.id for r in manifest], dtype=torch.long)
    return x, y


@contextlib.contextmanager
def _determinism(enabled: bool):
    prev = torch.are_deterministic_algorithms_enabled()
    torch.use_deterministic_algorithms(enabled)
    try:
        yield
    finally:
        torch.use_deterministic_algorithms(prev)


def build_classifier(config: TrainConfig, in_channels: int = 1) -> nn.Module:
    torch.manual_seed(config.seed)
    return BACKBONES[config.backbone](in_channels, NUM_CATEGORIES)


def fit(model: nn.Module, x: torch.Tensor, y: torch.Tensor, config: TrainConfig) -> list[float]:
    """AdamW over ``config.epochs`` shuffled passes; returns per-epoch mean loss."""
    opt = torch.optim.AdamW(model.parameters(), lr=config.lr, weight_decay=config.weight_decay)
    gen = torch.Generator().manual_seed(config.seed)
    losses = []
    model.train()
    with _determinism(config.deterministic):
        for _ in range(config.epochs):
            order = torch.randperm(len(x), generator=gen)
            total = 0.0
            for start in range(0, len(x), config.batch_size):
                idx = order[start:start + config.batch_size]
                loss = nn.functional.cross_entropy(model(x[idx]), y[idx])
                opt.zero_grad()
                loss.backward()
                opt.step()
                total += loss.item() * len(idx)
            losses.append(total / len(x))
    return losses


@torch.no_grad()
def predict(model: nn.Module, manifest: DatasetManifest, batch_size: int = 256) -> list[Category]:
    x, _ = manifest_tensors(manifest)
    model.eval()
    out = []
    for start in range(0, len(x), batch_size):
        out.extend(model(x[start:start + batch_size]).argmax(dim=1).tolist())
    return [CATEGORIES[i] for i in out]


def evaluate_classifier(model: nn.Module, manifest: DatasetManifest) -> EvalResult:
    return f1_macro(predict(model, manifest), [r.category for r in manifest])


def train_classifier(train_manifest: DatasetManifest, eval_manifest: DatasetManifest,
                     config: TrainConfig = TrainConfig()) -> tuple[nn.Module, EvalResult]:
    missing = [c.code for c, n in per_class_counts(train_manifest).items() if n == 0]
    if missing:
        raise ValidationError(f"training manifest has no samples of {missing}")
    if len(eval_manifest) == 0:
        raise ValidationError("evaluation manifest is empty")
    x, y = manifest_tensors(train_manifest)
    model = build_classifier(config, x.shape[1])
    fit(model, x, y, config)
    return model, evaluate_classifier(model, eval_manifest)


def save_classifier(model: nn.Module, config: TrainConfig, path: str | Path) -> None:
    in_channels = next(m for m in model.modules() if isinstance(m, nn.Conv2d)).in_channels
    torch.save({"config": config.to_dict(), "in_channels": in_channels, "state": model.state_dict()}, path)


def load_classifier(path: str | Path) -> tuple[nn.Module, TrainConfig]:
    try:
        blob = torch.load(path, map_location="cpu", weights_only=True)
        config = TrainConfig.from_dict(blob["config"])
        model = BACKBONES[config.backbone](blob["in_channels"], NUM_CATEGORIES)
        model.load_state_dict(blob["state"])
    except (OSError, KeyError, RuntimeError) as exc:
        raise ValidationError(f"cannot load classifier checkpoint {path}: {exc}") from exc
    model.eval()
    return model, config
