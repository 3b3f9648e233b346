"""Mixing-ratio sweep: subset, mix, train and evaluate for every (ratio, seed) cell."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..dataset_ops import MixSpec, few_shot_subset, mix
from ..samples import DatasetManifest
from .classifier import TrainConfig, train_classifier

log = logging.getLogger(__name__)

DEFAULT_RATIOS = (0.5, 1.0, 2.0, 3.0)
RESULT_COLUMNS = ("ratio", "seed", "top1", "f1_macro", "n_train")


@dataclass(frozen=True)
class SweepRow:
    ratio: float
    seed: int
    top1: float
    f1_macro: float
    n_train: int


@dataclass(frozen=True)
class SweepSummary:
    ratio: float
    mean_top1: float
    std_top1: float
    n_seeds: int


def ratio_sweep(
    real: DatasetManifest,
    synthetic_pool: DatasetManifest,
    ratios: Sequence[float],
    k: int,
    seeds: Sequence[int],
    config: TrainConfig,
    eval_manifest: DatasetManifest,
) -> list[SweepRow]:
    """One row per (ratio, seed). Seed ``s`` fixes the few-shot draw, the mix and
    the classifier init, so every ratio sees the same real samples for a given seed.
    A ratio of 0 is the real-only condition."""
    rows = []
    for seed in seeds:
        subset = few_shot_subset(real, k, seed)
        cell_config = TrainConfig(**{**config.to_dict(), "seed": seed})
        for ratio in ratios:
            train = mix(subset, synthetic_pool, MixSpec(ratio, k, seed))
            _, result = train_classifier(train, eval_manifest, cell_config)
            rows.append(SweepRow(float(ratio), seed, result.top1, result.f1_macro, len(train)))
            log.info("ratio %s seed %d: top1 %.4f (n_train %d)", ratio, seed, result.top1, len(train))
    rows.sort(key=lambda r: (r.ratio, r.seed))
    return rows


def summarize(rows: Sequence[SweepRow]) -> list[SweepSummary]:
    out = []
    for ratio in sorted({r.ratio for r in rows}):
        acc = np.array([r.top1 for r in rows if r.ratio == ratio])
        std = float(acc.std(ddof=1)) if len(acc) > 1 else 0.0
        out.append(SweepSummary(ratio, float(acc.mean()), std, len(acc)))
    return out


def write_results(rows: Sequence[SweepRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for r in rows:
            writer.writerow([r.ratio, r.seed, f"{r.top1:.6f}", f"{r.f1_macro:.6f}", r.n_train])


def write_plot_data(rows: Sequence[SweepRow], path: str | Path) -> None:
    """(x, y, series) triples: x is the ratio, y is top-1; one series per seed plus the mean."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("x", "y", "series"))
        for r in rows:
            writer.writerow([r.ratio, f"{r.top1:.6f}", f"seed={r.seed}"])
        for s in summarize(rows):
            writer.writerow([s.ratio, f"{s.mean_top1:.6f}", "mean"])
