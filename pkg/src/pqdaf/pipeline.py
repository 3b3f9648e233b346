"""File-backed pipeline stages. Each stage reads and writes under one output directory."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .config import PipelineConfig
from .dataset_ops import MixSpec, few_shot_subset, mix, read_manifest, write_manifest
from .diffusion.checkpoint import load_checkpoint, save_checkpoint
from .diffusion.guidance import SamplerConfig
from .diffusion.synthesis import generate_pool
from .diffusion.training import train_generator
from .errors import ValidationError
from .filtering import (
    FixedScorer,
    HashScorer,
    RemoteScorer,
    Scorer,
    filter_samples,
    keep_counts,
    write_audit,
)
from .samples import CATEGORIES, DatasetManifest
from .toydata import EVAL_IDENTITY_BASE, FEWSHOT_IDENTITY_BASE, make_real_manifest
from .train_eval.classifier import evaluate_classifier, load_classifier, save_classifier, train_classifier
from .train_eval.metrics import EvalResult
from .train_eval.sweep import ratio_sweep, summarize, write_plot_data, write_results

log = logging.getLogger(__name__)

MANIFEST = "manifest.jsonl"


@dataclass(frozen=True)
class Layout:
    """Default artifact locations under ``root``."""

    root: Path

    @property
    def real(self) -> Path:
        return self.root / "data" / "real" / MANIFEST

    @property
    def eval(self) -> Path:
        return self.root / "data" / "eval" / MANIFEST

    @property
    def checkpoint(self) -> Path:
        return self.root / "generator" / "generator.pt"

    @property
    def pool(self) -> Path:
        return self.root / "pool" / MANIFEST

    @property
    def filtered(self) -> Path:
        return self.root / "filtered" / MANIFEST

    @property
    def audit(self) -> Path:
        return self.root / "filtered" / "audit.jsonl"

    @property
    def mixed(self) -> Path:
        return self.root / "mix" / MANIFEST

    @property
    def classifier(self) -> Path:
        return self.root / "train" / "classifier.pt"

    @property
    def metrics(self) -> Path:
        return self.root / "train" / "metrics.json"

    @property
    def results(self) -> Path:
        return self.root / "sweep" / "results.csv"

    @property
    def plot_data(self) -> Path:
        return self.root / "sweep" / "plot.csv"


def layout(config: PipelineConfig) -> Layout:
    return Layout(Path(config.out_dir))


def _prepare(config: PipelineConfig, *paths: Path) -> None:
    for p in paths:
        config.echo(p.parent)


def make_data(config: PipelineConfig) -> tuple[Path, Path]:
    """Render the real few-shot source set and the held-out evaluation set."""
    lay = layout(config)
    _prepare(config, lay.real, lay.eval)
    ids = range(FEWSHOT_IDENTITY_BASE, FEWSHOT_IDENTITY_BASE + config.data.fewshot_identities)
    write_manifest(make_real_manifest(ids, split="test", out_dir=lay.real.parent), lay.real)
    ids = range(EVAL_IDENTITY_BASE, EVAL_IDENTITY_BASE + config.data.eval_identities)
    write_manifest(make_real_manifest(ids, split="test", out_dir=lay.eval.parent, prefix="eval"), lay.eval)
    return lay.real, lay.eval


def train_generator_stage(config: PipelineConfig, checkpoint: Path | None = None) -> Path:
    checkpoint = Path(checkpoint or layout(config).checkpoint)
    _prepare(config, checkpoint)
    model, losses = train_generator(config.generator)
    save_checkpoint(model, checkpoint)
    with open(checkpoint.parent / "losses.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("step", "loss"))
        w.writerows((i, f"{v:.6f}") for i, v in enumerate(losses))
    return checkpoint


def generate_stage(config: PipelineConfig, checkpoint: Path | None = None, out: Path | None = None) -> Path:
    checkpoint = Path(checkpoint or layout(config).checkpoint)
    out = Path(out or layout(config).pool)
    if not checkpoint.exists():
        raise ValidationError(f"generator checkpoint {checkpoint} not found; run train-generator first")
    model, schedule = load_checkpoint(checkpoint)
    g = config.generate
    sampler = SamplerConfig(
        w=model.config.w if g.w is None else g.w,
        steps=model.config.steps if g.steps is None else g.steps,
        seed=config.sampler_seed(),
        deterministic=config.deterministic,
    )
    _prepare(config, out)
    pool = generate_pool(model, schedule, g.n_per_class, sampler, out.parent, batch_size=g.batch_size)
    write_manifest(pool, out)
    return out


def make_scorer(config: PipelineConfig) -> Scorer:
    f = config.filter
    if f.scorer == "remote":
        return RemoteScorer(f.scorer_endpoint, f.timeout_s)
    if f.mock_response is not None:
        return FixedScorer(f.mock_response)
    return HashScorer(salt=f.mock_salt)


@dataclass(frozen=True)
class FilterOutcome:
    manifest: Path
    audit: Path
    counts: dict


def filter_stage(config: PipelineConfig, pool: Path | None = None, out: Path | None = None,
                 scorer: Scorer | None = None) -> FilterOutcome:
    lay = layout(config)
    pool_manifest = read_manifest(pool or lay.pool)
    out = Path(out or lay.filtered)
    _prepare(config, out)
    scorer = scorer or make_scorer(config)
    try:
        kept, audit = filter_samples(list(pool_manifest), scorer, config.filter.filter_config(),
                                     image_root=pool_manifest.root)
    finally:
        if isinstance(scorer, RemoteScorer):
            scorer.close()
    kept_manifest = DatasetManifest(tuple(kept), split="synthetic-pool", seed=pool_manifest.seed,
                                    root=pool_manifest.root)
    write_manifest(kept_manifest, out)
    audit_path = out.parent / "audit.jsonl"
    write_audit(audit, audit_path)
    return FilterOutcome(out, audit_path, keep_counts(audit))


def format_keep_rates(counts: dict) -> list[str]:
    lines = []
    for cat in CATEGORIES:
        row = counts.get(cat, {"kept": 0, "discarded": 0, "unparseable": 0})
        total = sum(row.values())
        rate = row["kept"] / total if total else 0.0
        lines.append(f"{cat.code} kept={row['kept']} discarded={row['discarded']} "
                     f"unparseable={row['unparseable']} total={total} rate={rate:.3f}")
    return lines


def mix_stage(config: PipelineConfig, real: Path | None = None, pool: Path | None = None,
              out: Path | None = None) -> Path:
    lay = layout(config)
    real_manifest = read_manifest(real or lay.real)
    pool_manifest = read_manifest(pool or lay.filtered)
    out = Path(out or lay.mixed)
    _prepare(config, out)
    subset = few_shot_subset(real_manifest, config.mix.k_shot, config.seed)
    write_manifest(subset, out.parent / "fewshot.jsonl")
    mixed = mix(subset, pool_manifest, MixSpec(config.mix.ratio, config.mix.k_shot, config.seed))
    write_manifest(mixed, out)
    return out


def _write_metrics(result: EvalResult, path: Path, **extra) -> None:
    path.write_text(json.dumps({**extra, **result.to_dict()}, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def train_stage(config: PipelineConfig, train: Path | None = None, eval_manifest: Path | None = None,
                checkpoint: Path | None = None) -> EvalResult:
    lay = layout(config)
    checkpoint = Path(checkpoint or lay.classifier)
    _prepare(config, checkpoint)
    train_m = read_manifest(train or lay.mixed)
    eval_m = read_manifest(eval_manifest or lay.eval)
    tc = config.train_config()
    model, result = train_classifier(train_m, eval_m, tc)
    save_classifier(model, tc, checkpoint)
    _write_metrics(result, checkpoint.parent / "metrics.json", n_train=len(train_m))
    return result


def eval_stage(config: PipelineConfig, checkpoint: Path | None = None, manifest: Path | None = None,
               out: Path | None = None) -> EvalResult:
    lay = layout(config)
    model, _ = load_classifier(checkpoint or lay.classifier)
    result = evaluate_classifier(model, read_manifest(manifest or lay.eval))
    if out is not None:
        _prepare(config, Path(out))
        _write_metrics(result, Path(out))
    return result


def sweep_stage(config: PipelineConfig, real: Path | None = None, pool: Path | None = None,
                eval_manifest: Path | None = None, results: Path | None = None,
                plot_data: Path | None = None):
    lay = layout(config)
    results = Path(results or lay.results)
    plot_data = Path(plot_data or lay.plot_data)
    _prepare(config, results, plot_data)
    rows = ratio_sweep(read_manifest(real or lay.real), read_manifest(pool or lay.filtered),
                       config.sweep.ratios, config.mix.k_shot, config.sweep.seeds,
                       config.train_config(), read_manifest(eval_manifest or lay.eval))
    write_results(rows, results)
    write_plot_data(rows, plot_data)
    return rows, summarize(rows)
