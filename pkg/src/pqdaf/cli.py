"""``pqdaf`` command line.

Every failure ends with one JSON line on stderr, e.g.
``{"error": "shortfall", "exit_code": 4, "message": "..."}``, and the matching
exit code: 2 validation, 3 external service, 4 data shortfall.
"""

from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click

from . import pipeline
from .config import load_config
from .errors import PQDAFError, ValidationError

_PATH = click.Path(path_type=Path)


def _fail(code: str, exit_code: int, message: str):
    click.echo(json.dumps({"error": code, "exit_code": exit_code, "message": " ".join(message.split())}),
               err=True)
    sys.exit(exit_code)


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except PQDAFError as exc:
            _fail(exc.code, exc.exit_code, str(exc))
        except OSError as exc:
            _fail("validation", ValidationError.exit_code, f"I/O error: {exc}")
    return wrapper


def common_options(fn):
    opts = [
        click.option("--config", "config_path", type=_PATH, help="YAML config file."),
        click.option("--seed", type=int, help="Pipeline seed (sampling, subsetting, mixing, classifier)."),
        click.option("--k-shot", type=int, help="Real samples per class."),
        click.option("--ratio", type=float, help="Synthetic samples per real sample."),
        click.option("--tau", type=float, help="Keep threshold on the consistency score."),
        click.option("--scorer", type=click.Choice(["mock", "remote"]), help="Consistency scorer."),
        click.option("--scorer-endpoint", help="Remote scorer URL (overrides PQDAF_SCORER_ENDPOINT)."),
        click.option("--out-dir", type=_PATH, help="Root directory for all outputs."),
        click.option("--deterministic/--no-deterministic", default=None,
                     help="Deterministic sampling and training."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _config(kw: dict, **extra):
    overrides = {
        "seed": kw.pop("seed"),
        "mix.k_shot": kw.pop("k_shot"),
        "mix.ratio": kw.pop("ratio"),
        "filter.tau": kw.pop("tau"),
        "filter.scorer": kw.pop("scorer"),
        "filter.scorer_endpoint": kw.pop("scorer_endpoint"),
        "out_dir": str(kw["out_dir"]) if kw.get("out_dir") is not None else None,
        "deterministic": kw.pop("deterministic"),
        **{k.replace("__", "."): v for k, v in extra.items()},
    }
    kw.pop("out_dir", None)
    return load_config(kw.pop("config_path"), overrides)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool):
    """Pose-guided synthetic augmentation for few-shot driver-behavior recognition."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command("make-data")
@common_options
@_guarded
def make_data_cmd(**kw):
    """Render the toy real few-shot source set and evaluation set."""
    cfg = _config(kw)
    real, ev = pipeline.make_data(cfg)
    click.echo(f"real={real}\neval={ev}")


@main.command("train-generator")
@common_options
@click.option("--checkpoint", type=_PATH, help="Where to write the generator checkpoint.")
@_guarded
def train_generator_cmd(checkpoint, **kw):
    """Train the pose-guided generator on the toy pose-transfer pairs."""
    cfg = _config(kw)
    click.echo(f"checkpoint={pipeline.train_generator_stage(cfg, checkpoint)}")


@main.command("generate")
@common_options
@click.option("--checkpoint", type=_PATH, help="Generator checkpoint to sample from.")
@click.option("--n-per-class", type=int, help="Images per category.")
@click.option("--output", type=_PATH, help="Pool manifest path.")
@_guarded
def generate_cmd(checkpoint, n_per_class, output, **kw):
    """Sample an unscored synthetic pool conditioned on synthesized class poses."""
    cfg = _config(kw, generate__n_per_class=n_per_class)
    click.echo(f"pool={pipeline.generate_stage(cfg, checkpoint, output)}")


@main.command("filter")
@common_options
@click.option("--pool", type=_PATH, help="Pool manifest to score.")
@click.option("--output", type=_PATH, help="Kept manifest path (audit log goes beside it).")
@_guarded
def filter_cmd(pool, output, **kw):
    """Score the pool and keep samples with s >= tau; prints per-class keep rates."""
    cfg = _config(kw)
    outcome = pipeline.filter_stage(cfg, pool, output)
    for line in pipeline.format_keep_rates(outcome.counts):
        click.echo(line)
    click.echo(f"kept={outcome.manifest}\naudit={outcome.audit}")


@main.command("mix")
@common_options
@click.option("--real", type=_PATH, help="Real source manifest (k-shot subset is drawn from it).")
@click.option("--pool", type=_PATH, help="Filtered synthetic pool manifest.")
@click.option("--output", type=_PATH, help="Mixed manifest path.")
@_guarded
def mix_cmd(real, pool, output, **kw):
    """Draw the k-shot subset and add round-half-up(k * ratio) synthetic samples per class."""
    cfg = _config(kw)
    out = pipeline.mix_stage(cfg, real, pool, output)
    click.echo(f"mixed={out}")


@main.command("train")
@common_options
@click.option("--train-manifest", type=_PATH, help="Training manifest.")
@click.option("--eval-manifest", type=_PATH, help="Evaluation manifest.")
@click.option("--checkpoint", type=_PATH, help="Where to write the classifier.")
@_guarded
def train_cmd(train_manifest, eval_manifest, checkpoint, **kw):
    """Train the classifier and evaluate it."""
    cfg = _config(kw)
    r = pipeline.train_stage(cfg, train_manifest, eval_manifest, checkpoint)
    click.echo(f"top1={r.top1:.6f} f1_macro={r.f1_macro:.6f} n={r.n}")


@main.command("eval")
@common_options
@click.option("--checkpoint", type=_PATH, help="Classifier checkpoint.")
@click.option("--manifest", type=_PATH, help="Manifest to evaluate on.")
@click.option("--output", type=_PATH, help="Optional metrics JSON path.")
@_guarded
def eval_cmd(checkpoint, manifest, output, **kw):
    """Evaluate a trained classifier on a manifest."""
    cfg = _config(kw)
    r = pipeline.eval_stage(cfg, checkpoint, manifest, output)
    click.echo(f"top1={r.top1:.6f} f1_macro={r.f1_macro:.6f} n={r.n}")


@main.command("sweep")
@common_options
@click.option("--real", type=_PATH, help="Real source manifest.")
@click.option("--pool", type=_PATH, help="Filtered synthetic pool manifest.")
@click.option("--eval-manifest", type=_PATH, help="Evaluation manifest.")
@click.option("--results", type=_PATH, help="Results table path (CSV).")
@click.option("--plot-data", type=_PATH, help="Plot data path (CSV of x, y, series).")
@_guarded
def sweep_cmd(real, pool, eval_manifest, results, plot_data, **kw):
    """Run every (ratio, seed) cell and write the results table and plot data."""
    cfg = _config(kw)
    _, summary = pipeline.sweep_stage(cfg, real, pool, eval_manifest, results, plot_data)
    for s in summary:
        click.echo(f"ratio={s.ratio:g} mean_top1={s.mean_top1:.4f} std={s.std_top1:.4f} seeds={s.n_seeds}")


if __name__ == "__main__":
    main()
