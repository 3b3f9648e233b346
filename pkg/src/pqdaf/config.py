"""Pipeline configuration: one YAML file, flag overrides, validated up front."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Literal

import yaml

from .diffusion.model import GeneratorConfig
from .errors import ValidationError
from .filtering import FilterConfig
from .train_eval.classifier import TrainConfig
from .train_eval.sweep import DEFAULT_RATIOS

ENDPOINT_ENV = "PQDAF_SCORER_ENDPOINT"
CONFIG_ECHO = "config.yaml"


def _build(cls, d: Any, section: str):
    if d is None:
        return cls()
    if not isinstance(d, dict):
        raise ValidationError(f"config section {section!r} must be a mapping")
    unknown = set(d) - {f.name for f in fields(cls)}
    if unknown:
        raise ValidationError(f"unknown keys in {section!r}: {sorted(unknown)}")
    try:
        return cls(**d)
    except TypeError as exc:
        raise ValidationError(f"bad {section!r} section: {exc}") from exc


@dataclass(frozen=True)
class DataSection:
    fewshot_identities: int = 30
    eval_identities: int = 20

    def __post_init__(self):
        if self.fewshot_identities < 1 or self.eval_identities < 1:
            raise ValidationError("identity counts must be >= 1")


@dataclass(frozen=True)
class GenerateSection:
    n_per_class: int = 250
    steps: int | None = None
    w: float | None = None
    batch_size: int = 50

    def __post_init__(self):
        if self.n_per_class < 0:
            raise ValidationError("generate.n_per_class must be >= 0")
        if self.batch_size < 1:
            raise ValidationError("generate.batch_size must be >= 1")
        if self.w is not None and not 0.0 <= self.w <= 1.0:
            raise ValidationError("generate.w must be in [0, 1]")
        if self.steps is not None and self.steps < 1:
            raise ValidationError("generate.steps must be >= 1")


@dataclass(frozen=True)
class FilterSection:
    tau: float = 0.8
    scorer: Literal["mock", "remote"] = "mock"
    scorer_endpoint: str | None = None
    timeout_s: float = 60.0
    mock_response: str | None = None
    mock_salt: str = ""
    unparseable_policy: Literal["discard", "error"] = "discard"
    max_concurrent_requests: int = 1
    retry_limit: int = 2

    def __post_init__(self):
        if self.scorer not in ("mock", "remote"):
            raise ValidationError(f"filter.scorer must be mock or remote, got {self.scorer!r}")
        if self.scorer == "remote" and not self.scorer_endpoint:
            raise ValidationError(f"remote scorer needs --scorer-endpoint or {ENDPOINT_ENV}")
        if self.timeout_s <= 0:
            raise ValidationError("filter.timeout_s must be > 0")
        self.filter_config()

    def filter_config(self) -> FilterConfig:
        return FilterConfig(self.tau, self.unparseable_policy, self.max_concurrent_requests, self.retry_limit)


@dataclass(frozen=True)
class MixSection:
    k_shot: int = 10
    ratio: float = 1.0

    def __post_init__(self):
        if self.k_shot < 1:
            raise ValidationError("mix.k_shot must be >= 1")
        if not self.ratio >= 0:
            raise ValidationError("mix.ratio must be >= 0")


@dataclass(frozen=True)
class SweepSection:
    ratios: tuple[float, ...] = DEFAULT_RATIOS
    seeds: tuple[int, ...] = (0, 1, 2)

    def __post_init__(self):
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.ratios or any(r < 0 for r in self.ratios):
            raise ValidationError("sweep.ratios must be a non-empty list of values >= 0")
        if not self.seeds:
            raise ValidationError("sweep.seeds must be non-empty")


@dataclass(frozen=True)
class PipelineConfig:
    """Merged settings for every stage.

    ``seed`` drives pool sampling, few-shot subsetting, mixing and classifier
    init. Generator training keeps its own ``generator.seed`` so one checkpoint
    can serve many pipeline seeds.
    """

    seed: int = 0
    deterministic: bool = True
    out_dir: str = "runs/default"
    data: DataSection = field(default_factory=DataSection)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    generate: GenerateSection = field(default_factory=GenerateSection)
    filter: FilterSection = field(default_factory=FilterSection)
    mix: MixSection = field(default_factory=MixSection)
    train: TrainConfig = field(default_factory=TrainConfig)
    sweep: SweepSection = field(default_factory=SweepSection)

    @classmethod
    def from_dict(cls, d: dict | None) -> PipelineConfig:
        d = dict(d or {})
        sections = {"data": DataSection, "generator": GeneratorConfig, "generate": GenerateSection,
                    "filter": FilterSection, "mix": MixSection, "train": TrainConfig, "sweep": SweepSection}
        scalars = {"seed", "deterministic", "out_dir"}
        unknown = set(d) - set(sections) - scalars
        if unknown:
            raise ValidationError(f"unknown config keys {sorted(unknown)}")
        kw = {k: _build(c, d.get(k), k) for k, c in sections.items()}
        kw.update({k: d[k] for k in scalars if k in d})
        if not isinstance(kw.get("seed", 0), int) or kw.get("seed", 0) < 0:
            raise ValidationError("seed must be a non-negative integer")
        return cls(**kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sweep"] = {"ratios": list(self.sweep.ratios), "seeds": list(self.sweep.seeds)}
        return d

    def sampler_seed(self) -> int:
        return self.seed

    def train_config(self) -> TrainConfig:
        return replace(self.train, seed=self.seed, deterministic=self.deterministic)

    def echo(self, directory: str | Path) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / CONFIG_ECHO
        path.write_text(yaml.safe_dump(self.to_dict(), sort_keys=True), encoding="utf-8")
        return path


def load_config(path: str | Path | None = None, overrides: dict | None = None,
                env: dict | None = None) -> PipelineConfig:
    """File, then environment, then flags. ``overrides`` uses dotted keys,
    e.g. ``{"mix.k_shot": 5, "filter.tau": 0.7}``; ``None`` values are ignored."""
    raw: dict = {}
    if path is not None:
        try:
            raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except OSError as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ValidationError(f"config {path} is not valid YAML: {exc}") from exc
        if not isinstance(raw, dict):
            raise ValidationError(f"config {path} must hold a mapping")
    env = os.environ if env is None else env
    if env.get(ENDPOINT_ENV):
        raw.setdefault("filter", {})
        raw["filter"] = {**(raw["filter"] or {}), "scorer_endpoint": env[ENDPOINT_ENV]}
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        node = raw
        *parents, leaf = key.split(".")
        for p in parents:
            node[p] = dict(node.get(p) or {})
            node = node[p]
        node[leaf] = value
    return PipelineConfig.from_dict(raw)
