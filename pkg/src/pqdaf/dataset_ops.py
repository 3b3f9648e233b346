"""Manifest persistence, few-shot subsetting, and real/synthetic mixing."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

import numpy as np

from .errors import ManifestFormatError, ManifestVersionError, ShortfallError, ValidationError
from .samples import CATEGORIES, DatasetManifest, LabeledSample, category

FORMAT_VERSION = 1
HEADER_FIELDS = ("format_version", "split", "seed")
RECORD_FIELDS = ("id", "path", "category_id", "provenance", "score")


# --- persistence ------------------------------------------------------------


def record_to_dict(r: LabeledSample) -> dict:
    if r.path is None:
        raise ValidationError(f"record {r.id} has no file path; save its image first")
    d = {"id": r.id, "path": r.path, "category_id": r.category.id, "provenance": r.provenance}
    if r.score is not None:
        d["score"] = r.score
    return d


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    """JSON lines: a header object, then one object per record.

    Relative record paths are rewritten to stay valid from the new file's directory.
    """
    path = Path(path)
    dest = path.parent.resolve()
    records = manifest.records
    if manifest.root is not None and Path(manifest.root).resolve() != dest:
        root = Path(manifest.root).resolve()
        records = [
            dataclasses.replace(r, path=os.path.relpath(root / r.path, dest))
            if r.path is not None else r
            for r in records
        ]
    lines = [json.dumps({"format_version": FORMAT_VERSION, "split": manifest.split, "seed": manifest.seed})]
    lines += [json.dumps(record_to_dict(r)) for r in records]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _record_from_dict(d: dict, line: int) -> LabeledSample:
    if not isinstance(d, dict):
        raise ManifestFormatError("record is not an object", line)
    missing = [f for f in ("id", "path", "category_id", "provenance") if f not in d]
    if missing:
        raise ManifestFormatError(f"record missing field(s) {missing}", line)
    unknown = set(d) - set(RECORD_FIELDS)
    if unknown:
        raise ManifestFormatError(f"unknown record field(s) {sorted(unknown)}", line)
    try:
        return LabeledSample(str(d["id"]), category(d["category_id"]), d["provenance"],
                             path=str(d["path"]), score=d.get("score"))
    except ValidationError as exc:
        raise ManifestFormatError(str(exc), line) from exc


def read_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read manifest {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines:
        raise ManifestFormatError("empty manifest (no header)", 1)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ManifestFormatError(f"header is not valid JSON: {exc}", 1) from exc
    if not isinstance(header, dict) or any(f not in header for f in HEADER_FIELDS):
        raise ManifestFormatError(f"header must carry {list(HEADER_FIELDS)}", 1)
    if header["format_version"] != FORMAT_VERSION:
        raise ManifestVersionError(
            f"{path}: manifest format_version {header['format_version']!r} not supported "
            f"(expected {FORMAT_VERSION})")
    records = []
    for n, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        try:
            d = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ManifestFormatError(f"invalid JSON: {exc}", n) from exc
        records.append(_record_from_dict(d, n))
    try:
        return DatasetManifest(tuple(records), split=header["split"], seed=int(header["seed"]),
                               root=path.parent.resolve())
    except ValidationError as exc:
        raise ManifestFormatError(str(exc)) from exc


# --- subsetting and mixing --------------------------------------------------


def round_half_up(x) -> int:
    return int(Decimal(repr(x) if isinstance(x, float) else str(x)).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def few_shot_subset(source: DatasetManifest, k: int, seed: int) -> DatasetManifest:
    """Exactly ``k`` real samples per class, drawn uniformly without replacement."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    rng = np.random.default_rng([seed, 0x5EED])
    groups = {c: [r for r in rs if r.provenance == "real"] for c, rs in source.by_category().items()}
    chosen = []
    for cat in CATEGORIES:
        pool = groups[cat]
        if len(pool) < k:
            raise ShortfallError(cat, len(pool), k, "real samples")
        idx = np.sort(rng.choice(len(pool), size=k, replace=False))
        chosen.extend(pool[i] for i in idx)
    return source.replace(records=chosen, seed=seed)


@dataclass(frozen=True)
class MixSpec:
    ratio: float
    k_shot: int
    seed: int = 0

    def __post_init__(self):
        if not (self.ratio >= 0):
            raise ValidationError(f"ratio must be >= 0, got {self.ratio}")
        if self.k_shot < 1:
            raise ValidationError("k_shot must be >= 1")

    @property
    def synthetic_per_class(self) -> int:
        return round_half_up(Decimal(repr(float(self.ratio))) * self.k_shot)


def mix(real: DatasetManifest, synthetic_pool: DatasetManifest, spec: MixSpec) -> DatasetManifest:
    """Per class: all k_shot real samples plus round-half-up(k_shot * ratio) pool samples,
    then a seeded shuffle of the whole set."""
    real_groups = real.by_category()
    for cat, rs in real_groups.items():
        if len(rs) != spec.k_shot or any(r.provenance != "real" for r in rs):
            raise ValidationError(f"real manifest must hold exactly {spec.k_shot} real samples of "
                                  f"{cat.code}; found {len(rs)}")
    bad = [r.id for r in synthetic_pool if r.provenance != "synthetic" or r.score is None]
    if bad:
        raise ValidationError(f"synthetic pool has unscored or non-synthetic records, e.g. {bad[:3]}")
    n_synth = spec.synthetic_per_class
    rng = np.random.default_rng([spec.seed, 0x313])
    pool_groups = synthetic_pool.by_category()
    if n_synth == 0:
        return real.replace(split="train", seed=spec.seed)
    out = [r for cat in CATEGORIES for r in real_groups[cat]]
    for cat in CATEGORIES:
        pool = pool_groups[cat]
        if len(pool) < n_synth:
            raise ShortfallError(cat, len(pool), n_synth, "synthetic samples")
        idx = np.sort(rng.choice(len(pool), size=n_synth, replace=False))
        out.extend(pool[i] for i in idx)
    out = _rebase(out, real, synthetic_pool)
    order = rng.permutation(len(out))
    return DatasetManifest(tuple(out[i] for i in order), split="train", seed=spec.seed, root=real.root)


def _rebase(records: list[LabeledSample], real: DatasetManifest, pool: DatasetManifest) -> list[LabeledSample]:
    """Make pool record paths resolve against the real manifest's root."""
    if real.root is None or pool.root is None or real.root == pool.root:
        return records
    pool_ids = {r.id for r in pool}
    out = []
    for r in records:
        if r.id in pool_ids and r.path is not None and not Path(r.path).is_absolute():
            r = dataclasses.replace(r, path=str((Path(pool.root) / r.path).resolve()))
        out.append(r)
    return out
