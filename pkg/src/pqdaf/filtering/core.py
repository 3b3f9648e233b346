"""Score parsing, per-sample scoring, and the keep-if-s>=tau filter."""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Literal, Mapping, Sequence

from ..errors import (
    ManifestFormatError,
    ScoreParseError,
    ScorerTransportError,
    UnparseableScoreError,
    ValidationError,
)
from ..samples import Category, LabeledSample, category
from .prompts import DEFAULT_PROMPTS, build_query
from .scorers import Scorer

log = logging.getLogger(__name__)

Decision = Literal["kept", "discarded", "unparseable"]

DEFAULT_TAU = 0.8

# digits glued to a letter (e.g. the "2" in "C2") do not count as a numeral
_NUMERAL = re.compile(r"(?<![A-Za-z0-9_.])[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?")


def parse_score(response: str) -> float:
    """First decimal numeral in ``response``; raises ScoreParseError unless it is in [0, 1]."""
    m = _NUMERAL.search(response or "")
    if m is None:
        raise ScoreParseError("no_numeral", response)
    value = float(m.group(0))
    if not 0.0 <= value <= 1.0:
        raise ScoreParseError("out_of_range", response)
    return value


@dataclass(frozen=True)
class ScoreRecord:
    sample_id: str
    category: Category
    query: str
    raw_response: str
    s: float | None
    parse_error: str | None = None
    decision: Decision | None = None

    def decide(self, tau: float) -> ScoreRecord:
        if self.s is None:
            return replace(self, decision="unparseable")
        return replace(self, decision="kept" if self.s >= tau else "discarded")

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "category_id": self.category.id,
            "query": self.query,
            "raw_response": self.raw_response,
            "s": self.s,
            "parse_error": self.parse_error,
            "decision": self.decision,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> ScoreRecord:
        return cls(d["sample_id"], category(d["category_id"]), d["query"], d["raw_response"],
                   d.get("s"), d.get("parse_error"), d.get("decision"))


@dataclass(frozen=True)
class FilterConfig:
    tau: float = DEFAULT_TAU
    unparseable_policy: Literal["discard", "error"] = "discard"
    max_concurrent_requests: int = 1
    retry_limit: int = 2

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValidationError(f"tau={self.tau} outside [0, 1]")
        if self.unparseable_policy not in ("discard", "error"):
            raise ValidationError(f"unknown unparseable_policy {self.unparseable_policy!r}")
        if self.max_concurrent_requests < 1:
            raise ValidationError("max_concurrent_requests must be >= 1")
        if self.retry_limit < 0:
            raise ValidationError("retry_limit must be >= 0")


def score_sample(scorer: Scorer, sample: LabeledSample, table: Mapping = DEFAULT_PROMPTS,
                 retry_limit: int = 0, image_root: str | Path | None = None) -> ScoreRecord:
    """Query the scorer once (plus up to ``retry_limit`` retries on transport failure)."""
    image = sample.load_image(image_root)
    query = build_query(sample.category, table)
    attempt = 0
    while True:
        try:
            raw = scorer.score(image, query)
            break
        except (ScorerTransportError, ConnectionError, TimeoutError) as exc:
            if attempt >= retry_limit:
                if isinstance(exc, ScorerTransportError):
                    raise
                raise ScorerTransportError(f"sample {sample.id}: {exc}") from exc
            attempt += 1
            log.warning("scorer failure on %s (%s); retry %d/%d", sample.id, exc, attempt, retry_limit)
    raw = str(raw)
    try:
        return ScoreRecord(sample.id, sample.category, query, raw, parse_score(raw))
    except ScoreParseError as exc:
        return ScoreRecord(sample.id, sample.category, query, raw, None, exc.reason)


def filter_samples(
    samples: Sequence[LabeledSample],
    scorer: Scorer,
    config: FilterConfig = FilterConfig(),
    table: Mapping = DEFAULT_PROMPTS,
    image_root: str | Path | None = None,
) -> tuple[list[LabeledSample], list[ScoreRecord]]:
    """Keep the samples whose parsed score satisfies s >= tau.

    Returns ``(kept, audit)``: kept samples in input order with ``score`` set, and
    one decided ScoreRecord per input, also in input order.
    """
    samples = list(samples)

    def run(s: LabeledSample) -> ScoreRecord:
        return score_sample(scorer, s, table, config.retry_limit, image_root).decide(config.tau)

    if config.max_concurrent_requests > 1 and len(samples) > 1:
        with ThreadPoolExecutor(max_workers=config.max_concurrent_requests) as pool:
            audit = list(pool.map(run, samples))
    else:
        audit = [run(s) for s in samples]

    if config.unparseable_policy == "error":
        for rec in audit:
            if rec.decision == "unparseable":
                raise UnparseableScoreError(rec)
    kept = [s.with_score(rec.s) for s, rec in zip(samples, audit) if rec.decision == "kept"]
    return kept, audit


def keep_counts(audit: Iterable[ScoreRecord]) -> dict[Category, dict[str, int]]:
    out: dict[Category, dict[str, int]] = {}
    for rec in audit:
        row = out.setdefault(rec.category, {"kept": 0, "discarded": 0, "unparseable": 0})
        row[rec.decision or "unparseable"] += 1
    return out


def write_audit(records: Iterable[ScoreRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), ensure_ascii=False) + "\n")


def read_audit(path: str | Path) -> list[ScoreRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(ScoreRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValidationError) as exc:
                raise ManifestFormatError(f"bad audit record: {exc}", n) from exc
    return out
