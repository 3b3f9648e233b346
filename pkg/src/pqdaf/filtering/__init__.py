from .core import (
    DEFAULT_TAU,
    FilterConfig,
    ScoreRecord,
    filter_samples,
    keep_counts,
    parse_score,
    read_audit,
    score_sample,
    write_audit,
)
from .prompts import DEFAULT_PROMPTS, PROMPTS, QUERY_TEMPLATE, PromptTable, build_query
from .scorers import CallableScorer, FixedScorer, HashScorer, RemoteScorer, Scorer

filter = filter_samples  # noqa: A001

__all__ = [
    "DEFAULT_PROMPTS", "DEFAULT_TAU", "PROMPTS", "QUERY_TEMPLATE", "CallableScorer", "FilterConfig",
    "FixedScorer", "HashScorer", "PromptTable", "RemoteScorer", "ScoreRecord", "Scorer", "build_query",
    "filter", "filter_samples", "keep_counts", "parse_score", "read_audit", "score_sample", "write_audit",
]
