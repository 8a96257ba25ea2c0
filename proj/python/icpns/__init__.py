"""Negative-sampling lab: python surface over the C++ core."""

from ._core import (
    AliasSampler,
    __version__,
    canonical_report,
    compare_strategies,
    generate_synthetic,
    kcore,
    prep,
    ranking_metrics,
    run_experiment,
)

__all__ = [
    "AliasSampler",
    "__version__",
    "canonical_report",
    "compare_strategies",
    "generate_synthetic",
    "kcore",
    "prep",
    "ranking_metrics",
    "run_experiment",
]
