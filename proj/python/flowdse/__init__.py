"""Design space exploration for flow-production plants."""

from ._core import (
    __version__,
    count_designs,
    design_connections,
    explore,
    pareto_mask,
    rank,
    roi_percent,
    run_cli,
    simulate,
)

__all__ = [
    "__version__",
    "count_designs",
    "design_connections",
    "explore",
    "pareto_mask",
    "rank",
    "roi_percent",
    "run_cli",
    "simulate",
]
