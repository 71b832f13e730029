"""Slot-synchronous SINR radio simulator with local broadcast primitives.

The package layers as follows: `model` holds the physical-layer arithmetic,
`graphs` the induced geometric graphs, `reliability` the link-quality
oracles, `engine` the deterministic slot loop, `ack` and `progress` the two
broadcast primitives, `mac` their interleaved combination, `protocols` the
network-wide broadcast built on top, and `experiments`/`cli` the harness.
"""

__version__ = "0.1.0"

from .model import (
    SinrParams,
    Topology,
    DerivedRanges,
    transmission_range,
    interference_at,
    sinr_at,
    is_received,
    received_from,
    lambda_ratio,
)
from .experiments import ExperimentConfig, MetricsRecord, run_experiment
from .lowerbound import brute_force_progress_lb, gen_two_line_lb

__all__ = [
    "SinrParams",
    "Topology",
    "DerivedRanges",
    "transmission_range",
    "interference_at",
    "sinr_at",
    "is_received",
    "received_from",
    "lambda_ratio",
    "ExperimentConfig",
    "MetricsRecord",
    "run_experiment",
    "brute_force_progress_lb",
    "gen_two_line_lb",
    "__version__",
]
