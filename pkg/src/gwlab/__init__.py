"""Coupled biased random walks on leafless Galton-Watson trees.

Simulation of the three-walk coupling, regeneration detection, segment
statistics and the closed-form bounds they are checked against.
"""
from .bounds import (
    BoundReport,
    C_of_beta,
    bound_report,
    escape_probability,
    lemma_bounds,
    p_inf,
    threshold_search,
    theorem3_rate,
)
from .coupling import BiasParams, CapacityError, make_partition, run_trajectory
from .enumeration import enumerate_paths
from .offspring import OffspringDistribution, make_distribution, parse_spec
from .regeneration import RegenConfig, detect_regens, split_segments
from .segments import (
    classify_table,
    gap_estimator,
    lemma_audit,
    prob_table,
    speed_ergodic,
    speed_regen,
)

__version__ = "0.1.0"

__all__ = [
    "BiasParams",
    "BoundReport",
    "C_of_beta",
    "CapacityError",
    "OffspringDistribution",
    "RegenConfig",
    "bound_report",
    "classify_table",
    "detect_regens",
    "enumerate_paths",
    "escape_probability",
    "gap_estimator",
    "lemma_audit",
    "lemma_bounds",
    "make_distribution",
    "make_partition",
    "p_inf",
    "parse_spec",
    "prob_table",
    "run_trajectory",
    "speed_ergodic",
    "speed_regen",
    "split_segments",
    "theorem3_rate",
    "threshold_search",
]
