"""Decentralized consensus optimization via primal-dual splitting.

A round-based simulator for edge-consensus learning (nodes exchange
per-edge dual variables), its communication-compressed variant (the
dual increments cross the wire through a randomized linear masker with
seeds synchronized per edge), a gossip baseline, and a closed-form
calculator for the certified linear convergence rates on strongly
convex instances.
"""

from .compression import (
    CompressionOperator,
    MaskStream,
    Payload,
    apply,
    derive_mask,
    verify_contract,
)
from .ecl import EclConfig, EclNetwork, InMemoryTransport
from .gossip import GossipConfig, GossipNetwork
from .objective import (
    LogisticObjective,
    QuadraticObjective,
    SpectrumReport,
    centralized_optimum,
    prox_exact,
    prox_inexact,
)
from .simulator import (
    ExperimentConfig,
    RoundMetrics,
    RunResult,
    parse_config_text,
    run,
    summary,
    to_csv,
)
from .theory import alpha_rule, build_report, contraction_factor, delta, tau_min, theta_interval
from .topology import Graph, build_preset, constraint_sign, degree_bounds, mh_weights

__version__ = "0.1.0"

__all__ = [
    "CompressionOperator", "MaskStream", "Payload", "apply", "derive_mask",
    "verify_contract",
    "EclConfig", "EclNetwork", "InMemoryTransport",
    "GossipConfig", "GossipNetwork",
    "LogisticObjective", "QuadraticObjective", "SpectrumReport",
    "centralized_optimum", "prox_exact", "prox_inexact",
    "ExperimentConfig", "RoundMetrics", "RunResult",
    "parse_config_text", "run", "summary", "to_csv",
    "alpha_rule", "build_report", "contraction_factor", "delta", "tau_min",
    "theta_interval",
    "Graph", "build_preset", "constraint_sign", "degree_bounds", "mh_weights",
    "__version__",
]
