"""Named experiment presets used by the CLI and the verification suite."""

from __future__ import annotations

import math

from .simulator import ConfigError, ExperimentConfig, parse_config_dict

__all__ = ["PRESETS", "preset_names", "get_preset"]

_SQRT10_HALF = repr(math.sqrt(10.0) / 2.0)

_RING8_QUADRATIC = {
    "graph.kind": "ring",
    "graph.n": "8",
    "problem.kind": "quadratic",
    "problem.d": "10",
    "problem.kappa": "10.0",
    "problem.heterogeneity": "heterogeneous",
    "problem.spread": "3.0",
    "problem.seed": "12345",
}

_RING8_COMM = {
    "graph.kind": "ring",
    "graph.n": "8",
    "problem.kind": "quadratic",
    "problem.d": "1000",
    "problem.kappa": "10.0",
    "problem.heterogeneity": "heterogeneous",
    "problem.spread": "3.0",
    "problem.seed": "777",
    "rounds": "100",
    "seed": "7",
    "ecl.theta": "1.0",
    "ecl.alpha": "1.0",
    "ecl.solver": "exact",
}

PRESETS: dict[str, dict] = {
    # minimal two-node instance with a short hand-checkable trajectory:
    # converges exactly at round 2
    "two-node-trace": {
        "seed": "42",
        "rounds": "6",
        "graph.kind": "chain",
        "graph.n": "2",
        "problem.kind": "scalar-means",
        "problem.means": "1.0,3.0",
        "algorithm": "ecl",
        "ecl.theta": "1.0",
        "ecl.alpha": "1.0",
        "ecl.solver": "exact",
    },
    # ring instance with curvature range [1, 10] and the balanced
    # penalty weight alpha = sqrt(10)/2, uncompressed
    "ring8-quadratic-ecl": {
        **_RING8_QUADRATIC,
        "seed": "1",
        "rounds": "40",
        "track_z_residual": "true",
        "algorithm": "ecl",
        "ecl.theta": "1.0",
        "ecl.alpha": _SQRT10_HALF,
        "ecl.solver": "exact",
    },
    # same instance under rand-96% (admissible quality for its delta)
    "ring8-quadratic-cecl96": {
        **_RING8_QUADRATIC,
        "seed": "1000",
        "rounds": "450",
        "track_z_residual": "true",
        "algorithm": "cecl",
        "ecl.theta": "1.0",
        "ecl.alpha": _SQRT10_HALF,
        "ecl.solver": "exact",
        "ecl.compression": "rand-k",
        "ecl.k_percent": "96.0",
    },
    # quality below the admissible threshold for alpha = 1 (delta = 2/3):
    # no certified rate; kept as a boundary experiment
    "ring8-quadratic-cecl90-inadmissible": {
        **_RING8_QUADRATIC,
        "seed": "77",
        "rounds": "500",
        "algorithm": "cecl",
        "ecl.theta": "1.0",
        "ecl.alpha": "1.0",
        "ecl.solver": "exact",
        "ecl.compression": "rand-k",
        "ecl.k_percent": "90.0",
    },
    # heterogeneous scalar line c_i = i on ring(8): the client-drift
    # contrast instance, compressed splitting side
    "ring8-hetero-cecl-k20": {
        "seed": "5",
        "rounds": "500",
        "graph.kind": "ring",
        "graph.n": "8",
        "problem.kind": "scalar-line",
        "algorithm": "cecl",
        "ecl.theta": "1.0",
        "ecl.alpha": "auto",
        "ecl.solver": "inexact",
        "ecl.eta": "0.05",
        "ecl.local_steps": "5",
        "ecl.compression": "rand-k",
        "ecl.k_percent": "20.0",
    },
    # same instance, gossip baseline side
    "ring8-hetero-gossip": {
        "seed": "5",
        "rounds": "500",
        "graph.kind": "ring",
        "graph.n": "8",
        "problem.kind": "scalar-line",
        "algorithm": "gossip",
        "gossip.eta": "0.05",
        "gossip.local_steps": "5",
    },
    # communication-accounting trio: d = 1000, dense vs rand-10% vs rand-1%
    "ring8-comm-ecl": {
        **_RING8_COMM,
        "algorithm": "ecl",
    },
    "ring8-comm-cecl-k10": {
        **_RING8_COMM,
        "algorithm": "cecl",
        "ecl.compression": "rand-k",
        "ecl.k_percent": "10.0",
    },
    "ring8-comm-cecl-k1": {
        **_RING8_COMM,
        "algorithm": "cecl",
        "ecl.compression": "rand-k",
        "ecl.k_percent": "1.0",
    },
}


def preset_names() -> list[str]:
    return sorted(PRESETS)


def get_preset(name: str) -> ExperimentConfig:
    try:
        flat = PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}"
        ) from None
    return parse_config_dict(flat)
