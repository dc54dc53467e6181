"""Deterministic round-loop harness: configs, partitioning, metrics, CSV.

Configs are flat key=value text with dotted section prefixes, e.g.::

    seed=42
    rounds=100
    graph.kind=ring
    graph.n=8
    problem.kind=quadratic
    problem.d=10
    problem.kappa=10.0
    problem.heterogeneity=heterogeneous
    algorithm=cecl
    ecl.theta=1.0
    ecl.alpha=1.0
    ecl.compression=rand-k
    ecl.k_percent=10.0

Blank lines and '#' comments are ignored. A fixed seed makes the whole
run reproducible down to the CSV bytes. See README.md for the full key
reference.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass

import numpy as np

from .compression import CompressionOperator
from .ecl import EclConfig, EclNetwork, resolve_alphas
from .gossip import GossipConfig, GossipNetwork
from .objective import (
    QuadraticObjective,
    SpectrumReport,
    centralized_optimum,
    synthesize_quadratics,
)
from .theory import build_report
from .topology import Graph, build_preset, degree_bounds, load_edge_list, mh_weights

__all__ = [
    "ConfigError",
    "DivergenceError",
    "GraphSpec",
    "ProblemSpec",
    "ExperimentConfig",
    "RoundMetrics",
    "RunResult",
    "parse_config_text",
    "parse_config_dict",
    "dump_config",
    "build_graph",
    "partition",
    "compute_fixed_point",
    "run",
    "to_csv",
    "summary",
    "geometric_rate",
]

DIVERGENCE_FACTOR = 1e6
CSV_HEADER = "round,dist_to_opt,consensus_err,z_residual,bytes_sent,cum_bytes"


class ConfigError(ValueError):
    """A configuration failed to parse or violated a constraint."""


class DivergenceError(RuntimeError):
    """Iterates blew up; carries the offending round and partial metrics."""

    def __init__(self, round_index: int, metrics, message: str):
        super().__init__(message)
        self.round_index = round_index
        self.metrics = metrics


@dataclass(frozen=True)
class GraphSpec:
    kind: str
    n: int = 0
    path: str | None = None


@dataclass(frozen=True)
class ProblemSpec:
    kind: str
    d: int = 1
    kappa: float = 1.0
    heterogeneity: str = "heterogeneous"
    spread: float = 3.0
    seed: int = 0
    means: tuple | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    rounds: int
    graph: GraphSpec
    problem: ProblemSpec
    algorithm: str
    metric_stride: int = 1
    track_z_residual: bool = False
    ecl: EclConfig | None = None
    gossip_eta: float | None = None
    gossip_local_steps: int = 1


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    dist_to_opt: float
    consensus_err: float
    z_residual: float
    bytes_sent: int
    cum_bytes: int


@dataclass
class RunResult:
    config: ExperimentConfig
    graph: Graph
    metrics: list
    w_star: np.ndarray
    spectrum: SpectrumReport
    z_fixed: np.ndarray | None
    final_w: np.ndarray
    alphas: tuple | None


# ---------------------------------------------------------------------------
# config parsing

_GRAPH_KINDS = ("chain", "ring", "multiplex-ring", "complete", "edge-list")
_PROBLEM_KINDS = ("quadratic", "scalar-line", "scalar-means")
_ALGORITHMS = ("ecl", "cecl", "gossip")

_KNOWN_KEYS = {
    "seed", "rounds", "metric_stride", "track_z_residual", "algorithm",
    "graph.kind", "graph.n", "graph.path",
    "problem.kind", "problem.d", "problem.kappa", "problem.heterogeneity",
    "problem.spread", "problem.seed", "problem.means",
    "ecl.theta", "ecl.alpha", "ecl.solver", "ecl.eta", "ecl.local_steps",
    "ecl.compression", "ecl.k_percent", "ecl.warmup_rounds", "ecl.w0",
    "gossip.eta", "gossip.local_steps",
}


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse flat key=value config text into a validated ExperimentConfig."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = stripped.split("=", 1)
        key, value = key.strip(), value.strip()
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return parse_config_dict(raw)


def parse_config_dict(raw: dict) -> ExperimentConfig:
    """Validate a flat string->string mapping into an ExperimentConfig."""
    raw = dict(raw)
    unknown = sorted(set(raw) - _KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

    seed = _get_int(raw, "seed", default=0, minimum=0)
    rounds = _get_int(raw, "rounds", required=True, minimum=1)
    stride = _get_int(raw, "metric_stride", default=1, minimum=1)
    track = _get_bool(raw, "track_z_residual", default=False)

    graph = _parse_graph(raw)
    problem = _parse_problem(raw, default_seed=seed)

    algorithm = _get_choice(raw, "algorithm", _ALGORITHMS, required=True)
    ecl_cfg = None
    gossip_eta = None
    gossip_steps = 1
    if algorithm in ("ecl", "cecl"):
        _reject_keys(raw, ("gossip.eta", "gossip.local_steps"),
                     f"algorithm={algorithm}")
        ecl_cfg = _parse_ecl(raw, algorithm)
        if track and algorithm == "gossip":
            raise ConfigError("track_z_residual applies to splitting algorithms only")
    else:
        ecl_keys = [k for k in raw if k.startswith("ecl.")]
        _reject_keys(raw, ecl_keys, "algorithm=gossip")
        if track:
            raise ConfigError("track_z_residual applies to splitting algorithms only")
        gossip_eta = _get_float(raw, "gossip.eta", required=True, minimum=0.0,
                                inclusive=True)
        gossip_steps = _get_int(raw, "gossip.local_steps", default=1, minimum=1)

    return ExperimentConfig(
        seed=seed,
        rounds=rounds,
        metric_stride=stride,
        track_z_residual=track,
        graph=graph,
        problem=problem,
        algorithm=algorithm,
        ecl=ecl_cfg,
        gossip_eta=gossip_eta,
        gossip_local_steps=gossip_steps,
    )


def _parse_graph(raw: dict) -> GraphSpec:
    kind = _get_choice(raw, "graph.kind", _GRAPH_KINDS, required=True)
    if kind == "edge-list":
        path = raw.get("graph.path")
        if not path:
            raise ConfigError("graph.path is required for graph.kind=edge-list")
        return GraphSpec(kind=kind, path=path)
    if "graph.path" in raw:
        raise ConfigError("graph.path only applies to graph.kind=edge-list")
    n = _get_int(raw, "graph.n", required=True, minimum=2)
    return GraphSpec(kind=kind, n=n)


def _parse_problem(raw: dict, default_seed: int) -> ProblemSpec:
    kind = _get_choice(raw, "problem.kind", _PROBLEM_KINDS, required=True)
    pseed = _get_int(raw, "problem.seed", default=default_seed, minimum=0)
    if kind == "quadratic":
        _reject_keys(raw, ("problem.means",), "problem.kind=quadratic")
        d = _get_int(raw, "problem.d", required=True, minimum=1)
        kappa = _get_float(raw, "problem.kappa", default=1.0, minimum=1.0,
                           inclusive=True)
        het = _get_choice(raw, "problem.heterogeneity",
                          ("homogeneous", "heterogeneous"),
                          default="heterogeneous")
        spread = _get_float(raw, "problem.spread", default=3.0, minimum=0.0,
                            inclusive=True)
        return ProblemSpec(kind=kind, d=d, kappa=kappa, heterogeneity=het,
                           spread=spread, seed=pseed)
    _reject_keys(raw, ("problem.d", "problem.kappa", "problem.heterogeneity",
                       "problem.spread"), f"problem.kind={kind}")
    if kind == "scalar-means":
        means_text = raw.get("problem.means")
        if not means_text:
            raise ConfigError("problem.means is required for problem.kind=scalar-means")
        try:
            means = tuple(float(v) for v in means_text.split(","))
        except ValueError:
            raise ConfigError(f"problem.means: expected comma-separated numbers, "
                              f"got {means_text!r}") from None
        return ProblemSpec(kind=kind, d=1, seed=pseed, means=means)
    _reject_keys(raw, ("problem.means",), "problem.kind=scalar-line")
    return ProblemSpec(kind=kind, d=1, seed=pseed)


def _parse_ecl(raw: dict, algorithm: str) -> EclConfig:
    comp_kind = _get_choice(raw, "ecl.compression", ("identity", "rand-k"),
                            default="identity")
    if algorithm == "ecl" and comp_kind != "identity":
        raise ConfigError("algorithm=ecl exchanges dense payloads; "
                          "use algorithm=cecl for rand-k compression")
    if comp_kind == "rand-k":
        k = _get_float(raw, "ecl.k_percent", required=True, minimum=0.0,
                       maximum=100.0, inclusive_max=True)
        comp = CompressionOperator.rand_k(k)
    else:
        if "ecl.k_percent" in raw:
            raise ConfigError("ecl.k_percent only applies to ecl.compression=rand-k")
        comp = CompressionOperator.identity()

    alpha_text = raw.get("ecl.alpha", "1.0")
    alpha: float | str
    if alpha_text == "auto":
        alpha = "auto"
    else:
        alpha = _get_float(raw, "ecl.alpha", default=1.0)

    try:
        return EclConfig(
            theta=_get_float(raw, "ecl.theta", default=1.0),
            alpha=alpha,
            solver=_get_choice(raw, "ecl.solver", ("exact", "inexact"),
                               default="exact"),
            eta=_get_float(raw, "ecl.eta", default=None, minimum=0.0),
            local_steps=_get_int(raw, "ecl.local_steps", default=1, minimum=1),
            compression=comp,
            warmup_rounds=_get_int(raw, "ecl.warmup_rounds", default=0, minimum=0),
            w0=_get_float(raw, "ecl.w0", default=0.0),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def dump_config(cfg: ExperimentConfig) -> str:
    """Serialize a config back to canonical flat text (round-trips exactly)."""
    pairs: list[tuple[str, str]] = [
        ("seed", str(cfg.seed)),
        ("rounds", str(cfg.rounds)),
        ("metric_stride", str(cfg.metric_stride)),
        ("track_z_residual", "true" if cfg.track_z_residual else "false"),
        ("graph.kind", cfg.graph.kind),
    ]
    if cfg.graph.kind == "edge-list":
        pairs.append(("graph.path", cfg.graph.path))
    else:
        pairs.append(("graph.n", str(cfg.graph.n)))
    pairs.append(("problem.kind", cfg.problem.kind))
    pairs.append(("problem.seed", str(cfg.problem.seed)))
    if cfg.problem.kind == "quadratic":
        pairs += [
            ("problem.d", str(cfg.problem.d)),
            ("problem.kappa", repr(cfg.problem.kappa)),
            ("problem.heterogeneity", cfg.problem.heterogeneity),
            ("problem.spread", repr(cfg.problem.spread)),
        ]
    elif cfg.problem.kind == "scalar-means":
        pairs.append(("problem.means", ",".join(repr(m) for m in cfg.problem.means)))
    pairs.append(("algorithm", cfg.algorithm))
    if cfg.algorithm in ("ecl", "cecl"):
        e = cfg.ecl
        pairs += [
            ("ecl.theta", repr(e.theta)),
            ("ecl.alpha", e.alpha if isinstance(e.alpha, str) else repr(e.alpha)),
            ("ecl.solver", e.solver),
            ("ecl.local_steps", str(e.local_steps)),
            ("ecl.warmup_rounds", str(e.warmup_rounds)),
            ("ecl.w0", repr(e.w0)),
        ]
        if e.eta is not None:
            pairs.append(("ecl.eta", repr(e.eta)))
        pairs.append(("ecl.compression", e.compression.kind))
        if e.compression.kind == "rand-k":
            pairs.append(("ecl.k_percent", repr(e.compression.k_percent)))
    else:
        pairs += [
            ("gossip.eta", repr(cfg.gossip_eta)),
            ("gossip.local_steps", str(cfg.gossip_local_steps)),
        ]
    return "\n".join(f"{k}={v}" for k, v in pairs) + "\n"


# ---------------------------------------------------------------------------
# experiment assembly

def build_graph(spec: GraphSpec) -> Graph:
    if spec.kind == "edge-list":
        return load_edge_list(spec.path)
    return build_preset(spec.kind, spec.n)


def partition(spec: ProblemSpec, n_nodes: int) -> list:
    """Instantiate the per-node objectives for a problem spec.

    quadratic: seeded synthetic instances with exact curvature range
    [1, kappa]; linear terms clustered (homogeneous) or scattered with
    scale `spread` (heterogeneous). scalar-line: one-dimensional
    quadratics with per-node minima 0, 1, ..., n-1. scalar-means: the
    same with explicit minima.
    """
    if spec.kind == "quadratic":
        return synthesize_quadratics(n_nodes, spec.d, spec.kappa,
                                     spec.heterogeneity, spec.spread, spec.seed)
    if spec.kind == "scalar-line":
        means = tuple(float(i) for i in range(n_nodes))
    else:
        means = spec.means
        if len(means) != n_nodes:
            raise ConfigError(
                f"problem.means lists {len(means)} values for {n_nodes} nodes"
            )
    return [QuadraticObjective(np.array([[1.0]]), np.array([m])) for m in means]


def compute_fixed_point(graph: Graph, objectives, ecl_cfg: EclConfig,
                        tol: float = 1e-12, max_rounds: int = 100000) -> np.ndarray:
    """Limit of the uncompressed dual iteration from zero initialization.

    Runs the identity-compression variant of the given config until the
    stacked z moves by at most tol per round, and returns that z.
    """
    identity_cfg = dataclasses.replace(
        ecl_cfg, compression=CompressionOperator.identity(), warmup_rounds=0
    )
    # keep the original per-node penalty weights: the "auto" rule depends
    # on the compression keep rate, and the fixed point depends on alpha
    net = EclNetwork(graph, objectives, identity_cfg, seed=0,
                     alphas=resolve_alphas(graph, ecl_cfg))
    net.run_to_fixed_point(tol=tol, max_rounds=max_rounds)
    return net.stacked_z()


def _env_threads() -> int:
    text = os.environ.get("CONSENSUS_SPLITTING_THREADS", "").strip()
    if not text:
        return 0
    try:
        value = int(text)
    except ValueError:
        raise ConfigError(
            f"CONSENSUS_SPLITTING_THREADS must be an integer, got {text!r}"
        ) from None
    return max(value, 0)


def run(cfg: ExperimentConfig, threads: int | None = None) -> RunResult:
    """Execute one experiment; fully deterministic given the config.

    Raises DivergenceError when iterates go non-finite or the distance
    to the optimum exceeds 1e6 times its initial value.
    """
    if threads is None:
        threads = _env_threads()
    graph = build_graph(cfg.graph)
    objectives = partition(cfg.problem, graph.n_nodes)
    w_star, spectrum = centralized_optimum(objectives)

    z_fixed = None
    alphas = None
    if cfg.algorithm in ("ecl", "cecl"):
        if cfg.track_z_residual:
            z_fixed = compute_fixed_point(graph, objectives, cfg.ecl)
        net = EclNetwork(graph, objectives, cfg.ecl, seed=cfg.seed, threads=threads)
        alphas = net.alphas
    else:
        gcfg = GossipConfig(eta=cfg.gossip_eta, local_steps=cfg.gossip_local_steps,
                            weights=mh_weights(graph))
        net = GossipNetwork(graph, objectives, gcfg)

    def dist_now() -> float:
        return float(np.linalg.norm(net.stacked_w() - w_star[None, :]))

    dist0 = dist_now()
    guard = DIVERGENCE_FACTOR * (dist0 if dist0 > 0.0 else 1.0)

    metrics: list[RoundMetrics] = []
    cum = 0
    for r in range(1, cfg.rounds + 1):
        nbytes = net.run_round(r - 1)
        cum += nbytes
        dist = dist_now()
        if not math.isfinite(dist) or dist > guard:
            raise DivergenceError(
                r, metrics,
                f"divergence guard tripped at round {r}: dist_to_opt={dist:.6g} "
                f"(initial {dist0:.6g})",
            )
        if r % cfg.metric_stride == 0:
            if z_fixed is not None:
                z_res = float(np.linalg.norm(net.stacked_z() - z_fixed))
            else:
                z_res = float("nan")
            metrics.append(RoundMetrics(
                round=r,
                dist_to_opt=dist,
                consensus_err=net.consensus_error(),
                z_residual=z_res,
                bytes_sent=nbytes,
                cum_bytes=cum,
            ))
    return RunResult(
        config=cfg,
        graph=graph,
        metrics=metrics,
        w_star=w_star,
        spectrum=spectrum,
        z_fixed=z_fixed,
        final_w=net.stacked_w(),
        alphas=alphas,
    )


# ---------------------------------------------------------------------------
# output

def _fmt(x: float) -> str:
    return repr(float(x))


def to_csv(result_or_metrics, seed: int | None = None) -> str:
    """Render metrics as CSV, headed by a seed comment for replay."""
    if isinstance(result_or_metrics, RunResult):
        metrics = result_or_metrics.metrics
        seed = result_or_metrics.config.seed
    else:
        metrics = result_or_metrics
        if seed is None:
            raise ValueError("seed is required when passing bare metrics")
    lines = [f"# seed={seed}", CSV_HEADER]
    for m in metrics:
        lines.append(
            f"{m.round},{_fmt(m.dist_to_opt)},{_fmt(m.consensus_err)},"
            f"{_fmt(m.z_residual)},{m.bytes_sent},{m.cum_bytes}"
        )
    return "\n".join(lines) + "\n"


def geometric_rate(values, first: int, last: int) -> float | None:
    """Geometric-mean per-step ratio of values[first..last] (list indices).

    Returns None when the window is degenerate or touches non-positive
    values (e.g. an exactly converged residual).
    """
    if last <= first or first < 0 or last >= len(values):
        return None
    v0, v1 = float(values[first]), float(values[last])
    if not (v0 > 0.0 and v1 > 0.0):
        return None
    return (v1 / v0) ** (1.0 / (last - first))


def _measured_slope(result: RunResult) -> float | None:
    z_series = [m.z_residual for m in result.metrics]
    series = z_series if any(not math.isnan(v) for v in z_series) else \
        [m.dist_to_opt for m in result.metrics]
    usable = [v for v in series if not math.isnan(v)]
    if len(usable) < 6:
        return None
    # skip the first two recorded rounds (transient), stop before the
    # residual hits numerical noise
    stop = len(usable) - 1
    while stop > 2 and usable[stop] <= 1e-13:
        stop -= 1
    return geometric_rate(usable, 2, stop)


def _certified_factor(result: RunResult):
    cfg = result.config
    if cfg.algorithm not in ("ecl", "cecl") or not result.alphas:
        return None
    if len(set(result.alphas)) != 1:
        return None  # per-node penalty weights carry no single certified factor
    n_min, n_max = degree_bounds(result.graph)
    try:
        return build_report(
            result.spectrum.mu, result.spectrum.L, result.alphas[0],
            n_min, n_max, cfg.ecl.compression.tau, cfg.ecl.theta,
        )
    except ValueError:
        return None


def summary(result: RunResult) -> str:
    """One-page text summary of a finished run."""
    cfg = result.config
    final = result.metrics[-1] if result.metrics else None
    graph_text = cfg.graph.kind if cfg.graph.kind == "edge-list" else \
        f"{cfg.graph.kind}({cfg.graph.n})"

    hit_round = next(
        (m.round for m in result.metrics if m.dist_to_opt <= 1e-12), None
    )
    slope = _measured_slope(result)
    report = _certified_factor(result)

    lines = [
        "== consensus-splitting run summary ==",
        f"seed: {cfg.seed}",
        f"algorithm: {cfg.algorithm}",
        f"graph: {graph_text}",
        f"problem: {cfg.problem.kind}",
        f"rounds: {cfg.rounds} (metrics every {cfg.metric_stride})",
    ]
    if final is not None:
        lines += [
            f"final dist_to_opt: {final.dist_to_opt:.6e}",
            f"final consensus_err: {final.consensus_err:.6e}",
            f"total bytes: {final.cum_bytes}",
        ]
    lines.append(
        f"reached dist_to_opt <= 1e-12 at round {hit_round}"
        if hit_round is not None else "dist_to_opt <= 1e-12: not reached"
    )
    lines.append(
        f"measured contraction slope: {slope:.6f}"
        if slope is not None else "measured contraction slope: n/a"
    )
    if report is not None:
        lines.append(
            f"certified factor rho(theta={report.theta:g}): {report.rho:.6f} "
            f"(delta={report.delta:.6f}, tau={report.tau:g}, "
            f"admissible={'yes' if report.admissible else 'no'})"
        )
    else:
        lines.append("certified factor: n/a")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# shared small parsing helpers

def _get_int(raw, key, default=None, required=False, minimum=None):
    if key not in raw:
        if required:
            raise ConfigError(f"{key} is required")
        return default
    try:
        value = int(raw[key])
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw[key]!r}") from None
    if minimum is not None and value < minimum:
        raise ConfigError(f"{key}: must be >= {minimum}, got {value}")
    return value


def _get_float(raw, key, default=None, required=False, minimum=None,
               maximum=None, inclusive=False, inclusive_max=False):
    if key not in raw:
        if required:
            raise ConfigError(f"{key} is required")
        return default
    try:
        value = float(raw[key])
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw[key]!r}") from None
    if minimum is not None:
        if inclusive and value < minimum:
            raise ConfigError(f"{key}: must be >= {minimum}, got {value}")
        if not inclusive and value <= minimum:
            raise ConfigError(f"{key}: must be > {minimum}, got {value}")
    if maximum is not None:
        if inclusive_max and value > maximum:
            raise ConfigError(f"{key}: must be <= {maximum}, got {value}")
        if not inclusive_max and value >= maximum:
            raise ConfigError(f"{key}: must be < {maximum}, got {value}")
    return value


def _get_bool(raw, key, default=False):
    if key not in raw:
        return default
    text = raw[key].lower()
    if text in ("true", "1", "yes"):
        return True
    if text in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key}: expected true or false, got {raw[key]!r}")


def _get_choice(raw, key, choices, default=None, required=False):
    if key not in raw:
        if required:
            raise ConfigError(f"{key} is required (one of {', '.join(choices)})")
        return default
    value = raw[key]
    if value not in choices:
        raise ConfigError(f"{key}: expected one of {', '.join(choices)}, got {value!r}")
    return value


def _reject_keys(raw, keys, context: str):
    present = [k for k in keys if k in raw]
    if present:
        raise ConfigError(f"{', '.join(present)} not allowed with {context}")
