"""Round engine for edge-consensus learning and its compressed variant.

Each node holds its primal iterate w_i and, per neighbor j, a directed
dual pair (z_{i|j}, y_{i|j}); no global dual vector is ever materialized.
A synchronous round at node i runs:

  1. w-update: minimize f_i plus the penalty (alpha/2) sum_j
     ||sign(i,j) w_i - z_{i|j} / alpha||^2, exactly or by a few
     linearized steps.
  2. y-update per neighbor: y_{i|j} = z_{i|j} - 2 alpha sign(i,j) w_i.
  3. exchange: transmit comp(y_{i|j}) to each neighbor j, masked by the
     stream both endpoints derive for that directed pair (dense during
     warm-up rounds and under identity compression).
  4. z-update on receipt: z_{i|j} += theta * mask * (y_{j|i} - z_{i|j}),
     computed as theta * (received - comp(z_{i|j})) since only the
     compressed y crosses the wire. With identity compression this is
     the plain averaged update z = (1 - theta) z + theta y.

Masks are never exchanged: both endpoints derive the same per-round mask
from a seed assigned to the directed pair before the run starts. At a
fixed point the transmitted difference is zero and compression leaves
the state untouched, because comp(0) = 0.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .compression import (
    CompressionOperator,
    MaskStream,
    Payload,
    apply,
    decode_dense,
    decode_sparse,
    derive_mask,
    encode_payload,
)
from .objective import prox_exact, prox_inexact
from .theory import alpha_rule
from .topology import Graph, directed_pairs

__all__ = [
    "EdgeDualState",
    "NodeState",
    "EclConfig",
    "EclNetwork",
    "InMemoryTransport",
    "ProtocolError",
    "TransportError",
    "FixedPointError",
    "local_update",
    "z_update",
    "averaged_dual_update",
    "pair_seed",
    "resolve_alphas",
]


class ProtocolError(RuntimeError):
    """Received payload is inconsistent with the locally derived mask."""


class TransportError(RuntimeError):
    """The lossless-channel contract was violated."""


class FixedPointError(RuntimeError):
    """Fixed-point iteration did not reach its tolerance within budget."""


@dataclass
class EdgeDualState:
    """Directed dual pair held at one endpoint for one neighbor."""

    z: np.ndarray
    y: np.ndarray


@dataclass
class NodeState:
    """Node-local state: primal iterate, duals keyed by neighbor, loss."""

    node_id: int
    w: np.ndarray
    duals: dict
    objective: object
    alpha: float


@dataclass(frozen=True)
class EclConfig:
    """Hyperparameters of the splitting rounds.

    alpha may be the string "auto", which applies the degree-scaled rule
    1 / (eta * degree * (100 K / k - 1)) per node; that requires the
    inexact solver. warmup_rounds initial rounds always exchange dense
    payloads. w0 is the fill value of the initial iterate.
    """

    theta: float = 1.0
    alpha: float | str = 1.0
    solver: str = "exact"
    eta: float | None = None
    local_steps: int = 1
    compression: CompressionOperator = field(default_factory=CompressionOperator.identity)
    warmup_rounds: int = 0
    w0: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.theta <= 1.0):
            raise ValueError(f"ecl.theta: theta must lie in (0, 1], got {self.theta}")
        if isinstance(self.alpha, str):
            if self.alpha != "auto":
                raise ValueError(f"ecl.alpha: expected a positive number or 'auto', got {self.alpha!r}")
        elif self.alpha <= 0.0:
            raise ValueError(f"ecl.alpha: alpha must be positive, got {self.alpha}")
        if self.solver not in ("exact", "inexact"):
            raise ValueError(f"ecl.solver: expected 'exact' or 'inexact', got {self.solver!r}")
        if self.solver == "inexact":
            if self.eta is None or self.eta <= 0.0:
                raise ValueError("ecl.eta: the inexact solver needs a positive step size")
        if self.local_steps < 1:
            raise ValueError(f"ecl.local_steps: must be >= 1, got {self.local_steps}")
        if self.alpha == "auto" and self.solver != "inexact":
            raise ValueError("ecl.alpha: the 'auto' rule is defined for the inexact solver only")
        if self.warmup_rounds < 0:
            raise ValueError(f"ecl.warmup_rounds: must be >= 0, got {self.warmup_rounds}")


def local_update(state: NodeState, cfg: EclConfig) -> None:
    """Run the w-update and refresh y for every neighbor, in place."""
    neighbors = sorted(state.duals)
    signs = [1.0 if state.node_id < j else -1.0 for j in neighbors]
    blocks = [state.duals[j].z for j in neighbors]
    if cfg.solver == "exact":
        w = prox_exact(state.objective, blocks, signs, state.alpha)
    else:
        w = prox_inexact(state.objective, state.w, blocks, signs, state.alpha,
                         cfg.eta, cfg.local_steps)
    state.w = w
    for j, s in zip(neighbors, signs):
        dual = state.duals[j]
        dual.y = dual.z - 2.0 * state.alpha * s * w


def z_update(state: NodeState, neighbor: int, received: Payload, mask,
             theta: float) -> None:
    """Fold one received payload into z_{i|neighbor}.

    For a sparse payload the locally derived mask must match the payload
    indices exactly; any payload index outside the mask (or masked index
    missing from the payload) is a protocol error.
    """
    if neighbor not in state.duals:
        raise ValueError(f"node {state.node_id} has no neighbor {neighbor}")
    dual = state.duals[neighbor]
    if received.is_dense:
        dual.z = dual.z + theta * (received.values - dual.z)
        return
    if mask is None:
        raise ProtocolError("sparse payload received without a round mask")
    mask_idx = np.flatnonzero(np.asarray(mask, dtype=bool))
    idx = received.indices
    if len(idx) != len(mask_idx) or not np.array_equal(idx, mask_idx):
        outside = np.setdiff1d(idx, mask_idx)
        if outside.size:
            raise ProtocolError(
                f"payload index {int(outside[0])} lies outside the round mask "
                f"for pair ({state.node_id}|{neighbor})"
            )
        raise ProtocolError(
            f"payload for pair ({state.node_id}|{neighbor}) is missing masked indices"
        )
    dual.z[idx] = dual.z[idx] + theta * (received.values - dual.z[idx])


def averaged_dual_update(z, y, theta: float) -> np.ndarray:
    """Reference form (1 - theta) z + theta y of the uncompressed z-update.

    Algebraically identical to z + theta (y - z); kept as an independent
    code path for equivalence checks.
    """
    return (1.0 - theta) * np.asarray(z, dtype=float) + theta * np.asarray(y, dtype=float)


def resolve_alphas(graph: Graph, cfg: EclConfig) -> tuple[float, ...]:
    """Per-node penalty weights: the degree-scaled rule under "auto",
    otherwise the single configured value everywhere."""
    if cfg.alpha == "auto":
        return tuple(
            alpha_rule(cfg.eta, graph.degree(i), cfg.local_steps,
                       cfg.compression.k_percent)
            for i in range(graph.n_nodes)
        )
    return (float(cfg.alpha),) * graph.n_nodes


def pair_seed(experiment_seed: int, receiver: int, sender: int) -> int:
    """Per-directed-pair mask seed both endpoints derive independently.

    Seeded per unordered edge, with the direction selecting one of two
    derived streams, so the two payload directions of an edge use
    distinct masks.
    """
    lo, hi = min(receiver, sender), max(receiver, sender)
    ss = np.random.SeedSequence(entropy=[int(experiment_seed), lo, hi])
    return int(ss.generate_state(2, dtype=np.uint64)[0 if receiver == lo else 1])


class InMemoryTransport:
    """Lossless in-memory channel delivering each payload exactly once."""

    def __init__(self):
        self._pending: dict[tuple[int, int], bytes] = {}
        self.total_bytes = 0

    def send(self, src: int, dst: int, data: bytes) -> None:
        key = (src, dst)
        if key in self._pending:
            raise TransportError(f"undelivered payload already pending on {src} -> {dst}")
        self._pending[key] = data
        self.total_bytes += len(data)

    def recv(self, dst: int, src: int) -> bytes:
        try:
            return self._pending.pop((src, dst))
        except KeyError:
            raise TransportError(f"no payload available from {src} to {dst}") from None


class EclNetwork:
    """All node states of one experiment plus the synchronous round driver.

    Rounds are deterministic functions of (objectives, config, seed,
    round index): masks are counter-derived per directed pair, and the
    channel is lossless, so thread scheduling cannot change results.
    """

    def __init__(self, graph: Graph, objectives, cfg: EclConfig, seed: int = 0,
                 threads: int = 0, transport=None, alphas=None):
        if len(objectives) != graph.n_nodes:
            raise ValueError(f"{len(objectives)} objectives for {graph.n_nodes} nodes")
        dims = {o.dim for o in objectives}
        if len(dims) != 1:
            raise ValueError("objectives disagree on dimension")
        self.graph = graph
        self.cfg = cfg
        self.d = dims.pop()
        self.seed = int(seed)
        self.threads = int(threads)
        self._transport = transport if transport is not None else InMemoryTransport()
        self._pairs = directed_pairs(graph)

        if alphas is None:
            alphas = resolve_alphas(graph, cfg)
        elif len(alphas) != graph.n_nodes:
            raise ValueError(f"{len(alphas)} alpha overrides for {graph.n_nodes} nodes")
        self.nodes = []
        for i in range(graph.n_nodes):
            alpha_i = float(alphas[i])
            duals = {
                j: EdgeDualState(z=np.zeros(self.d), y=np.zeros(self.d))
                for j in graph.neighbors[i]
            }
            self.nodes.append(NodeState(
                node_id=i,
                w=np.full(self.d, float(cfg.w0)),
                duals=duals,
                objective=objectives[i],
                alpha=alpha_i,
            ))
        # stream keyed by (receiver, sender): the mask compressing the
        # payload sender -> receiver, shared by both endpoints
        self._streams = {
            (i, j): MaskStream(edge_seed=pair_seed(self.seed, i, j))
            for (i, j) in self._pairs
        }

    @property
    def alphas(self) -> tuple[float, ...]:
        return tuple(node.alpha for node in self.nodes)

    def run_round(self, round_index: int, transport=None) -> int:
        """Advance every node one synchronous round; returns bytes sent."""
        tp = transport if transport is not None else self._transport
        cfg = self.cfg
        op = cfg.compression
        compressed = op.kind != "identity" and round_index >= cfg.warmup_rounds

        if self.threads > 0:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                list(pool.map(lambda node: local_update(node, cfg), self.nodes))
        else:
            for node in self.nodes:
                local_update(node, cfg)

        nbytes = 0
        for i, j in self._pairs:
            y = self.nodes[i].duals[j].y
            if compressed:
                mask = derive_mask(self._streams[(j, i)], round_index, self.d,
                                   op.k_percent)
                data = encode_payload(apply(op, y, mask))
            else:
                data = encode_payload(Payload(dim=self.d, values=y))
            tp.send(i, j, data)
            nbytes += len(data)

        for i, j in self._pairs:
            data = tp.recv(i, j)
            if compressed:
                mask = derive_mask(self._streams[(i, j)], round_index, self.d,
                                   op.k_percent)
                payload = decode_sparse(data, self.d)
                z_update(self.nodes[i], j, payload, mask, cfg.theta)
            else:
                payload = decode_dense(data, self.d)
                z_update(self.nodes[i], j, payload, None, cfg.theta)
        return nbytes

    def run_to_fixed_point(self, tol: float = 1e-12, max_rounds: int = 100000) -> int:
        """Iterate until the stacked z moves by at most tol per round.

        Returns the number of rounds taken. Meaningful for identity
        compression, where the limit is deterministic.
        """
        prev = self.stacked_z()
        for r in range(max_rounds):
            self.run_round(r)
            cur = self.stacked_z()
            if float(np.linalg.norm(cur - prev)) <= tol:
                return r + 1
            prev = cur
        raise FixedPointError(
            f"dual iterate still moving after {max_rounds} rounds (tol {tol})"
        )

    def stacked_z(self) -> np.ndarray:
        """All z vectors, node-major with neighbors ascending."""
        return np.concatenate([self.nodes[i].duals[j].z for i, j in self._pairs])

    def load_stacked_z(self, z: np.ndarray) -> None:
        z = np.asarray(z, dtype=float)
        expected = len(self._pairs) * self.d
        if z.shape != (expected,):
            raise ValueError(f"expected stacked z of length {expected}, got {z.shape}")
        for k, (i, j) in enumerate(self._pairs):
            self.nodes[i].duals[j].z = z[k * self.d:(k + 1) * self.d].copy()

    def stacked_w(self) -> np.ndarray:
        """Primal iterates as an (n_nodes, d) array."""
        return np.stack([node.w for node in self.nodes])

    def consensus_error(self) -> float:
        """Maximum over edges of ||w_i - w_j||."""
        return max(
            float(np.linalg.norm(self.nodes[i].w - self.nodes[j].w))
            for i, j in self.graph.edges
        )
