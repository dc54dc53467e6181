"""Gossip baseline: local gradient steps followed by weighted averaging.

Each round every node takes K full-batch gradient steps on its own loss,
then parameters are exchanged once and mixed with a symmetric doubly
stochastic matrix. With heterogeneous per-node losses this family keeps
a steady-state consensus bias (client drift) at fixed step size, which
is the contrast the splitting protocol removes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compression import dense_nbytes
from .topology import Graph

__all__ = ["GossipConfig", "GossipNetwork", "gossip_round"]


@dataclass(frozen=True, eq=False)
class GossipConfig:
    """Step size, local-step count, and mixing matrix."""

    eta: float
    local_steps: int
    weights: np.ndarray

    def __post_init__(self):
        if self.eta < 0.0:
            raise ValueError(f"gossip.eta: must be >= 0, got {self.eta}")
        if self.local_steps < 1:
            raise ValueError(f"gossip.local_steps: must be >= 1, got {self.local_steps}")
        W = np.asarray(self.weights, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError(f"mixing matrix must be square, got shape {W.shape}")
        if np.abs(W - W.T).max() > 1e-12:
            raise ValueError("mixing matrix must be symmetric")
        if np.abs(W.sum(axis=1) - 1.0).max() > 1e-12:
            raise ValueError("mixing matrix rows must sum to 1")
        if W.min() < -1e-15:
            raise ValueError("mixing matrix entries must be nonnegative")
        object.__setattr__(self, "weights", W)


def gossip_round(w: np.ndarray, objectives, cfg: GossipConfig,
                 graph: Graph) -> tuple[np.ndarray, int]:
    """One round: K gradient steps per node, then one mixing exchange.

    Returns the mixed (n_nodes, d) iterate and the bytes sent, counted
    as one dense payload per directed edge.
    """
    n, d = w.shape
    if cfg.weights.shape[0] != n:
        raise ValueError(f"mixing matrix is {cfg.weights.shape[0]}x..., graph has {n} nodes")
    local = w.copy()
    for _ in range(cfg.local_steps):
        for i in range(n):
            local[i] -= cfg.eta * objectives[i].grad(local[i])
    mixed = cfg.weights @ local
    nbytes = 2 * graph.n_edges * dense_nbytes(d)
    return mixed, nbytes


class GossipNetwork:
    """Round driver with the same surface as the splitting network."""

    def __init__(self, graph: Graph, objectives, cfg: GossipConfig, w0: float = 0.0):
        if len(objectives) != graph.n_nodes:
            raise ValueError(f"{len(objectives)} objectives for {graph.n_nodes} nodes")
        dims = {o.dim for o in objectives}
        if len(dims) != 1:
            raise ValueError("objectives disagree on dimension")
        self.graph = graph
        self.objectives = list(objectives)
        self.cfg = cfg
        self.d = dims.pop()
        self.w = np.full((graph.n_nodes, self.d), float(w0))

    def run_round(self, round_index: int = 0) -> int:
        self.w, nbytes = gossip_round(self.w, self.objectives, self.cfg, self.graph)
        return nbytes

    def stacked_w(self) -> np.ndarray:
        return self.w.copy()

    def consensus_error(self) -> float:
        return max(
            float(np.linalg.norm(self.w[i] - self.w[j]))
            for i, j in self.graph.edges
        )
