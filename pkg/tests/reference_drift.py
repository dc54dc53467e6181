"""Standalone gossip-drift oracle for the heterogeneity contrast check.

Simulates local-steps-then-average gossip on a ring of scalar quadratics
f_i(w) = (w - c_i)^2 / 2 with c_i = i, using explicit neighbor loops and
no package imports, and returns the steady-state consensus bias
max_i |w_i - mean(c)|. The closed-form steady state of the affine round
map is also provided as a cross-check.
"""

from __future__ import annotations

import numpy as np


def ring_gossip_drift(n_nodes: int = 8, eta: float = 0.05, local_steps: int = 5,
                      rounds: int = 500) -> float:
    means = np.arange(float(n_nodes))
    target = means.mean()
    neighbors = [
        sorted({(i - 1) % n_nodes, (i + 1) % n_nodes}) for i in range(n_nodes)
    ]
    # Metropolis-Hastings weights on a ring: every neighbor (and self) 1/3
    w = np.zeros(n_nodes)
    for _ in range(rounds):
        for _ in range(local_steps):
            w = w - eta * (w - means)
        mixed = np.zeros(n_nodes)
        for i in range(n_nodes):
            acc = w[i] / (1.0 + len(neighbors[i]))
            for j in neighbors[i]:
                acc += w[j] / (1.0 + max(len(neighbors[i]), len(neighbors[j])))
            mixed[i] = acc
        w = mixed
    return float(np.max(np.abs(w - target)))


def ring_gossip_drift_closed_form(n_nodes: int = 8, eta: float = 0.05,
                                  local_steps: int = 5) -> float:
    """Steady state of w -> W (a w + (1 - a) c) with a = (1 - eta)^K."""
    means = np.arange(float(n_nodes))
    target = means.mean()
    W = np.zeros((n_nodes, n_nodes))
    for i in range(n_nodes):
        for j in ((i - 1) % n_nodes, (i + 1) % n_nodes):
            W[i, j] = 1.0 / 3.0
        W[i, i] = 1.0 - W[i].sum()
    a = (1.0 - eta) ** local_steps
    steady = np.linalg.solve(np.eye(n_nodes) - a * W, (1.0 - a) * (W @ means))
    return float(np.max(np.abs(steady - target)))
