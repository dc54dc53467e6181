"""Communication graphs for decentralized consensus optimization.

Nodes are 0-based contiguous integers (display layers may shift to 1-based).
Edges are undirected and stored as (lo, hi) pairs with lo < hi. Every graph
is validated at construction time: no self-loops, no duplicate edges, no
isolated nodes, and a single connected component, since the round protocols
built on top assume a connected network.

The per-edge linear consensus constraint is sign(i, j) * w_i + sign(j, i) * w_j = 0
with sign(i, j) = +1 when i < j and -1 otherwise, which pins w_i = w_j on
every edge. ``constraint_matrix`` materializes the corresponding block
matrix for brute-force checks; the solvers themselves never build it.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Graph",
    "make_graph",
    "build_preset",
    "load_edge_list",
    "constraint_sign",
    "degree_bounds",
    "mh_weights",
    "directed_pairs",
    "constraint_matrix",
    "PRESET_MIN_NODES",
]

PRESET_MIN_NODES = {"chain": 2, "ring": 3, "multiplex-ring": 5, "complete": 2}


@dataclass(frozen=True)
class Graph:
    """Immutable undirected connected graph.

    Attributes:
        n_nodes: Number of nodes; ids are 0 .. n_nodes - 1.
        edges: Frozen set of (lo, hi) node pairs with lo < hi.
        neighbors: Per-node tuple of adjacent node ids, sorted ascending.
    """

    n_nodes: int
    edges: frozenset
    neighbors: tuple

    def degree(self, node: int) -> int:
        return len(self.neighbors[node])

    @property
    def n_edges(self) -> int:
        return len(self.edges)


def make_graph(n_nodes: int, edges) -> Graph:
    """Build and validate a graph from an iterable of node pairs.

    Raises ValueError for self-loops, duplicate or out-of-range edges,
    isolated nodes, and disconnected graphs.
    """
    if n_nodes < 2:
        raise ValueError(f"graph needs at least 2 nodes, got {n_nodes}")
    canonical = set()
    for i, j in edges:
        i, j = int(i), int(j)
        if i == j:
            raise ValueError(f"self-loop on node {i}")
        if not (0 <= i < n_nodes and 0 <= j < n_nodes):
            raise ValueError(f"edge ({i}, {j}) out of range for {n_nodes} nodes")
        pair = (min(i, j), max(i, j))
        if pair in canonical:
            raise ValueError(f"duplicate edge {pair}")
        canonical.add(pair)

    adj = [set() for _ in range(n_nodes)]
    for i, j in canonical:
        adj[i].add(j)
        adj[j].add(i)
    if any(not a for a in adj):
        isolated = next(k for k, a in enumerate(adj) if not a)
        raise ValueError(f"node {isolated} is isolated")

    # connectivity via BFS from node 0
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    if len(seen) != n_nodes:
        raise ValueError(
            f"graph is disconnected: {len(seen)} of {n_nodes} nodes reachable from node 0"
        )

    return Graph(
        n_nodes=n_nodes,
        edges=frozenset(canonical),
        neighbors=tuple(tuple(sorted(a)) for a in adj),
    )


def build_preset(kind: str, n: int) -> Graph:
    """Build a named topology: chain, ring, multiplex-ring, or complete.

    chain(n) is the path 0-1-...-(n-1). ring(n) closes the path into a
    cycle. multiplex-ring(n) adds the hop-2 chords of the ring, giving
    degree 4 everywhere. complete(n) connects every pair.
    """
    if kind not in PRESET_MIN_NODES:
        raise ValueError(
            f"unknown topology preset {kind!r}; expected one of {sorted(PRESET_MIN_NODES)}"
        )
    if n < PRESET_MIN_NODES[kind]:
        raise ValueError(f"{kind} requires n >= {PRESET_MIN_NODES[kind]}, got {n}")

    if kind == "chain":
        edges = [(i, i + 1) for i in range(n - 1)]
    elif kind == "ring":
        edges = [(i, (i + 1) % n) for i in range(n)]
    elif kind == "multiplex-ring":
        edges = [(i, (i + 1) % n) for i in range(n)]
        edges += [(i, (i + 2) % n) for i in range(n)]
    else:  # complete
        edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    return make_graph(n, edges)


def load_edge_list(path) -> Graph:
    """Load a custom graph from a text file of "i j" lines.

    Whitespace separated, one edge per line, '#' starts a comment. The
    node count is 1 + the largest id seen.
    """
    text = Path(path).read_text()
    edges = []
    max_id = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'i j', got {raw!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-integer node id in {raw!r}") from None
        edges.append((i, j))
        max_id = max(max_id, i, j)
    if not edges:
        raise ValueError(f"{path}: no edges found")
    return make_graph(max_id + 1, edges)


def constraint_sign(i: int, j: int, g: Graph) -> int:
    """Sign of node i's block in the consensus constraint on edge (i, j).

    +1 for the lower-id endpoint, -1 for the higher, so that
    sign(i, j) = -sign(j, i) and the constraint forces w_i = w_j.
    """
    if j not in g.neighbors[i]:
        raise ValueError(f"nodes {i} and {j} are not adjacent")
    return 1 if i < j else -1


def degree_bounds(g: Graph) -> tuple[int, int]:
    """Return (min degree, max degree).

    These equal the extreme squared singular values of the stacked
    constraint matrix, which is what the rate calculator consumes.
    """
    degs = [len(nb) for nb in g.neighbors]
    return min(degs), max(degs)


def mh_weights(g: Graph) -> np.ndarray:
    """Metropolis-Hastings mixing matrix.

    W[i, j] = 1 / (1 + max(deg i, deg j)) on edges, diagonal set so rows
    sum to one. Symmetric and doubly stochastic with nonnegative entries.
    """
    n = g.n_nodes
    W = np.zeros((n, n))
    for i, j in g.edges:
        w = 1.0 / (1.0 + max(g.degree(i), g.degree(j)))
        W[i, j] = w
        W[j, i] = w
    for i in range(n):
        W[i, i] = 1.0 - W[i].sum()
    return W


def directed_pairs(g: Graph) -> list[tuple[int, int]]:
    """All directed pairs (i, j), node-major with neighbors ascending.

    This is the canonical stacking order for the per-edge dual vectors.
    """
    return [(i, j) for i in range(g.n_nodes) for j in g.neighbors[i]]


def constraint_matrix(g: Graph, d: int) -> np.ndarray:
    """Materialize the stacked constraint matrix (d*n by d*2|edges|).

    Block (i, (i|j)) is sign(i, j) * I_d; all other blocks are zero.
    A @ A.T is then diag(deg_0 * I, ..., deg_{n-1} * I). Intended for
    brute-force verification only; quadratic memory in the graph size.
    """
    pairs = directed_pairs(g)
    A = np.zeros((g.n_nodes * d, len(pairs) * d))
    eye = np.eye(d)
    for k, (i, j) in enumerate(pairs):
        A[i * d:(i + 1) * d, k * d:(k + 1) * d] = constraint_sign(i, j, g) * eye
    return A
