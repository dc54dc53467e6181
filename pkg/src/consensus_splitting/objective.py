"""Per-node convex losses and the proximal-type solvers of the round protocol.

Two objective families are provided. ``QuadraticObjective`` is
f(w) = w' Q w / 2 - c' w with Q symmetric positive definite; its
penalized subproblems have closed forms and it is the workhorse of the
rate experiments. ``LogisticObjective`` is ridge-regularized logistic
loss for exercising the inexact (gradient-based) solver path.

All gradients are exact full-batch quantities; randomness enters the
system only through message compression, never through sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "QuadraticObjective",
    "LogisticObjective",
    "SpectrumReport",
    "OptimizationError",
    "prox_exact",
    "prox_inexact",
    "centralized_optimum",
    "synthesize_quadratics",
]


class OptimizationError(RuntimeError):
    """Iterative solver failed to reach its tolerance within budget."""


@dataclass(frozen=True)
class SpectrumReport:
    """Curvature range (mu, L) of a stacked separable objective."""

    mu: float
    L: float

    def __post_init__(self):
        if not (0.0 < self.mu <= self.L):
            raise ValueError(f"need 0 < mu <= L, got mu={self.mu}, L={self.L}")


class QuadraticObjective:
    """f(w) = w' Q w / 2 - c' w with Q symmetric positive definite."""

    def __init__(self, Q, c):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        c = np.atleast_1d(np.asarray(c, dtype=float))
        if Q.shape[0] != Q.shape[1] or Q.shape[0] != c.shape[0]:
            raise ValueError(f"shape mismatch: Q {Q.shape}, c {c.shape}")
        if np.abs(Q - Q.T).max() > 1e-12:
            raise ValueError("Q must be symmetric (within 1e-12)")
        eigs = np.linalg.eigvalsh(Q)
        if eigs[0] <= 0.0:
            raise ValueError(f"Q must be positive definite, smallest eigenvalue {eigs[0]}")
        self.Q = Q
        self.c = c
        self._eigs = (float(eigs[0]), float(eigs[-1]))
        self._inv_cache: dict[float, np.ndarray] = {}

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    def value(self, w) -> float:
        w = self._check(w)
        return float(0.5 * w @ self.Q @ w - self.c @ w)

    def grad(self, w) -> np.ndarray:
        w = self._check(w)
        return self.Q @ w - self.c

    def hessian(self, w) -> np.ndarray:
        return self.Q

    def hessian_extremes(self) -> tuple[float, float]:
        return self._eigs

    def penalized_inverse(self, ridge: float) -> np.ndarray:
        """Cached (Q + ridge * I)^-1, the core of the exact subproblem solve."""
        key = float(ridge)
        inv = self._inv_cache.get(key)
        if inv is None:
            inv = np.linalg.inv(self.Q + key * np.eye(self.dim))
            self._inv_cache[key] = inv
        return inv

    def _check(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.dim,):
            raise ValueError(f"expected vector of dim {self.dim}, got shape {w.shape}")
        return w


class LogisticObjective:
    """Ridge-regularized logistic loss over labeled samples.

    f(w) = mean_s log(1 + exp(-y_s x_s' w)) + ridge / 2 * ||w||^2
    with labels in {-1, +1}. The ridge term makes f strongly convex;
    the gradient is Lipschitz with constant ridge + lam_max(X'X) / (4 m).
    """

    def __init__(self, features, labels, ridge: float):
        X = np.atleast_2d(np.asarray(features, dtype=float))
        y = np.atleast_1d(np.asarray(labels, dtype=float))
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} samples but {y.shape[0]} labels")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if ridge <= 0.0:
            raise ValueError("ridge must be positive")
        self.X = X
        self.y = y
        self.ridge = float(ridge)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def value(self, w) -> float:
        w = self._check(w)
        margins = self.y * (self.X @ w)
        # log(1 + exp(-m)) computed stably for large |m|
        loss = np.logaddexp(0.0, -margins).mean()
        return float(loss + 0.5 * self.ridge * w @ w)

    def grad(self, w) -> np.ndarray:
        w = self._check(w)
        margins = self.y * (self.X @ w)
        sigma = 1.0 / (1.0 + np.exp(margins))  # sigmoid(-margin)
        g = -(self.X.T @ (sigma * self.y)) / self.X.shape[0]
        return g + self.ridge * w

    def hessian(self, w) -> np.ndarray:
        w = self._check(w)
        margins = self.y * (self.X @ w)
        p = 1.0 / (1.0 + np.exp(-margins))
        weights = p * (1.0 - p)
        H = (self.X.T * weights) @ self.X / self.X.shape[0]
        return H + self.ridge * np.eye(self.dim)

    def hessian_extremes(self) -> tuple[float, float]:
        gram_max = float(np.linalg.eigvalsh(self.X.T @ self.X)[-1])
        return self.ridge, self.ridge + gram_max / (4.0 * self.X.shape[0])

    def _check(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.dim,):
            raise ValueError(f"expected vector of dim {self.dim}, got shape {w.shape}")
        return w


def _check_blocks(obj, dual_blocks, signs):
    if len(dual_blocks) != len(signs):
        raise ValueError(f"{len(dual_blocks)} dual blocks but {len(signs)} signs")
    if not dual_blocks:
        raise ValueError("at least one neighbor dual block is required")
    blocks = [np.asarray(z, dtype=float) for z in dual_blocks]
    for z in blocks:
        if z.shape != (obj.dim,):
            raise ValueError(f"dual block shape {z.shape} does not match dim {obj.dim}")
    if any(s not in (1, -1, 1.0, -1.0) for s in signs):
        raise ValueError("signs must be +1 or -1")
    return blocks


def prox_exact(obj: QuadraticObjective, dual_blocks, signs, alpha: float) -> np.ndarray:
    """Exact minimizer of the penalized local subproblem.

    Solves argmin_w f(w) + alpha/2 * sum_j ||sign_j w - z_j / alpha||^2,
    whose stationarity condition for a quadratic f gives the closed form
    w = (Q + alpha m I)^-1 (c + sum_j sign_j z_j) with m neighbors.
    """
    if not isinstance(obj, QuadraticObjective):
        raise TypeError("the exact solver requires a quadratic objective")
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    blocks = _check_blocks(obj, dual_blocks, signs)
    rhs = obj.c.copy()
    for s, z in zip(signs, blocks):
        rhs += float(s) * z
    return obj.penalized_inverse(alpha * len(blocks)) @ rhs


def prox_inexact(obj, w_prev, dual_blocks, signs, alpha: float, eta: float,
                 steps: int = 1) -> np.ndarray:
    """Linearized solver for the penalized local subproblem.

    Each inner step linearizes f at the current iterate and solves
    argmin_w <w, grad f(w_t)> + ||w - w_t||^2 / (2 eta)
             + alpha/2 * sum_j ||sign_j w - z_j / alpha||^2
    in closed form:
        w_{t+1} = (w_t / eta - grad f(w_t) + sum_j sign_j z_j)
                  / (1 / eta + alpha m).
    The gradient is refreshed every step; with small eta and many steps
    this converges to the exact subproblem minimizer.
    """
    if alpha <= 0.0 or eta <= 0.0:
        raise ValueError("alpha and eta must be positive")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    blocks = _check_blocks(obj, dual_blocks, signs)
    pull = np.zeros(obj.dim)
    for s, z in zip(signs, blocks):
        pull += float(s) * z
    denom = 1.0 / eta + alpha * len(blocks)
    w = np.asarray(w_prev, dtype=float).copy()
    if w.shape != (obj.dim,):
        raise ValueError(f"w_prev shape {w.shape} does not match dim {obj.dim}")
    for _ in range(steps):
        w = (w / eta - obj.grad(w) + pull) / denom
    return w


def centralized_optimum(objectives, max_iter: int = 200,
                        tol: float = 1e-12) -> tuple[np.ndarray, SpectrumReport]:
    """Ground-truth consensus optimum of sum_i f_i plus curvature range.

    Quadratic-only collections are solved in closed form; otherwise a
    damped Newton iteration runs until the summed gradient norm drops
    below ``tol`` (OptimizationError past ``max_iter``). The report
    carries mu = min_i over per-node Hessian minima and L = max_i over
    maxima, the curvature range of the stacked separable objective.
    """
    if not objectives:
        raise ValueError("need at least one objective")
    dim = objectives[0].dim
    if any(o.dim != dim for o in objectives):
        raise ValueError("objectives disagree on dimension")

    extremes = [o.hessian_extremes() for o in objectives]
    spectrum = SpectrumReport(mu=min(e[0] for e in extremes), L=max(e[1] for e in extremes))

    if all(isinstance(o, QuadraticObjective) for o in objectives):
        Q_sum = sum(o.Q for o in objectives)
        c_sum = sum(o.c for o in objectives)
        w = np.linalg.solve(Q_sum, c_sum)
        return w, spectrum

    w = np.zeros(dim)
    for _ in range(max_iter):
        g = sum(o.grad(w) for o in objectives)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            return w, spectrum
        H = sum(o.hessian(w) for o in objectives)
        step = np.linalg.solve(H, g)
        # backtracking on the summed value keeps Newton globally stable
        t = 1.0
        val = sum(o.value(w) for o in objectives)
        while t > 1e-12:
            cand = w - t * step
            if sum(o.value(cand) for o in objectives) <= val:
                break
            t *= 0.5
        w = w - t * step
    g = sum(o.grad(w) for o in objectives)
    if float(np.linalg.norm(g)) <= tol:
        return w, spectrum
    raise OptimizationError(
        f"Newton failed to reach gradient norm {tol} in {max_iter} iterations "
        f"(final {float(np.linalg.norm(g)):.3e})"
    )


def synthesize_quadratics(n_nodes: int, d: int, kappa: float, heterogeneity: str,
                          spread: float, seed: int) -> list[QuadraticObjective]:
    """Seeded generator of per-node quadratic instances.

    Every node shares one curvature matrix Q whose eigenvalues span
    [1, kappa] exactly, so the stacked curvature range is (1, kappa) by
    construction. Linear terms c_i are clustered within 1% of a common
    center in the homogeneous mode and scattered with scale ``spread``
    in the heterogeneous mode, which drives the per-node optima apart.
    """
    if n_nodes < 1 or d < 1:
        raise ValueError("n_nodes and d must be positive")
    if kappa < 1.0:
        raise ValueError("condition number kappa must be >= 1")
    if d == 1 and kappa != 1.0:
        raise ValueError("a 1-dimensional quadratic cannot have kappa > 1")
    if heterogeneity not in ("homogeneous", "heterogeneous"):
        raise ValueError(f"unknown heterogeneity mode {heterogeneity!r}")

    rng = np.random.default_rng(seed)
    if d == 1:
        Q = np.array([[1.0]])
    else:
        evals = np.linspace(1.0, kappa, d)
        basis, _ = np.linalg.qr(rng.standard_normal((d, d)))
        Q = basis @ np.diag(evals) @ basis.T
        Q = 0.5 * (Q + Q.T)
    center = rng.standard_normal(d)

    objectives = []
    for _ in range(n_nodes):
        if heterogeneity == "homogeneous":
            direction = rng.standard_normal(d)
            direction /= max(np.linalg.norm(direction), 1e-30)
            c = center + 0.01 * np.linalg.norm(center) * rng.random() * direction
        else:
            c = center + spread * rng.standard_normal(d)
        objectives.append(QuadraticObjective(Q, c))
    return objectives
