"""Closed-form convergence-rate calculator for the splitting protocol.

Everything here is a direct formula evaluation. ``delta`` is the
contraction factor of the reflected local resolvent, a max of two
Moebius expressions in the curvature range (mu, L) and the degree-scaled
penalty (alpha * N_min, alpha * N_max). From delta follow the minimum
admissible compression quality ``tau_min``, the open interval of
admissible averaging weights ``theta_interval``, and the certified
per-round factor ``contraction_factor``. The certified factor is an
upper bound under the admissibility conditions; it is minimized at
theta = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "delta",
    "tau_min",
    "theta_interval",
    "contraction_factor",
    "argmin_theta",
    "alpha_rule",
    "TheoryReport",
    "build_report",
]


def delta(mu: float, L: float, alpha: float, n_min: int, n_max: int) -> float:
    """Contraction factor of the reflected local resolvent.

    delta = max( (alpha N_max - mu) / (alpha N_max + mu),
                 (L - alpha N_min) / (L + alpha N_min) )
    lies in [0, 1) whenever 0 < mu <= L, 1 <= N_min <= N_max, alpha > 0.
    """
    if not (0.0 < mu <= L):
        raise ValueError(f"need 0 < mu <= L, got mu={mu}, L={L}")
    if not (1 <= n_min <= n_max):
        raise ValueError(f"need 1 <= n_min <= n_max, got {n_min}, {n_max}")
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    hi = alpha * n_max
    lo = alpha * n_min
    return max((hi - mu) / (hi + mu), (L - lo) / (L + lo))


def tau_min(delta_: float) -> float:
    """Least compression quality admitting a certified rate.

    tau_min = 1 - ((1 - delta) / (1 + delta))^2. Perfect conditioning
    (delta = 0) tolerates any quality.
    """
    _check_delta(delta_)
    ratio = (1.0 - delta_) / (1.0 + delta_)
    return 1.0 - ratio * ratio


def theta_interval(delta_: float, tau: float) -> tuple[float, float] | None:
    """Open interval of averaging weights with a certified factor below 1.

    ( 2 delta sqrt(1 - tau) / ((1 - delta)(1 - sqrt(1 - tau))),
      2 / ((1 + delta)(1 + sqrt(1 - tau))) )
    Returns None when the interval is empty (tau below tau_min). At
    tau = 1 this is (0, 2 / (1 + delta)).
    """
    _check_delta(delta_)
    _check_tau(tau)
    root = math.sqrt(1.0 - tau)
    lo = 2.0 * delta_ * root / ((1.0 - delta_) * (1.0 - root))
    hi = 2.0 / ((1.0 + delta_) * (1.0 + root))
    if lo >= hi:
        return None
    return lo, hi


def contraction_factor(theta: float, delta_: float, tau: float) -> float:
    """Certified per-round factor of the compressed dual update.

    |1 - theta| + theta delta + sqrt(1 - tau) (theta + |1 - theta| delta + delta).
    Below 1 exactly on theta_interval(delta, tau).
    """
    if theta <= 0.0:
        raise ValueError(f"theta must be positive, got {theta}")
    _check_delta(delta_)
    _check_tau(tau)
    root = math.sqrt(1.0 - tau)
    gap = abs(1.0 - theta)
    return gap + theta * delta_ + root * (theta + gap * delta_ + delta_)


def argmin_theta(delta_: float, tau: float) -> float:
    """Averaging weight minimizing the certified factor: always 1.

    The factor decreases toward theta = 1 from both sides of its
    piecewise-linear form. Requires tau >= tau_min(delta).
    """
    _check_delta(delta_)
    _check_tau(tau)
    if tau < tau_min(delta_):
        raise ValueError(
            f"tau={tau} is below tau_min={tau_min(delta_):.6g}; no admissible theta"
        )
    return 1.0


def alpha_rule(eta: float, degree: int, local_steps: int, k_percent: float) -> float:
    """Penalty weight rule for the inexact solver, per node degree.

    alpha = 1 / (eta * degree * (100 K / k - 1)); k = 100 recovers the
    uncompressed rule 1 / (eta * degree * (K - 1)). Node-dependent on
    irregular graphs. Rejects K = 1 with k = 100, where the effective
    step count vanishes.
    """
    if eta <= 0.0:
        raise ValueError(f"eta must be positive, got {eta}")
    if degree < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")
    if local_steps < 1:
        raise ValueError(f"local_steps must be >= 1, got {local_steps}")
    if not (0.0 < k_percent <= 100.0):
        raise ValueError(f"k_percent must lie in (0, 100], got {k_percent}")
    effective = 100.0 * local_steps / k_percent - 1.0
    if effective <= 0.0:
        raise ValueError(
            "effective step count 100*K/k - 1 is not positive "
            f"(K={local_steps}, k={k_percent}); set alpha manually"
        )
    return 1.0 / (eta * degree * effective)


@dataclass(frozen=True)
class TheoryReport:
    """Bundle of the certified-rate quantities for one configuration."""

    mu: float
    L: float
    alpha: float
    n_min: int
    n_max: int
    tau: float
    theta: float
    delta: float
    tau_min: float
    theta_interval: tuple[float, float] | None
    rho: float
    prefactor: float

    @property
    def admissible(self) -> bool:
        """True when the configuration carries a certified factor below 1."""
        iv = self.theta_interval
        return iv is not None and iv[0] < self.theta < iv[1]

    def as_text(self) -> str:
        iv = self.theta_interval
        iv_text = f"({iv[0]:.12g}, {iv[1]:.12g})" if iv is not None else "empty"
        lines = [
            f"  mu             = {self.mu:.12g}",
            f"  L              = {self.L:.12g}",
            f"  alpha          = {self.alpha:.12g}",
            f"  degrees        = [{self.n_min}, {self.n_max}]",
            f"  tau            = {self.tau:.12g}",
            f"  theta          = {self.theta:.12g}",
            f"  delta          = {self.delta:.12g}",
            f"  tau_min        = {self.tau_min:.12g}",
            f"  theta interval = {iv_text}",
            f"  rho(theta)     = {self.rho:.12g}",
            f"  prefactor      = {self.prefactor:.12g}",
            f"  admissible     = {'yes' if self.admissible else 'no'}",
        ]
        return "\n".join(lines)

    def as_key_values(self) -> str:
        iv = self.theta_interval
        pairs = [
            ("mu", repr(self.mu)),
            ("L", repr(self.L)),
            ("alpha", repr(self.alpha)),
            ("n_min", str(self.n_min)),
            ("n_max", str(self.n_max)),
            ("tau", repr(self.tau)),
            ("theta", repr(self.theta)),
            ("delta", repr(self.delta)),
            ("tau_min", repr(self.tau_min)),
            ("theta_lo", repr(iv[0]) if iv else "nan"),
            ("theta_hi", repr(iv[1]) if iv else "nan"),
            ("rho", repr(self.rho)),
            ("prefactor", repr(self.prefactor)),
            ("admissible", "true" if self.admissible else "false"),
        ]
        return "\n".join(f"{k}={v}" for k, v in pairs)


def build_report(mu: float, L: float, alpha: float, n_min: int, n_max: int,
                 tau: float, theta: float = 1.0) -> TheoryReport:
    """Evaluate every rate quantity for one configuration."""
    d = delta(mu, L, alpha, n_min, n_max)
    return TheoryReport(
        mu=mu,
        L=L,
        alpha=alpha,
        n_min=n_min,
        n_max=n_max,
        tau=tau,
        theta=theta,
        delta=d,
        tau_min=tau_min(d),
        theta_interval=theta_interval(d, tau),
        rho=contraction_factor(theta, d, tau),
        prefactor=math.sqrt(n_max) / (mu + alpha * n_min),
    )


def _check_delta(delta_: float) -> None:
    if not (0.0 <= delta_ < 1.0):
        raise ValueError(f"delta must lie in [0, 1), got {delta_}")


def _check_tau(tau: float) -> None:
    if not (0.0 < tau <= 1.0):
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
