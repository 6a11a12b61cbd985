"""Fixed-point solver for the maximum renewal-reward throughput.

The maximum throughput mu* is the unique root of

    h(mu) = W*T*E[(R - mu/W)+] - mu*tau*(1+p),

with h convex and strictly decreasing. The primary iteration

    mu <- W*T*E[R 1{R >= mu/W}] / (T*P(R >= mu/W) + tau*(1+p))

is exactly Newton's method on h with unit step (expected bits over expected
period time under the current threshold rule), and converges monotonically
from below for any nonnegative start. The naive fixed-point map
mu <- W*T*E[(R - mu/W)+] / (tau*(1+p)) has derivative magnitude
T*P(R > mu*/W)/(tau*(1+p)) at the root, which typically exceeds 1 and
oscillates; it is kept only as a diagnostic (see `naive_fixed_point_trace`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

from .sedist import OnOffSe, SeDistribution


class DegenerateDistributionError(ValueError):
    """The rate law has zero mean: no positive-rate relay ever appears."""


class InfeasibleError(ValueError):
    """The requested threshold equation has no solution in the support."""


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, last_mu: float):
        super().__init__(message)
        self.last_mu = last_mu


@dataclass(frozen=True)
class SolverSettings:
    rel_tol: float = 1e-10
    max_iter: int = 100
    mu_init: float = 0.0

    def __post_init__(self):
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class StoppingSolution:
    mu_star: float          # bit/s
    threshold_se: float     # bit/s/Hz, equal to mu_star / W
    iterations: int
    residual: float         # h(mu_star), bit/s
    method: str             # closed_form | newton_ratio | bisection

    def to_dict(self) -> dict:
        return {
            "mu_star_bps": self.mu_star,
            "threshold_se": self.threshold_se,
            "iterations": self.iterations,
            "residual": self.residual,
            "method": self.method,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")


def fixed_point_residual(dist: SeDistribution, mu: float, W: float, T: float,
                         tau: float, p: float) -> float:
    """h(mu): positive below the root, negative above."""
    return W * T * dist.expected_excess(mu / W) - mu * tau * (1.0 + p)


def _newton_step(dist, mu, W, T, tau, p):
    rho = mu / W
    return W * T * dist.mean_above(rho) / (T * dist.tail_prob(rho) + tau * (1.0 + p))


def newton_trace(dist: SeDistribution, W: float, T: float, tau: float, p: float,
                 settings: SolverSettings | None = None) -> list[float]:
    """Iterates of the Newton-ratio recursion, starting after mu_init."""
    settings = settings or SolverSettings()
    trace = []
    mu = settings.mu_init
    for _ in range(settings.max_iter):
        mu_next = _newton_step(dist, mu, W, T, tau, p)
        trace.append(mu_next)
        if abs(mu_next - mu) <= settings.rel_tol * max(1.0, mu_next):
            break
        mu = mu_next
    return trace


def naive_fixed_point_trace(dist: SeDistribution, W: float, T: float, tau: float,
                            p: float, mu_init: float = 0.0, n_iter: int = 20) -> list[float]:
    """Literal fixed-point map, for demonstrating its oscillation only."""
    trace = []
    mu = mu_init
    for _ in range(n_iter):
        mu = W * T * dist.expected_excess(mu / W) / (tau * (1.0 + p))
        trace.append(mu)
    return trace


def _bisect_mu(dist, W, T, tau, p, rel_tol, max_iter):
    lo, hi = 0.0, W * dist.support_max
    it = 0
    while it < max(max_iter, 80) and (hi - lo) > rel_tol * max(1.0, hi):
        it += 1
        mid = 0.5 * (lo + hi)
        if fixed_point_residual(dist, mid, W, T, tau, p) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), it


def solve_mu_star(dist: SeDistribution, W: float, T: float, tau: float, p: float,
                  settings: SolverSettings | None = None,
                  method: str = "newton_ratio") -> StoppingSolution:
    """Compute the maximum throughput and the matching stopping threshold.

    `method` selects the primary iteration ("newton_ratio", default) or plain
    bisection on [0, W*r_bar]. The Newton-ratio path falls back to bisection
    if |h| ever fails to shrink after the first step.
    """
    if not (0.0 < p <= 1.0):
        raise ValueError("p must be in (0, 1]")
    settings = settings or SolverSettings()
    if dist.mean() <= 0.0:
        raise DegenerateDistributionError("rate distribution has zero mean")

    if method == "bisection":
        # drive the interval well below rel_tol so both methods agree tightly
        mu, it = _bisect_mu(dist, W, T, tau, p, settings.rel_tol * 1e-3, 200)
        res = fixed_point_residual(dist, mu, W, T, tau, p)
        return StoppingSolution(mu, mu / W, it, res, "bisection")
    if method != "newton_ratio":
        raise ValueError(f"unknown method {method!r}")

    mu = settings.mu_init
    prev_abs_h = None
    for it in range(1, settings.max_iter + 1):
        mu_next = _newton_step(dist, mu, W, T, tau, p)
        abs_h = abs(fixed_point_residual(dist, mu_next, W, T, tau, p))
        if prev_abs_h is not None and abs_h > prev_abs_h:
            mu, bis_it = _bisect_mu(dist, W, T, tau, p, settings.rel_tol * 1e-3, 200)
            res = fixed_point_residual(dist, mu, W, T, tau, p)
            return StoppingSolution(mu, mu / W, it + bis_it, res, "bisection")
        if abs(mu_next - mu) <= settings.rel_tol * max(1.0, mu_next):
            return StoppingSolution(mu_next, mu_next / W, it,
                                    fixed_point_residual(dist, mu_next, W, T, tau, p),
                                    "newton_ratio")
        prev_abs_h = abs_h
        mu = mu_next
    raise ConvergenceError(f"no convergence in {settings.max_iter} iterations", mu)


def solve_rho(dist: SeDistribution, mu: float, W: float, T: float, tau: float,
              p: float) -> float:
    """Threshold rho solving E[(R - rho)+] = mu*tau*(1+p)/(W*T)."""
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    rhs = mu * tau * (1.0 + p) / (W * T)
    if rhs > dist.mean():
        raise InfeasibleError("probing cost exceeds E[R]: stopping never profitable")
    if isinstance(dist, OnOffSe):
        return dist.r_bar - rhs / dist.atom_prob
    lo, hi = 0.0, dist.support_max
    # piecewise-linear excess: plain bisection, driven well past 1e-9 relative
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if dist.expected_excess(mid) > rhs:
            lo = mid
        else:
            hi = mid
        if (hi - lo) <= 1e-13 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def closed_form_onoff(p: float, r_bar: float, W: float, T: float,
                      tau: float) -> StoppingSolution:
    """Exact maximum throughput for the two-point on/off rate law."""
    if not (0.0 < p <= 1.0):
        raise ValueError("p must be in (0, 1]")
    mu = W * T * p * p * r_bar / ((1.0 + p) * tau + p * p * T)
    dist = OnOffSe(p, r_bar)
    res = fixed_point_residual(dist, mu, W, T, tau, p)
    return StoppingSolution(mu, mu / W, 0, res, "closed_form")


def genie_ratio_onoff(p: float, tau: float, T: float) -> float:
    """Optimally-stopped over genie-aided throughput for on/off links."""
    if not (0.0 < p <= 1.0):
        raise ValueError("p must be in (0, 1]")
    return 1.0 / (1.0 + (1.0 + p) / (p * p) * (tau / T))


def ordinary_value(dist: SeDistribution, mu: float, W: float, T: float,
                   tau: float, p: float) -> float:
    """V(mu) = E[U_N - mu*T_N] under the optimal threshold rule for this mu.

    Evaluated from the geometric stopping structure with threshold
    rho = solve_rho(mu) and success probability q = P(R >= rho). Diagnostic:
    V is nonincreasing in mu and V(mu*) = 0.
    """
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    rho = solve_rho(dist, mu, W, T, tau, p)
    q = dist.tail_prob(rho)
    if q <= 0.0:
        raise InfeasibleError("stopping probability is zero at this threshold")
    return ((W * T * dist.mean_above(rho) - mu * T * q) / q
            - mu * tau * (1.0 + p) / q)
