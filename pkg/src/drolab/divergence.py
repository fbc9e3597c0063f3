"""Statistical similarity measures, ambiguity balls, and extremal oracles.

Wasserstein distances are computed exactly as transport linear programs over
the shared grid; worst-case and best-case expectations over Wasserstein balls
are linear programs over couplings, and over KL balls they are solved through
the classical exponential-tilting dual with a bracketed one-dimensional
search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from drolab.lp import LPFailureError, solve_lp
from drolab.support import DiscreteDistribution, GridMismatchError, SupportGrid

_PHI_GENERATORS = ("kl", "chi2", "tv")
_MEMBERSHIP_SLACK = 1e-10


def _phi(generator: str, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if generator == "kl":
        out = np.zeros_like(t)
        pos = t > 0.0
        out[pos] = t[pos] * np.log(t[pos])
        return out
    if generator == "chi2":
        return (t - 1.0) ** 2
    if generator == "tv":
        return 0.5 * np.abs(t - 1.0)
    raise ValueError(f"unknown phi generator {generator!r}")


def _phi_slope_at_infinity(generator: str) -> float:
    # lim phi(t)/t as t -> inf: the cost per unit of mass placed where the
    # reference distribution has none.
    return {"kl": math.inf, "chi2": math.inf, "tv": 0.5}[generator]


def _assert_generator_valid(generator: str) -> None:
    # Convexity and phi(1)=0, spot-checked at sample points.
    ts = np.array([0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 4.0])
    vals = _phi(generator, ts)
    if abs(_phi(generator, np.array([1.0]))[0]) > 1e-12:
        raise ValueError(f"generator {generator!r} violates phi(1)=0")
    for i in range(len(ts) - 2):
        mid = _phi(generator, np.array([(ts[i] + ts[i + 2]) / 2.0]))[0]
        if mid > (vals[i] + vals[i + 2]) / 2.0 + 1e-12:
            raise ValueError(f"generator {generator!r} is not convex at sample points")


@dataclass(frozen=True)
class DivergenceKind:
    """Which similarity measure a ball uses.

    ``family`` is ``"wasserstein"`` (with finite order ``p >= 1``) or
    ``"phi"`` (with a built-in generator).  Phi-divergences are not symmetric;
    ``orientation="forward"`` measures ``F_phi(q || center)`` and
    ``"reverse"`` swaps the arguments.
    """

    family: str
    p: float = 1.0
    generator: str = "kl"
    orientation: str = "forward"

    def __post_init__(self) -> None:
        if self.family not in ("wasserstein", "phi"):
            raise ValueError(f"unknown divergence family {self.family!r}")
        if self.family == "wasserstein":
            if not (math.isfinite(self.p) and self.p >= 1.0):
                raise ValueError("Wasserstein order must be finite and >= 1")
        else:
            if self.generator not in _PHI_GENERATORS:
                raise ValueError(f"unknown phi generator {self.generator!r}")
            if self.orientation not in ("forward", "reverse"):
                raise ValueError("orientation must be 'forward' or 'reverse'")
            _assert_generator_valid(self.generator)

    @classmethod
    def wasserstein_order(cls, p: float = 1.0) -> "DivergenceKind":
        return cls("wasserstein", p=float(p))

    @classmethod
    def kl(cls, orientation: str = "forward") -> "DivergenceKind":
        return cls("phi", generator="kl", orientation=orientation)

    @classmethod
    def chi2(cls, orientation: str = "forward") -> "DivergenceKind":
        return cls("phi", generator="chi2", orientation=orientation)

    @classmethod
    def tv(cls, orientation: str = "forward") -> "DivergenceKind":
        return cls("phi", generator="tv", orientation=orientation)

    def distance(self, q: DiscreteDistribution, center: DiscreteDistribution) -> float:
        if self.family == "wasserstein":
            return wasserstein(q, center, self.p)
        if self.orientation == "forward":
            return phi_divergence(q, center, self.generator)
        return phi_divergence(center, q, self.generator)

    def radius_cap(self, center: DiscreteDistribution) -> float:
        """A radius at which the ball has stopped growing.

        For Wasserstein balls this is the grid diameter.  For forward KL
        balls the divergence of any admissible distribution is at most
        ``max_j -log center_j`` over the center's support; other phi balls
        fall back on the chi-square/TV analogues.
        """
        if self.family == "wasserstein":
            return center.grid.diameter
        supp = center.support_indices()
        wmin = float(np.min(center.weights[supp]))
        if self.generator == "kl":
            return -math.log(wmin)
        if self.generator == "chi2":
            return (1.0 - wmin) ** 2 / wmin + (1.0 - wmin)
        return 1.0  # tv is bounded by 1

    def label(self) -> str:
        if self.family == "wasserstein":
            return f"wasserstein-{self.p:g}"
        suffix = "" if self.orientation == "forward" else "-rev"
        return f"{self.generator}{suffix}"


@dataclass(frozen=True)
class TransportPlan:
    """An optimal coupling between two distributions on the grid."""

    matrix: np.ndarray  # (m, m), entry ij moves mass from atom i of a to atom j of b
    cost: float  # sum of matrix * ground_metric**order
    order: float

    def validate(self, a: DiscreteDistribution, b: DiscreteDistribution, tol: float = 1e-9) -> None:
        rows = self.matrix.sum(axis=1)
        cols = self.matrix.sum(axis=0)
        if np.max(np.abs(rows - a.weights)) > tol or np.max(np.abs(cols - b.weights)) > tol:
            raise LPFailureError("transport plan marginals drifted beyond tolerance")
        if np.min(self.matrix) < -tol:
            raise LPFailureError("transport plan has negative mass")
        expected = float(np.sum(self.matrix * a.grid.ground_metric**self.order))
        if abs(expected - self.cost) > max(1e-9, 1e-9 * abs(self.cost)):
            raise LPFailureError("transport plan cost is inconsistent")


@dataclass(frozen=True)
class AmbiguityBall:
    """All distributions within ``radius`` of ``center`` under ``kind``."""

    center: DiscreteDistribution
    radius: float
    kind: DivergenceKind

    def __post_init__(self) -> None:
        if not (math.isfinite(self.radius) and self.radius >= 0.0):
            raise ValueError("ball radius must be finite and >= 0")

    @property
    def grid(self) -> SupportGrid:
        return self.center.grid


def _require_same_grid(a: DiscreteDistribution, b: DiscreteDistribution) -> None:
    if not a.grid.same_as(b.grid):
        raise GridMismatchError("distributions live on different grids")


def optimal_transport(a: DiscreteDistribution, b: DiscreteDistribution, p: float = 1.0) -> TransportPlan:
    """Solve the transport LP between ``a`` and ``b`` with cost ``d**p``."""
    _require_same_grid(a, b)
    if not (math.isfinite(p) and p >= 1.0):
        raise ValueError("order must be finite and >= 1")
    m = a.grid.size
    cost = (a.grid.ground_metric**p).reshape(-1)
    # Row marginals (mass leaving atom i of a), then column marginals.
    a_eq = np.zeros((2 * m, m * m))
    for i in range(m):
        a_eq[i, i * m : (i + 1) * m] = 1.0
    for j in range(m):
        a_eq[m + j, j::m] = 1.0
    b_eq = np.concatenate([a.weights, b.weights])
    res = solve_lp(cost, a_eq=a_eq, b_eq=b_eq)
    if not res.ok:
        raise LPFailureError(
            f"transport LP ended with status {res.status!r} on a balanced instance (m={m}, p={p})"
        )
    plan = TransportPlan(np.maximum(res.x.reshape(m, m), 0.0), float(res.value), p)
    plan.validate(a, b)
    return plan


def wasserstein(a: DiscreteDistribution, b: DiscreteDistribution, p: float = 1.0) -> float:
    """Order-p Wasserstein distance: p-th root of the optimal transport cost."""
    return optimal_transport(a, b, p).cost ** (1.0 / p)


def phi_divergence(a: DiscreteDistribution, b: DiscreteDistribution, generator: str = "kl") -> float:
    """``sum_j b_j phi(a_j / b_j)`` with the convention ``0 * phi(0/0) = 0``.

    Mass of ``a`` outside the support of ``b`` contributes at the generator's
    slope at infinity, so the KL and chi-square divergences of a
    non-absolutely-continuous ``a`` are ``+inf`` while TV stays finite.
    """
    _require_same_grid(a, b)
    if generator not in _PHI_GENERATORS:
        raise ValueError(f"unknown phi generator {generator!r}")
    aw, bw = a.weights, b.weights
    pos = bw > 0.0
    total = float(np.sum(bw[pos] * _phi(generator, aw[pos] / bw[pos])))
    escaped = float(np.sum(aw[~pos]))
    if escaped > 0.0:
        slope = _phi_slope_at_infinity(generator)
        total = total + slope * escaped if math.isfinite(slope) else math.inf
    return total


def membership(ball: AmbiguityBall, q: DiscreteDistribution) -> bool:
    """Whether ``q`` lies in the closed ball (within a 1e-10 slack)."""
    _require_same_grid(ball.center, q)
    return ball.kind.distance(q, ball.center) <= ball.radius + _MEMBERSHIP_SLACK


def _dirac_at(grid: SupportGrid, index: int) -> DiscreteDistribution:
    return DiscreteDistribution.dirac(grid, index)


def _wasserstein_extremal(ball: AmbiguityBall, costs: np.ndarray, maximize: bool) -> tuple[float, DiscreteDistribution]:
    center = ball.center
    m = center.grid.size
    eps = ball.radius
    if eps >= center.grid.diameter:
        # The ball covers the whole simplex; a Dirac at the best atom wins.
        idx = int(np.argmax(costs)) if maximize else int(np.argmin(costs))
        return float(costs[idx]), _dirac_at(center.grid, idx)
    dist_pow = center.grid.ground_metric**ball.kind.p
    budget = eps**ball.kind.p
    scale = max(float(np.max(dist_pow)), 1e-30)
    # Variables pi[i, j]: mass of center atom j reassigned to atom i.
    obj = np.repeat(costs, m).astype(float)
    sign = -1.0 if maximize else 1.0
    a_eq = np.zeros((m, m * m))
    for j in range(m):
        a_eq[j, j::m] = 1.0
    a_ub = (dist_pow / scale).reshape(1, -1)
    res = solve_lp(sign * obj, a_eq=a_eq, b_eq=center.weights, a_ub=a_ub, b_ub=[budget / scale])
    if not res.ok:
        raise LPFailureError(
            f"ball-constrained expectation LP ended with status {res.status!r} "
            f"(m={m}, eps={eps!r}, p={ball.kind.p})"
        )
    plan = res.x.reshape(m, m)
    witness = DiscreteDistribution(center.grid, np.maximum(plan.sum(axis=1), 0.0))
    return float(sign * res.value), witness


def _kl_log_partition(log_w: np.ndarray, shifted: np.ndarray, lam: float) -> float:
    return float(logsumexp(log_w + shifted / lam))


def _kl_tilt(weights: np.ndarray, supp: np.ndarray, shifted: np.ndarray, lam: float) -> np.ndarray:
    log_w = np.log(weights[supp])
    log_t = log_w + shifted / lam
    log_t -= logsumexp(log_t)
    tilt = np.zeros_like(weights)
    tilt[supp] = np.exp(log_t)
    return tilt


def _kl_extremal(ball: AmbiguityBall, costs: np.ndarray, maximize: bool) -> tuple[float, DiscreteDistribution]:
    center = ball.center
    eps = ball.radius
    c = costs if maximize else -costs
    supp = center.support_indices()
    w = center.weights[supp]
    cs = c[supp]
    top = float(np.max(cs))
    if top - float(np.min(cs)) < 1e-15:
        return (float(center.expectation(costs)), center)
    # Saturation: the cheapest way to pin the expectation at the top value is
    # the center conditioned on its argmax atoms.
    arg_top = cs >= top - 1e-15
    sat_eps = -math.log(float(np.sum(w[arg_top])))
    if eps >= sat_eps:
        tilt = np.zeros_like(center.weights)
        tilt[supp[arg_top]] = w[arg_top] / float(np.sum(w[arg_top]))
        witness = DiscreteDistribution(center.grid, tilt)
        value = top if maximize else -top
        return value, witness

    log_w = np.log(w)
    shifted = cs - top

    def kl_at(lam: float) -> float:
        log_z = _kl_log_partition(log_w, shifted, lam)
        log_t = log_w + shifted / lam - log_z
        t = np.exp(log_t)
        return float(np.sum(t * (log_t - log_w)))

    span = top - float(np.min(cs))
    lam_hi = max(span, 1.0)
    while kl_at(lam_hi) > eps:
        lam_hi *= 2.0
        if lam_hi > 1e18:
            raise LPFailureError("KL dual bracket expansion failed upward")
    lam_lo = min(span, 1.0) * 1e-2
    while kl_at(lam_lo) < eps:
        lam_lo *= 0.5
        if lam_lo < 1e-300:
            raise LPFailureError("KL dual bracket expansion failed downward")
    # KL of the tilt decreases monotonically in lambda, so the dual optimum
    # is the unique root of KL(tilt) = eps.
    lam_star = brentq(lambda lam: kl_at(lam) - eps, lam_lo, lam_hi, xtol=1e-15, rtol=8.9e-16)
    dual = lam_star * eps + lam_star * _kl_log_partition(log_w, shifted, lam_star) + top
    tilt = _kl_tilt(center.weights, supp, shifted, lam_star)
    witness = DiscreteDistribution(center.grid, tilt)
    value = dual if maximize else -dual
    return float(value), witness


def extremal_expectation(
    ball: AmbiguityBall, costs, sense: str = "max"
) -> tuple[float, DiscreteDistribution]:
    """Worst-case (``sense="max"``) or best-case expectation of per-atom costs.

    Wasserstein balls are solved exactly as an LP over couplings whose column
    marginals equal the center; the witness is the row marginal of the
    optimal coupling.  KL balls go through the exponential-tilting dual
    ``min_{lam>0} lam*eps + lam*log E_center exp(c/lam)``; the returned value
    is the dual optimum (within 1e-8) and the witness is the tilted center.
    """
    if sense not in ("max", "min"):
        raise ValueError("sense must be 'max' or 'min'")
    c = np.asarray(costs, dtype=float)
    if c.shape != (ball.grid.size,):
        raise ValueError(f"need one cost per atom ({ball.grid.size}), got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ValueError("costs must be finite")
    if ball.radius == 0.0:
        return float(ball.center.expectation(c)), ball.center
    maximize = sense == "max"
    if ball.kind.family == "wasserstein":
        return _wasserstein_extremal(ball, c, maximize)
    if ball.kind.generator == "kl" and ball.kind.orientation == "forward":
        return _kl_extremal(ball, c, maximize)
    raise ValueError(
        "extremal expectations are implemented for Wasserstein balls and forward KL balls"
    )


def absolute_deviation(
    ball: AmbiguityBall, costs, ref_value: float
) -> tuple[float, DiscreteDistribution, float, float]:
    """Largest |expectation - ref_value| over the ball, with its witness.

    Shared by the absolute-deviation solver and the measure-only API so the
    two report identical numbers.  Ties between the high and low side break
    toward the high side.
    """
    hi, hi_witness = extremal_expectation(ball, costs, "max")
    lo, lo_witness = extremal_expectation(ball, costs, "min")
    up = hi - ref_value
    down = ref_value - lo
    if up >= down:
        return float(up), hi_witness, hi, lo
    return float(down), lo_witness, hi, lo
