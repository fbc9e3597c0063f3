"""Robustness measures of a given decision.

These report how much the expected cost (or the optimizing decision) can
move when the distribution moves: over a fixed ball (absolute), per unit of
divergence (relative), in the small-radius limit (local), across a model set
(solution/objective set variants), or probabilistically under a Dirichlet
prior over distributions (PAC).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from drolab.cost import CostFunction, DecisionSpace, cost_table
from drolab.divergence import (
    AmbiguityBall,
    DivergenceKind,
    absolute_deviation,
    extremal_expectation,
    membership,
)
from drolab.solvers import deviation_rate_profile, lipschitz_rate_certificate, satisficing_radius_grid
from drolab.support import DiscreteDistribution, mixture, rng_from_seed

LOCAL_SCALE_RANGE = range(4, 13)  # radii diameter * 2**-k


@dataclass(frozen=True)
class DirichletPrior:
    """Finite-dimensional Dirichlet prior over the simplex of grid weights.

    Draws are Dirichlet with parameter ``concentration * base.weights``,
    restricted to the base's support; the mean distribution is ``base``.
    """

    base: DiscreteDistribution
    concentration: float

    def __post_init__(self) -> None:
        if not (self.concentration > 0.0 and math.isfinite(self.concentration)):
            raise ValueError("concentration must be a positive finite scalar")

    def sample_weights(self, draws: int, seed) -> np.ndarray:
        rng = rng_from_seed(seed)
        supp = self.base.support_indices()
        alpha = self.concentration * self.base.weights[supp]
        out = np.zeros((draws, self.base.grid.size))
        out[:, supp] = rng.dirichlet(alpha, size=draws)
        return out


@dataclass(frozen=True)
class RobustnessReport:
    """One robustness measurement of a decision."""

    x: np.ndarray | None
    kind: str
    measure: float
    radius: float | None = None
    witness: DiscreteDistribution | None = None
    confidence: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_json(self, include_witness_grid: bool = False) -> dict:
        doc: dict = {
            "kind": self.kind,
            "x": None if self.x is None else np.asarray(self.x, dtype=float).tolist(),
            "measure": self.measure,
            "radius": self.radius,
            "confidence": self.confidence,
            "diagnostics": self.diagnostics,
        }
        if self.witness is not None:
            doc["witness"] = self.witness.to_json(include_grid=include_witness_grid)
        return doc


def absolute_measure(x, ref_value: float, ball: AmbiguityBall, cf: CostFunction) -> RobustnessReport:
    """Smallest L with |expectation - ref_value| <= L over the whole ball."""
    costs = cf.atom_costs(ball.grid, x)
    dev, witness, hi, lo = absolute_deviation(ball, costs, float(ref_value))
    return RobustnessReport(
        np.atleast_1d(np.asarray(x, dtype=float)),
        "absolute",
        float(dev),
        radius=ball.radius,
        witness=witness,
        diagnostics={"max_value": hi, "min_value": lo, "ref_value": float(ref_value)},
    )


def relative_measure(
    x,
    ref_value: float,
    kind: DivergenceKind,
    center: DiscreteDistribution,
    cf: CostFunction,
) -> RobustnessReport:
    """Smallest L with |expectation - ref_value| <= L * divergence, over all P.

    If the center's own expectation misses ``ref_value`` by more than 1e-9
    the ratio diverges as P approaches the center and the measure is +inf.
    Otherwise the measure is the supremum over a log-spaced radius grid, with
    a Lipschitz upper certificate recorded in the diagnostics.
    """
    costs = cf.atom_costs(center.grid, x)
    at_center = float(center.expectation(costs))
    if abs(at_center - ref_value) > 1e-9:
        return RobustnessReport(
            np.atleast_1d(np.asarray(x, dtype=float)),
            "relative",
            math.inf,
            diagnostics={"center_value": at_center, "ref_value": float(ref_value)},
        )
    radii = satisficing_radius_grid(kind, center)
    val, best_k, witness, ratios = deviation_rate_profile(
        center, costs, float(ref_value), 0.0, kind, "two", radii
    )
    certificate = lipschitz_rate_certificate(cf, kind, x)
    return RobustnessReport(
        np.atleast_1d(np.asarray(x, dtype=float)),
        "relative",
        float(val),
        witness=witness,
        diagnostics={
            "radius_grid": radii.tolist(),
            "ratios": ratios,
            "binding_radius": float(radii[best_k]) if best_k >= 0 else None,
            "lower_bound": float(val),
            "upper_certificate": certificate,
            "kind": kind.label(),
        },
    )


def local_measure(
    x_space: DecisionSpace,
    center: DiscreteDistribution,
    ref_value: float,
    cf: CostFunction,
    kind: DivergenceKind,
    variant: str = "objective",
) -> RobustnessReport:
    """Small-radius limit of the per-radius robust value, by extrapolation.

    ``objective``: limit of ``min_x sup_ball |expectation - ref| / radius``.
    ``solution``: limit of ``|robust argmin - nominal argmin| / radius``.
    Evaluated on radii ``cap * 2**-k`` for k = 4..12 with a first-order
    Richardson extrapolation; a non-convergent tail (last relative change
    above 10%) is flagged but the estimate is still returned.
    """
    if variant not in ("objective", "solution"):
        raise ValueError("variant must be 'objective' or 'solution'")
    table = cost_table(cf, center.grid, x_space)
    cap = kind.radius_cap(center)
    nominal_idx = int(np.argmin(table @ center.weights))
    radii = [cap * 2.0**-k for k in LOCAL_SCALE_RANGE]
    values = []
    for eps in radii:
        ball = AmbiguityBall(center, eps, kind)
        if variant == "objective":
            devs = [absolute_deviation(ball, table[k], float(ref_value))[0] for k in range(len(x_space))]
            values.append(float(np.min(devs)) / eps)
        else:
            worst = [extremal_expectation(ball, table[k], "max")[0] for k in range(len(x_space))]
            robust_idx = int(np.argmin(worst))
            values.append(float(np.linalg.norm(x_space[robust_idx] - x_space[nominal_idx])) / eps)
    estimate = max(0.0, 2.0 * values[-1] - values[-2])
    tail_change = abs(values[-1] - values[-2]) / max(abs(values[-1]), abs(values[-2]), 1e-12)
    return RobustnessReport(
        None,
        f"local_{variant}",
        float(estimate),
        diagnostics={
            "radii": radii,
            "ratios": values,
            "converged": bool(tail_change <= 0.10),
            "tail_relative_change": float(tail_change),
            "nominal_index": nominal_idx,
            "kind": kind.label(),
        },
    )


def _optimal_under(table: np.ndarray, weights: np.ndarray) -> tuple[int, float]:
    vals = table @ weights
    idx = int(np.argmin(vals))
    return idx, float(vals[idx])


def _toward_dirac(ball: AmbiguityBall, index: int) -> DiscreteDistribution | None:
    """Furthest ball member on the segment from the center to a Dirac atom."""
    target = DiscreteDistribution.dirac(ball.grid, index)
    if membership(ball, target):
        return target
    lo, hi = 0.0, 1.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if membership(ball, mixture(mid, target, ball.center)):
            lo = mid
        else:
            hi = mid
    if lo <= 0.0:
        return None
    return mixture(lo, target, ball.center)


def set_robustness(
    ball: AmbiguityBall,
    cf: CostFunction,
    space: DecisionSpace,
    variant: str = "objective",
    budget: int = 100,
    seed: int = 0,
) -> RobustnessReport:
    """Estimated spread of the per-distribution optimum across the ball.

    Evaluates the optimal value (``objective``) or optimizer displacement
    (``solution``) at the center, at every extremal witness, and at ``budget``
    random ball members (maximal mixtures toward random Dirac atoms,
    membership-checked).  Reported as a lower-bound estimate; the true
    supremum may be larger.
    """
    if variant not in ("objective", "solution"):
        raise ValueError("variant must be 'objective' or 'solution'")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    table = cost_table(cf, ball.grid, space)
    base_idx, base_val = _optimal_under(table, ball.center.weights)
    candidates: list[DiscreteDistribution] = [ball.center]
    if ball.radius > 0.0:
        for k in range(len(space)):
            for sense in ("max", "min"):
                candidates.append(extremal_expectation(ball, table[k], sense)[1])
    rng = rng_from_seed(seed)
    accepted = 0
    for _ in range(budget):
        j = int(rng.integers(ball.grid.size))
        cand = _toward_dirac(ball, j) if ball.radius > 0.0 else None
        if cand is None or not membership(ball, cand):
            continue
        candidates.append(cand)
        accepted += 1
    best = 0.0
    witness: DiscreteDistribution | None = None
    for cand in candidates:
        idx, val = _optimal_under(table, cand.weights)
        spread = abs(val - base_val) if variant == "objective" else float(
            np.linalg.norm(space[idx] - space[base_idx])
        )
        if spread > best:
            best = spread
            witness = cand
    return RobustnessReport(
        None,
        f"{variant}_set",
        float(best),
        radius=ball.radius,
        witness=witness,
        diagnostics={
            "evaluations": len(candidates),
            "random_accepted": accepted,
            "budget": budget,
            "seed": seed,
            "estimate_is_lower_bound": True,
        },
    )


def pac_robustness(
    prior: DirichletPrior,
    cf: CostFunction,
    x,
    ref_value: float,
    level: float,
    mc_draws: int = 10_000,
    seed: int = 0,
) -> RobustnessReport:
    """Probability that a decision is robust at level L under the prior.

    Returns the exact Markov lower bound
    ``max(0, 1 - (E_base h(x) + ref_value) / L)`` (using the mean-measure
    identity E over the prior of E_P h equals E_base h, valid for
    nonnegative costs) as ``confidence``, together with the Monte-Carlo
    estimate of ``Pr[|E_P h(x) - ref_value| <= L]`` over Dirichlet draws in
    the diagnostics.
    """
    if level <= 0.0:
        raise ValueError("robustness level must be positive")
    if not cf.nonneg:
        raise ValueError("the PAC bound requires a cost flagged nonnegative")
    costs = cf.atom_costs(prior.base.grid, x)
    if np.min(costs) < -1e-12:
        raise ValueError(
            f"cost {cf.name!r} attains {np.min(costs)} < 0; the bound needs a nonnegative cost"
        )
    mean_cost = float(prior.base.expectation(costs))
    markov = max(0.0, 1.0 - (mean_cost + float(ref_value)) / level)
    weights = prior.sample_weights(mc_draws, seed)
    expectations = weights @ costs
    hits = np.abs(expectations - float(ref_value)) <= level
    emp = float(np.mean(hits))
    sigma = math.sqrt(max(emp * (1.0 - emp), 1e-12) / mc_draws)
    return RobustnessReport(
        np.atleast_1d(np.asarray(x, dtype=float)),
        "pac",
        float(level),
        confidence=markov,
        diagnostics={
            "markov_bound": markov,
            "empirical_probability": emp,
            "empirical_sigma": sigma,
            "mc_mean_expectation": float(np.mean(expectations)),
            "base_expectation": mean_cost,
            "ref_value": float(ref_value),
            "draws": int(mc_draws),
            "seed": int(seed),
        },
    )
