"""Decision-finding models over a finite decision grid.

Outer minimization is exhaustive search over the decision space, so every
equivalence identity between these models can be checked without optimizer
error; ties always break toward the lowest decision index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from drolab import bayes as _bayes
from drolab.cost import CostFunction, DecisionSpace, Regularizer, cost_table
from drolab.divergence import (
    AmbiguityBall,
    DivergenceKind,
    absolute_deviation,
    extremal_expectation,
)
from drolab.support import DiscreteDistribution, SampleSet

SATISFICING_RADII = 40
SATISFICING_RADIUS_FLOOR = 1e-4


@dataclass(frozen=True)
class Solution:
    """Outcome of one decision model.

    ``objective_value`` is the model's own optimum (expected cost for SAA
    variants, worst-case value for min-max, the measure itself for the
    deviation-minimizing models); ``measure`` and ``witness`` are populated
    by the robust models.
    """

    x: np.ndarray
    x_index: int
    objective_value: float
    method: str
    witness: DiscreteDistribution | None = None
    measure: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_json(self, include_witness_grid: bool = False) -> dict:
        doc: dict = {
            "method": self.method,
            "x": self.x.tolist(),
            "x_index": self.x_index,
            "objective_value": self.objective_value,
            "measure": self.measure,
            "diagnostics": self.diagnostics,
        }
        if self.witness is not None:
            doc["witness"] = self.witness.to_json(include_grid=include_witness_grid)
        return doc


def _argmin_lowest(values: np.ndarray) -> tuple[int, int]:
    """First index attaining the minimum, plus the number of exact ties."""
    idx = int(np.argmin(values))
    ties = int(np.sum(values == values[idx]))
    return idx, ties


def nominal_values(center: DiscreteDistribution, cf: CostFunction, space: DecisionSpace) -> np.ndarray:
    return cost_table(cf, center.grid, space) @ center.weights


def solve_saa(data: DiscreteDistribution, cf: CostFunction, space: DecisionSpace) -> Solution:
    """Minimize the expected cost under ``data`` over the decision grid."""
    values = nominal_values(data, cf, space)
    idx, ties = _argmin_lowest(values)
    return Solution(space[idx], idx, float(values[idx]), "saa", diagnostics={"ties": ties})


def solve_regularized_saa(
    data: DiscreteDistribution,
    cf: CostFunction,
    f: Regularizer,
    lam: float,
    space: DecisionSpace,
) -> Solution:
    """Minimize expected cost plus ``lam`` times the regularizer."""
    if lam < 0:
        raise ValueError("regularization weight must be >= 0")
    values = nominal_values(data, cf, space) + lam * np.array([f(x) for x in space])
    idx, ties = _argmin_lowest(values)
    return Solution(space[idx], idx, float(values[idx]), "reg_saa", diagnostics={"ties": ties, "lambda": lam})


def solve_bayes_dp(
    prior: DiscreteDistribution,
    alpha: float,
    data: SampleSet,
    cf: CostFunction,
    space: DecisionSpace,
    beta: float | None = None,
) -> Solution:
    """SAA under the posterior-mean mixture of prior and empirical weights.

    The mixture weight on the prior is ``alpha / (alpha + n)`` unless an
    explicit ``beta`` override is supplied.
    """
    spec = _bayes.PriorSpec(prior, alpha=None if beta is not None else alpha, beta=beta)
    blended = _bayes.dp_posterior_mean(spec, data)
    sol = solve_saa(blended, cf, space)
    diag = dict(sol.diagnostics)
    if beta is not None:
        diag["beta"] = beta
    else:
        diag["beta"] = 1.0 if math.isinf(alpha) else alpha / (alpha + data.n)
    return Solution(sol.x, sol.x_index, sol.objective_value, "bayes_dp", diagnostics=diag)


def solve_minmax_dro(ball: AmbiguityBall, cf: CostFunction, space: DecisionSpace) -> Solution:
    """Minimize the worst-case expected cost over the ball.

    The reported measure is the worst-case value minus the best nominal value
    at the ball's center (the one-sided deviation the solution guarantees).
    """
    table = cost_table(cf, ball.grid, space)
    ref = float(np.min(table @ ball.center.weights))
    inner = np.empty(len(space))
    witnesses: list[DiscreteDistribution] = []
    for k in range(len(space)):
        val, wit = extremal_expectation(ball, table[k], "max")
        inner[k] = val
        witnesses.append(wit)
    idx, ties = _argmin_lowest(inner)
    return Solution(
        space[idx],
        idx,
        float(inner[idx]),
        "minmax_dro",
        witness=witnesses[idx],
        measure=float(inner[idx] - ref),
        diagnostics={"ties": ties, "nominal_ref": ref, "radius": ball.radius, "kind": ball.kind.label()},
    )


def solve_absolute_dro(ball: AmbiguityBall, cf: CostFunction, space: DecisionSpace) -> Solution:
    """Minimize the largest two-sided deviation from the best nominal value.

    For each decision the deviation over the ball is evaluated exactly (two
    extremal expectations); the solution minimizes that deviation and carries
    the binding extremal distribution as witness.
    """
    table = cost_table(cf, ball.grid, space)
    ref = float(np.min(table @ ball.center.weights))
    dev = np.empty(len(space))
    witnesses: list[DiscreteDistribution] = []
    for k in range(len(space)):
        d, wit, _, _ = absolute_deviation(ball, table[k], ref)
        dev[k] = d
        witnesses.append(wit)
    idx, ties = _argmin_lowest(dev)
    return Solution(
        space[idx],
        idx,
        float(dev[idx]),
        "absolute_dro",
        witness=witnesses[idx],
        measure=float(dev[idx]),
        diagnostics={"ties": ties, "nominal_ref": ref, "radius": ball.radius, "kind": ball.kind.label()},
    )


def satisficing_radius_grid(kind: DivergenceKind, center: DiscreteDistribution) -> np.ndarray:
    cap = kind.radius_cap(center)
    return np.geomspace(cap * SATISFICING_RADIUS_FLOOR, cap, SATISFICING_RADII)


def deviation_rate_profile(
    center: DiscreteDistribution,
    costs: np.ndarray,
    ref: float,
    slack: float,
    kind: DivergenceKind,
    sided: str,
    radii: np.ndarray,
) -> tuple[float, int, DiscreteDistribution | None, list[float]]:
    """Supremum over the radius grid of (deviation - slack) / radius."""
    best = -math.inf
    best_k = -1
    best_witness: DiscreteDistribution | None = None
    ratios: list[float] = []
    for k, eps in enumerate(radii):
        ball = AmbiguityBall(center, float(eps), kind)
        if sided == "one":
            val, wit = extremal_expectation(ball, costs, "max")
            deviation = val - ref
        else:
            deviation, wit, _, _ = absolute_deviation(ball, costs, ref)
        ratio = (deviation - slack) / eps
        ratios.append(float(ratio))
        if ratio > best:
            best = ratio
            best_k = k
            best_witness = wit
    return max(best, 0.0), best_k, best_witness, ratios


def lipschitz_rate_certificate(cf: CostFunction, kind: DivergenceKind, x) -> float:
    # Deviations per unit Wasserstein distance never exceed the cost's grid
    # Lipschitz constant; no analogous finite cap exists for phi balls.
    if kind.family == "wasserstein" and cf.lip_in_xi is not None:
        return float(cf.lip_in_xi(x))
    return math.inf


def solve_robust_satisficing(
    center: DiscreteDistribution,
    cf: CostFunction,
    space: DecisionSpace,
    kind: DivergenceKind,
    sided: str = "one",
    target_slack: float = 0.0,
) -> Solution:
    """Minimize the deviation-per-divergence rate subject to a nominal target.

    With target ``min_x nominal + target_slack``, only decisions meeting the
    target at zero divergence are feasible; among them the solution minimizes
    the supremum over a log-spaced radius grid of
    ``(deviation beyond the target) / radius``.  The reported measure is that
    grid supremum (a certified lower bound); diagnostics carry the grid, the
    per-radius ratios at the solution, and a Lipschitz upper certificate.
    """
    if sided not in ("one", "two"):
        raise ValueError("sided must be 'one' or 'two'")
    if target_slack < 0:
        raise ValueError("target slack must be >= 0")
    table = cost_table(cf, center.grid, space)
    nominal = table @ center.weights
    ref = float(np.min(nominal))
    tau = ref + target_slack
    feasible = np.flatnonzero(nominal <= tau + 1e-12)
    if feasible.size == 0:
        raise RuntimeError("no decision meets the nominal target; this cannot happen for slack >= 0")
    radii = satisficing_radius_grid(kind, center)
    best_idx = -1
    best_val = math.inf
    best_witness: DiscreteDistribution | None = None
    best_ratios: list[float] = []
    best_k = -1
    for k in feasible:
        val, arg_k, wit, ratios = deviation_rate_profile(
            center, table[k], ref, target_slack, kind, sided, radii
        )
        if val < best_val:
            best_val = val
            best_idx = int(k)
            best_witness = wit
            best_ratios = ratios
            best_k = arg_k
    certificate = lipschitz_rate_certificate(cf, kind, space[best_idx])
    return Solution(
        space[best_idx],
        best_idx,
        float(best_val),
        "satisficing",
        witness=best_witness,
        measure=float(best_val),
        diagnostics={
            "sided": sided,
            "target_slack": target_slack,
            "nominal_ref": ref,
            "feasible_count": int(feasible.size),
            "radius_grid": radii.tolist(),
            "ratios": best_ratios,
            "binding_radius": float(radii[best_k]) if best_k >= 0 else None,
            "lower_bound": float(best_val),
            "upper_certificate": certificate,
            "kind": kind.label(),
        },
    )
