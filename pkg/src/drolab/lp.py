"""Dense two-phase simplex for the tiny linear programs this package builds.

Every LP solved here has at most a few hundred nonnegative variables and a
couple dozen rows (transport plans, ball-constrained expectations, moment
feasibility), so a dense tableau with Bland's anti-cycling rule is both fast
enough and free of external solver dependencies.  Feasibility tolerance is
1e-9 throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FEASIBILITY_TOL = 1e-9
_PIVOT_TOL = 1e-10


class LPFailureError(RuntimeError):
    """Numerical failure inside the simplex (distinct from infeasibility)."""


@dataclass(frozen=True)
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    value: float | None
    iterations: int

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _simplex(tableau: np.ndarray, basis: list[int], costs: np.ndarray, max_iter: int) -> tuple[str, int]:
    """Run Bland-rule simplex iterations in place; returns (status, iterations)."""
    m = tableau.shape[0]
    ncols = tableau.shape[1] - 1
    for it in range(max_iter):
        cb = costs[basis]
        reduced = costs - cb @ tableau[:, :ncols]
        entering = -1
        for j in range(ncols):
            if reduced[j] < -FEASIBILITY_TOL:
                entering = j
                break
        if entering < 0:
            return "optimal", it
        col = tableau[:, entering]
        leaving = -1
        best_ratio = np.inf
        for i in range(m):
            if col[i] > _PIVOT_TOL:
                ratio = tableau[i, -1] / col[i]
                if ratio < best_ratio - _PIVOT_TOL or (
                    abs(ratio - best_ratio) <= _PIVOT_TOL
                    and leaving >= 0
                    and basis[i] < basis[leaving]
                ):
                    best_ratio = ratio
                    leaving = i
        if leaving < 0:
            return "unbounded", it
        pivot = tableau[leaving, entering]
        tableau[leaving, :] /= pivot
        for i in range(m):
            if i != leaving and abs(tableau[i, entering]) > 0.0:
                tableau[i, :] -= tableau[i, entering] * tableau[leaving, :]
        basis[leaving] = entering
    raise LPFailureError(f"simplex did not terminate within {max_iter} iterations")


def solve_lp(
    c,
    a_eq=None,
    b_eq=None,
    a_ub=None,
    b_ub=None,
    max_iter: int | None = None,
) -> LPResult:
    """Minimize ``c @ x`` over ``x >= 0`` with ``a_eq x = b_eq`` and ``a_ub x <= b_ub``.

    All variables are nonnegative; callers encode free variables themselves
    (none of the programs in this package need them).
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    blocks = []
    rhs = []
    n_ub = 0
    if a_eq is not None:
        a_eq = np.atleast_2d(np.asarray(a_eq, dtype=float))
        b_eq = np.atleast_1d(np.asarray(b_eq, dtype=float))
        blocks.append((a_eq, b_eq, False))
    if a_ub is not None:
        a_ub = np.atleast_2d(np.asarray(a_ub, dtype=float))
        b_ub = np.atleast_1d(np.asarray(b_ub, dtype=float))
        n_ub = a_ub.shape[0]
        blocks.append((a_ub, b_ub, True))
    if not blocks:
        raise ValueError("at least one constraint block is required")

    rows = []
    slack_rows = []
    row_id = 0
    for mat, vec, is_ub in blocks:
        if mat.shape[1] != n:
            raise ValueError("constraint matrix width does not match objective length")
        if mat.shape[0] != vec.size:
            raise ValueError("constraint rhs length does not match matrix")
        for i in range(mat.shape[0]):
            rows.append(mat[i])
            rhs.append(vec[i])
            if is_ub:
                slack_rows.append(row_id)
            row_id += 1
    a = np.array(rows, dtype=float)
    b = np.array(rhs, dtype=float)
    m = a.shape[0]

    # Slack columns for <= rows, then flip rows to make the rhs nonnegative.
    slack = np.zeros((m, n_ub))
    for k, i in enumerate(slack_rows):
        slack[i, k] = 1.0
    full = np.hstack([a, slack]) if n_ub else a
    for i in range(m):
        if b[i] < 0.0:
            full[i, :] *= -1.0
            b[i] = -b[i]
    n_struct = n + n_ub

    # Phase 1: artificial basis, minimize the artificial mass.
    art = np.eye(m)
    tableau = np.hstack([full, art, b[:, None]])
    basis = [n_struct + i for i in range(m)]
    phase1_costs = np.concatenate([np.zeros(n_struct), np.ones(m)])
    cap = max_iter if max_iter is not None else 200 * (n_struct + m + 10)
    status, it1 = _simplex(tableau, basis, phase1_costs, cap)
    if status != "optimal":
        raise LPFailureError(f"phase 1 ended with status {status!r}")
    scale = max(1.0, float(np.max(np.abs(b))) if m else 1.0)
    infeas = float(phase1_costs[basis] @ tableau[:, -1])
    if infeas > FEASIBILITY_TOL * scale * 10.0:
        return LPResult("infeasible", None, None, it1)

    # Drive artificials out of the basis; drop redundant rows.
    keep = np.ones(m, dtype=bool)
    for i in range(m):
        if basis[i] >= n_struct:
            pivot_col = -1
            for j in range(n_struct):
                if abs(tableau[i, j]) > 1e-8:
                    pivot_col = j
                    break
            if pivot_col < 0:
                keep[i] = False
                continue
            pivot = tableau[i, pivot_col]
            tableau[i, :] /= pivot
            for r in range(m):
                if r != i and abs(tableau[r, pivot_col]) > 0.0:
                    tableau[r, :] -= tableau[r, pivot_col] * tableau[i, :]
            basis[i] = pivot_col
    tableau = np.hstack([tableau[keep][:, :n_struct], tableau[keep][:, -1:]])
    basis = [bi for bi, k in zip(basis, keep) if k]
    tableau[:, -1] = np.maximum(tableau[:, -1], 0.0)

    phase2_costs = np.concatenate([c, np.zeros(n_ub)])
    status, it2 = _simplex(tableau, basis, phase2_costs, cap)
    if status == "unbounded":
        return LPResult("unbounded", None, None, it1 + it2)
    if status != "optimal":
        raise LPFailureError(f"phase 2 ended with status {status!r}")

    x_full = np.zeros(n_struct)
    for i, bi in enumerate(basis):
        x_full[bi] = tableau[i, -1]
    x_full[np.abs(x_full) < 1e-14] = 0.0
    x = x_full[:n]
    return LPResult("optimal", x, float(c @ x), it1 + it2)
