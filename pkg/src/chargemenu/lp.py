"""Dense linear-programming kernel.

A deliberately small, bit-deterministic two-phase primal simplex with
Bland's anti-cycling rule.  Problems are stated as

    maximize    c . x
    subject to  a x <= b,  a_eq x = b_eq,  lo <= x <= hi

with finite lower bounds (upper bounds may be +inf).  Rows are scaled to
unit infinity-norm before pivoting; all tolerances apply to the scaled
data.  Duals are recovered from the final reduced-cost row: one
nonnegative multiplier per inequality row, a free multiplier per equality
row, and per-variable reduced costs c - a'y - a_eq'y_eq for the bound
multipliers.

Infeasible and unbounded problems are reported through the solution
status, not through exceptions; exceptions are reserved for malformed
input (non-finite data, shape mismatches).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LpProblem", "LpSolution", "solve_lp"]

_PIVOT_TOL = 1e-9
_FEAS_TOL = 1e-7


@dataclass(eq=False)
class LpProblem:
    """Maximization problem; ``None`` blocks are treated as absent."""

    c: np.ndarray
    a: np.ndarray | None = None
    b: np.ndarray | None = None
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None


@dataclass(eq=False)
class LpSolution:
    """Solver outcome.

    ``status`` is one of ``"optimal"``, ``"infeasible"``, ``"unbounded"``.
    On success ``x`` is primal-feasible to 1e-9 * max(1, |b|) per row,
    ``duals_ineq``/``duals_eq`` carry the row multipliers and
    ``reduced_costs`` the per-variable bound multipliers; all are ``None``
    otherwise.
    """

    status: str
    x: np.ndarray | None = None
    objective: float | None = None
    duals_ineq: np.ndarray | None = None
    duals_eq: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None


def _prepare(problem: LpProblem):
    c = np.asarray(problem.c, dtype=float)
    if c.ndim != 1:
        raise ValueError("objective must be a vector")
    n = c.shape[0]

    def block(mat, rhs, label):
        if mat is None and rhs is None:
            return np.zeros((0, n)), np.zeros(0)
        if mat is None or rhs is None:
            raise ValueError(f"{label} matrix and rhs must be given together")
        m = np.asarray(mat, dtype=float)
        r = np.asarray(rhs, dtype=float)
        if m.ndim != 2 or m.shape[1] != n or r.shape != (m.shape[0],):
            raise ValueError(f"{label} block has inconsistent shape")
        return m, r

    a, b = block(problem.a, problem.b, "inequality")
    a_eq, b_eq = block(problem.a_eq, problem.b_eq, "equality")

    lo = (
        np.zeros(n)
        if problem.lo is None
        else np.asarray(problem.lo, dtype=float).copy()
    )
    hi = (
        np.full(n, np.inf)
        if problem.hi is None
        else np.asarray(problem.hi, dtype=float).copy()
    )
    if lo.shape != (n,) or hi.shape != (n,):
        raise ValueError("bounds must match the variable count")
    if not np.all(np.isfinite(lo)):
        raise ValueError("lower bounds must be finite")
    if np.any(hi < lo):
        raise ValueError("upper bounds must dominate lower bounds")
    for name, arr in (("c", c), ("a", a), ("b", b), ("a_eq", a_eq), ("b_eq", b_eq)):
        if arr.size and not np.all(np.isfinite(arr)):
            raise ValueError(f"non-finite coefficients in '{name}'")
    return c, a, b, a_eq, b_eq, lo, hi


def solve_lp(problem: LpProblem) -> LpSolution:
    """Solve the problem with a two-phase dense simplex.  Deterministic:
    identical inputs produce bit-identical outputs."""
    c, a, b, a_eq, b_eq, lo, hi = _prepare(problem)
    n = c.shape[0]
    m_user = a.shape[0]
    m_eq = a_eq.shape[0]

    # Shift x = lo + z so that z >= 0.
    b = b - a @ lo if m_user else b
    b_eq = b_eq - a_eq @ lo if m_eq else b_eq
    hi_shift = hi - lo

    # Finite upper bounds become extra inequality rows z_j <= hi_j - lo_j.
    bound_vars = np.nonzero(np.isfinite(hi_shift))[0]
    rows_ub = len(bound_vars)
    a_ub = np.zeros((m_user + rows_ub, n))
    b_ub = np.zeros(m_user + rows_ub)
    if m_user:
        a_ub[:m_user] = a
        b_ub[:m_user] = b
    for k, j in enumerate(bound_vars):
        a_ub[m_user + k, j] = 1.0
        b_ub[m_user + k] = hi_shift[j]

    m_ub = a_ub.shape[0]
    m = m_ub + m_eq

    # Row scaling to unit infinity-norm (coefficients only).
    big = np.vstack([a_ub, a_eq]) if m else np.zeros((0, n))
    rhs = np.concatenate([b_ub, b_eq])
    scale = np.ones(m)
    for i in range(m):
        s = np.max(np.abs(big[i])) if n else 0.0
        if s > 0.0:
            scale[i] = s
            big[i] /= s
            rhs[i] /= s

    # Flip rows with negative rhs so a basic start exists.
    sign = np.ones(m)
    neg = rhs < 0.0
    sign[neg] = -1.0
    big[neg] *= -1.0
    rhs[neg] *= -1.0

    # Tableau columns: structural z | slacks (one per inequality row) |
    # artificials (flipped inequality rows and all equality rows).
    slack_cols = np.arange(n, n + m_ub)
    art_rows = [i for i in range(m) if i >= m_ub or sign[i] < 0.0]
    art_cols = {r: n + m_ub + k for k, r in enumerate(art_rows)}
    n_cols = n + m_ub + len(art_rows)

    tab = np.zeros((m, n_cols))
    tab[:, :n] = big
    for i in range(m_ub):
        tab[i, slack_cols[i]] = sign[i]
    for r, col in art_cols.items():
        tab[r, col] = 1.0
    rhs = rhs.copy()

    basis = np.empty(m, dtype=int)
    for i in range(m):
        if i in art_cols:
            basis[i] = art_cols[i]
        else:
            basis[i] = slack_cols[i]

    barred = np.zeros(n_cols, dtype=bool)

    def run_simplex(cost: np.ndarray) -> str:
        """Gauss-Jordan simplex on (tab, rhs, basis) maximizing cost.z.

        Entering variable: steepest reduced cost (first index on ties).
        Leaving variable: lexicographic ratio test anchored on the phase's
        starting basis, which resolves the heavy degeneracy of allocation
        problems in few pivots; Bland's lowest-index rule takes over as a
        terminal anti-cycling safeguard if a phase ever stalls anyway.
        """
        red = cost.copy()
        for i in range(m):
            if cost[basis[i]] != 0.0:
                red -= cost[basis[i]] * tab[i]
        # tab[:, ref_cols] is the identity at phase start; over pivots it
        # tracks the basis inverse, which the lexicographic order needs.
        ref_cols = basis.copy()
        max_iter = 200 * (m + n_cols) + 10_000
        stalled = 0
        for _ in range(max_iter):
            eligible = (red > _PIVOT_TOL) & ~barred
            if not eligible.any():
                return "optimal"
            if stalled <= 2_000:
                enter = int(np.argmax(np.where(eligible, red, -np.inf)))
            else:
                enter = int(np.argmax(eligible))
            col = tab[:, enter]
            pos = col > _PIVOT_TOL
            if not pos.any():
                return "unbounded"
            ratios = np.where(pos, rhs / np.where(pos, col, 1.0), np.inf)
            best = float(ratios.min())
            ties = np.nonzero(ratios <= best + 1e-12)[0]
            if ties.size > 1:
                denom = col[ties]
                for rc in ref_cols:
                    vals = tab[ties, rc] / denom
                    keep = vals <= vals.min() + 1e-12
                    ties = ties[keep]
                    denom = denom[keep]
                    if ties.size == 1:
                        break
            leave = int(ties[np.argmin(basis[ties])]) if ties.size > 1 else int(ties[0])
            stalled = stalled + 1 if best <= 1e-12 else 0
            piv = tab[leave, enter]
            tab[leave] /= piv
            rhs[leave] /= piv
            col = tab[:, enter].copy()
            col[leave] = 0.0
            tab[:] -= np.outer(col, tab[leave])
            rhs[:] -= col * rhs[leave]
            coef = red[enter]
            if coef != 0.0:
                red[:] -= coef * tab[leave]
            basis[leave] = enter
        raise RuntimeError("simplex iteration limit exceeded")

    # ---- phase 1 --------------------------------------------------------
    if art_rows:
        cost1 = np.zeros(n_cols)
        for col in art_cols.values():
            cost1[col] = -1.0
        run_simplex(cost1)
        infeas = sum(rhs[i] for i in range(m) if basis[i] in art_cols.values())
        if infeas > _FEAS_TOL:
            return LpSolution(status="infeasible")
        # Pivot leftover artificials out of the basis where possible.
        art_set = set(art_cols.values())
        for i in range(m):
            if basis[i] in art_set:
                enter = -1
                for j in range(n + m_ub):
                    if abs(tab[i, j]) > _PIVOT_TOL:
                        enter = j
                        break
                if enter >= 0:
                    piv = tab[i, enter]
                    tab[i] /= piv
                    rhs[i] /= piv
                    col = tab[:, enter].copy()
                    col[i] = 0.0
                    tab[:] -= np.outer(col, tab[i])
                    rhs[:] -= col * rhs[i]
                    basis[i] = enter
        # Degenerate pivots can leave -1e-12-sized dust on the rhs.
        np.clip(rhs, 0.0, None, out=rhs)
        for col in art_cols.values():
            barred[col] = True

    # ---- phase 2 --------------------------------------------------------
    cost2 = np.zeros(n_cols)
    cost2[:n] = c
    status = run_simplex(cost2)
    if status == "unbounded":
        return LpSolution(status="unbounded")

    z = np.zeros(n_cols)
    for i in range(m):
        z[basis[i]] = rhs[i]
    x = lo + z[:n]

    # Reduced-cost row of phase 2 gives all multipliers: for the slack of
    # (scaled, sign-fixed) inequality row i the entry equals -sign * y_i,
    # for the artificial of an equality row likewise.
    red = cost2.copy()
    for i in range(m):
        if cost2[basis[i]] != 0.0:
            red -= cost2[basis[i]] * tab[i]

    # red[slack_i] = -lambda_i * sign_i, and the multiplier of the original
    # (unflipped) row is lambda_i * sign_i / scale_i, so the sign factors
    # cancel; equality rows keep theirs because artificials always enter +1.
    y_rows = np.zeros(m)
    for i in range(m_ub):
        y_rows[i] = -red[slack_cols[i]] / scale[i]
    for i in range(m_ub, m):
        y_rows[i] = -sign[i] * red[art_cols[i]] / scale[i]

    duals_ineq = y_rows[:m_user].copy()
    duals_eq = y_rows[m_ub:].copy()
    # Numerical dust on >= 0 multipliers is clipped.
    np.clip(duals_ineq, 0.0, None, out=duals_ineq)

    # Per-variable bound multipliers: positive entries are upper-bound
    # duals, negative entries (negated) lower-bound duals.
    reduced = c.copy()
    if m_user:
        reduced -= a.T @ duals_ineq
    if m_eq:
        reduced -= a_eq.T @ duals_eq

    objective = float(c @ x)
    return LpSolution(
        status="optimal",
        x=x,
        objective=objective,
        duals_ineq=duals_ineq,
        duals_eq=duals_eq,
        reduced_costs=reduced,
    )
