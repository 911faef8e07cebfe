"""Profit-maximizing planner.

Prices come from a closed-form recursion that saturates the binding
incentive constraints: the lowest-value-of-time type in each preference
group is priced to zero utility, and every step up the VoT ladder charges
exactly the wait improvement at the climber's own valuation.  Under that
rule the operator's profit becomes a linear function of the routing
shares — the service surplus evaluated at the *lowest* reward plus an
information-rent bonus for keeping low-VoT waits long — so the same
allocation LP as the welfare planner applies with a different objective
and extra rows that keep the resulting waits priceable (monotone chains,
a cap from the cheapest type's reward, and telescoping limits across
energy columns and preference subsets).

If the rent-seeking solution slips outside the priceable region despite
the steering rows, the solver falls back to pricing the welfare-optimal
routing; candidates are validated by a full incentive audit and the more
profitable valid one wins.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .auditor import AuditReport, audit
from .lp import LpSolution
from .model import Policy, Scenario
from .welfare import (
    SolverError,
    _allocation_arrays,
    _build_layout,
    _solve_bdp,
    _welfare_objective,
)

__all__ = [
    "ProfitMenu",
    "ProfitDetails",
    "profit_prices",
    "solve_profit",
    "evaluate_profit",
]


@dataclass(frozen=True, eq=False)
class ProfitMenu:
    """Price matrix over the full type grid and the waits it was derived
    from.  ``path_discrepancy`` is the largest gap between the canonical
    evaluation order (energy sweep at the lowest VoT, then VoT sweep per
    column) and the transposed order; zero whenever the two recursions
    commute, e.g. with a single energy type."""

    prices: np.ndarray
    waits: np.ndarray
    path_discrepancy: float = 0.0


def profit_prices(waits, scenario: Scenario) -> ProfitMenu:
    """Rent-extracting prices for a given wait matrix.

    Requires the wait chains to hold: per (j, ell) waits non-increasing
    in VoT and capped at R_1^ell / v_1, and the cross-preference
    telescoping sums bounded by the reward gaps — otherwise no price
    vector saturating the binding constraints is incentive compatible and
    a ValueError is raised.
    """
    w = np.asarray(waits, dtype=float)
    shape = (scenario.num_prefs, scenario.num_vot, scenario.num_energy)
    if w.shape != shape:
        raise ValueError(f"wait matrix must have shape {shape}")
    v = scenario.vot
    nb, nv, ne = shape
    scale = max(1.0, float(np.max(np.abs(w))))
    tol = 1e-9 * scale

    for ell in range(nb):
        cap = scenario.reward[ell, 0] / v[0]
        for j in range(ne):
            if w[ell, 0, j] > cap + tol:
                raise ValueError(
                    f"wait chain violated: W[{1},{j + 1},{ell + 1}] = "
                    f"{w[ell, 0, j]:.6g} exceeds cap {cap:.6g}"
                )
            for i in range(1, nv):
                if w[ell, i, j] > w[ell, i - 1, j] + tol:
                    raise ValueError(
                        f"wait chain violated: W[{i + 1},{j + 1},{ell + 1}] "
                        f"> W[{i},{j + 1},{ell + 1}]"
                    )
        dv = np.diff(v)
        for m in scenario.preferences[ell].subset_prefs:
            gap = scenario.reward[m, 0] - scenario.reward[ell, 0]
            for j in range(ne):
                tele = 0.0
                for t in range(nv - 1):
                    tele += dv[t] * (w[ell, t, j] - w[m, t, j])
                    if tele > gap + 1e-7:
                        raise ValueError(
                            "telescoping constraint violated between "
                            f"preferences {ell + 1} and {m + 1} at column {j + 1}"
                        )

    prices = np.zeros(shape)
    for ell in range(nb):
        prices[ell, 0, 0] = scenario.reward[ell, 0] - v[0] * w[ell, 0, 0]
        for j in range(1, ne):
            prices[ell, 0, j] = prices[ell, 0, j - 1] \
                + v[0] * (w[ell, 0, j - 1] - w[ell, 0, j])
        for j in range(ne):
            for i in range(1, nv):
                prices[ell, i, j] = prices[ell, i - 1, j] \
                    + v[i] * (w[ell, i - 1, j] - w[ell, i, j])

    transposed = np.zeros(shape)
    for ell in range(nb):
        transposed[ell, 0, 0] = prices[ell, 0, 0]
        for i in range(1, nv):
            transposed[ell, i, 0] = transposed[ell, i - 1, 0] \
                + v[i] * (w[ell, i - 1, 0] - w[ell, i, 0])
        for i in range(nv):
            for j in range(1, ne):
                transposed[ell, i, j] = transposed[ell, i, j - 1] \
                    + v[i] * (w[ell, i, j - 1] - w[ell, i, j])

    discrepancy = float(np.max(np.abs(prices - transposed)))
    return ProfitMenu(prices=prices, waits=w.copy(), path_discrepancy=discrepancy)


def evaluate_profit(policy: Policy, menu: ProfitMenu, scenario: Scenario) -> float:
    """Operator profit: revenue at the menu prices minus wholesale energy
    cost, over the served rates."""
    energy_rate = policy.routing @ scenario.lmps
    margin = menu.prices - scenario.energy[None, None, :] * energy_rate
    return float(np.sum(policy.lam * margin))


# --------------------------------------------------------------------------
# LP construction
# --------------------------------------------------------------------------

def _rent_multipliers(scenario: Scenario, layout, rent_energy_index: str):
    """K[ell, i, j] such that the rent bonus on cell (ell, i, j) routing to
    station q is K * d_q.  'first' books each VoT step's rent (summed over
    energy columns) on the j = 1 cell, mirroring the reduced objective's
    fixed energy index; 'own' books it per column."""
    nb, nv, ne = scenario.num_prefs, scenario.num_vot, scenario.num_energy
    k = np.zeros((nb, nv, ne))
    active = np.zeros((nb, nv, ne), dtype=bool)
    for cell in layout.cells:
        active[cell] = True
    dv = np.diff(scenario.vot)
    for ell in range(nb):
        for i in range(nv - 1):
            higher = np.where(active[ell, i + 1:, :], scenario.arrivals[ell, i + 1:, :], 0.0)
            if rent_energy_index == "own":
                k[ell, i, :] = dv[i] * higher.sum(axis=0)
            else:
                k[ell, i, 0] = dv[i] * higher.sum()
    return k


def _profit_objective(scenario: Scenario, layout, rent_energy_index: str) -> np.ndarray:
    c = np.zeros(layout.ncols)
    d = scenario.detours
    theta = scenario.lmps
    base_reward = {}
    for ell, i, j in layout.cells:
        key = (ell, j)
        base_reward[key] = min(base_reward.get(key, i), i)
    rent = _rent_multipliers(scenario, layout, rent_energy_index)
    for idx, (ell, i, j) in enumerate(layout.cells):
        rate = scenario.arrivals[ell, i, j]
        r_base = scenario.reward[ell, base_reward[(ell, j)]]
        off = layout.offsets[idx]
        for pos, q in enumerate(layout.stations[idx]):
            c[off + pos] = rate * (
                r_base - scenario.vot[i] * d[q] - scenario.energy[j] * theta[q]
            ) + rent[ell, i, j] * d[q]
    return c


def _structure_rows(scenario: Scenario, layout):
    """Rows that keep the optimal allocation inside the priceable region.

    Monotone chains use sink-inclusive pseudo-waits (coefficients
    d_q − d_virtual on physical columns, zero on the sink): these order
    true waits under full admission and force any rejection to start at
    the bottom of the VoT ladder, matching the admission border shape.
    """
    d = scenario.detours
    d_virt = layout.virtual.detour_time
    v = scenario.vot
    dv = np.diff(v)
    nv, ne = scenario.num_vot, scenario.num_energy
    rows: list[np.ndarray] = []
    rhs: list[float] = []

    pos_of = layout.cell_pos

    def pseudo_coeffs(row, cell, weight):
        idx = pos_of[cell]
        off = layout.offsets[idx]
        for pos, q in enumerate(layout.stations[idx]):
            row[off + pos] += weight * (d[q] - d_virt)

    def cap_coeffs(row, cell, cap):
        idx = pos_of[cell]
        off = layout.offsets[idx]
        for pos, q in enumerate(layout.stations[idx]):
            row[off + pos] += d[q] - cap

    for ell in range(scenario.num_prefs):
        cap = scenario.reward[ell, 0] / v[0]
        columns = {}
        for j in range(ne):
            col = [i for i in range(nv) if (ell, i, j) in pos_of]
            if col:
                columns[j] = col

        for j, col in columns.items():
            # wait caps per active cell
            for i in col:
                row = np.zeros(layout.ncols)
                cap_coeffs(row, (ell, i, j), cap)
                rows.append(row)
                rhs.append(0.0)
            # pseudo-wait chain between consecutive active VoT rows
            for lo, hi in zip(col, col[1:]):
                row = np.zeros(layout.ncols)
                pseudo_coeffs(row, (ell, hi, j), 1.0)
                pseudo_coeffs(row, (ell, lo, j), -1.0)
                rows.append(row)
                rhs.append(0.0)

        col_keys = sorted(columns)
        # telescoped wait comparisons between adjacent energy columns
        for ja, jb in zip(col_keys, col_keys[1:]):
            common = [i for i in columns[ja] if i in columns[jb]]
            for cut in range(len(common)):
                row = np.zeros(layout.ncols)
                for i in common[:cut + 1]:
                    if i >= nv - 1:
                        continue
                    pseudo_coeffs(row, (ell, i, ja), dv[i])
                    pseudo_coeffs(row, (ell, i, jb), -dv[i])
                if np.any(row):
                    rows.append(row)
                    rhs.append(0.0)
            # admitted fraction non-increasing in energy demand
            for i in common:
                row = np.zeros(layout.ncols)
                row[layout.sink_col(pos_of[(ell, i, ja)])] = 1.0
                row[layout.sink_col(pos_of[(ell, i, jb)])] = -1.0
                rows.append(row)
                rhs.append(0.0)

        # telescoped comparisons against each strict-subset preference
        for m in scenario.preferences[ell].subset_prefs:
            gap = scenario.reward[m, 0] - scenario.reward[ell, 0]
            for j in columns:
                common = [
                    i for i in columns[j] if (m, i, j) in pos_of
                ]
                for cut in range(len(common)):
                    row = np.zeros(layout.ncols)
                    for i in common[:cut + 1]:
                        if i >= nv - 1:
                            continue
                        pseudo_coeffs(row, (ell, i, j), dv[i])
                        pseudo_coeffs(row, (m, i, j), -dv[i])
                    if np.any(row):
                        rows.append(row)
                        rhs.append(gap)

    if not rows:
        return np.zeros((0, layout.ncols)), np.zeros(0)
    return np.vstack(rows), np.asarray(rhs)


# --------------------------------------------------------------------------
# solve
# --------------------------------------------------------------------------

@dataclass(eq=False)
class ProfitDetails:
    """Diagnostics from solve_profit: which objective produced the menu,
    the LP solution behind it, and the audits of both candidates."""

    source: str
    lp_solution: LpSolution
    lp_objective: float
    audits: dict[str, AuditReport]


def _feed_waits(scenario: Scenario, waits: np.ndarray, offered: np.ndarray) -> np.ndarray:
    """Wait matrix handed to the price recursion.

    Offered cells keep their true waits.  Cells without an offer are
    imputed so the recursion walks through them without distorting the
    chain: the nearest offered wait below in the column if one exists,
    otherwise the cap — which prices the phantom option at exactly zero
    base utility, leaving nothing for a rejected type to envy.
    """
    fed = np.array(waits, dtype=float)
    for ell in range(scenario.num_prefs):
        cap = scenario.reward[ell, 0] / scenario.vot[0]
        for j in range(scenario.num_energy):
            last = None
            for i in range(scenario.num_vot):
                if offered[ell, i, j]:
                    last = fed[ell, i, j]
                else:
                    fed[ell, i, j] = cap if last is None else last
    return fed


def solve_profit(
    scenario: Scenario,
    *,
    network: bool = False,
    rent_energy_index: str = "first",
    return_details: bool = False,
):
    """Profit-optimal menu under hard capacities.

    Returns (Policy, ProfitMenu); with ``return_details`` a ProfitDetails
    diagnostic is appended.  ``rent_energy_index`` selects where the
    information-rent bonus is booked: 'first' (default) fixes the energy
    index at 1 as in the reduced objective, 'own' books it per column.
    """
    if rent_energy_index not in ("first", "own"):
        raise ValueError("rent_energy_index must be 'first' or 'own'")
    if np.any(scenario.queue_times != 0.0):
        raise ValueError("planners require hard capacities (zero queue times)")
    if network and scenario.network is None:
        raise ValueError("network=True requires a scenario network block")

    layout = _build_layout(scenario)
    attempts = (
        ("rent", _profit_objective(scenario, layout, rent_energy_index),
         _structure_rows(scenario, layout)),
        ("surplus", _welfare_objective(scenario, layout), None),
    )

    audits: dict[str, AuditReport] = {}
    candidates = []
    errors = []
    for source, objective, extra in attempts:
        try:
            alloc, sol = _solve_bdp(
                scenario, layout, objective, network=network, extra=extra
            )
        except SolverError as exc:
            errors.append(f"{source}: {exc}")
            continue
        lam, routing, waits = _allocation_arrays(scenario, alloc)
        offered = lam > 1e-9 * np.maximum(1.0, scenario.arrivals)
        try:
            menu = profit_prices(_feed_waits(scenario, waits, offered), scenario)
        except ValueError as exc:
            errors.append(f"{source}: {exc}")
            continue
        prices = np.where(offered, menu.prices, 0.0)
        policy = Policy(lam=lam, routing=routing, waits=waits, prices=prices)
        report = audit(menu, lam, scenario)
        audits[source] = report
        if report.is_empty():
            value = evaluate_profit(policy, menu, scenario)
            candidates.append((value, source, policy, menu, sol))
        else:
            errors.append(
                f"{source}: audit found {len(report.entries())} violation(s)"
            )

    if not candidates:
        raise SolverError(
            "no incentive-compatible profit menu found: " + "; ".join(errors)
        )
    candidates.sort(key=lambda c: (-c[0], c[1] != "rent"))
    value, source, policy, menu, sol = candidates[0]
    if not return_details:
        return policy, menu
    details = ProfitDetails(
        source=source,
        lp_solution=sol,
        lp_objective=sol.objective,
        audits=audits,
    )
    return policy, menu, details
