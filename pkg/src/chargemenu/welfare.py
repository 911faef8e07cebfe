"""Social-welfare planner.

Solves the menu-design problem of a network operator that maximizes total
customer surplus under hard station capacities.  The continuous problem is
reduced to a single LP over per-type routing distributions ``h`` that
include one extra "sink" column — a virtual station so unattractive that
mass routed there encodes rejection.  Admission and routing fall out of
one solve; prices are recovered from the capacity (and line) duals, which
makes the resulting menu incentive-compatible without further search.

Station order and the admissibility filters (station set X, type set Y)
follow the corner-type dominance tests: a station is worth considering
only if the most travel-sensitive, least energy-hungry customer weakly
prefers it to the outside option, and a type only if its reward covers the
outside option's full cost.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .lp import LpProblem, LpSolution, solve_lp
from .model import (
    Policy,
    Scenario,
    Station,
    build_preferences,
    station_loads,
)

__all__ = [
    "SolverError",
    "StationOrder",
    "AdmissibleSets",
    "BdpAllocation",
    "station_order",
    "admissible_sets",
    "make_virtual_station",
    "network_rows",
    "solve_social",
    "social_prices",
    "solarize",
    "evaluate_welfare",
    "priority_order_violations",
    "fill_order_violations",
]


class SolverError(RuntimeError):
    """A planner LP failed; carries the offending solver status."""

    def __init__(self, message: str, solution: LpSolution | None = None):
        super().__init__(message)
        self.solution = solution


# --------------------------------------------------------------------------
# ordering and admissibility
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StationOrder:
    """Stations sorted by marginal attractiveness relative to the outside
    option: o_s = v_min * (d_s - d_out) + e_max * (theta_s - theta_out).
    Ties sort by ascending station index."""

    values: np.ndarray
    order: np.ndarray


@dataclass(frozen=True, eq=False)
class AdmissibleSets:
    """``stations``: indices that can beat the outside option for at least
    the most demanding corner type; ``types``: boolean (B, V, E) mask of
    types whose reward covers the outside option."""

    stations: tuple[int, ...]
    types: np.ndarray


def station_order(scenario: Scenario) -> StationOrder:
    d = scenario.detours
    theta = scenario.lmps
    out = scenario.outside_index
    o = scenario.vot[0] * (d - d[out]) + scenario.energy[-1] * (theta - theta[out])
    order = np.lexsort((np.arange(scenario.num_stations), o))
    return StationOrder(values=o, order=order)


def admissible_sets(scenario: Scenario) -> AdmissibleSets:
    d = scenario.detours
    theta = scenario.lmps
    out = scenario.outside_index
    corner = scenario.vot[-1] * (d - d[out]) + scenario.energy[0] * (theta - theta[out])
    stations = tuple(int(q) for q in np.nonzero(corner <= 0.0)[0])
    outside_cost = (
        scenario.vot[:, None] * d[out] + scenario.energy[None, :] * theta[out]
    )  # (V, E)
    types = scenario.reward[:, :, None] - outside_cost[None, :, :] >= 0.0
    return AdmissibleSets(stations=stations, types=types)


def make_virtual_station(scenario: Scenario) -> Station:
    """The rejection sink: free energy, unlimited capacity, and a detour so
    long that no reward in the scenario can justify the trip."""
    detour = float(np.max(scenario.reward)) / float(scenario.vot[0]) + 1.0
    return Station(
        index=scenario.num_stations,
        detour_time=detour,
        lmp=0.0,
        capacity=math.inf,
        queue_time=0.0,
        is_virtual=True,
        host_station=None,
    )


# --------------------------------------------------------------------------
# LP layout shared by the welfare and profit planners
# --------------------------------------------------------------------------

@dataclass(eq=False)
class _Layout:
    """Column layout of the allocation LP: for each *active* type cell (a
    positive potential rate with an admissible reward) one column per
    reachable admissible station, plus one sink column."""

    cells: list[tuple[int, int, int]]
    cell_pos: dict[tuple[int, int, int], int]
    stations: list[list[int]]
    offsets: list[int]
    ncols: int
    virtual: Station
    admissible: AdmissibleSets

    def columns(self, k: int) -> slice:
        return slice(self.offsets[k], self.offsets[k] + len(self.stations[k]) + 1)

    def sink_col(self, k: int) -> int:
        return self.offsets[k] + len(self.stations[k])


def _build_layout(scenario: Scenario) -> _Layout:
    adm = admissible_sets(scenario)
    xset = set(adm.stations)
    cells: list[tuple[int, int, int]] = []
    stations: list[list[int]] = []
    offsets: list[int] = []
    ncols = 0
    for ell, i, j in scenario.iter_types(active_only=True):
        if not adm.types[ell, i, j]:
            continue
        allowed = [q for q in scenario.preferences[ell].stations if q in xset]
        cells.append((ell, i, j))
        stations.append(allowed)
        offsets.append(ncols)
        ncols += len(allowed) + 1
    return _Layout(
        cells=cells,
        cell_pos={cell: k for k, cell in enumerate(cells)},
        stations=stations,
        offsets=offsets,
        ncols=ncols,
        virtual=make_virtual_station(scenario),
        admissible=adm,
    )


def _capacity_rows(scenario: Scenario, layout: _Layout):
    """One row per scenario station: total energy routed there stays within
    the per-slot deliverable energy."""
    nq = scenario.num_stations
    a = np.zeros((nq, layout.ncols))
    for k, (ell, i, j) in enumerate(layout.cells):
        rate = scenario.arrivals[ell, i, j] * scenario.energy[j]
        off = layout.offsets[k]
        for pos, q in enumerate(layout.stations[k]):
            a[q, off + pos] = rate
    return a, scenario.capacities.copy()


def _line_map_full(scenario: Scenario) -> np.ndarray:
    """(lines x stations) load-to-flow map; virtual stations inject at
    their host's bus."""
    net = scenario.network
    if net is None:
        raise ValueError("scenario has no network block")
    base = net.line_map()
    width = base.shape[1]
    nq = scenario.num_stations
    if width == nq:
        return base
    full = np.zeros((base.shape[0], nq))
    full[:, :width] = base
    for q in range(width, nq):
        st = scenario.stations[q]
        if not st.is_virtual or st.host_station is None or st.host_station >= width:
            raise ValueError(
                f"station {q + 1} is outside the network map and has no physical host"
            )
        full[:, q] = base[:, st.host_station]
    return full


def network_rows(scenario: Scenario, layout: _Layout | None = None):
    """Line-flow inequality rows over the allocation columns.

    Row order follows the network's line order; the right-hand side is the
    scenario's current per-line energy headroom.
    """
    if layout is None:
        layout = _build_layout(scenario)
    m_full = _line_map_full(scenario)
    n_lines = m_full.shape[0]
    a = np.zeros((n_lines, layout.ncols))
    for k, (ell, i, j) in enumerate(layout.cells):
        rate = scenario.arrivals[ell, i, j] * scenario.energy[j]
        off = layout.offsets[k]
        for pos, q in enumerate(layout.stations[k]):
            a[:, off + pos] = m_full[:, q] * rate
    b = scenario.network.line_limits.copy()
    return a, b


def _require_hard_capacity(scenario: Scenario) -> None:
    if np.any(scenario.queue_times != 0.0):
        raise ValueError("planners require hard capacities (zero queue times)")


@dataclass(eq=False)
class BdpAllocation:
    """Routing shares per type over stations plus the rejection sink.

    ``h`` has shape (B, V, E, Q + 1); the trailing column is the sink.
    Rows of inactive or inadmissible types carry the whole unit on the
    sink.
    """

    h: np.ndarray

    @property
    def sink_share(self) -> np.ndarray:
        return self.h[..., -1]


def _solve_bdp(
    scenario: Scenario,
    layout: _Layout,
    objective: np.ndarray,
    *,
    network: bool = False,
    extra=None,
) -> tuple[BdpAllocation, LpSolution]:
    nq = scenario.num_stations
    if layout.ncols == 0:
        # Nobody is admissible: the whole grid rides the sink.
        h = np.zeros(
            (scenario.num_prefs, scenario.num_vot, scenario.num_energy, nq + 1)
        )
        h[..., -1] = 1.0
        n_rows = nq + (scenario.network.num_lines if network else 0)
        sol = LpSolution(
            status="optimal",
            x=np.zeros(0),
            objective=0.0,
            duals_ineq=np.zeros(n_rows),
            duals_eq=np.zeros(0),
            reduced_costs=np.zeros(0),
        )
        return BdpAllocation(h=h), sol
    blocks_a = []
    blocks_b = []
    cap_a, cap_b = _capacity_rows(scenario, layout)
    blocks_a.append(cap_a)
    blocks_b.append(cap_b)
    if network:
        net_a, net_b = network_rows(scenario, layout)
        blocks_a.append(net_a)
        blocks_b.append(net_b)
    if extra is not None:
        blocks_a.append(extra[0])
        blocks_b.append(extra[1])
    a = np.vstack(blocks_a)
    b = np.concatenate(blocks_b)

    n_cells = len(layout.cells)
    a_eq = np.zeros((n_cells, layout.ncols))
    for k in range(n_cells):
        a_eq[k, layout.columns(k)] = 1.0
    b_eq = np.ones(n_cells)

    sol = solve_lp(LpProblem(c=objective, a=a, b=b, a_eq=a_eq, b_eq=b_eq))
    if sol.status != "optimal":
        raise SolverError(
            f"allocation LP ended with status '{sol.status}'; "
            "the scenario violates a planner precondition",
            sol,
        )

    h = np.zeros(
        (scenario.num_prefs, scenario.num_vot, scenario.num_energy, nq + 1)
    )
    h[..., -1] = 1.0
    for k, (ell, i, j) in enumerate(layout.cells):
        off = layout.offsets[k]
        row = np.zeros(nq + 1)
        for pos, q in enumerate(layout.stations[k]):
            row[q] = max(sol.x[off + pos], 0.0)
        row[-1] = max(sol.x[layout.sink_col(k)], 0.0)
        total = row.sum()
        if total > 0.0:
            row /= total
        else:
            row[-1] = 1.0
        h[ell, i, j] = row
    return BdpAllocation(h=h), sol


def _allocation_arrays(scenario: Scenario, alloc: BdpAllocation):
    """Renormalize sink-augmented shares into (lam, routing, waits)."""
    nq = scenario.num_stations
    lam = scenario.arrivals * (1.0 - alloc.sink_share)
    lam = np.clip(lam, 0.0, scenario.arrivals)
    routing = np.zeros(lam.shape + (nq,))
    served = 1.0 - alloc.sink_share
    mask = served > 1e-12
    routing[mask] = alloc.h[mask, :nq] / served[mask][..., None]
    sums = routing.sum(axis=-1)
    norm = np.where(np.abs(sums - 1.0) < 1e-6, sums, 1.0)
    routing[mask] /= norm[mask][..., None]
    lam[~mask] = 0.0
    effective = scenario.detours + scenario.queue_times
    waits = routing @ effective
    return lam, routing, waits


def _welfare_objective(scenario: Scenario, layout: _Layout) -> np.ndarray:
    c = np.zeros(layout.ncols)
    d = scenario.detours
    theta = scenario.lmps
    for k, (ell, i, j) in enumerate(layout.cells):
        rate = scenario.arrivals[ell, i, j]
        surplus_base = scenario.reward[ell, i]
        off = layout.offsets[k]
        for pos, q in enumerate(layout.stations[k]):
            c[off + pos] = rate * (
                surplus_base
                - scenario.vot[i] * d[q]
                - scenario.energy[j] * theta[q]
            )
        # Sink column carries zero surplus: the LP objective then equals
        # realized welfare exactly, so the optimum rejects mass whenever
        # every reachable station would serve it at a loss.
    return c


def solve_social(
    scenario: Scenario, *, network: bool = False
) -> tuple[Policy, LpSolution]:
    """Welfare-optimal menu under hard capacities.

    Returns the policy (admission, routing, waits and dual-based prices)
    together with the LP solution whose inequality duals order as: one
    per station, then one per network line when ``network`` is set.
    """
    _require_hard_capacity(scenario)
    if network and scenario.network is None:
        raise ValueError("network=True requires a scenario network block")
    layout = _build_layout(scenario)
    objective = _welfare_objective(scenario, layout)
    alloc, sol = _solve_bdp(scenario, layout, objective, network=network)
    lam, routing, waits = _allocation_arrays(scenario, alloc)
    shell = Policy(lam=lam, routing=routing, waits=waits, prices=np.zeros_like(waits))
    prices = social_prices(shell, sol, scenario, network=network)
    policy = Policy(lam=lam, routing=routing, waits=waits, prices=prices)
    return policy, sol


def social_prices(
    policy: Policy,
    lp_solution: LpSolution,
    scenario: Scenario,
    *,
    network: bool | None = None,
) -> np.ndarray:
    """Per-type prices from the allocation duals.

    Every unit of energy bought at station q costs its posted price plus
    the station's scarcity premium (capacity dual) plus any congestion
    premium picked up over the lines it loads; a type pays that rate in
    expectation over its routing.
    """
    if lp_solution.duals_ineq is None:
        raise ValueError("prices need an optimal LP solution with duals")
    nq = scenario.num_stations
    duals = lp_solution.duals_ineq
    if network is None:
        network = (
            scenario.network is not None
            and duals.shape[0] == nq + scenario.network.num_lines
        )
    rate = scenario.lmps + duals[:nq]
    if network:
        n_lines = scenario.network.num_lines
        line_duals = duals[nq:nq + n_lines]
        rate = rate + _line_map_full(scenario).T @ line_duals
    per_visit = policy.routing @ rate
    return per_visit * scenario.energy[None, None, :]


def evaluate_welfare(policy: Policy, scenario: Scenario) -> float:
    """Realized welfare: reward minus travel time cost minus energy cost,
    weighted by effective arrivals.  Waits are recomputed from routing."""
    effective = scenario.detours + scenario.queue_times
    waits = policy.routing @ effective
    energy_rate = policy.routing @ scenario.lmps
    surplus = (
        scenario.reward[:, :, None]
        - scenario.vot[None, :, None] * waits
        - scenario.energy[None, None, :] * energy_rate
    )
    return float(np.sum(policy.lam * surplus))


# --------------------------------------------------------------------------
# behind-the-meter generation
# --------------------------------------------------------------------------

def solarize(scenario: Scenario, solar_kwh) -> Scenario:
    """Append one virtual free-energy station per site with positive solar
    availability.  The virtual twin shares the host's detour and
    preference memberships, prices energy at zero, and is capped at the
    available solar energy.  Applies to single-slot scenarios."""
    if scenario.timeline is not None:
        raise ValueError("solarize applies to a materialized single-slot scenario")
    solar = np.asarray(solar_kwh, dtype=float)
    if solar.shape != (scenario.num_stations,):
        raise ValueError("solar vector must have one entry per station")
    if np.any(solar < 0):
        raise ValueError("solar energy must be nonnegative")
    hosts = [q for q in range(scenario.num_stations) if solar[q] > 0.0]
    if not hosts:
        return scenario
    for q in hosts:
        if scenario.stations[q].is_virtual:
            raise ValueError(f"station {q + 1} is virtual and cannot host solar")

    nq = scenario.num_stations
    stations = list(scenario.stations)
    access_rows = [list(p.access_vector) for p in scenario.preferences]
    for k, q in enumerate(hosts):
        host = scenario.stations[q]
        stations.append(
            Station(
                index=nq + k,
                detour_time=host.detour_time,
                lmp=0.0,
                capacity=float(solar[q]),
                queue_time=host.queue_time,
                is_virtual=True,
                host_station=q,
            )
        )
        for row in access_rows:
            row.append(row[q])
    return replace(
        scenario,
        stations=tuple(stations),
        preferences=build_preferences(access_rows),
    )


# --------------------------------------------------------------------------
# structural checks on solved policies
# --------------------------------------------------------------------------

def _supports(policy: Policy, scenario: Scenario, mass_tol: float):
    sup: dict[tuple[int, int, int], np.ndarray] = {}
    for ell, i, j in scenario.iter_types():
        if policy.lam[ell, i, j] <= 1e-9 * max(1.0, scenario.arrivals[ell, i, j]):
            continue
        sup[(ell, i, j)] = np.nonzero(policy.routing[ell, i, j] > mass_tol)[0]
    return sup

def priority_order_violations(
    policy: Policy, scenario: Scenario, *, mass_tol: float = 1e-7
) -> list[str]:
    """Served mass must respect priority: within a preference group, a
    customer with a higher value of time (or a smaller energy demand)
    never sits at a strictly less attractive station than one with lower
    priority.  Returns violation descriptions (empty == clean)."""
    o = station_order(scenario).values
    sup = _supports(policy, scenario, mass_tol)
    out: list[str] = []

    def check(hi_key, lo_key, label):
        hi = sup.get(hi_key)
        lo = sup.get(lo_key)
        if hi is None or lo is None or not hi.size or not lo.size:
            return
        worst_hi = float(np.max(o[hi]))
        best_lo = float(np.min(o[lo]))
        if best_lo < worst_hi - 1e-12:
            out.append(
                f"{label}: type {hi_key} held at order value {worst_hi:.6g} "
                f"while {lo_key} uses {best_lo:.6g}"
            )

    nb, nv, ne = scenario.num_prefs, scenario.num_vot, scenario.num_energy
    for ell in range(nb):
        for j in range(ne):
            for i_hi in range(nv):
                for i_lo in range(i_hi):
                    check((ell, i_hi, j), (ell, i_lo, j), "VoT priority")
        for i in range(nv):
            for j_hi in range(ne):
                for j_lo in range(j_hi):
                    check((ell, i, j_lo), (ell, i, j_hi), "energy priority")
    return out


def fill_order_violations(
    policy: Policy, scenario: Scenario, *, tol: float = 1e-6
) -> list[str]:
    """Stations must fill in attractiveness order: if a strictly more
    attractive station keeps slack, strictly less attractive ones carry no
    load."""
    o = station_order(scenario).values
    loads = station_loads(policy, scenario)
    caps = scenario.capacities
    out: list[str] = []
    nq = scenario.num_stations
    for p in range(nq):
        if math.isfinite(caps[p]):
            has_slack = caps[p] - loads[p] > tol * max(1.0, caps[p])
        else:
            has_slack = True
        if not has_slack:
            continue
        for p2 in range(nq):
            later = o[p2] > o[p] + 1e-12
            cap_scale = caps[p2] if math.isfinite(caps[p2]) else 1.0
            if later and loads[p2] > tol * max(1.0, cap_scale):
                out.append(
                    f"station {p + 1} keeps slack while strictly less "
                    f"attractive station {p2 + 1} carries {loads[p2]:.6g} kWh"
                )
    return out
