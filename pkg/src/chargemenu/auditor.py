"""Menu verification and the independent welfare oracle.

The auditor treats a menu as data — price and wait matrices over the type
grid plus served rates — and replays every customer's decision problem
against it: could any type gain by taking another offered option, and is
everyone's participation consistent with their served rate?  Nothing in
here knows how the menu was produced, which is what makes an empty report
meaningful.

The module also carries ``brute_force_social``, a grid-search welfare
maximizer used as the ground truth the LP planner is compared against.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import CustomerType, Scenario

__all__ = [
    "AuditEntry",
    "AuditReport",
    "best_response",
    "audit",
    "BruteForceResult",
    "brute_force_social",
]

_TOL = 1e-7


@dataclass(frozen=True)
class AuditEntry:
    """One violated inequality.

    ``indices`` holds 1-based (i, j, ell) labels — (own, target) for
    incentive checks, own only for the rest.  The inequality is read as
    lhs ≥ rhs; ``violation`` is rhs − lhs clipped to the violation side.
    """

    check: str
    indices: tuple
    lhs: float
    rhs: float
    violation: float

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "indices": list(self.indices),
            "lhs": self.lhs,
            "rhs": self.rhs,
            "violation": self.violation,
        }


@dataclass
class AuditReport:
    """Violations grouped by check.  Empty everywhere ⇔ menu passes."""

    ic_vertical: list[AuditEntry] = field(default_factory=list)
    ic_horizontal: list[AuditEntry] = field(default_factory=list)
    ic_preference: list[AuditEntry] = field(default_factory=list)
    local_ic: list[AuditEntry] = field(default_factory=list)
    ir: list[AuditEntry] = field(default_factory=list)
    wait_monotonicity: list[AuditEntry] = field(default_factory=list)
    border_structure: list[AuditEntry] = field(default_factory=list)

    _GROUPS = (
        "ic_vertical",
        "ic_horizontal",
        "ic_preference",
        "local_ic",
        "ir",
        "wait_monotonicity",
        "border_structure",
    )

    def entries(self) -> list[AuditEntry]:
        out: list[AuditEntry] = []
        for name in self._GROUPS:
            out.extend(getattr(self, name))
        return out

    def is_empty(self) -> bool:
        return not self.entries()

    def to_dict(self) -> dict:
        return {
            name: [e.to_dict() for e in getattr(self, name)]
            for name in self._GROUPS
        }


def _menu_arrays(menu, scenario: Scenario):
    prices = np.asarray(menu.prices, dtype=float)
    waits = np.asarray(menu.waits, dtype=float)
    shape = (scenario.num_prefs, scenario.num_vot, scenario.num_energy)
    if prices.shape != shape or waits.shape != shape:
        raise ValueError(f"menu matrices must have shape {shape}")
    return prices, waits


def _deviation_targets(scenario: Scenario, offered: np.ndarray, ell: int, j: int):
    """Offered options a type (·, j, ell) may legally take: any VoT row,
    energy column k ≥ j, preference ell itself or a strict subset of it."""
    prefs = (ell,) + scenario.preferences[ell].subset_prefs
    targets = []
    for t in prefs:
        for m in range(scenario.num_vot):
            for k in range(j, scenario.num_energy):
                if offered[t, m, k]:
                    targets.append((t, m, k))
    return targets


def best_response(ctype: CustomerType, menu, scenario: Scenario):
    """Utility-maximizing option for one customer over the whole menu.

    Returns 1-based (m, k, t) or None when every reachable option has
    negative utility.  Ties go to the customer's own option, then to the
    lexicographically smallest (m, k, t).
    """
    prices, waits = _menu_arrays(menu, scenario)
    ell = ctype.pref_index - 1
    i = ctype.vot_index - 1
    j = ctype.energy_index - 1
    own = (i + 1, j + 1, ell + 1)
    best = None
    best_u = -math.inf
    prefs = (ell,) + scenario.preferences[ell].subset_prefs
    for m in range(scenario.num_vot):
        for k in range(j, scenario.num_energy):
            for t in sorted(prefs):
                u = ctype.reward - ctype.vot * waits[t, m, k] - prices[t, m, k]
                key = (m + 1, k + 1, t + 1)
                if u > best_u + 1e-12:
                    best, best_u = key, u
                elif abs(u - best_u) <= 1e-12 and best is not None:
                    if key == own or (best != own and key < best):
                        best = key
    if best_u < 0.0:
        return None
    return best


def audit(menu, lam, scenario: Scenario, tol: float = _TOL) -> AuditReport:
    """Replay every active type's incentives against the offered options.

    ``lam`` is the served-rate matrix deciding which options exist (a rate
    above dust) and which participation case each type is in: zero (must
    not envy anything offered), interior (must be exactly indifferent to
    walking away), or full (must weakly prefer to participate).
    """
    prices, waits = _menu_arrays(menu, scenario)
    lam = np.asarray(lam, dtype=float)
    arrivals = scenario.arrivals
    if lam.shape != arrivals.shape:
        raise ValueError("served-rate matrix does not match the type grid")
    offered = lam > 1e-9 * np.maximum(1.0, arrivals)
    report = AuditReport()

    def label(ell, i, j):
        return (i + 1, j + 1, ell + 1)

    # -- incentive and participation checks, one active type at a time --
    for ell, i, j in scenario.iter_types(active_only=True):
        reward = scenario.reward[ell, i]
        vot = scenario.vot[i]
        targets = [
            t for t in _deviation_targets(scenario, offered, ell, j)
            if t != (ell, i, j)
        ]

        def dev_utility(tgt):
            t, m, k = tgt
            return reward - vot * waits[t, m, k] - prices[t, m, k]

        if not offered[ell, i, j]:
            # Rejected type: nothing on offer may give it positive utility.
            if targets:
                best_tgt = max(targets, key=dev_utility)
                mu = dev_utility(best_tgt)
                if mu > tol:
                    t, m, k = best_tgt
                    report.ir.append(AuditEntry(
                        check="ir",
                        indices=(label(ell, i, j), label(t, m, k)),
                        lhs=0.0,
                        rhs=mu,
                        violation=mu,
                    ))
            continue

        u_own = reward - vot * waits[ell, i, j] - prices[ell, i, j]

        full = lam[ell, i, j] >= arrivals[ell, i, j] * (1.0 - 1e-9)
        if full:
            if u_own < -tol:
                report.ir.append(AuditEntry(
                    check="ir", indices=(label(ell, i, j),),
                    lhs=u_own, rhs=0.0, violation=-u_own,
                ))
        else:
            # Interior service rate: the type must be exactly indifferent,
            # otherwise either more mass would buy or none would.
            if abs(u_own) > tol:
                report.ir.append(AuditEntry(
                    check="ir", indices=(label(ell, i, j),),
                    lhs=u_own, rhs=0.0, violation=abs(u_own),
                ))

        local_ok = True
        full_ok = True
        worst = None
        for tgt in targets:
            t, m, k = tgt
            gain = dev_utility(tgt) - u_own
            is_neighbor = (
                (t == ell and k == j and abs(m - i) == 1)
                or (t == ell and m == i and k == j + 1)
                or (t in scenario.preferences[ell].frontier_prefs
                    and m == i and k == j)
            )
            if gain > tol:
                full_ok = False
                if worst is None or gain > worst[1]:
                    worst = (tgt, gain)
                entry = AuditEntry(
                    check="ic",
                    indices=(label(ell, i, j), label(t, m, k)),
                    lhs=u_own,
                    rhs=dev_utility(tgt),
                    violation=gain,
                )
                if t != ell:
                    report.ic_preference.append(entry)
                elif k != j:
                    report.ic_horizontal.append(entry)
                else:
                    report.ic_vertical.append(entry)
                if is_neighbor:
                    local_ok = False
        if local_ok and not full_ok:
            tgt, gain = worst
            report.local_ic.append(AuditEntry(
                check="local_ic",
                indices=(label(ell, i, j), label(tgt[0], tgt[1], tgt[2])),
                lhs=u_own,
                rhs=u_own + gain,
                violation=gain,
            ))

    # -- wait chain among offered options, per (j, ell) --
    for ell in range(scenario.num_prefs):
        for j in range(scenario.num_energy):
            rows = [i for i in range(scenario.num_vot) if offered[ell, i, j]]
            for lo, hi in zip(rows, rows[1:]):
                w_lo, w_hi = waits[ell, lo, j], waits[ell, hi, j]
                if w_hi > w_lo + tol:
                    report.wait_monotonicity.append(AuditEntry(
                        check="wait_monotonicity",
                        indices=(label(ell, lo, j), label(ell, hi, j)),
                        lhs=w_lo, rhs=w_hi, violation=w_hi - w_lo,
                    ))

    # -- admission border structure --
    frac = np.zeros_like(lam)
    active = arrivals > 0.0
    frac[active] = lam[active] / arrivals[active]

    def border_entries(cells, axis_name, expect):
        """Served fraction along a line of cells: monotone per ``expect``
        ('nondecreasing'/'nonincreasing') with at most one interior value."""
        vals = [frac[c] for c in cells]
        interior = [v for v in vals if tol < v < 1.0 - tol]
        bad_count = len(interior) > 1
        bad_order = False
        for a, b in zip(vals, vals[1:]):
            if expect == "nondecreasing" and b < a - tol:
                bad_order = True
            if expect == "nonincreasing" and b > a + tol:
                bad_order = True
        if bad_count or bad_order:
            report.border_structure.append(AuditEntry(
                check=f"border_{axis_name}",
                indices=tuple(label(*c) for c in cells),
                lhs=float(min(vals)),
                rhs=float(max(vals)),
                violation=float(len(interior)) if bad_count else
                float(max(abs(b - a) for a, b in zip(vals, vals[1:]))),
            ))

    for ell in range(scenario.num_prefs):
        for j in range(scenario.num_energy):
            cells = [(ell, i, j) for i in range(scenario.num_vot)
                     if active[ell, i, j]]
            if len(cells) > 1:
                border_entries(cells, "vot", "nondecreasing")
        for i in range(scenario.num_vot):
            cells = [(ell, i, j) for j in range(scenario.num_energy)
                     if active[ell, i, j]]
            if len(cells) > 1:
                border_entries(cells, "energy", "nonincreasing")

    return report


# --------------------------------------------------------------------------
# grid-search welfare oracle
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BruteForceResult:
    """Best welfare found on the grid, with the certified gap to the
    continuous optimum: true optimum ∈ [welfare, welfare + tolerance]."""

    welfare: float
    lipschitz: float
    tolerance: float


def brute_force_social(scenario: Scenario, grid_resolution: int = 200) -> BruteForceResult:
    """Exhaustive welfare maximization on a per-type mass grid.

    Each active type's arrival mass is split into ``grid_resolution``
    quanta; every quantum independently picks a reachable
    positive-surplus station or rejection.  Branch-and-bound with
    admissible bounds keeps the search exact: no branch is cut unless a
    relaxation proves it cannot beat the incumbent.
    """
    if scenario.network is not None:
        raise ValueError("oracle does not support network rows")
    if np.any(scenario.queue_times != 0.0):
        raise ValueError("oracle requires hard capacities")
    cells_total = (scenario.num_stations + 1) * scenario.num_prefs \
        * scenario.num_vot * scenario.num_energy
    if cells_total > 12:
        raise ValueError(
            f"instance too large for the oracle: {cells_total} decision cells (max 12)"
        )
    g = int(grid_resolution)
    if g < 1:
        raise ValueError("grid_resolution must be >= 1")

    d = scenario.detours
    theta = scenario.lmps
    caps = scenario.capacities.copy()

    # Per-type search data: positive-surplus stations, best first.
    types = []
    for ell, i, j in scenario.iter_types(active_only=True):
        mass = scenario.arrivals[ell, i, j]
        surplus = {
            q: scenario.reward[ell, i] - scenario.vot[i] * d[q]
            - scenario.energy[j] * theta[q]
            for q in scenario.preferences[ell].stations
        }
        cells = sorted(
            ((s, q) for q, s in surplus.items() if s > 0.0), reverse=True
        )
        if not cells:
            continue
        types.append({
            "unit_mass": mass / g,
            "unit_energy": mass / g * scenario.energy[j],
            "gains": [s * mass / g for s, _ in cells],      # per quantum
            "stations": [q for _, q in cells],
            "density": [s / scenario.energy[j] for s, _ in cells],
        })
    if not types:
        return BruteForceResult(welfare=0.0, lipschitz=0.0, tolerance=0.0)

    # Biggest-stakes types first: bounds tighten sooner near the root.
    types.sort(key=lambda t: -t["gains"][0])
    lipschitz = sum(len(t["gains"]) * t["gains"][0] * g for t in types)
    margin = 1e-9 * np.maximum(1.0, caps)
    n_types = len(types)

    def alone_best(t, off, left, resid):
        """Exact grid optimum for one type alone on residual capacity."""
        total = 0.0
        for gain, q in zip(t["gains"][off:], t["stations"][off:]):
            if left == 0:
                break
            n = min(left, int((resid[q] + margin[q]) // t["unit_energy"]))
            total += n * gain
            left -= n
        return total

    def greedy_completion(state, resid):
        """Feasible fill of the remaining types in order; incumbent fodder."""
        resid = resid.copy()
        total = 0.0
        for t_idx, off, left in state:
            t = types[t_idx]
            u = t["unit_energy"]
            for gain, q in zip(t["gains"][off:], t["stations"][off:]):
                if left == 0:
                    break
                n = min(left, int((resid[q] + margin[q]) // u))
                if n > 0:
                    total += n * gain
                    resid[q] -= n * u
                    left -= n
        return total

    def cheap_bound(state, resid):
        """min of four admissible relaxations; O(T·Q log) per call."""
        independent = 0.0
        mass_cap = 0.0
        per_station: dict[int, list] = {}
        pool_items = []
        for t_idx, off, left in state:
            t = types[t_idx]
            independent += alone_best(t, off, left, resid)
            mass_cap += left * t["gains"][off]
            supply = left * t["unit_energy"]
            pool_items.append((t["density"][off], supply))
            for dens, q in zip(t["density"][off:], t["stations"][off:]):
                per_station.setdefault(q, []).append((dens, supply))
        by_station = 0.0
        for q, lst in per_station.items():
            room = resid[q]
            if room <= 0.0:
                continue
            lst.sort(reverse=True)
            for dens, sup in lst:
                take = sup if sup < room else room
                by_station += take * dens
                room -= take
                if room <= 0.0:
                    break
        pool_room = float(np.maximum(resid, 0.0).sum())
        pool = 0.0
        pool_items.sort(reverse=True)
        for dens, sup in pool_items:
            take = sup if sup < pool_room else pool_room
            pool += take * dens
            pool_room -= take
            if pool_room <= 0.0:
                break
        return min(independent, mass_cap, by_station, pool)

    def transport_bound(state, resid):
        """Exact continuous relaxation of the remaining assignment.

        Max-profit transportation flow (types -> stations with energy
        capacities) solved by successive shortest augmenting paths on a
        graph of at most 2 + T + Q nodes.  Any grid completion is a
        feasible flow, so the value is admissible; if the iteration cap
        ever hit, inf keeps it so.
        """
        stations = sorted({
            q
            for t_idx, off, _ in state
            for q in types[t_idx]["stations"][off:]
            if resid[q] > 0.0
        })
        qmap = {q: i for i, q in enumerate(stations)}
        n_act = len(state)
        sink = 1 + n_act + len(stations)
        arcs: list[list] = []            # [to, residual_cap, cost]
        adj: list[list[int]] = [[] for _ in range(sink + 1)]

        def add(u, v, cap, cost):
            adj[u].append(len(arcs))
            arcs.append([v, cap, cost])
            adj[v].append(len(arcs))
            arcs.append([u, 0.0, -cost])

        for k, (t_idx, off, left) in enumerate(state):
            t = types[t_idx]
            add(0, 1 + k, left * t["unit_energy"], 0.0)
            for dens, q in zip(t["density"][off:], t["stations"][off:]):
                if q in qmap:
                    add(1 + k, 1 + n_act + qmap[q], float("inf"), -dens)
        for q, qi in qmap.items():
            add(1 + n_act + qi, sink, resid[q], 0.0)

        total = 0.0
        for _ in range(200):
            dist = [float("inf")] * (sink + 1)
            dist[0] = 0.0
            par = [-1] * (sink + 1)
            for _ in range(sink + 1):
                relaxed = False
                for u in range(sink + 1):
                    du = dist[u]
                    if du == float("inf"):
                        continue
                    for ai in adj[u]:
                        to, cap, cost = arcs[ai]
                        if cap > 1e-12 and du + cost < dist[to] - 1e-15:
                            dist[to] = du + cost
                            par[to] = ai
                            relaxed = True
                if not relaxed:
                    break
            if par[sink] < 0 or dist[sink] >= -1e-12:
                return total
            bottleneck = float("inf")
            v = sink
            while v != 0:
                ai = par[v]
                bottleneck = min(bottleneck, arcs[ai][1])
                v = arcs[ai ^ 1][0]
            v = sink
            while v != 0:
                ai = par[v]
                arcs[ai][1] -= bottleneck
                arcs[ai ^ 1][1] += bottleneck
                v = arcs[ai ^ 1][0]
            total += -dist[sink] * bottleneck
        return float("inf")

    best = 0.0

    def rec(t_idx, c_idx, left, resid, acc, hint):
        """Branch on the quanta count at cell (t_idx, c_idx).

        ``hint`` is an ancestor's total-value bound, still valid here;
        it closes whole sibling fans for free once the incumbent catches
        up with the subtree's potential.
        """
        nonlocal best
        if hint <= best + 1e-12:
            return
        if t_idx == n_types:
            if acc > best:
                best = acc
            return
        t = types[t_idx]
        if t_idx == n_types - 1:
            value = acc + alone_best(t, c_idx, left, resid)
            if value > best:
                best = value
            return
        if c_idx == len(t["gains"]) or left == 0:
            rec(t_idx + 1, 0, g, resid, acc, hint)
            return
        state = [(t_idx, c_idx, left)] + [
            (k, 0, g) for k in range(t_idx + 1, n_types)
        ]
        value = acc + greedy_completion(state, resid)
        if value > best:
            best = value
        total = acc + cheap_bound(state, resid)
        if total <= best + 1e-12:
            return
        exact = acc + transport_bound(state, resid)
        if exact < total:
            total = exact
        if total <= best + 1e-12:
            return
        q = t["stations"][c_idx]
        u = t["unit_energy"]
        gain = t["gains"][c_idx]
        fit = min(left, int((resid[q] + margin[q]) // u))
        for n in range(fit, -1, -1):
            resid[q] -= n * u
            rec(t_idx, c_idx + 1, left - n, resid, acc + n * gain, total)
            resid[q] += n * u

    rec(0, 0, g, caps.copy(), 0.0, float("inf"))
    return BruteForceResult(
        welfare=best, lipschitz=lipschitz, tolerance=lipschitz / g
    )
