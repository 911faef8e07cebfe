"""Status-quo benchmark: self-routing under posted energy prices.

Without a coordinating menu, customers pick stations themselves: each pays
the local energy price and its own travel time, so a type's utility at
station q is R − v·d_q − e·θ_q, and capacity admits whoever arrives while
room remains.  An assignment is a Nash equilibrium when no served mass
could gain by moving to a station with room and no unserved mass sees a
positive-utility station with room.

The enumerator walks quantized assignments depth-first and prunes branches
that already contain a deviation no future loading can close; every
surviving leaf is re-checked in full before it is reported.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Scenario

__all__ = [
    "SelfRoutingAssignment",
    "station_utilities",
    "assignment_welfare",
    "default_quantum",
    "verify_equilibrium",
    "enumerate_equilibria",
]

_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class SelfRoutingAssignment:
    """Served mass per type and station [vehicles/h] plus the station
    capacity left over [kWh]."""

    mass: np.ndarray
    residual: np.ndarray

    @classmethod
    def from_mass(cls, scenario: Scenario, mass) -> "SelfRoutingAssignment":
        mass = np.asarray(mass, dtype=float)
        shape = (
            scenario.num_prefs, scenario.num_vot, scenario.num_energy,
            scenario.num_stations,
        )
        if mass.shape != shape:
            raise ValueError(f"mass must have shape {shape}")
        load = np.einsum("bveq,e->q", mass, scenario.energy)
        return cls(mass=mass, residual=scenario.capacities - load)

    def to_dict(self) -> dict:
        return {
            "mass": self.mass.tolist(),
            "residual": self.residual.tolist(),
        }


def station_utilities(scenario: Scenario) -> np.ndarray:
    """Utility of every type at every station under self-routing: reward
    minus travel cost minus energy bill at the local price.  (B, V, E, Q)."""
    travel = scenario.vot[None, :, None, None] * scenario.detours[None, None, None, :]
    bill = scenario.energy[None, None, :, None] * scenario.lmps[None, None, None, :]
    return scenario.reward[:, :, None, None] - travel - bill


def assignment_welfare(assignment: SelfRoutingAssignment, scenario: Scenario) -> float:
    return float(np.sum(assignment.mass * station_utilities(scenario)))


def _check_feasible(assignment: SelfRoutingAssignment, scenario: Scenario):
    mass = assignment.mass
    if np.any(mass < -1e-9):
        raise ValueError("assignment has negative mass")
    sums = mass.sum(axis=-1)
    if np.any(sums > scenario.arrivals + 1e-9 * np.maximum(1.0, scenario.arrivals)):
        raise ValueError("assignment serves more than the potential rate")
    for ell in range(scenario.num_prefs):
        access = np.asarray(scenario.preferences[ell].access_vector, dtype=bool)
        if np.any(mass[ell][..., ~access] > 1e-9):
            raise ValueError("assignment places mass at an inaccessible station")
    load = np.einsum("bveq,e->q", mass, scenario.energy)
    cap_scale = np.where(
        np.isfinite(scenario.capacities), np.maximum(1.0, scenario.capacities), 1.0
    )
    if np.any(load > scenario.capacities + 1e-6 * cap_scale):
        raise ValueError("assignment exceeds a station capacity")
    expected = scenario.capacities - load
    both = np.isfinite(expected) & np.isfinite(assignment.residual)
    if np.any(np.abs(assignment.residual[both] - expected[both]) > 1e-6 * cap_scale[both]):
        raise ValueError("stored residual capacity is inconsistent with the mass")


def verify_equilibrium(
    assignment: SelfRoutingAssignment,
    scenario: Scenario,
    quantum: float = 0.0,
):
    """Check the no-profitable-deviation conditions.

    Served mass may not sit at negative utility, nor below a strictly
    better accessible station that has room for one quantum (any positive
    room when quantum = 0).  Unserved mass of at least one quantum may not
    face a positive-utility station with room.  Returns (True, None) or
    (False, witness) where witness is (1-based type, 1-based station) —
    station None when the deviation is to stop buying.
    """
    _check_feasible(assignment, scenario)
    u = station_utilities(scenario)
    resid = assignment.residual
    cap_scale = np.where(
        np.isfinite(scenario.capacities), np.maximum(1.0, scenario.capacities), 1.0
    )

    def has_room(q: int, energy: float) -> bool:
        if quantum > 0.0:
            return resid[q] >= quantum * energy - 1e-9 * cap_scale[q]
        return resid[q] > 1e-9 * cap_scale[q]

    for ell, i, j in scenario.iter_types(active_only=True):
        stations = scenario.preferences[ell].stations
        rate = scenario.arrivals[ell, i, j]
        mass_tol = 1e-9 * max(1.0, rate)
        label = (i + 1, j + 1, ell + 1)
        energy = scenario.energy[j]
        served = 0.0
        for q in stations:
            m = assignment.mass[ell, i, j, q]
            served += m
            if m <= mass_tol:
                continue
            if u[ell, i, j, q] < -_TOL:
                return False, (label, None)
            for q2 in stations:
                if q2 == q:
                    continue
                if u[ell, i, j, q2] > u[ell, i, j, q] + _TOL and has_room(q2, energy):
                    return False, (label, q2 + 1)
        unserved = rate - served
        threshold = quantum * (1.0 - 1e-9) if quantum > 0.0 else mass_tol
        if unserved >= threshold and unserved > mass_tol:
            for q2 in stations:
                if u[ell, i, j, q2] > _TOL and has_room(q2, energy):
                    return False, (label, q2 + 1)
    return True, None


def default_quantum(scenario: Scenario) -> float:
    """A tenth of the smallest positive potential rate (1.0 if none)."""
    rates = [scenario.arrivals[c] for c in scenario.iter_types(active_only=True)]
    return float(min(rates)) / 10.0 if rates else 1.0


def enumerate_equilibria(scenario: Scenario, quantum: float | None = None):
    """All Nash equilibria of the quantized self-routing game.

    Masses move in whole quanta (default: a tenth of the smallest positive
    potential rate).  Returns (assignment, welfare) pairs sorted by
    ascending welfare, deduplicated by support pattern and welfare.
    """
    active = list(scenario.iter_types(active_only=True))
    if len(active) * scenario.num_stations > 12:
        raise ValueError(
            "instance too large to enumerate: "
            f"{len(active)} types x {scenario.num_stations} stations > 12 cells"
        )
    if quantum is None:
        quantum = default_quantum(scenario)
    if quantum <= 0.0:
        raise ValueError("quantum must be positive")

    u = station_utilities(scenario)
    type_data = []
    for cell in active:
        ell, i, j = cell
        n = int(math.floor(scenario.arrivals[cell] / quantum + 1e-9))
        if n > 20:
            raise ValueError(
                "instance too large to enumerate: "
                f"type {(i + 1, j + 1, ell + 1)} has {n} quanta (max 20)"
            )
        type_data.append({
            "cell": cell,
            "stations": scenario.preferences[ell].stations,
            "energy": scenario.energy[j],
            "quanta": n,
            "utilities": u[cell],
        })

    # Energy still to be placed by types after index t — used to decide
    # whether a profitable deviation could still be crowded out.
    future = [0.0] * (len(type_data) + 1)
    for t in range(len(type_data) - 1, -1, -1):
        future[t] = future[t + 1] + type_data[t]["quanta"] * quantum * type_data[t]["energy"]

    cap_scale = np.where(
        np.isfinite(scenario.capacities), np.maximum(1.0, scenario.capacities), 1.0
    )
    counts = [dict() for _ in type_data]
    results = []
    seen = set()

    def persistent_room(resid_q: float, scale_q: float, after: int, energy: float) -> bool:
        return resid_q - future[after] >= quantum * energy - 1e-9 * scale_q

    def doomed(t_idx: int, resid: np.ndarray) -> bool:
        """A deviation that no future placement can block."""
        data = type_data[t_idx]
        placed = counts[t_idx]
        ut = data["utilities"]
        energy = data["energy"]
        after = t_idx + 1
        served = sum(placed.values())
        for q, n in placed.items():
            if n == 0:
                continue
            if ut[q] < -_TOL:
                return True
            for q2 in data["stations"]:
                if q2 != q and ut[q2] > ut[q] + _TOL and \
                        persistent_room(resid[q2], cap_scale[q2], after, energy):
                    return True
        if data["quanta"] - served >= 1:
            for q2 in data["stations"]:
                if ut[q2] > _TOL and \
                        persistent_room(resid[q2], cap_scale[q2], after, energy):
                    return True
        return False

    def record(resid: np.ndarray):
        mass = np.zeros(scenario.arrivals.shape + (scenario.num_stations,))
        for data, placed in zip(type_data, counts):
            for q, n in placed.items():
                mass[data["cell"] + (q,)] = n * quantum
        assignment = SelfRoutingAssignment(
            mass=mass, residual=scenario.capacities - (
                np.einsum("bveq,e->q", mass, scenario.energy)
            )
        )
        ok, _ = verify_equilibrium(assignment, scenario, quantum=quantum)
        if not ok:
            return
        welfare = assignment_welfare(assignment, scenario)
        key = ((mass > 1e-12).tobytes(), round(welfare, 6))
        if key in seen:
            return
        seen.add(key)
        results.append((assignment, welfare))

    def assign(t_idx: int, resid: np.ndarray):
        if t_idx == len(type_data):
            record(resid)
            return
        data = type_data[t_idx]
        stations = data["stations"]
        energy = data["energy"]

        def fill(s_idx: int, left: int):
            if s_idx == len(stations):
                if not doomed(t_idx, resid):
                    assign(t_idx + 1, resid)
                return
            q = stations[s_idx]
            limit = 0 if data["utilities"][q] < -_TOL else min(
                left,
                int((resid[q] + 1e-9 * cap_scale[q]) // (quantum * energy))
                if np.isfinite(resid[q]) else left,
            )
            for n in range(limit, -1, -1):
                counts[t_idx][q] = n
                resid[q] -= n * quantum * energy
                fill(s_idx + 1, left - n)
                resid[q] += n * quantum * energy
            counts[t_idx].pop(q, None)

        fill(0, data["quanta"])

    assign(0, scenario.capacities.astype(float).copy())
    results.sort(key=lambda item: (item[1], (item[0].mass > 1e-12).tobytes()))
    return results
