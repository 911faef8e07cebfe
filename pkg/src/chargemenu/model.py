"""Scenario data model for differentiated-service charging menus.

This module owns the immutable world description (customer types, travel
preferences, stations, distribution network, timeline), the unit
conventions, and input validation.  Conventions used across the package:

* time in hours (a timeline slot is one hour),
* energy in kWh (a station capacity is kWh deliverable per slot),
* money in dollars.

Stations are indexed 0..Q-1 internally.  The *last* station listed in a
scenario document is the "outside option": the fallback station that every
travel preference must be able to reach, conventionally the one with the
longest detour and the cheapest electricity.  User-facing artifacts (CSV
reports, JSON documents, preference lists) use 1-based indices; internal
arrays are 0-based.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "CustomerType",
    "TravelPreference",
    "Station",
    "DistributionNetwork",
    "TimelineSlot",
    "ScenarioTimeline",
    "Scenario",
    "Policy",
    "ValidationIssue",
    "ValidationReport",
    "ScenarioFormatError",
    "build_preferences",
    "scenario_from_dict",
    "scenario_to_dict",
    "load_scenario",
    "validate_scenario",
    "expected_wait",
    "type_utility",
    "station_loads",
    "policy_violations",
]


class ScenarioFormatError(ValueError):
    """Raised when a scenario document is structurally unusable."""


def _readonly(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


# --------------------------------------------------------------------------
# domain types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CustomerType:
    """One cell of the (VoT, energy, preference) type grid.

    Index fields carry the 1-based labels used in reports; ``vot`` is in
    $/hour, ``energy`` in kWh, ``reward`` in $, ``potential_rate`` in
    vehicles/hour.
    """

    vot_index: int
    energy_index: int
    pref_index: int
    vot: float
    energy: float
    reward: float
    potential_rate: float


@dataclass(frozen=True)
class TravelPreference:
    """A set of stations a customer group is willing to visit.

    ``pref_index`` is the 1-based label; ``access_vector`` has one 0/1
    entry per station; ``stations`` lists the accessible station indices
    (0-based).  ``subset_prefs`` holds the 0-based indices of preferences
    whose station set is a *strict* subset of this one (the options such a
    customer could also purchase), and ``frontier_prefs`` the members of
    ``subset_prefs`` with exactly one station fewer (the neighbors used by
    local incentive checks).
    """

    pref_index: int
    access_vector: tuple[int, ...]
    stations: tuple[int, ...]
    subset_prefs: tuple[int, ...]
    frontier_prefs: tuple[int, ...]


@dataclass(frozen=True)
class Station:
    """A charging site: detour time d (h), electricity price theta ($/kWh),
    deliverable energy per slot C (kWh) and a fixed queueing time (h).

    Virtual stations are solver constructs (behind-the-meter generation or
    the non-participation sink); ``host_station`` points at the physical
    site a generation-backed virtual station lives at.
    """

    index: int
    detour_time: float
    lmp: float
    capacity: float
    queue_time: float = 0.0
    is_virtual: bool = False
    host_station: int | None = None


@dataclass(frozen=True, eq=False)
class DistributionNetwork:
    """Line-flow model: ``ptdf`` maps bus injections to line flows (lines x
    buses), ``station_bus`` maps stations to buses (buses x stations, 0/1),
    ``line_limits`` is the per-slot energy headroom of each line (kWh)."""

    ptdf: np.ndarray
    station_bus: np.ndarray
    line_limits: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "ptdf", _readonly(self.ptdf))
        object.__setattr__(self, "station_bus", _readonly(self.station_bus))
        object.__setattr__(self, "line_limits", _readonly(self.line_limits))

    @property
    def num_lines(self) -> int:
        return self.ptdf.shape[0]

    def line_map(self) -> np.ndarray:
        """(lines x stations) matrix taking station loads to line flows."""
        return self.ptdf @ self.station_bus


@dataclass(frozen=True, eq=False)
class TimelineSlot:
    """Per-slot overrides; ``None`` fields inherit the base scenario."""

    arrivals: np.ndarray | None = None      # potential rates, (B, V, E)
    solar: np.ndarray | None = None         # available kWh per station
    line_limits: np.ndarray | None = None   # kWh headroom per line


@dataclass(frozen=True)
class ScenarioTimeline:
    slots: tuple[TimelineSlot, ...]

    def __len__(self) -> int:
        return len(self.slots)


@dataclass(frozen=True, eq=False)
class Scenario:
    """Immutable world description.

    Arrays: ``vot`` (V,), ``energy`` (E,), ``reward`` (B, V) and
    ``arrivals`` (B, V, E) — rewards vary by preference and VoT, potential
    arrival rates by the full type cell.  ``outside_index`` marks the
    outside-option station (the last physical one at ingestion; appended
    virtual stations never move it).
    """

    vot: np.ndarray
    energy: np.ndarray
    reward: np.ndarray
    arrivals: np.ndarray
    preferences: tuple[TravelPreference, ...]
    stations: tuple[Station, ...]
    outside_index: int
    network: DistributionNetwork | None = None
    timeline: ScenarioTimeline | None = None

    def __post_init__(self):
        object.__setattr__(self, "vot", _readonly(self.vot))
        object.__setattr__(self, "energy", _readonly(self.energy))
        object.__setattr__(self, "reward", _readonly(self.reward))
        object.__setattr__(self, "arrivals", _readonly(self.arrivals))

    # ---- shape helpers -------------------------------------------------
    @property
    def num_vot(self) -> int:
        return self.vot.shape[0]

    @property
    def num_energy(self) -> int:
        return self.energy.shape[0]

    @property
    def num_prefs(self) -> int:
        return len(self.preferences)

    @property
    def num_stations(self) -> int:
        return len(self.stations)

    # ---- station arrays ------------------------------------------------
    @cached_property
    def detours(self) -> np.ndarray:
        return _readonly([s.detour_time for s in self.stations])

    @cached_property
    def lmps(self) -> np.ndarray:
        return _readonly([s.lmp for s in self.stations])

    @cached_property
    def capacities(self) -> np.ndarray:
        return _readonly([s.capacity for s in self.stations])

    @cached_property
    def queue_times(self) -> np.ndarray:
        return _readonly([s.queue_time for s in self.stations])

    @cached_property
    def access_matrix(self) -> np.ndarray:
        """(B x Q) 0/1 matrix of station accessibility per preference."""
        return _readonly([p.access_vector for p in self.preferences])

    # ---- type grid -----------------------------------------------------
    def customer_type(self, ell: int, i: int, j: int) -> CustomerType:
        """Build the type record at 0-based grid position (ell, i, j)."""
        return CustomerType(
            vot_index=i + 1,
            energy_index=j + 1,
            pref_index=ell + 1,
            vot=float(self.vot[i]),
            energy=float(self.energy[j]),
            reward=float(self.reward[ell, i]),
            potential_rate=float(self.arrivals[ell, i, j]),
        )

    def iter_types(self, active_only: bool = False) -> Iterator[tuple[int, int, int]]:
        """Yield 0-based (ell, i, j) in the canonical ell-major order."""
        for ell in range(self.num_prefs):
            for i in range(self.num_vot):
                for j in range(self.num_energy):
                    if active_only and self.arrivals[ell, i, j] <= 0.0:
                        continue
                    yield ell, i, j

    def slot_count(self) -> int:
        return len(self.timeline) if self.timeline is not None else 1

    def slot_scenario(self, slot: int) -> "Scenario":
        """Materialize one timeline slot as a standalone scenario."""
        if self.timeline is None:
            if slot != 0:
                raise IndexError("scenario has a single implicit slot")
            return self
        ts = self.timeline.slots[slot]
        scn = self
        if ts.arrivals is not None:
            scn = replace(scn, arrivals=ts.arrivals, timeline=None)
        else:
            scn = replace(scn, timeline=None)
        if ts.line_limits is not None and scn.network is not None:
            net = DistributionNetwork(
                ptdf=scn.network.ptdf,
                station_bus=scn.network.station_bus,
                line_limits=ts.line_limits,
            )
            scn = replace(scn, network=net)
        return scn


@dataclass(frozen=True, eq=False)
class Policy:
    """A solved menu: effective arrivals ``lam`` (vehicles/h), routing
    probabilities ``routing`` (zero rows for rejected types), waits (h) and
    prices ($).  Shapes: (B, V, E) plus a trailing station axis on
    ``routing``."""

    lam: np.ndarray
    routing: np.ndarray
    waits: np.ndarray
    prices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lam", _readonly(self.lam))
        object.__setattr__(self, "routing", _readonly(self.routing))
        object.__setattr__(self, "waits", _readonly(self.waits))
        object.__setattr__(self, "prices", _readonly(self.prices))

    @property
    def offered(self) -> np.ndarray:
        """Boolean mask of types that actually receive an option."""
        return self.lam > 0.0


# --------------------------------------------------------------------------
# construction
# --------------------------------------------------------------------------

def build_preferences(access_rows: Sequence[Sequence[int]]) -> tuple[TravelPreference, ...]:
    """Derive preference records (with subset relations) from 0/1 access rows."""
    rows = [tuple(int(v) for v in row) for row in access_rows]
    sets = [frozenset(q for q, v in enumerate(row) if v) for row in rows]
    prefs = []
    for ell, row in enumerate(rows):
        subs = tuple(
            t for t, other in enumerate(sets)
            if t != ell and other < sets[ell]
        )
        frontier = tuple(t for t in subs if len(sets[t]) == len(sets[ell]) - 1)
        prefs.append(
            TravelPreference(
                pref_index=ell + 1,
                access_vector=row,
                stations=tuple(sorted(sets[ell])),
                subset_prefs=subs,
                frontier_prefs=frontier,
            )
        )
    return tuple(prefs)


def _as_float_array(value, name: str, ndim: int) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioFormatError(f"field '{name}' is not numeric: {exc}") from None
    if arr.ndim != ndim:
        raise ScenarioFormatError(
            f"field '{name}' must have {ndim} dimension(s), got {arr.ndim}"
        )
    return arr


def scenario_from_dict(doc: dict) -> Scenario:
    """Build a Scenario from the documented JSON structure.

    Required blocks: ``types`` (arrays ``v``, ``e``, ``R``, ``Lambda``),
    ``preferences`` (lists of 1-based station indices) and ``stations``
    (arrays ``d``, ``theta``, ``C`` and optional ``rho``).  Optional:
    ``network`` (``D``, ``E``, ``f``) and ``timeline`` (list of slots with
    optional ``Lambda``, ``solar``, ``f``).
    """
    if not isinstance(doc, dict):
        raise ScenarioFormatError("scenario document must be a JSON object")
    for key in ("types", "preferences", "stations"):
        if key not in doc:
            raise ScenarioFormatError(f"missing required block '{key}'")

    types = doc["types"]
    if not isinstance(types, dict):
        raise ScenarioFormatError("'types' must be an object")
    for key in ("v", "e", "R", "Lambda"):
        if key not in types:
            raise ScenarioFormatError(f"missing field 'types.{key}'")
    vot = _as_float_array(types["v"], "types.v", 1)
    energy = _as_float_array(types["e"], "types.e", 1)
    reward = _as_float_array(types["R"], "types.R", 2)
    arrivals = _as_float_array(types["Lambda"], "types.Lambda", 3)

    st = doc["stations"]
    if not isinstance(st, dict):
        raise ScenarioFormatError("'stations' must be an object")
    for key in ("d", "theta", "C"):
        if key not in st:
            raise ScenarioFormatError(f"missing field 'stations.{key}'")
    d = _as_float_array(st["d"], "stations.d", 1)
    theta = _as_float_array(st["theta"], "stations.theta", 1)
    cap = _as_float_array(st["C"], "stations.C", 1)
    rho = (
        _as_float_array(st["rho"], "stations.rho", 1)
        if "rho" in st
        else np.zeros_like(d)
    )
    nq = d.shape[0]
    if not (theta.shape[0] == cap.shape[0] == rho.shape[0] == nq):
        raise ScenarioFormatError("station arrays d/theta/C/rho disagree in length")
    if nq == 0:
        raise ScenarioFormatError("scenario needs at least one station")

    nb = reward.shape[0]
    nv = vot.shape[0]
    ne = energy.shape[0]
    if reward.shape != (nb, nv):
        raise ScenarioFormatError("types.R must be (preferences x VoT levels)")
    if arrivals.shape != (nb, nv, ne):
        raise ScenarioFormatError("types.Lambda must be (preferences x VoT x energy)")

    pref_lists = doc["preferences"]
    if not isinstance(pref_lists, list) or len(pref_lists) != nb:
        raise ScenarioFormatError(
            "'preferences' must list one station set per row of types.R"
        )
    access_rows = []
    for ell, entry in enumerate(pref_lists):
        if not isinstance(entry, list) or not entry:
            raise ScenarioFormatError(f"preference {ell + 1} must be a nonempty list")
        row = [0] * nq
        for q in entry:
            if not isinstance(q, int) or not (1 <= q <= nq):
                raise ScenarioFormatError(
                    f"preference {ell + 1} references invalid station {q!r}"
                )
            row[q - 1] = 1
        access_rows.append(row)

    stations = tuple(
        Station(index=q, detour_time=float(d[q]), lmp=float(theta[q]),
                capacity=float(cap[q]), queue_time=float(rho[q]))
        for q in range(nq)
    )

    network = None
    if doc.get("network") is not None:
        net = doc["network"]
        if not isinstance(net, dict):
            raise ScenarioFormatError("'network' must be an object")
        for key in ("D", "E", "f"):
            if key not in net:
                raise ScenarioFormatError(f"missing field 'network.{key}'")
        ptdf = _as_float_array(net["D"], "network.D", 2)
        sbus = _as_float_array(net["E"], "network.E", 2)
        flim = _as_float_array(net["f"], "network.f", 1)
        if sbus.shape != (ptdf.shape[1], nq):
            raise ScenarioFormatError(
                "network.E must be (buses x stations) matching network.D and stations"
            )
        if flim.shape[0] != ptdf.shape[0]:
            raise ScenarioFormatError("network.f must have one entry per line")
        network = DistributionNetwork(ptdf=ptdf, station_bus=sbus, line_limits=flim)

    timeline = None
    if doc.get("timeline") is not None:
        raw = doc["timeline"]
        if not isinstance(raw, list) or not raw:
            raise ScenarioFormatError("'timeline' must be a nonempty list of slots")
        slots = []
        for k, slot in enumerate(raw):
            if not isinstance(slot, dict):
                raise ScenarioFormatError(f"timeline slot {k} must be an object")
            s_arr = s_sol = s_f = None
            if slot.get("Lambda") is not None:
                s_arr = _as_float_array(slot["Lambda"], f"timeline[{k}].Lambda", 3)
                if s_arr.shape != arrivals.shape:
                    raise ScenarioFormatError(
                        f"timeline[{k}].Lambda shape differs from types.Lambda"
                    )
                s_arr = _readonly(s_arr)
            if slot.get("solar") is not None:
                s_sol = _as_float_array(slot["solar"], f"timeline[{k}].solar", 1)
                if s_sol.shape[0] != nq:
                    raise ScenarioFormatError(
                        f"timeline[{k}].solar must have one entry per station"
                    )
                s_sol = _readonly(s_sol)
            if slot.get("f") is not None:
                if network is None:
                    raise ScenarioFormatError(
                        f"timeline[{k}].f given but scenario has no network block"
                    )
                s_f = _as_float_array(slot["f"], f"timeline[{k}].f", 1)
                if s_f.shape[0] != network.num_lines:
                    raise ScenarioFormatError(
                        f"timeline[{k}].f must have one entry per line"
                    )
                s_f = _readonly(s_f)
            slots.append(TimelineSlot(arrivals=s_arr, solar=s_sol, line_limits=s_f))
        timeline = ScenarioTimeline(slots=tuple(slots))

    return Scenario(
        vot=vot,
        energy=energy,
        reward=reward,
        arrivals=arrivals,
        preferences=build_preferences(access_rows),
        stations=stations,
        outside_index=nq - 1,
        network=network,
        timeline=timeline,
    )


def scenario_to_dict(scenario: Scenario) -> dict:
    """Serialize back to the documented JSON structure (inverse of
    ``scenario_from_dict`` up to float round-trips)."""
    doc: dict = {
        "types": {
            "v": scenario.vot.tolist(),
            "e": scenario.energy.tolist(),
            "R": scenario.reward.tolist(),
            "Lambda": scenario.arrivals.tolist(),
        },
        "preferences": [
            [q + 1 for q in pref.stations] for pref in scenario.preferences
        ],
        "stations": {
            "d": scenario.detours.tolist(),
            "theta": scenario.lmps.tolist(),
            "C": scenario.capacities.tolist(),
            "rho": scenario.queue_times.tolist(),
        },
    }
    if scenario.network is not None:
        doc["network"] = {
            "D": scenario.network.ptdf.tolist(),
            "E": scenario.network.station_bus.tolist(),
            "f": scenario.network.line_limits.tolist(),
        }
    if scenario.timeline is not None:
        doc["timeline"] = []
        for slot in scenario.timeline.slots:
            entry = {}
            if slot.arrivals is not None:
                entry["Lambda"] = slot.arrivals.tolist()
            if slot.solar is not None:
                entry["solar"] = slot.solar.tolist()
            if slot.line_limits is not None:
                entry["f"] = slot.line_limits.tolist()
            doc["timeline"].append(entry)
    return doc


def load_scenario(path: str | Path) -> Scenario:
    """Read and build a scenario from a JSON file."""
    raw = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"invalid JSON: {exc}") from None
    return scenario_from_dict(doc)


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidationIssue:
    severity: str  # "error" | "warning"
    message: str


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[ValidationIssue, ...]

    @property
    def errors(self) -> tuple[ValidationIssue, ...]:
        return tuple(i for i in self.issues if i.severity == "error")

    @property
    def warnings(self) -> tuple[ValidationIssue, ...]:
        return tuple(i for i in self.issues if i.severity == "warning")

    @property
    def ok(self) -> bool:
        return not self.errors

    def __bool__(self) -> bool:
        return self.ok


def validate_scenario(scenario: Scenario) -> ValidationReport:
    """Check structural invariants (errors) and the pricing-theory
    assumptions (warnings).

    Errors make the scenario unusable: shape mismatches, negative
    quantities, non-ascending VoT/energy grids, or a preference that cannot
    reach the outside station.  Warnings flag conditions the solvers
    tolerate but the incentive guarantees lean on: reward monotonicity
    across nested preference sets, strictly increasing reward/VoT ratios,
    nonzero queueing times, and outside-station conventions.
    """
    errors: list[str] = []
    warnings: list[str] = []

    v, e, R, lam = scenario.vot, scenario.energy, scenario.reward, scenario.arrivals
    nb, nv, ne = scenario.num_prefs, scenario.num_vot, scenario.num_energy
    nq = scenario.num_stations

    if R.shape != (nb, nv):
        errors.append(f"reward grid shape {R.shape} != (prefs, VoT) = {(nb, nv)}")
    if lam.shape != (nb, nv, ne):
        errors.append(
            f"arrival grid shape {lam.shape} != (prefs, VoT, energy) = {(nb, nv, ne)}"
        )
    if nv == 0 or ne == 0 or nb == 0:
        errors.append("type grid must be nonempty in every axis")
    if nv and not np.all(np.diff(v) > 0):
        errors.append("VoT levels must be strictly ascending")
    if ne and not np.all(np.diff(e) > 0):
        errors.append("energy levels must be strictly ascending")
    if R.size and np.any(R <= 0):
        errors.append("rewards must be positive")
    if lam.size and np.any(lam < 0):
        errors.append("potential arrival rates must be nonnegative")

    d = scenario.detours
    theta = scenario.lmps
    cap = scenario.capacities
    rho = scenario.queue_times
    if np.any(d < 0):
        errors.append("detour times must be nonnegative")
    if np.any(theta < 0):
        errors.append("electricity prices must be nonnegative")
    if np.any(cap < 0):
        errors.append("station capacities must be nonnegative")
    if np.any(rho < 0):
        errors.append("queueing times must be nonnegative")
    if np.any(rho > 0):
        warnings.append(
            "nonzero queueing times present; the hard-capacity planners require rho = 0"
        )

    out = scenario.outside_index
    if not (0 <= out < nq):
        errors.append(f"outside station index {out} out of range")
        out = None
    for pref in scenario.preferences:
        if len(pref.access_vector) != nq:
            errors.append(
                f"preference {pref.pref_index} access vector length "
                f"{len(pref.access_vector)} != station count {nq}"
            )
            continue
        if not pref.stations:
            errors.append(f"preference {pref.pref_index} is empty")
        elif out is not None and out not in pref.stations:
            errors.append(
                f"preference {pref.pref_index} cannot reach the outside station"
            )

    if out is not None and nq:
        physical = [s for s in scenario.stations if not s.is_virtual]
        if physical:
            min_theta = min(s.lmp for s in physical)
            if theta[out] > min_theta + 1e-12:
                warnings.append(
                    "outside station is not the cheapest physical station; "
                    "admission filtering may discard value"
                )
            max_d = max(s.detour_time for s in physical)
            if d[out] < max_d - 1e-12:
                warnings.append(
                    "outside station is conventionally the furthest physical station"
                )

    net = scenario.network
    if net is not None:
        n_phys = int(net.station_bus.shape[1])
        if net.ptdf.shape[1] != net.station_bus.shape[0]:
            errors.append("network bus dimension disagrees between D and E")
        if n_phys > nq:
            errors.append("network station dimension exceeds station count")
        if net.line_limits.shape[0] != net.num_lines:
            errors.append("network line-limit length disagrees with D")
        if np.any(net.line_limits < 0):
            errors.append("line limits must be nonnegative")

    # Reward monotonicity across nested preference sets: strictly smaller
    # station sets must come with strictly larger rewards, equal-sized sets
    # with equal rewards.
    if R.shape == (nb, nv):
        sizes = [len(p.stations) for p in scenario.preferences]
        for ell in range(nb):
            for m in range(nb):
                if ell == m:
                    continue
                if sizes[ell] > sizes[m] and np.any(R[ell] >= R[m] - 1e-12):
                    warnings.append(
                        f"preference {ell + 1} offers more stations than "
                        f"{m + 1} but its rewards are not strictly smaller"
                    )
                elif ell < m and sizes[ell] == sizes[m]:
                    scale = np.maximum(1.0, np.abs(R[ell]))
                    if np.any(np.abs(R[ell] - R[m]) > 1e-9 * scale):
                        warnings.append(
                            f"preferences {ell + 1} and {m + 1} offer equally many "
                            "stations but their rewards differ"
                        )

    # Reward/VoT ratios must strictly increase with VoT for the screening
    # menus to separate types.
    if R.shape == (nb, nv) and nv > 1 and np.all(v > 0):
        for ell in range(nb):
            ratios = R[ell] / v
            if not np.all(np.diff(ratios) > 0):
                warnings.append(
                    f"preference {ell + 1}: reward/VoT ratios are not strictly "
                    "increasing across VoT levels"
                )

    issues = tuple(
        [ValidationIssue("error", m) for m in errors]
        + [ValidationIssue("warning", m) for m in warnings]
    )
    return ValidationReport(issues=issues)


# --------------------------------------------------------------------------
# small evaluators
# --------------------------------------------------------------------------

def expected_wait(routing, stations: Sequence[Station]) -> float:
    """Expected wait of a routing vector: sum of (detour + queue) * prob."""
    r = np.asarray(routing, dtype=float)
    if r.ndim != 1 or r.shape[0] != len(stations):
        raise ValueError(
            f"routing length {r.shape} does not match station count {len(stations)}"
        )
    d = np.array([s.detour_time + s.queue_time for s in stations])
    return float(d @ r)


def type_utility(ctype: CustomerType, wait: float, price: float) -> float:
    """Net utility of buying an option: reward - VoT * wait - price."""
    return ctype.reward - ctype.vot * wait - price


def station_loads(policy: Policy, scenario: Scenario) -> np.ndarray:
    """Energy drawn per station (kWh per slot) under a policy."""
    return np.einsum(
        "bve,e,bveq->q", policy.lam, scenario.energy, policy.routing
    )


def policy_violations(
    policy: Policy,
    scenario: Scenario,
    *,
    routing_tol: float = 1e-9,
    load_tol: float = 1e-6,
) -> list[str]:
    """Check the structural policy invariants; returns human-readable
    violations (empty list == clean)."""
    out: list[str] = []
    lam, r = policy.lam, policy.routing
    shape = (scenario.num_prefs, scenario.num_vot, scenario.num_energy)
    if lam.shape != shape or r.shape[:3] != shape or r.shape[3] != scenario.num_stations:
        return [f"policy arrays have wrong shape for the scenario (lam {lam.shape})"]

    if np.any(lam < -routing_tol):
        out.append("negative effective arrival rate")
    excess = lam - scenario.arrivals
    if np.any(excess > routing_tol * np.maximum(1.0, scenario.arrivals)):
        out.append("effective arrivals exceed potential rates")

    access = scenario.access_matrix
    for ell, i, j in scenario.iter_types():
        if lam[ell, i, j] <= 0.0:
            continue
        row = r[ell, i, j]
        if np.any(row < -routing_tol):
            out.append(f"type ({i+1},{j+1},{ell+1}): negative routing entry")
        stray = row * (1.0 - access[ell])
        if np.any(np.abs(stray) > routing_tol):
            out.append(f"type ({i+1},{j+1},{ell+1}): routing outside preference set")
        if abs(float(row.sum()) - 1.0) > 1e-9:
            out.append(f"type ({i+1},{j+1},{ell+1}): routing does not sum to one")

    loads = station_loads(policy, scenario)
    caps = scenario.capacities
    over = loads - caps
    for q in np.nonzero(over > load_tol)[0]:
        out.append(
            f"station {q+1}: load {loads[q]:.6f} kWh exceeds capacity {caps[q]:.6f}"
        )
    return out
