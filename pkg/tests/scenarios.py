"""Shared scenario builders for the test suite.

Two kinds of inputs live here: loaders for the JSON fixtures under
``tests/data`` and a randomized generator for small single-preference
instances.  The generator keeps every draw inside the envelope the
planners are designed for: nearer stations are strictly more attractive
for every type, rewards grow faster than VoT, the outside station is the
cheapest and farthest, and its capacity always exceeds total demand.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from chargemenu.model import Scenario, scenario_from_dict

DATA_DIR = Path(__file__).parent / "data"


def load_fixture(name: str) -> Scenario:
    """Load one of the JSON scenarios shipped with the tests."""
    with open(DATA_DIR / name, "r", encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))


def corridor() -> Scenario:
    return load_fixture("corridor_six_station.json")


def self_routing_bench() -> Scenario:
    return load_fixture("self_routing_bench.json")


def line_limited_24slot() -> Scenario:
    return load_fixture("line_limited_24slot.json")


def solar_farthest() -> Scenario:
    return load_fixture("solar_farthest.json")


def running_example() -> Scenario:
    """One type (v=20, e=10, R=100, rate 5), two stations.

    Station 1 is nearer but pricier and fits 3 vehicles' energy; station 2
    (the outside option) is effectively unbounded.  Optimum: 3 vehicles to
    station 1, 2 to station 2, welfare 3*96 + 2*95 = 478.
    """
    return scenario_from_dict({
        "types": {"v": [20.0], "e": [10.0], "R": [[100.0]],
                  "Lambda": [[[5.0]]]},
        "preferences": [[1, 2]],
        "stations": {"d": [0.1, 0.2], "theta": [0.2, 0.1],
                     "C": [30.0, 1e6]},
    })


def two_vot_example() -> Scenario:
    """Same stations as running_example with a second, richer VoT level."""
    return scenario_from_dict({
        "types": {"v": [20.0, 40.0], "e": [10.0], "R": [[100.0, 220.0]],
                  "Lambda": [[[3.0], [2.0]]]},
        "preferences": [[1, 2]],
        "stations": {"d": [0.1, 0.2], "theta": [0.2, 0.1],
                     "C": [30.0, 1e6]},
    })


def table_v_types() -> dict:
    """The benchmark type block: three VoT levels with matching rewards."""
    return {"v": [20.0, 30.0, 40.0], "e": [40.0, 50.0, 60.0],
            "R": [[440.0, 635.0, 845.0]]}


# ---------------------------------------------------------------------------
# Randomized single-preference instances
# ---------------------------------------------------------------------------

def random_instance(
    seed: int,
    *,
    num_stations: int | None = None,
    num_vot: int | None = None,
    num_energy: int | None = None,
    all_poor: bool = False,
) -> Scenario:
    """Draw a small B = 1 instance that satisfies the scenario invariants.

    Construction rules (all checked by test_scenarios):

    * detours strictly ascending, prices strictly descending, with
      ``e_max * (theta_q - theta_{q+1}) <= 0.8 * v_min * (d_{q+1} - d_q)``
      so every type strictly prefers nearer stations and no station is
      dominated by the outside option;
    * reward/VoT ratios strictly increasing, and large enough that every
      type clears the outside-station cost (unless ``all_poor``, where
      rewards are below the cost of even the nearest station);
    * the outside station holds 1.05x the total demanded energy, inner
      stations draw between scarce and ample.
    """
    rng = np.random.default_rng(seed)
    while True:
        nq = int(num_stations if num_stations is not None else rng.integers(2, 4))
        nv = int(num_vot if num_vot is not None else rng.integers(1, 4))
        ne = int(num_energy if num_energy is not None else rng.integers(1, 4))
        # Stay inside the exhaustive oracle's size precondition.
        if (nq + 1) * nv * ne <= 12:
            break
        if None not in (num_stations, num_vot, num_energy):
            break

    v = 18.0 + np.cumsum(rng.uniform(3.0, 15.0, nv))
    e = 25.0 + np.cumsum(rng.uniform(4.0, 18.0, ne))

    d = np.cumsum(rng.uniform(0.02, 0.15, nq))
    theta = np.empty(nq)
    theta[-1] = rng.uniform(0.08, 0.15)
    for q in range(nq - 2, -1, -1):
        theta[q] = theta[q + 1] + 0.8 * v[0] * (d[q + 1] - d[q]) / e[-1]

    if all_poor:
        # Rewards below the cost of even the nearest, cheapest service.
        ratios = 0.9 * d[0] * (1.0 + 0.001 * np.arange(nv))
    else:
        base = d[-1] + e[-1] * theta[-1] / v[0]
        ratios = base * (1.2 + np.cumsum(rng.uniform(0.05, 0.30, nv)))
    reward = (v * ratios)[None, :]

    lam = rng.uniform(0.5, 2.0, (1, nv, ne))
    # Occasionally retire the highest-VoT row of one energy column.
    if nv > 1 and rng.uniform() < 0.15:
        lam[0, -1, int(rng.integers(ne))] = 0.0

    total_energy = float(np.sum(lam[0] * e[None, :]))
    caps = rng.uniform(0.2, 1.2, nq) * total_energy
    caps[-1] = 1.05 * total_energy

    return scenario_from_dict({
        "types": {
            "v": v.tolist(),
            "e": e.tolist(),
            "R": reward.tolist(),
            "Lambda": lam.tolist(),
        },
        "preferences": [list(range(1, nq + 1))],
        "stations": {
            "d": d.tolist(),
            "theta": theta.tolist(),
            "C": caps.tolist(),
        },
    })


def acceptance_corpus(count: int = 100) -> list[Scenario]:
    """The fixed 100-instance set used by the acceptance tests.

    Seeds are deterministic; roughly one in ten instances is all-poor
    (nobody worth serving), the rest sweep Q in 2..3 and V, E in 1..3.
    """
    out = []
    for k in range(count):
        out.append(random_instance(1000 + k, all_poor=(k % 10 == 9)))
    return out


def scale_capacities(scenario: Scenario, factor: float) -> Scenario:
    """Same scenario with every station capacity multiplied by ``factor``."""
    from dataclasses import replace

    stations = tuple(
        replace(st, capacity=st.capacity * factor) for st in scenario.stations
    )
    return replace(scenario, stations=stations)
