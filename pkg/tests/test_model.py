"""Scenario construction, validation, serialization, and the small
per-type helpers."""

import json

import numpy as np
import pytest

from chargemenu.model import (
    ScenarioFormatError,
    build_preferences,
    expected_wait,
    load_scenario,
    scenario_from_dict,
    scenario_to_dict,
    station_loads,
    type_utility,
    validate_scenario,
)
from chargemenu.model import Policy, Station

from scenarios import corridor, line_limited_24slot, running_example, table_v_types


def test_running_example_shape():
    scn = running_example()
    assert (scn.num_prefs, scn.num_vot, scn.num_energy) == (1, 1, 1)
    assert scn.num_stations == 2
    assert scn.outside_index == 1
    assert scn.reward[0, 0] == 100.0
    assert np.array_equal(scn.detours, [0.1, 0.2])


def test_roundtrip_through_dict():
    for scn in (running_example(), corridor(), line_limited_24slot()):
        again = scenario_from_dict(scenario_to_dict(scn))
        assert scenario_to_dict(again) == scenario_to_dict(scn)


def test_extra_top_level_keys_are_tolerated():
    blob = scenario_to_dict(running_example())
    blob["notes"] = "free-form commentary"
    scn = scenario_from_dict(blob)
    assert scn.num_stations == 2


def test_missing_block_raises():
    blob = scenario_to_dict(running_example())
    del blob["stations"]
    with pytest.raises(ScenarioFormatError):
        scenario_from_dict(blob)


def test_load_scenario_reads_file(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps(scenario_to_dict(running_example())))
    scn = load_scenario(path)
    assert scn.reward[0, 0] == 100.0


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def test_validate_clean_single_type():
    blob = {
        "types": {"v": [10.0], "e": [5.0], "R": [[50.0]], "Lambda": [[[1.0]]]},
        "preferences": [[1]],
        "stations": {"d": [0.1], "theta": [0.05], "C": [100.0]},
    }
    rep = validate_scenario(scenario_from_dict(blob))
    assert rep.ok
    assert rep.warnings == ()


def test_validate_flags_decreasing_reward_ratio():
    # The benchmark's own parameters: R/v = 22, 21.17, 21.13 is decreasing.
    blob = {
        "types": dict(table_v_types(), Lambda=[[[1.0] * 3] * 3]),
        "preferences": [[1, 2, 3]],
        "stations": {"d": [0.3, 0.6, 0.9], "theta": [0.5, 0.4, 0.3],
                     "C": [1e5, 1e5, 1e5]},
    }
    rep = validate_scenario(scenario_from_dict(blob))
    assert rep.ok
    assert any("ratio" in w.message or "VoT" in w.message for w in rep.warnings)


def test_validate_flags_nested_preference_reward_bump():
    # Strictly larger access set must not come with a larger reward.
    blob = {
        "types": {"v": [10.0], "e": [5.0], "R": [[51.0], [50.0]],
                  "Lambda": [[[1.0]], [[1.0]]]},
        "preferences": [[1, 2], [2]],
        "stations": {"d": [0.1, 0.2], "theta": [0.06, 0.05], "C": [50.0, 50.0]},
    }
    rep = validate_scenario(scenario_from_dict(blob))
    assert rep.ok
    assert any("reward" in w.message.lower() for w in rep.warnings)


def test_validate_errors():
    base = {
        "types": {"v": [10.0, 8.0], "e": [5.0], "R": [[50.0, 50.0]],
                  "Lambda": [[[1.0], [1.0]]]},
        "preferences": [[1, 2]],
        "stations": {"d": [0.1, 0.2], "theta": [0.06, 0.05], "C": [50.0, 50.0]},
    }
    rep = validate_scenario(scenario_from_dict(base))
    assert not rep.ok
    assert any("ascending" in e.message for e in rep.errors)

    blob = scenario_to_dict(running_example())
    blob["preferences"] = [[1]]          # cannot reach the outside station
    rep = validate_scenario(scenario_from_dict(blob))
    assert any("outside" in e.message for e in rep.errors)

    blob = scenario_to_dict(running_example())
    blob["stations"]["C"] = [-1.0, 1e6]
    rep = validate_scenario(scenario_from_dict(blob))
    assert any("capacit" in e.message for e in rep.errors)


def test_validation_is_pure():
    scn = corridor()
    a, b = validate_scenario(scn), validate_scenario(scn)
    assert a.errors == b.errors and a.warnings == b.warnings


# ---------------------------------------------------------------------------
# small helpers
# ---------------------------------------------------------------------------

def _stations(d, rho=None):
    rho = rho or [0.0] * len(d)
    return [Station(index=k, detour_time=d[k], lmp=0.1, capacity=1.0,
                    queue_time=rho[k]) for k in range(len(d))]


def test_expected_wait_examples():
    st = _stations([0.03, 0.06])
    assert expected_wait(np.array([1.0, 0.0]), st) == pytest.approx(0.03)
    assert expected_wait(np.array([0.5, 0.5]), st) == pytest.approx(0.045)
    single = _stations([0.25])
    assert expected_wait(np.array([1.0]), single) == pytest.approx(0.25)


def test_expected_wait_is_linear():
    st = _stations([0.03, 0.06, 0.2], rho=[0.0, 0.1, 0.0])
    rng = np.random.default_rng(1)
    for _ in range(20):
        r1 = rng.dirichlet(np.ones(3))
        r2 = rng.dirichlet(np.ones(3))
        alpha = rng.uniform()
        mix = alpha * r1 + (1 - alpha) * r2
        assert expected_wait(mix, st) == pytest.approx(
            alpha * expected_wait(r1, st) + (1 - alpha) * expected_wait(r2, st)
        )


def test_type_utility_examples():
    scn = scenario_from_dict({
        "types": dict(table_v_types(), Lambda=[[[0.0, 5.0, 0.0],
                                                [0.0, 0.0, 5.0],
                                                [5.0, 0.0, 0.0]]]),
        "preferences": [[1, 2, 3]],
        "stations": {"d": [0.3, 0.6, 0.9], "theta": [0.5, 0.4, 0.3],
                     "C": [1e5, 1e5, 1e5]},
    })
    t = scn.customer_type(0, 0, 1)      # v=20, e=50, R=440
    assert type_utility(t, 0.9, 15.0) == pytest.approx(407.0)
    assert type_utility(t, 0.9, t.reward - t.vot * 0.9) == pytest.approx(0.0)
    assert type_utility(t, 0.0, 0.0) == pytest.approx(440.0)


def test_station_loads_by_hand():
    scn = running_example()
    policy = Policy(
        lam=np.array([[[5.0]]]),
        routing=np.array([[[[0.6, 0.4]]]]),
        waits=np.array([[[0.14]]]),
        prices=np.array([[[2.2]]]),
    )
    loads = station_loads(policy, scn)
    assert loads == pytest.approx([30.0, 20.0])


def test_build_preferences_subset_relations():
    prefs = build_preferences([[1, 1, 1], [1, 0, 1], [0, 0, 1]])
    # Descending nesting: pref 2 and 3 sit inside pref 1, pref 3 inside 2.
    assert prefs[0].subset_prefs == (1, 2)
    assert prefs[1].subset_prefs == (2,)
    assert prefs[2].subset_prefs == ()
    assert prefs[1].stations == (0, 2)


# ---------------------------------------------------------------------------
# timeline slots
# ---------------------------------------------------------------------------

def test_slot_scenario_replaces_arrivals():
    scn = line_limited_24slot()
    assert scn.slot_count() == 24
    slot0 = scn.slot_scenario(0)
    slot7 = scn.slot_scenario(7)
    assert slot0.arrivals[0, 0, 0] == pytest.approx(4.0)
    assert slot7.arrivals[0, 0, 0] == pytest.approx(11.0)
    assert slot7.timeline is None
    # stations and network carry over untouched
    assert np.array_equal(slot7.capacities, scn.capacities)
    assert slot7.network is not None


def test_slot_scenario_single_implicit_slot():
    scn = running_example()
    assert scn.slot_scenario(0) is scn
    with pytest.raises(IndexError):
        scn.slot_scenario(1)


def test_slot_line_limit_override():
    blob = scenario_to_dict(line_limited_24slot())
    blob["timeline"] = [{"f": [120.0]}]
    scn = scenario_from_dict(blob)
    slot = scn.slot_scenario(0)
    assert slot.network.line_limits == pytest.approx([120.0])


def test_station_flags_default():
    st = running_example().stations[0]
    assert not st.is_virtual
    assert st.host_station is None
