"""Incentive auditor and the brute-force welfare cross-check."""

from dataclasses import replace

import numpy as np
import pytest

import oracles
import scenarios as sc
from chargemenu.auditor import AuditReport, audit, best_response, brute_force_social
from chargemenu.model import scenario_from_dict
from chargemenu.profit import ProfitMenu, profit_prices, solve_profit
from chargemenu.welfare import evaluate_welfare, solve_social


@pytest.fixture(scope="module")
def two_vot_solution():
    tv = sc.two_vot_example()
    policy, menu = solve_profit(tv)
    return tv, policy, menu


# ---------------------------------------------------------------------------
# best_response
# ---------------------------------------------------------------------------

def test_best_response_prefers_strictly_better_option(two_vot_solution):
    tv, policy, menu = two_vot_solution
    lowered = menu.prices.copy()
    lowered[0, 0, 0] -= 5.0
    cheap = ProfitMenu(prices=lowered, waits=menu.waits)
    assert best_response(tv.customer_type(0, 1, 0), cheap, tv) == (1, 1, 1)


def test_best_response_tie_goes_to_own_option(two_vot_solution):
    tv, policy, menu = two_vot_solution
    ct = tv.customer_type(0, 1, 0)
    u_own = ct.reward - ct.vot * menu.waits[0, 1, 0] - menu.prices[0, 1, 0]
    u_dev = ct.reward - ct.vot * menu.waits[0, 0, 0] - menu.prices[0, 0, 0]
    # Binding incentive constraint: exactly indifferent, stays put.
    assert u_own == pytest.approx(u_dev)
    assert best_response(ct, menu, tv) == (2, 1, 1)


def test_best_response_none_when_everything_negative(two_vot_solution):
    tv, policy, menu = two_vot_solution
    pricey = ProfitMenu(prices=menu.prices + 1e4, waits=menu.waits)
    assert best_response(tv.customer_type(0, 0, 0), pricey, tv) is None


def test_best_response_skips_smaller_energy_columns():
    s = scenario_from_dict({
        "types": {"v": [20.0], "e": [10.0, 20.0], "R": [[100.0]],
                  "Lambda": [[[2.0, 2.0]]]},
        "preferences": [[1]],
        "stations": {"d": [0.1], "theta": [0.2], "C": [1e9]},
    })
    # The small-energy option is nearly free, but a 20 kWh customer cannot
    # take a 10 kWh charge: its best response stays in column 2.
    menu = ProfitMenu(prices=np.array([[[0.01, 50.0]]]),
                      waits=np.full((1, 1, 2), 0.1))
    assert best_response(s.customer_type(0, 0, 1), menu, s) == (1, 2, 1)


# ---------------------------------------------------------------------------
# audit
# ---------------------------------------------------------------------------

def test_audit_clean_on_profit_optimum(two_vot_solution):
    tv, policy, menu = two_vot_solution
    assert audit(menu, policy.lam, tv).is_empty()


def test_audit_flags_rent_overcharge(two_vot_solution):
    tv, policy, menu = two_vot_solution
    raised = menu.prices.copy()
    raised[0, 1, 0] = 101.0
    report = audit(ProfitMenu(prices=raised, waits=menu.waits), policy.lam, tv)
    assert len(report.ic_vertical) == 1
    entry = report.ic_vertical[0]
    assert entry.indices == ((2, 1, 1), (1, 1, 1))
    assert entry.violation == pytest.approx(1.0)


def test_audit_flags_wait_inversion(two_vot_solution):
    tv, policy, menu = two_vot_solution
    slow = menu.waits.copy()
    slow[0, 1, 0] = 0.5
    report = audit(ProfitMenu(prices=menu.prices, waits=slow), policy.lam, tv)
    assert report.wait_monotonicity


def test_audit_invariant_to_joint_price_reward_shift(two_vot_solution):
    tv, policy, menu = two_vot_solution
    shift = 7.0
    richer = replace(tv, reward=tv.reward + shift)
    moved = ProfitMenu(prices=menu.prices + shift, waits=menu.waits)
    assert audit(moved, policy.lam, richer).is_empty()

    raised = menu.prices.copy()
    raised[0, 1, 0] = 101.0
    before = audit(ProfitMenu(prices=raised, waits=menu.waits), policy.lam, tv)
    after = audit(ProfitMenu(prices=raised + shift, waits=menu.waits),
                  policy.lam, richer)
    assert [e.violation for e in after.entries()] == pytest.approx(
        [e.violation for e in before.entries()])


def test_audit_flags_withheld_high_vot_row(two_vot_solution):
    tv, policy, menu = two_vot_solution
    lam = policy.lam.copy()
    lam[0, 1, 0] = 0.0
    # Serving the patient type while turning the impatient rich away fails
    # twice: the rejected type envies the offered option, and the served
    # region no longer has the high-VoT-first border shape.
    report = audit(menu, lam, tv)
    assert report.ir
    assert [e.check for e in report.border_structure] == ["border_vot"]
    assert report.border_structure[0].indices == ((1, 1, 1), (2, 1, 1))


def test_audit_ignores_inactive_rows():
    quiet = scenario_from_dict({
        "types": {"v": [20.0, 40.0], "e": [10.0], "R": [[100.0, 220.0]],
                  "Lambda": [[[3.0], [0.0]]]},
        "preferences": [[1, 2]],
        "stations": {"d": [0.1, 0.2], "theta": [0.2, 0.1], "C": [30.0, 1e6]},
    })
    policy, menu = solve_profit(quiet)
    absurd = menu.prices.copy()
    absurd[0, 1, 0] = -1e6
    # Nobody with that VoT ever arrives: the row's price is dead text.
    report = audit(ProfitMenu(prices=absurd, waits=menu.waits), policy.lam, quiet)
    assert report.is_empty()


def test_audit_shape_guard(two_vot_solution):
    tv, policy, menu = two_vot_solution
    with pytest.raises(ValueError):
        audit(menu, policy.lam[:, :1, :], tv)


@pytest.mark.parametrize("seed", [0, 6, 12, 18])
def test_locally_constructed_prices_pass_the_full_audit(seed):
    # profit_prices only enforces adjacent (local) incentive constraints;
    # the audit replays every pairwise deviation.  On chain-feasible waits
    # the two agree: local incentive compatibility implies the full set.
    rng = np.random.default_rng(seed)
    s = sc.two_vot_example()
    w_high = rng.uniform(0.01, 0.2)
    waits = np.array([[[w_high + rng.uniform(0.0, 0.3)], [w_high]]])
    menu = profit_prices(waits, s)
    lam = s.arrivals.copy()
    assert audit(menu, lam, s).is_empty()


def test_report_to_dict_groups():
    report = AuditReport()
    d = report.to_dict()
    assert list(d) == [
        "ic_vertical", "ic_horizontal", "ic_preference", "local_ic",
        "ir", "wait_monotonicity", "border_structure",
    ]
    assert all(v == [] for v in d.values())


# ---------------------------------------------------------------------------
# brute-force welfare
# ---------------------------------------------------------------------------

def test_brute_force_matches_worked_example():
    s = sc.running_example()
    result = brute_force_social(s, 1000)
    assert result.welfare == pytest.approx(478.0)
    assert result.tolerance == pytest.approx(0.96)
    assert result.lipschitz == pytest.approx(result.tolerance * 1000)


def test_brute_force_exact_when_capacity_ample():
    s = scenario_from_dict({
        "types": {"v": [20.0], "e": [10.0], "R": [[100.0]], "Lambda": [[[5.0]]]},
        "preferences": [[1, 2]],
        "stations": {"d": [0.1, 0.2], "theta": [0.2, 0.1], "C": [1e9, 1e9]},
    })
    assert brute_force_social(s, 50).welfare == pytest.approx(480.0)


def test_brute_force_zero_arrivals():
    s = scenario_from_dict({
        "types": {"v": [20.0], "e": [10.0], "R": [[100.0]], "Lambda": [[[0.0]]]},
        "preferences": [[1]],
        "stations": {"d": [0.1], "theta": [0.2], "C": [30.0]},
    })
    assert brute_force_social(s, 100).welfare == 0.0


def test_brute_force_guards():
    s = sc.running_example()
    with pytest.raises(ValueError):
        brute_force_social(s, 0)
    soft = replace(s, stations=(replace(s.stations[0], queue_time=0.3),
                                s.stations[1]))
    with pytest.raises(ValueError):
        brute_force_social(soft, 100)
    with pytest.raises(ValueError):
        brute_force_social(sc.line_limited_24slot().slot_scenario(0), 100)
    big = sc.random_instance(0, num_stations=3, num_vot=2, num_energy=2)
    with pytest.raises(ValueError, match="12"):
        brute_force_social(big, 100)


@pytest.mark.parametrize("seed", range(6))
def test_brute_force_agrees_with_unpruned_grid(seed):
    s = sc.random_instance(600 + seed)
    g = 3
    assert brute_force_social(s, g).welfare == pytest.approx(
        oracles.grid_welfare(s, g), abs=1e-9)


@pytest.mark.parametrize("seed", [0, 5, 10, 15, 20])
def test_brute_force_brackets_lp_welfare(seed):
    s = sc.random_instance(700 + seed)
    policy, _ = solve_social(s)
    lp_welfare = evaluate_welfare(policy, s)
    result = brute_force_social(s, 100)
    # The grid optimum can't beat the LP, and the LP can't beat the grid by
    # more than one Lipschitz step.
    assert result.welfare <= lp_welfare + 1e-7 * max(1.0, abs(lp_welfare))
    assert lp_welfare - result.welfare <= result.tolerance + 1e-9
