"""Simplex kernel: pinned solutions, statuses, duals, and the random
battery that backs the duality/slackness guarantees."""

import numpy as np
import pytest

from chargemenu.lp import LpProblem, solve_lp

from oracles import random_lp, vertex_optimum


def test_single_variable_cap():
    sol = solve_lp(LpProblem(c=np.array([1.0]), a=np.array([[1.0]]),
                             b=np.array([1.0])))
    assert sol.status == "optimal"
    assert sol.x == pytest.approx([1.0])
    assert sol.objective == pytest.approx(1.0)
    assert sol.duals_ineq == pytest.approx([1.0])


def test_capacity_plus_conservation():
    # maximize 96a + 95b  s.t.  10a <= 30,  a + b = 5
    sol = solve_lp(LpProblem(
        c=np.array([96.0, 95.0]),
        a=np.array([[10.0, 0.0]]), b=np.array([30.0]),
        a_eq=np.array([[1.0, 1.0]]), b_eq=np.array([5.0]),
    ))
    assert sol.status == "optimal"
    assert sol.x == pytest.approx([3.0, 2.0])
    assert sol.objective == pytest.approx(478.0)
    assert sol.duals_ineq == pytest.approx([0.1])
    # 96 = 10 * 0.1 + y_eq
    assert sol.duals_eq == pytest.approx([95.0])


def test_infeasible():
    sol = solve_lp(LpProblem(c=np.array([1.0]), a=np.array([[1.0]]),
                             b=np.array([1.0]), lo=np.array([2.0])))
    assert sol.status == "infeasible"
    assert sol.x is None


def test_unbounded():
    sol = solve_lp(LpProblem(c=np.array([1.0, 0.0])))
    assert sol.status == "unbounded"


def test_variable_bounds():
    sol = solve_lp(LpProblem(c=np.array([2.0, -1.0]),
                             lo=np.array([0.0, 0.5]),
                             hi=np.array([3.0, np.inf])))
    assert sol.status == "optimal"
    assert sol.x == pytest.approx([3.0, 0.5])
    assert sol.objective == pytest.approx(5.5)


def test_beale_cycling_instance():
    # The classic degenerate tableau that cycles under naive pivoting.
    sol = solve_lp(LpProblem(
        c=np.array([0.75, -150.0, 0.02, -6.0]),
        a=np.array([
            [0.25, -60.0, -1.0 / 25.0, 9.0],
            [0.5, -90.0, -1.0 / 50.0, 3.0],
            [0.0, 0.0, 1.0, 0.0],
        ]),
        b=np.array([0.0, 0.0, 1.0]),
    ))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(0.05)
    assert sol.x == pytest.approx([1.0 / 25.0, 0.0, 1.0, 0.0])


def test_badly_scaled_rows():
    sol = solve_lp(LpProblem(
        c=np.array([1.0, 1.0]),
        a=np.array([[1e6, 0.0], [0.0, 1e-6]]),
        b=np.array([2e6, 3e-6]),
    ))
    assert sol.status == "optimal"
    assert sol.x == pytest.approx([2.0, 3.0], rel=1e-9)


def test_determinism_bitwise():
    p = random_lp(77)
    a = solve_lp(p)
    b = solve_lp(p)
    assert a.x.tobytes() == b.x.tobytes()
    assert a.duals_ineq.tobytes() == b.duals_ineq.tobytes()


def _check_optimal(problem, sol):
    a = np.asarray(problem.a, dtype=float)
    b = np.asarray(problem.b, dtype=float)
    c = np.asarray(problem.c, dtype=float)
    slack = b - a @ sol.x
    assert np.all(slack >= -1e-9 * np.maximum(1.0, np.abs(b)))
    assert np.all(sol.x >= -1e-9)
    gap = abs(sol.objective - float(b @ sol.duals_ineq))
    assert gap <= 1e-8 * max(1.0, abs(sol.objective))
    assert np.all(np.abs(sol.duals_ineq * slack) <= 1e-8 * np.maximum(1.0, np.abs(b)))
    # dual feasibility: reduced costs nonpositive at a maximum
    red = c - a.T @ sol.duals_ineq
    assert np.all(red <= 1e-8)


def test_random_battery_small():
    for seed in range(150):
        p = random_lp(seed)
        sol = solve_lp(p)
        assert sol.status == "optimal", seed
        _check_optimal(p, sol)


def test_agrees_with_vertex_enumeration():
    for seed in range(60):
        p = random_lp(seed, tiny=True)
        sol = solve_lp(p)
        ref, _ = vertex_optimum(p)
        assert sol.objective == pytest.approx(ref, abs=1e-9)
