"""Menu-based coordination of EV charging.

A charging network operator posts a menu of (price, routing, wait) options
per customer type; this package solves the social-welfare and profit
variants of that design problem, prices the outcome, audits incentive
compatibility, and benchmarks against uncoordinated self-routing.
"""

from .auditor import (
    AuditEntry,
    AuditReport,
    BruteForceResult,
    audit,
    best_response,
    brute_force_social,
)
from .equilibrium import (
    SelfRoutingAssignment,
    assignment_welfare,
    enumerate_equilibria,
    station_utilities,
    verify_equilibrium,
)
from .lp import LpProblem, LpSolution, solve_lp
from .model import (
    CustomerType,
    DistributionNetwork,
    Policy,
    Scenario,
    ScenarioFormatError,
    Station,
    TravelPreference,
    build_preferences,
    load_scenario,
    scenario_from_dict,
    scenario_to_dict,
    station_loads,
    validate_scenario,
)
from .profit import ProfitMenu, evaluate_profit, profit_prices, solve_profit
from .welfare import (
    SolverError,
    admissible_sets,
    evaluate_welfare,
    fill_order_violations,
    make_virtual_station,
    priority_order_violations,
    social_prices,
    solarize,
    solve_social,
    station_order,
)

__version__ = "0.1.0"

__all__ = [
    "AuditEntry",
    "AuditReport",
    "BruteForceResult",
    "CustomerType",
    "DistributionNetwork",
    "LpProblem",
    "LpSolution",
    "Policy",
    "ProfitMenu",
    "Scenario",
    "ScenarioFormatError",
    "SelfRoutingAssignment",
    "SolverError",
    "Station",
    "TravelPreference",
    "assignment_welfare",
    "audit",
    "best_response",
    "brute_force_social",
    "build_preferences",
    "enumerate_equilibria",
    "evaluate_profit",
    "evaluate_welfare",
    "fill_order_violations",
    "load_scenario",
    "make_virtual_station",
    "priority_order_violations",
    "profit_prices",
    "admissible_sets",
    "scenario_from_dict",
    "scenario_to_dict",
    "social_prices",
    "solarize",
    "solve_lp",
    "solve_profit",
    "solve_social",
    "station_loads",
    "station_order",
    "station_utilities",
    "validate_scenario",
    "verify_equilibrium",
    "__version__",
]
