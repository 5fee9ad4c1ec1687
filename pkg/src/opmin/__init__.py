"""Optimistic planning for switched discrete-time systems with certified bounds."""

__version__ = "0.1.0"

from .bounds import (AssumptionOneData, ComparisonFunction, LinearBoundParams,
                     StabilityCertificate, certificate_report, d_tilde, error_bound_general,
                     error_bound_linear, ges_condition, invert, min_d_bar,
                     relative_performance_bound, running_cost_gap, upsilon)
from .estimator import OPminController
from .oracle import OracleResult, bracket_infinite_value, brute_force_value
from .planner import (PlanResult, budget_for_stability, first_input, min_budget_for_depth,
                      plan, plan_fixed_horizon)
from .sim import (Trajectory, check_practical_stability, closed_loop,
                  fit_exponential_envelope, lyapunov_diagnostic, running_cost,
                  verify_running_cost_bounds)
from .system import SwitchedSystem, cubic_integrator, make_system, rollout, step

__all__ = [
    "AssumptionOneData", "ComparisonFunction", "LinearBoundParams", "OPminController",
    "OracleResult", "PlanResult", "StabilityCertificate", "SwitchedSystem", "Trajectory",
    "bracket_infinite_value", "brute_force_value", "budget_for_stability",
    "certificate_report", "check_practical_stability", "closed_loop", "cubic_integrator",
    "d_tilde", "error_bound_general", "error_bound_linear", "first_input",
    "fit_exponential_envelope", "ges_condition", "invert", "lyapunov_diagnostic",
    "make_system", "min_budget_for_depth", "min_d_bar", "plan", "plan_fixed_horizon",
    "relative_performance_bound", "rollout", "running_cost", "running_cost_gap", "step",
    "upsilon", "verify_running_cost_bounds",
]
