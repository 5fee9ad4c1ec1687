"""Brute-force reference solutions for small instances."""

from __future__ import annotations

from dataclasses import dataclass

from .bounds import AssumptionOneData, LinearBoundParams, error_bound_general, error_bound_linear
from .errors import PreconditionError, ResourceLimitError
from .planner import check_gamma, plan_fixed_horizon
from .system import SwitchedSystem

DEFAULT_CAP = 10 ** 7


@dataclass(frozen=True)
class OracleResult:
    value: float
    optimal_sequences: list
    first_input_set: frozenset
    enumerated: int


def brute_force_value(system: SwitchedSystem, x, d: int, gamma: float,
                      cap: int = DEFAULT_CAP) -> OracleResult:
    """Enumerate all ``M**(d+1)`` sequences of length ``d + 1``.

    Enumeration is depth-first with an incremental cost accumulator, visiting
    modes in increasing order, so the minimizers come out lexicographically
    sorted. Costs accumulate in the same order as the planner.
    """
    gamma = check_gamma(gamma)
    if int(d) != d or d < 0:
        raise PreconditionError(f"horizon must be a nonnegative integer, got {d!r}")
    M = system.mode_count
    total = M ** (d + 1)
    if total > cap:
        raise ResourceLimitError(f"enumeration of M**(d+1) = {total} sequences exceeds cap {cap}")
    weights = [gamma ** k for k in range(d + 1)]
    best = [float("inf")]
    argmins = []
    count = [0]
    prefix = []

    def visit(state, depth, cost):
        w = weights[depth]
        for u in range(1, M + 1):
            nxt, stage = system.advance(u, state, step=depth)
            c = cost + w * stage
            prefix.append(u)
            if depth == d:
                count[0] += 1
                if c < best[0]:
                    best[0] = c
                    argmins.clear()
                    argmins.append(tuple(prefix))
                elif c == best[0]:
                    argmins.append(tuple(prefix))
            else:
                visit(nxt, depth + 1, c)
            prefix.pop()

    visit(system.as_state(x), 0, 0.0)
    assert count[0] == total, (count[0], total)
    return OracleResult(best[0], argmins, frozenset(s[0] for s in argmins), count[0])


def horizon_value(system: SwitchedSystem, x, d: int, gamma: float) -> float:
    """Exact ``V_{gamma,d}(x)``, via optimistic search to depth ``d + 1``."""
    return plan_fixed_horizon(system, x, gamma, d).value


def bracket_infinite_value(system: SwitchedSystem, x, gamma: float, D: int, bound_params):
    """Interval ``(V_D(x), V_D(x) + error bound)`` containing ``V_inf(x)``.

    ``bound_params`` is either :class:`LinearBoundParams` (gamma-uniform bound)
    or :class:`AssumptionOneData` (general composition bound).
    """
    lower = horizon_value(system, x, D, gamma)
    sigma_x = system.measure(x)
    if isinstance(bound_params, LinearBoundParams):
        width = error_bound_linear(sigma_x, bound_params, D)
    elif isinstance(bound_params, AssumptionOneData):
        width = error_bound_general(sigma_x, gamma, D, bound_params)
    else:
        raise TypeError(f"unsupported bound parameters {type(bound_params).__name__}")
    return lower, lower + width


@dataclass(frozen=True)
class OracleCheckRow:
    instance: int
    system_seed: int
    M: int
    n: int
    gamma: float
    budget: int
    horizon: int
    plan_value: float
    oracle_value: float
    rel_error: float
    first_input_ok: bool
    passed: bool


def random_instance(rng, max_horizon=6):
    """Draw ``(system, x, gamma, budget)`` with the reached horizon kept brute-forceable."""
    from .planner import min_budget_for_depth, plan
    from .system import random_affine

    M = int(rng.choice([2, 3]))
    n = int(rng.integers(1, 4))
    gamma = float(rng.choice([0.8, 0.95, 1.0]))
    seed = int(rng.integers(2 ** 31))
    system = random_affine(seed=seed, n=n, M=M)
    x = rng.normal(0.0, 1.0, size=n)
    budget = int(rng.integers(min_budget_for_depth(2, M), min_budget_for_depth(3, M) + 1))
    result = plan(system, x, gamma, budget)
    while result.horizon > max_horizon and budget > 1:
        budget //= 2
        result = plan(system, x, gamma, budget)
    return system, x, gamma, budget, result


def run_oracle_check(seed: int, instances: int, rel_tol=1e-9, max_horizon=6):
    """Compare planner and brute force on ``instances`` seeded random problems."""
    import numpy as np

    rows = []
    for i in range(instances):
        rng = np.random.default_rng([seed, i])
        system, x, gamma, budget, result = random_instance(rng, max_horizon)
        oracle = brute_force_value(system, x, result.horizon, gamma)
        err = abs(result.value - oracle.value) / max(abs(oracle.value), 1e-300)
        ok_first = result.sequence[0] in oracle.first_input_set
        rows.append(OracleCheckRow(i, system.metadata["seed"], system.mode_count,
                                   system.state_dim, gamma, budget, result.horizon,
                                   result.value, oracle.value, err, ok_first,
                                   err <= rel_tol and ok_first))
    return rows
