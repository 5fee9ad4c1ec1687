"""Receding-horizon closed loop and trajectory-level certificate checks."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import (AssumptionOneData, LinearBoundParams, StabilityCertificate,
                     running_cost_gap, upsilon)
from .errors import ConfigError, FitError, OPminError, PreconditionError
from .oracle import brute_force_value
from .planner import check_budget, check_gamma, first_input, plan
from .system import SwitchedSystem


@dataclass
class Trajectory:
    """Closed-loop record over ``T`` steps.

    ``states`` and ``sigmas`` have ``T + 1`` entries; the per-step lists
    (``modes``, ``stage_costs``, ``horizons``, ``plan_values``, ``sequences``)
    have ``T``.
    """

    states: np.ndarray
    modes: list
    stage_costs: list
    sigmas: list
    horizons: list
    plan_values: list
    sequences: list
    gamma: float
    budget: int
    system_name: str = ""

    @property
    def steps(self):
        return len(self.modes)

    def partial_running_costs(self):
        out, total = [], 0.0
        for k, c in enumerate(self.stage_costs):
            total = total + self.gamma ** k * c
            out.append(total)
        return out


def closed_loop(system: SwitchedSystem, x0, gamma: float, budget: int, steps: int) -> Trajectory:
    """Plan at every state and apply the first planned mode, ``steps`` times."""
    gamma = check_gamma(gamma)
    budget = check_budget(budget)
    if int(steps) != steps or steps < 1:
        raise PreconditionError(f"steps must be an integer >= 1, got {steps!r}")
    state = system.as_state(x0)
    states = [state]
    sigmas = [system.measure_fn(state)]
    modes, costs, horizons, values, seqs = [], [], [], [], []
    for k in range(int(steps)):
        try:
            result = plan(system, state, gamma, budget)
            u = first_input(result)
            state, stage = system.advance(u, state, step=k)
        except OPminError as exc:
            exc.args = (f"closed-loop step {k}: {exc}",) + exc.args[1:]
            exc.step = k
            raise
        modes.append(u)
        costs.append(stage)
        horizons.append(result.horizon)
        values.append(result.value)
        seqs.append(result.sequence)
        states.append(state)
        sigmas.append(system.measure_fn(state))
    return Trajectory(np.array(states, dtype=float), modes, costs, sigmas, horizons, values,
                      seqs, gamma, budget, system.name)


def running_cost(traj: Trajectory) -> float:
    """Discounted sum of the applied stage costs over the simulated steps."""
    total = 0.0
    for k, c in enumerate(traj.stage_costs):
        total = total + traj.gamma ** k * c
    return total


TRAJECTORY_COLUMNS = ("k", "mode", "stage_cost", "sigma", "horizon", "plan_value",
                      "partial_running_cost")


def write_trajectory_csv(traj: Trajectory, path, header_lines=()):
    """One row per step; the final state gets a row with empty per-step fields."""
    n = traj.states.shape[1]
    cols = ["k"] + [f"x{i + 1}" for i in range(n)] + list(TRAJECTORY_COLUMNS[1:])
    partial = traj.partial_running_costs()
    g = lambda v: format(v, ".17g")
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(cols)
        for k in range(traj.steps + 1):
            row = [k] + [g(v) for v in traj.states[k]]
            if k < traj.steps:
                row += [traj.modes[k], g(traj.stage_costs[k]), g(traj.sigmas[k]),
                        traj.horizons[k], g(traj.plan_values[k]), g(partial[k])]
            else:
                row += ["", "", g(traj.sigmas[k]), "", "", ""]
            writer.writerow(row)


@dataclass(frozen=True)
class ExponentialFit:
    """Envelope ``sigma_k <= K * sigma_0 * exp(-lambda * k)`` over a window."""

    K: float
    lambda_: float
    residual: float
    start: int
    stop: int

    def envelope(self, sigma0, k):
        return self.K * sigma0 * math.exp(-self.lambda_ * k)


def _sigma_values(source):
    if isinstance(source, Trajectory):
        return list(source.sigmas)
    return [float(v) for v in source]


def fit_exponential_envelope(source, window=None) -> ExponentialFit:
    """Smallest dominating exponential envelope of ``sigma`` along a trajectory.

    Among all ``(K, lambda)`` whose envelope lies above every point of the
    window, picks the one with the smallest log-envelope summed over the window.
    That optimum is the edge of the upper concave hull of ``(k, ln sigma_k)``
    straddling the mean index. The window ends at the first zero of ``sigma``.

    Parameters
    ----------
    source : Trajectory or sequence of float
    window : tuple (start, stop), optional
        Index range, ``stop`` exclusive. Defaults to the whole trajectory.
    """
    sigmas = _sigma_values(source)
    start, stop = (0, len(sigmas)) if window is None else window
    values = sigmas[start:stop]
    if not values:
        raise FitError("empty fitting window")
    if not values[0] > 0:
        raise FitError("sigma at the start of the window is zero; the fit is undefined")
    for i, v in enumerate(values):
        if not v > 0:
            values = values[:i]
            break
    if len(values) < 2:
        raise FitError("fewer than two positive sigma values in the window")
    log0 = math.log(values[0])
    pts = [(k, math.log(v) - log0) for k, v in enumerate(values)]
    hull = []
    for p in pts:
        while len(hull) >= 2:
            (k1, y1), (k2, y2) = hull[-2], hull[-1]
            # drop the middle point unless it lies strictly above the chord
            if (y2 - y1) * (p[0] - k1) <= (p[1] - y1) * (k2 - k1):
                hull.pop()
            else:
                break
        hull.append(p)
    mean_k = (len(pts) - 1) / 2.0
    for (k1, y1), (k2, y2) in zip(hull, hull[1:]):
        if k1 < mean_k <= k2:
            slope = (y2 - y1) / (k2 - k1)
            break
    else:
        (k1, y1), (k2, y2) = hull[0], hull[1]
        slope = (y2 - y1) / (k2 - k1)
    lam = -slope
    if not lam > 0:
        raise FitError(f"sigma does not decay over the window (best rate {lam!r} <= 0)")
    # K is recomputed from the data so domination holds in floating point too
    K = max(math.exp(y + lam * k) for k, y in pts) * (1.0 + 1e-12)
    residual = max(y - (math.log(K) - lam * k) for k, y in pts)
    return ExponentialFit(K, lam, residual, start, start + len(values))


@dataclass(frozen=True)
class PracticalStabilityReport:
    delta: float
    Delta: float
    entered: bool
    entry_time: "int | None"
    remains: bool
    peak_sigma: float

    @property
    def conclusive(self):
        return self.entered and self.remains


def check_practical_stability(traj: Trajectory, delta: float, Delta: float):
    """Entry into and invariance of ``{sigma <= delta}`` within the simulated horizon."""
    if not (delta > 0 and Delta > 0):
        raise PreconditionError("delta and Delta must be positive")
    sigmas = traj.sigmas
    if sigmas[0] > Delta:
        raise PreconditionError(f"sigma(x0) = {sigmas[0]!r} exceeds Delta = {Delta!r}")
    entry = next((k for k, s in enumerate(sigmas) if s <= delta), None)
    remains = entry is not None and all(s <= delta for s in sigmas[entry:])
    return PracticalStabilityReport(delta, Delta, entry is not None, entry, remains,
                                    max(sigmas))


@dataclass(frozen=True)
class LyapunovViolation:
    step: int
    check: str
    lhs: float
    rhs: float


@dataclass(frozen=True)
class LyapunovReport:
    d_bar: int
    values: tuple
    violations: tuple

    @property
    def ok(self):
        return not self.violations


def lyapunov_diagnostic(traj: Trajectory, data: AssumptionOneData, d_bar: int, tol=1e-8):
    """Check sandwich bounds and one-step decrease of ``Y = V_{d(x)} + W`` along ``traj``.

    At every step ``alpha_Y(sigma) <= Y <= bar_alpha_Y(sigma)``, and
    ``Y_{k+1} - Y_k <= (-alpha_Y(sigma_k) + Upsilon(Y_k, gamma, d_bar)) / gamma``,
    each up to ``tol * max(1, Y_k)``.
    """
    if data.W is None:
        raise ConfigError("the Lyapunov diagnostic needs the storage function W")
    if any(h < d_bar for h in traj.horizons):
        raise PreconditionError(f"some planning horizon is below d_bar = {d_bar}")
    gamma = traj.gamma
    Y = [v + data.W(traj.states[k]) for k, v in enumerate(traj.plan_values)]
    violations = []
    lower, upper = data.alpha_Y, data.bar_alpha_Y
    for k, y in enumerate(Y):
        s = traj.sigmas[k]
        slack = tol * max(1.0, y)
        if lower(s) > y + slack:
            violations.append(LyapunovViolation(k, "lower", lower(s), y))
        if y > upper(s) + slack:
            violations.append(LyapunovViolation(k, "upper", y, upper(s)))
        if k + 1 < len(Y):
            rhs = (-lower(s) + upsilon(y, gamma, d_bar, data)) / gamma
            if Y[k + 1] - y > rhs + slack:
                violations.append(LyapunovViolation(k, "decrease", Y[k + 1] - y, rhs))
    return LyapunovReport(d_bar, tuple(Y), tuple(violations))


@dataclass(frozen=True)
class RunningCostReport:
    lower: float
    running_cost: float
    upper: float
    gap_coefficient: float
    tail_allowance: float
    certified: bool

    @property
    def lower_holds(self):
        return self.lower <= self.running_cost

    @property
    def upper_holds(self):
        return self.running_cost <= self.upper

    @property
    def holds(self):
        return self.lower_holds and self.upper_holds

    @property
    def slack(self):
        """Realized excess of the running cost over the first planned value."""
        return self.running_cost - self.lower


def fitted_certificate(traj: Trajectory, params: LinearBoundParams, window=None):
    """Stability tuple from the trajectory: fitted ``(K, lambda)``, ``d_bar`` one below the shallowest horizon."""
    fit = fit_exponential_envelope(traj, window)
    gamma_star = params.gamma_bar if 0.0 < params.gamma_bar < traj.gamma else traj.gamma / 2
    d_bar = max(min(traj.horizons) - 1, 0)
    return StabilityCertificate(gamma_star, d_bar, fit.K, fit.lambda_, "fitted")


def verify_running_cost_bounds(traj: Trajectory, params: LinearBoundParams,
                               cert: StabilityCertificate, d_bar: int) -> RunningCostReport:
    """Check ``V_{d(x0)}(x0) <= running cost <= V_{d(x0)}(x0) + w * sigma(x0)``.

    The running cost is truncated at ``T`` steps; the discarded tail is at most
    what ``tail_allowance`` reports when stage costs keep their observed peak.
    """
    w = running_cost_gap(params, cert, traj.gamma, d_bar)
    lower = traj.plan_values[0]
    rc = running_cost(traj)
    tail = traj.gamma ** traj.steps * max(traj.stage_costs)
    return RunningCostReport(lower, rc, lower + w * traj.sigmas[0], w, tail,
                             cert.is_certified(params))


def bellman_residuals(system: SwitchedSystem, traj: Trajectory, max_horizon=6):
    """``l_k - (V_{d_k}(x_k) - gamma V_{d_k - 1}(x_{k+1}))`` by brute force.

    Steps whose horizon exceeds ``max_horizon`` are skipped.
    """
    out = []
    for k in range(traj.steps):
        d = traj.horizons[k]
        if d > max_horizon:
            continue
        tail = 0.0 if d == 0 else brute_force_value(system, traj.states[k + 1], d - 1,
                                                    traj.gamma).value
        out.append((k, traj.stage_costs[k] - (traj.plan_values[k] - traj.gamma * tail)))
    return out
