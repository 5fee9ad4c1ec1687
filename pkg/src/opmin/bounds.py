"""Comparison functions and closed-form near-optimality and stability bounds.

All bounds are stated in terms of three functions on ``[0, inf)``: a lower
detectability gain ``alpha_W``, a stabilizability gain ``bar_alpha_V`` and an
upper storage gain ``bar_alpha_W``. With ``alpha_Y = alpha_W`` and
``bar_alpha_Y = bar_alpha_V + bar_alpha_W``, the finite-horizon error after
``d`` steps is

    gamma**d * bar_alpha_V(alpha_Y^-1(G^d(bar_alpha_Y(sigma))))

where ``G(s) = (s - alpha_Y(bar_alpha_Y^-1(s))) / gamma``. For linear gains
``a_W s``, ``bar_a_V s`` and ``bar_a_W s`` everything reduces to geometric
factors in ``rate = 1 - a_W / (bar_a_V + bar_a_W)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (DivergenceError, FeasibilityError, InversionRangeError,
                     PreconditionError, ValidationError)
from .planner import budget_for_stability

K_INFINITY = "K_infinity"
NONDECREASING = "nondecreasing_zero_at_zero"

INVERT_ABS_TOL = 1e-12
INVERT_REL_TOL = 1e-10
BRACKET_DOUBLINGS = 60
NEGATIVE_CLAMP = 1e-15
OVERFLOW_GUARD = 1e300


@dataclass(frozen=True)
class ComparisonFunction:
    """A map ``[0, inf) -> [0, inf)`` that is zero at zero and nondecreasing.

    ``kind`` is ``"K_infinity"`` (strictly increasing, unbounded) or
    ``"nondecreasing_zero_at_zero"``. ``slope`` is set for exact linear
    functions, which then invert in closed form.
    """

    fn: Callable[[float], float]
    kind: str = K_INFINITY
    domain_hint: float = 1.0
    slope: Optional[float] = None

    def __call__(self, s):
        return self.fn(s)

    @classmethod
    def linear(cls, c, kind=None):
        c = float(c)
        if c < 0:
            raise ValidationError(f"linear comparison slope must be >= 0, got {c}")
        if kind is None:
            kind = K_INFINITY if c > 0 else NONDECREASING
        return cls(lambda s: c * s, kind, 1.0, c)

    @classmethod
    def identity(cls):
        return cls.linear(1.0)

    def __add__(self, other: "ComparisonFunction"):
        if self.slope is not None and other.slope is not None:
            return ComparisonFunction.linear(self.slope + other.slope)
        f, g = self.fn, other.fn
        kind = K_INFINITY if K_INFINITY in (self.kind, other.kind) else NONDECREASING
        return ComparisonFunction(lambda s: f(s) + g(s), kind,
                                  max(self.domain_hint, other.domain_hint))

    def validate(self, grid=None, doublings=BRACKET_DOUBLINGS, growth=10.0):
        """Sampled check of the class properties; raises :class:`ValidationError`."""
        if self.kind not in (K_INFINITY, NONDECREASING):
            raise ValidationError(f"unknown comparison-function kind {self.kind!r}")
        if self(0.0) != 0.0:
            raise ValidationError(f"comparison function is {self(0.0)!r} at zero")
        if grid is None:
            grid = np.concatenate(([0.0], np.geomspace(1e-6, 1e6, 241)))
        values = [self(float(s)) for s in grid]
        strict = self.kind == K_INFINITY
        for s, t, fs, ft in zip(grid, grid[1:], values, values[1:]):
            if ft < fs or (strict and ft <= fs):
                raise ValidationError(
                    f"comparison function not {'strictly ' if strict else ''}"
                    f"increasing between {s} and {t}")
        if strict:
            s = self.domain_hint
            base = self(s)
            for _ in range(doublings):
                s *= 2.0
            if not self(s) >= growth * base:
                raise ValidationError(
                    f"K_infinity function looks bounded: f({s:g}) = {self(s)!r}")
        return self


def invert(f: ComparisonFunction, y: float) -> float:
    """Return ``s`` with ``f(s) = y`` up to ``max(1e-12, 1e-10 * y)``."""
    if f.kind != K_INFINITY:
        raise PreconditionError("only K_infinity functions are invertible")
    if y < 0:
        raise PreconditionError(f"cannot invert a negative value {y!r}")
    if f.slope is not None:
        return y / f.slope
    if y == 0:
        return 0.0
    tol = max(INVERT_ABS_TOL, INVERT_REL_TOL * y)
    lo, hi = 0.0, float(f.domain_hint)
    for _ in range(BRACKET_DOUBLINGS):
        if f(hi) >= y:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise InversionRangeError(
            f"no bracket for inverse at y={y!r} within {BRACKET_DOUBLINGS} doublings")
    mid = hi
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(fm - y) <= tol or mid in (lo, hi):
            return mid
        if fm < y:
            lo = mid
        else:
            hi = mid
    return mid


@dataclass(frozen=True)
class LinearBoundParams:
    """Linear certificate gains ``alpha_W >= a_W s``, ``bar_alpha_V <= bar_a_V s``, ``bar_alpha_W <= bar_a_W s``."""

    a_W: float
    bar_a_V: float
    bar_a_W: float = 0.0

    def __post_init__(self):
        if not self.a_W > 0:
            raise ValidationError(f"a_W must be > 0, got {self.a_W!r}")
        if not self.bar_a_V > 0:
            raise ValidationError(f"bar_a_V must be > 0, got {self.bar_a_V!r}")
        if not self.bar_a_W >= 0:
            raise ValidationError(f"bar_a_W must be >= 0, got {self.bar_a_W!r}")
        if self.a_W > self.total:
            raise ValidationError(
                f"a_W = {self.a_W} exceeds bar_a_V + bar_a_W = {self.total}")

    @property
    def total(self):
        return self.bar_a_V + self.bar_a_W

    @property
    def rate(self):
        """Geometric decay factor ``1 - a_W / (bar_a_V + bar_a_W)`` in ``[0, 1)``."""
        return 1.0 - self.a_W / self.total

    @property
    def coefficient(self):
        return self.bar_a_V * self.total / self.a_W

    @property
    def gamma_bar(self):
        """Discount threshold below which no horizon satisfies the stability condition."""
        return self.rate


@dataclass(frozen=True)
class AssumptionOneData:
    """Detectability and stabilizability gains, plus an optional storage function ``W``."""

    alpha_W: ComparisonFunction
    bar_alpha_V: ComparisonFunction
    bar_alpha_W: ComparisonFunction
    W: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.alpha_W.kind != K_INFINITY or self.bar_alpha_V.kind != K_INFINITY:
            raise ValidationError("alpha_W and bar_alpha_V must be K_infinity functions")

    @classmethod
    def from_linear(cls, params: LinearBoundParams, W=None):
        return cls(ComparisonFunction.linear(params.a_W),
                   ComparisonFunction.linear(params.bar_a_V),
                   ComparisonFunction.linear(params.bar_a_W), W)

    @property
    def alpha_Y(self):
        return self.alpha_W

    @property
    def bar_alpha_Y(self):
        return self.bar_alpha_V + self.bar_alpha_W

    def validate(self, grid=None):
        for f in (self.alpha_W, self.bar_alpha_V, self.bar_alpha_W):
            f.validate()
        if grid is None:
            grid = np.geomspace(1e-6, 1e6, 121)
        upper = self.bar_alpha_Y
        for s in grid:
            if self.alpha_Y(float(s)) > upper(float(s)):
                raise ValidationError(f"alpha_Y exceeds bar_alpha_Y at s={s:g}")
        return self


@dataclass(frozen=True)
class StabilityCertificate:
    """Exponential-stability tuple ``(gamma_star, d_bar, K, lambda)``.

    Fitted certificates come from closed-loop data and need not satisfy the
    sufficient condition :func:`ges_condition`; see :meth:`is_certified`.
    """

    gamma_star: float
    d_bar: int
    K: float
    lambda_: float
    provenance: str = "user_supplied"

    def __post_init__(self):
        if not 0.0 < self.gamma_star < 1.0:
            raise ValidationError(f"gamma_star must lie in (0, 1), got {self.gamma_star!r}")
        if int(self.d_bar) != self.d_bar or self.d_bar < 0:
            raise ValidationError(f"d_bar must be a nonnegative integer, got {self.d_bar!r}")
        if not self.K > 0 or not self.lambda_ > 0:
            raise ValidationError(f"K and lambda must be > 0, got {self.K!r}, {self.lambda_!r}")
        if self.provenance not in ("user_supplied", "fitted"):
            raise ValidationError(f"unknown provenance {self.provenance!r}")

    def is_certified(self, params: LinearBoundParams):
        return ges_condition(self.gamma_star, self.d_bar, params)


def _contract(s, gamma, d, data: AssumptionOneData):
    """Apply ``G(s) = (s - alpha_Y(bar_alpha_Y^-1(s))) / gamma`` ``d`` times."""
    upper = data.bar_alpha_Y
    lower = data.alpha_Y
    for k in range(d):
        # bisection inverses are only accurate to the inversion tolerance
        slack = NEGATIVE_CLAMP if upper.slope is not None else max(
            NEGATIVE_CLAMP, INVERT_ABS_TOL + 10 * INVERT_REL_TOL * s)
        s = (s - lower(invert(upper, s))) / gamma
        if s < 0:
            if s < -slack / gamma:
                raise ValidationError(
                    f"iterate became negative ({s!r}) at step {k}: alpha_Y exceeds bar_alpha_Y")
            s = 0.0
        if not math.isfinite(s) or s > OVERFLOW_GUARD:
            raise DivergenceError(f"bound iterate diverged at step {k + 1}")
    return s


def _check_horizon(d, minimum=1):
    if int(d) != d or d < minimum:
        raise PreconditionError(f"horizon must be an integer >= {minimum}, got {d!r}")
    return int(d)


def error_bound_general(sigma_x: float, gamma: float, d: int, data: AssumptionOneData) -> float:
    """Gap between infinite- and horizon-``d`` optimal values for general gains."""
    d = _check_horizon(d)
    if not 0.0 < gamma <= 1.0:
        raise PreconditionError(f"gamma must lie in (0, 1], got {gamma!r}")
    s = _contract(data.bar_alpha_Y(sigma_x), gamma, d, data)
    return gamma ** d * data.bar_alpha_V(invert(data.alpha_Y, s))


def error_bound_linear(sigma_x: float, params: LinearBoundParams, d: int) -> float:
    """Gamma-uniform gap ``coefficient * rate**d * sigma`` for linear gains."""
    d = _check_horizon(d, minimum=0)
    return params.coefficient * params.rate ** d * sigma_x


def ges_sides(gamma_star: float, d_bar: int, params: LinearBoundParams):
    """Left and right sides of the exponential-stability condition."""
    lhs = 1.0 - gamma_star + params.bar_a_V / params.a_W * params.rate ** d_bar
    rhs = params.a_W / params.total
    return lhs, rhs


def ges_condition(gamma_star: float, d_bar: int, params: LinearBoundParams) -> bool:
    """Strict inequality ``1 - gamma* + (bar_a_V/a_W) rate**d_bar < a_W/(bar_a_V + bar_a_W)``."""
    lhs, rhs = ges_sides(gamma_star, d_bar, params)
    return lhs < rhs


def ges_margin(gamma_star: float, d_bar: int, params: LinearBoundParams) -> float:
    """``lhs - rhs``; negative when the condition holds."""
    lhs, rhs = ges_sides(gamma_star, d_bar, params)
    return lhs - rhs


def min_d_bar(gamma_star: float, params: LinearBoundParams, max_d: int = 10 ** 7) -> int:
    """Smallest ``d_bar >= 1`` satisfying :func:`ges_condition`."""
    if not gamma_star > params.gamma_bar:
        raise FeasibilityError(
            f"gamma_star = {gamma_star!r} must exceed 1 - a_W/(bar_a_V + bar_a_W) = "
            f"{params.gamma_bar!r}")
    for d in range(1, max_d + 1):
        if ges_condition(gamma_star, d, params):
            return d
    raise FeasibilityError(f"no d_bar <= {max_d} satisfies the condition at gamma_star={gamma_star}")


def d_tilde(params: LinearBoundParams) -> int:
    """Horizon threshold ``floor(ln(bar_a_V (bar_a_V + bar_a_W) / a_W**2) / -ln(rate))``.

    Any ``d_bar > d_tilde`` admits a feasible ``gamma_star``. Values within
    1e-12 below an integer are snapped up so that rounding never lowers it.
    """
    num = math.log(params.bar_a_V * params.total / params.a_W ** 2)
    den = -math.log(params.rate) if params.rate > 0 else math.inf
    q = num / den
    return math.floor(q + 1e-12 * max(1.0, abs(q)))


def _check_cert_gamma(gamma, cert: StabilityCertificate):
    if not cert.gamma_star < gamma <= 1.0:
        raise PreconditionError(
            f"gamma must lie in (gamma_star, 1] = ({cert.gamma_star}, 1], got {gamma!r}")


def running_cost_gap(params: LinearBoundParams, cert: StabilityCertificate, gamma: float,
                     d_bar: int) -> float:
    """Coefficient ``w`` with ``V_run(x) <= V_inf(x) + w sigma(x)``."""
    _check_cert_gamma(gamma, cert)
    return (params.rate ** d_bar * cert.K * params.bar_a_V * params.total * gamma
            / (params.a_W * (math.exp(cert.lambda_) - gamma)))


def relative_performance_bound(params: LinearBoundParams, cert: StabilityCertificate,
                               gamma: float, d_bar: int) -> float:
    """Bound on ``(V_run - V_inf) / (V_inf + W)``, uniform in the state."""
    return running_cost_gap(params, cert, gamma, d_bar) / params.a_W


def upsilon(s: float, gamma: float, d_bar: int, data: AssumptionOneData) -> float:
    """Decrease margin of the Lyapunov function ``Y = V_{d(x)} + W``.

    ``(1 - gamma) s + gamma**d_bar bar_alpha_V(alpha_Y^-1(G^d_bar(s)))``; it vanishes
    as ``gamma -> 1`` and ``d_bar -> inf``.
    """
    d_bar = _check_horizon(d_bar)
    if not 0.0 < gamma <= 1.0:
        raise PreconditionError(f"gamma must lie in (0, 1], got {gamma!r}")
    tail = _contract(s, gamma, d_bar, data)
    return (1.0 - gamma) * s + gamma ** d_bar * data.bar_alpha_V(invert(data.alpha_Y, tail))


@dataclass(frozen=True)
class BudgetCandidate:
    d_bar: int
    budget: int
    holds: bool
    margin: float


@dataclass(frozen=True)
class CertificateReport:
    params: LinearBoundParams
    gamma_star: float
    mode_count: int
    d_tilde: int
    min_d_bar: Optional[int]
    candidates: tuple

    def render(self):
        p = self.params
        lines = [
            f"linear gains: a_W={p.a_W!r} bar_a_V={p.bar_a_V!r} bar_a_W={p.bar_a_W!r}",
            f"decay rate 1 - a_W/(bar_a_V+bar_a_W) = {p.rate!r}",
            f"error coefficient bar_a_V(bar_a_V+bar_a_W)/a_W = {p.coefficient!r}",
            f"gamma_star = {self.gamma_star!r}, modes M = {self.mode_count}",
            f"d_tilde = {self.d_tilde}",
            f"min d_bar = {self.min_d_bar if self.min_d_bar is not None else 'infeasible'}",
        ]
        for c in self.candidates:
            lines.append(
                f"d_bar = {c.d_bar}: condition {'holds' if c.holds else 'fails'}, "
                f"margin {c.margin:+.6e}, stability budget (M^(d_bar+2)-1)/(M-1) = {c.budget}")
        return "\n".join(lines) + "\n"


def certificate_report(params: LinearBoundParams, gamma_star: float, M: int) -> CertificateReport:
    """Horizon thresholds, minimal stabilizing horizon and the matching budgets.

    Candidates are reported for ``d_tilde`` and for the smallest horizon meeting
    the strict condition, with their margins.
    """
    dt = d_tilde(params)
    try:
        dmin = min_d_bar(gamma_star, params)
    except FeasibilityError:
        dmin = None
    ds = sorted({d for d in (max(dt, 0), dmin) if d is not None})
    candidates = tuple(
        BudgetCandidate(d, budget_for_stability(d, M), ges_condition(gamma_star, d, params),
                        ges_margin(gamma_star, d, params))
        for d in ds)
    return CertificateReport(params, gamma_star, M, dt, dmin, candidates)


def bound_curves(params: LinearBoundParams, gamma_star: float, M: int, ds, sigma_x=1.0):
    """Rows ``(d, error bound, condition margin, condition holds, stability budget)``."""
    return [(d, error_bound_linear(sigma_x, params, d), ges_margin(gamma_star, d, params),
             ges_condition(gamma_star, d, params), budget_for_stability(d, M))
            for d in ds]
