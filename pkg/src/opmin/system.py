"""Switched discrete-time systems ``x_{k+1} = f_{u_k}(x_k)`` with finite mode sets.

States are handled internally as tuples of Python floats: the planner stores one
state per tree node and pure-float arithmetic is several times faster than
small numpy arrays. Public helpers accept any array-like and return numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, NumericalOverflowError, ValidationError

State = tuple
Transition = Callable[[int, State], "tuple[State, float]"]


@dataclass(frozen=True)
class SwitchedSystem:
    """A finite family of maps ``f_u`` with stage costs ``l_u`` and a measure ``sigma``.

    Parameters
    ----------
    name : str
        Identifier used in reports and CSV headers.
    state_dim : int
        Dimension ``n`` of the state.
    mode_count : int
        Number ``M >= 2`` of admissible modes, labelled ``1..M``.
    transition : callable
        ``transition(mode, state) -> (next_state, stage_cost)`` on tuple states.
        The stage cost is evaluated at ``state``, before the transition.
    measure_fn : callable
        ``measure_fn(state) -> float``, nonnegative.
    metadata : dict
        Construction parameters (seed, certificate constants, ...).
    """

    name: str
    state_dim: int
    mode_count: int
    transition: Transition
    measure_fn: Callable[[State], float]
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if int(self.mode_count) != self.mode_count or self.mode_count < 2:
            raise DomainError(f"mode_count must be an integer >= 2, got {self.mode_count!r}")
        if int(self.state_dim) != self.state_dim or self.state_dim < 1:
            raise DomainError(f"state_dim must be a positive integer, got {self.state_dim!r}")

    @classmethod
    def from_callables(cls, dynamics, stage_cost, measure, state_dim, mode_count,
                       name="custom", metadata=None):
        """Build a system from callables acting on 1-D numpy arrays.

        ``dynamics(mode, x)`` returns the successor, ``stage_cost(mode, x)`` a
        nonnegative float and ``measure(x)`` a nonnegative float.
        """

        def transition(mode, state):
            x = np.asarray(state, dtype=float)
            nxt = np.asarray(dynamics(mode, x), dtype=float).reshape(-1)
            return tuple(nxt.tolist()), float(stage_cost(mode, x))

        def measure_fn(state):
            return float(measure(np.asarray(state, dtype=float)))

        return cls(name, int(state_dim), int(mode_count), transition, measure_fn,
                   dict(metadata or {}))

    @property
    def modes(self):
        return range(1, self.mode_count + 1)

    def as_state(self, x) -> State:
        """Convert an array-like to the internal tuple representation."""
        arr = np.asarray(x, dtype=float).reshape(-1)
        if arr.shape[0] != self.state_dim:
            raise DomainError(f"state has dimension {arr.shape[0]}, expected {self.state_dim}")
        return tuple(arr.tolist())

    def check_mode(self, mode):
        if not (isinstance(mode, (int, np.integer)) and 1 <= mode <= self.mode_count):
            raise DomainError(f"mode {mode!r} outside 1..{self.mode_count}")

    def advance(self, mode: int, state: State, step=None):
        """Apply one mode to a tuple state, checking finiteness of the result."""
        nxt, cost = self.transition(mode, state)
        if not (math.isfinite(cost) and all(map(math.isfinite, nxt))):
            raise NumericalOverflowError(
                f"non-finite value after mode {mode} from state {state!r}"
                + ("" if step is None else f" at step {step}"),
                state=nxt, step=step)
        return nxt, cost

    def successors(self, state: State):
        """All ``M`` children of ``state`` as a list of ``(next_state, cost)``."""
        return [self.advance(u, state) for u in range(1, self.mode_count + 1)]

    def dynamics(self, mode, x):
        self.check_mode(mode)
        return np.array(self.transition(mode, self.as_state(x))[0], dtype=float)

    def stage_cost(self, mode, x):
        self.check_mode(mode)
        return float(self.transition(mode, self.as_state(x))[1])

    def measure(self, x):
        return float(self.measure_fn(self.as_state(x)))


def validate_system(system: SwitchedSystem, samples=64, scale=10.0, seed=0):
    """Check ``l_u(x) >= 0`` and ``sigma(x) >= 0`` on randomly sampled states.

    This is a sampled contract, not a proof: dynamics are opaque callables.
    """
    rng = np.random.default_rng(seed)
    points = rng.uniform(-scale, scale, size=(samples, system.state_dim))
    points[0] = 0.0
    for x in points:
        state = tuple(x.tolist())
        s = system.measure_fn(state)
        if not s >= 0:
            raise ValidationError(f"{system.name}: measure is {s!r} < 0 at {state}")
        for u in system.modes:
            _, cost = system.transition(u, state)
            if not cost >= 0:
                raise ValidationError(
                    f"{system.name}: stage cost of mode {u} is {cost!r} < 0 at {state}")
    return system


def validate_sequence(seq: Sequence[int], mode_count: int):
    seq = tuple(int(u) for u in seq)
    for u in seq:
        if not 1 <= u <= mode_count:
            raise DomainError(f"input sequence entry {u} outside 1..{mode_count}")
    return seq


def step(system: SwitchedSystem, mode: int, x) -> np.ndarray:
    """Return ``f_mode(x)``."""
    system.check_mode(mode)
    nxt, _ = system.advance(mode, system.as_state(x))
    return np.array(nxt, dtype=float)


def rollout(system: SwitchedSystem, x0, seq: Sequence[int], gamma: float):
    """Simulate ``seq`` from ``x0`` and return ``(states, cost)``.

    ``states`` holds ``len(seq) + 1`` arrays. The cost is
    ``sum_k gamma**k * l_{u_k}(x_k)`` over every entry of ``seq``, accumulated
    in the same order as the planner so that values agree bit for bit.
    """
    if not 0.0 < gamma <= 1.0:
        raise DomainError(f"gamma must lie in (0, 1], got {gamma!r}")
    seq = validate_sequence(seq, system.mode_count)
    state = system.as_state(x0)
    states = [state]
    cost = 0.0
    for k, u in enumerate(seq):
        state, stage = system.advance(u, state, step=k)
        cost = cost + gamma ** k * stage
        states.append(state)
    return [np.array(s, dtype=float) for s in states], cost


# -- builtin systems ---------------------------------------------------------

CUBIC_K3 = -0.5 + math.sqrt(7.0 / 12.0)


def real_cbrt(v: float) -> float:
    """Sign-preserving real cube root."""
    return math.copysign(abs(v) ** (1.0 / 3.0), v)


def _cubic_transition(mode, state):
    x1, x2 = state
    if mode == 1:
        k = -x1
    elif mode == 2:
        k = real_cbrt(x2)
    else:
        k = CUBIC_K3 * real_cbrt(x2)
    cost = abs(x1) ** 3 + abs(x2) + abs(k) ** 3
    return (x1 + k, x2 + k ** 3), cost


def _cubic_measure(state):
    x1, x2 = state
    return abs(x1) ** 3 + abs(x2)


def cubic_integrator() -> SwitchedSystem:
    """Cubic integrator ``x1+ = x1 + K_u(x)``, ``x2+ = x2 + K_u(x)**3`` switched over three gains.

    ``K_1(x) = -x1``, ``K_2(x) = x2**(1/3)``, ``K_3(x) = (-1/2 + sqrt(7/12)) x2**(1/3)``,
    stage cost ``|x1|**3 + |x2| + |K_u(x)|**3`` and measure ``|x1|**3 + |x2|``.
    Its linear certificate constants are ``a_W = 1``, ``bar_a_V = 14``, ``bar_a_W = 0``.
    """
    meta = {"a_W": 1.0, "bar_a_V": 14.0, "bar_a_W": 0.0}
    return SwitchedSystem("cubic_integrator", 2, 3, _cubic_transition, _cubic_measure, meta)


def zero_cost_fixture(n=2, M=2) -> SwitchedSystem:
    """Identity dynamics with zero stage cost; ``sigma`` is the 1-norm."""

    def transition(mode, state):
        return state, 0.0

    def measure(state):
        return sum(abs(v) for v in state)

    return SwitchedSystem("zero_cost_fixture", int(n), int(M), transition, measure,
                          {"n": int(n), "M": int(M)})


def _affine_family(rng, n, M, spread):
    mats = [rng.normal(0.0, spread / math.sqrt(n), size=(n, n)) for _ in range(M)]
    offsets = [rng.normal(0.0, 0.1, size=n) for _ in range(M)]
    return mats, offsets


def _as_rows(a):
    return tuple(tuple(float(v) for v in row) for row in a)


def random_affine(seed=0, n=2, M=2, spread=1.0) -> SwitchedSystem:
    """Random affine modes ``x+ = A_u x + b_u`` with quadratic stage costs.

    ``l_u(x) = x' Q_u x + r_u`` with ``Q_u`` positive definite and ``r_u >= 0``;
    ``sigma(x) = |x|**2``. Fully determined by ``seed``.
    """
    rng = np.random.default_rng(seed)
    n, M = int(n), int(M)
    mats, offsets = _affine_family(rng, n, M, spread)
    weights = []
    for _ in range(M):
        L = rng.normal(0.0, 1.0, size=(n, n))
        weights.append(L @ L.T / n + 0.1 * np.eye(n))
    biases = rng.uniform(0.0, 0.5, size=M)
    A = [_as_rows(a) for a in mats]
    b = [tuple(float(v) for v in o) for o in offsets]
    Q = [_as_rows(q) for q in weights]
    r = [float(v) for v in biases]

    def transition(mode, state):
        i = mode - 1
        quad = sum(state[p] * sum(Q[i][p][q] * state[q] for q in range(n)) for p in range(n))
        nxt = tuple(sum(A[i][p][q] * state[q] for q in range(n)) + b[i][p] for p in range(n))
        return nxt, max(quad, 0.0) + r[i]

    def measure(state):
        return sum(v * v for v in state)

    meta = {"seed": seed, "n": n, "M": M, "spread": spread}
    return SwitchedSystem("random_affine", n, M, transition, measure, meta)


def sigma_cost_fixture(seed=0, n=2, M=2, contraction=0.7, spread=1.0) -> SwitchedSystem:
    """Random switched system whose stage cost equals its measure, ``l_u = sigma``.

    ``sigma`` is the 1-norm and mode 1 is ``x+ = rho * P x`` with ``P`` a signed
    permutation, so ``sigma(f_1(x)) = rho * sigma(x)``. Hence the certificate gains hold
    with ``W = 0``, ``alpha_W = I`` and ``bar_alpha_V(s) = s / (1 - rho)``; the
    constants are stored in ``metadata``. Other modes are random linear maps.
    """
    if not 0.0 <= contraction < 1.0:
        raise DomainError(f"contraction must lie in [0, 1), got {contraction!r}")
    rng = np.random.default_rng(seed)
    n, M = int(n), int(M)
    perm = rng.permutation(n)
    signs = rng.choice([-1.0, 1.0], size=n)
    P = np.zeros((n, n))
    P[np.arange(n), perm] = signs
    mats, _ = _affine_family(rng, n, M, spread)
    mats[0] = contraction * P
    A = [_as_rows(a) for a in mats]

    def measure(state):
        return sum(abs(v) for v in state)

    def transition(mode, state):
        a = A[mode - 1]
        nxt = tuple(sum(a[p][q] * state[q] for q in range(n)) for p in range(n))
        return nxt, measure(state)

    meta = {"seed": seed, "n": n, "M": M, "contraction": contraction,
            "a_W": 1.0, "bar_a_V": 1.0 / (1.0 - contraction), "bar_a_W": 0.0}
    return SwitchedSystem("sigma_cost_fixture", n, M, transition, measure, meta)


def expansive_fixture(M=2) -> SwitchedSystem:
    """Scalar system ``x+ = (1 + u) x`` that diverges under every mode."""

    def transition(mode, state):
        (x,) = state
        return ((1.0 + mode) * x,), abs(x)

    def measure(state):
        return abs(state[0])

    return SwitchedSystem("expansive_fixture", 1, int(M), transition, measure, {"M": int(M)})


SYSTEMS: dict[str, Callable[..., SwitchedSystem]] = {
    "cubic_integrator": cubic_integrator,
    "zero_cost_fixture": zero_cost_fixture,
    "random_affine": random_affine,
    "sigma_cost_fixture": sigma_cost_fixture,
    "expansive_fixture": expansive_fixture,
}


def register_system(name: str, factory: Callable[..., SwitchedSystem]):
    """Make ``factory`` addressable by ``name`` from configuration files."""
    SYSTEMS[name] = factory
    return factory


def make_system(name: str, validate=True, **params) -> SwitchedSystem:
    """Construct a registered system by name and run the sampled validation."""
    try:
        factory = SYSTEMS[name]
    except KeyError:
        raise DomainError(f"unknown system {name!r}; known: {sorted(SYSTEMS)}") from None
    system = factory(**params)
    if validate:
        validate_system(system)
    return system
