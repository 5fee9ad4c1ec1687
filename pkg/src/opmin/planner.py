"""Optimistic best-first planning (OPmin) over the tree of mode sequences.

Every iteration pops the non-expanded leaf with the smallest discounted cost
``J`` and creates its ``M`` children. Because stage costs are nonnegative, the
first leaf popped at depth ``d + 1`` carries the exact optimum of the horizon-``d``
problem; the deepest such leaf after ``B + 1`` expansions is returned.
"""

from __future__ import annotations

import csv
import heapq
from dataclasses import dataclass, field

from .errors import BudgetOverflowError, DomainError, NumericalOverflowError, PreconditionError
from .system import SwitchedSystem, rollout

MAX_RUNTIME_BUDGET = 2 ** 63 - 1


@dataclass(slots=True)
class TreeNode:
    parent: "TreeNode | None"
    edge_mode: "int | None"
    state: tuple
    depth: int
    cost: float
    expanded: bool = False

    def sequence(self):
        """Mode sequence leading from the root to this node."""
        modes = []
        node = self
        while node.parent is not None:
            modes.append(node.edge_mode)
            node = node.parent
        return tuple(reversed(modes))


class PlanTree:
    """Exploration tree with a stable min-priority open list over its leaves.

    Leaves are ordered by ``(J, deeper first, smaller edge mode, insertion order)``;
    equal costs are compared exactly.
    """

    def __init__(self, system: SwitchedSystem, x, gamma: float):
        self.system = system
        self.gamma = gamma
        self.root = TreeNode(None, None, system.as_state(x), 0, 0.0)
        self.nodes = [self.root]
        self.open_list = [(0.0, 0, 0, 0, self.root)]
        self.expansion_count = 0
        self.open_list_peak = 1
        self.max_depth = 0

    def pop_optimistic(self) -> TreeNode:
        return heapq.heappop(self.open_list)[-1]

    def min_open_cost(self):
        return self.open_list[0][0] if self.open_list else float("inf")

    def expand(self, node: TreeNode):
        weight = self.gamma ** node.depth
        depth = node.depth + 1
        system = self.system
        for u in range(1, system.mode_count + 1):
            try:
                nxt, stage = system.advance(u, node.state, step=node.depth)
            except NumericalOverflowError as exc:
                exc.stats = self.stats()
                raise
            child = TreeNode(node, u, nxt, depth, node.cost + weight * stage)
            self.nodes.append(child)
            heapq.heappush(self.open_list, (child.cost, -depth, u, len(self.nodes), child))
        node.expanded = True
        self.expansion_count += 1
        if depth > self.max_depth:
            self.max_depth = depth
        if len(self.open_list) > self.open_list_peak:
            self.open_list_peak = len(self.open_list)

    def leaves(self):
        return [entry[-1] for entry in self.open_list]

    def stats(self):
        return PlanStats(self.expansion_count, len(self.nodes), self.max_depth,
                         self.open_list_peak)


@dataclass(frozen=True)
class PlanStats:
    nodes_expanded: int
    nodes_created: int
    max_depth_reached: int
    open_list_peak: int


@dataclass(frozen=True)
class PlanResult:
    """Output of :func:`plan`.

    ``sequence`` has ``horizon + 1`` entries and ``value`` is its discounted cost,
    the exact minimum over all sequences of that length. ``history`` lists the
    ``(horizon, value)`` pairs recorded each time a deeper leaf was selected.
    """

    horizon: int
    sequence: tuple
    value: float
    stats: PlanStats
    history: tuple = field(default=(), compare=False)


def check_budget(budget):
    if isinstance(budget, bool) or int(budget) != budget:
        raise PreconditionError(f"budget must be an integer, got {budget!r}")
    budget = int(budget)
    if budget < 1:
        raise PreconditionError(f"budget must be >= 1, got {budget}")
    if budget > MAX_RUNTIME_BUDGET:
        raise BudgetOverflowError(
            f"budget {budget} exceeds the runtime limit {MAX_RUNTIME_BUDGET}")
    return budget


def check_gamma(gamma):
    if not 0.0 < gamma <= 1.0:
        raise DomainError(f"gamma must lie in (0, 1], got {gamma!r}")
    return float(gamma)


def plan(system: SwitchedSystem, x, gamma: float, budget: int, callback=None,
         debug=False, verify=True) -> PlanResult:
    """Run ``budget + 1`` optimistic expansions from ``x``.

    Parameters
    ----------
    system : SwitchedSystem
    x : array-like
        Root state.
    gamma : float
        Discount factor in ``(0, 1]``.
    budget : int
        ``B >= 1``; exactly ``B + 1`` leaves are expanded.
    callback : callable, optional
        Called as ``callback(iteration, leaf)`` after every expansion.
    debug : bool
        Check optimistic dominance of every selected leaf.
    verify : bool
        Re-simulate the returned sequence and check its cost matches exactly.

    Returns
    -------
    PlanResult
    """
    budget = check_budget(budget)
    gamma = check_gamma(gamma)
    tree = PlanTree(system, x, gamma)
    horizon = -1
    selected = None
    history = []
    for i in range(budget + 1):
        leaf = tree.pop_optimistic()
        if debug:
            assert leaf.cost <= tree.min_open_cost(), "optimistic leaf is not minimal"
        tree.expand(leaf)
        if horizon < leaf.depth - 1:
            selected = leaf
            horizon = leaf.depth - 1
            history.append((horizon, leaf.cost))
        if callback is not None:
            callback(i, leaf)
    result = PlanResult(horizon, selected.sequence(), selected.cost, tree.stats(), tuple(history))
    if verify:
        _, cost = rollout(system, x, result.sequence, gamma)
        if cost != result.value:
            raise AssertionError(f"planned value {result.value!r} != rollout cost {cost!r}")
    return result


def plan_fixed_horizon(system: SwitchedSystem, x, gamma: float, horizon: int,
                       max_expansions=10 ** 6) -> PlanResult:
    """Exact minimum of the horizon-``horizon`` cost by optimistic search.

    Expands leaves in the same order as :func:`plan` and stops at the first leaf
    popped at depth ``horizon + 1``.
    """
    gamma = check_gamma(gamma)
    if horizon < 0:
        raise PreconditionError(f"horizon must be >= 0, got {horizon}")
    tree = PlanTree(system, x, gamma)
    while tree.expansion_count < max_expansions:
        leaf = tree.pop_optimistic()
        if leaf.depth == horizon + 1:
            return PlanResult(horizon, leaf.sequence(), leaf.cost, tree.stats())
        tree.expand(leaf)
    raise PreconditionError(
        f"horizon {horizon} not reached within {max_expansions} expansions")


def first_input(result: PlanResult) -> int:
    """First mode of the planned sequence; an element of the optimal first-input set."""
    return result.sequence[0]


def min_budget_for_depth(d_bar: int, M: int) -> int:
    """Smallest budget ``(M**(d_bar+1) - 1) / (M - 1)`` guaranteeing ``d(x) >= d_bar``.

    Computed with exact Python integers, so astronomically large budgets are
    representable; :func:`plan` refuses those beyond 64 bits.
    """
    if int(d_bar) != d_bar or d_bar < 0:
        raise DomainError(f"d_bar must be a nonnegative integer, got {d_bar!r}")
    if int(M) != M or M < 2:
        raise DomainError(f"M must be an integer >= 2, got {M!r}")
    d_bar, M = int(d_bar), int(M)
    return (M ** (d_bar + 1) - 1) // (M - 1)


def budget_for_stability(d_bar: int, M: int) -> int:
    """Budget ``(M**(d_bar+2) - 1) / (M - 1)`` ensuring ``d(x) > d_bar`` everywhere."""
    if int(d_bar) != d_bar or d_bar < 0:
        raise DomainError(f"d_bar must be a nonnegative integer, got {d_bar!r}")
    return min_budget_for_depth(int(d_bar) + 1, M)


def guaranteed_depth(budget: int, M: int) -> int:
    """Largest ``d_bar`` with ``min_budget_for_depth(d_bar, M) <= budget``."""
    budget = check_budget(budget)
    d = 0
    while min_budget_for_depth(d + 1, M) <= budget:
        d += 1
    return d


class ExpansionTrace:
    """Callback recording ``(iteration, depth, J)`` of every expanded leaf."""

    columns = ("iteration", "depth", "cost")

    def __init__(self):
        self.rows = []

    def __call__(self, iteration, leaf):
        self.rows.append((iteration, leaf.depth, leaf.cost))

    def write_csv(self, path, header_lines=()):
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            for it, depth, cost in self.rows:
                writer.writerow((it, depth, format(cost, ".17g")))
