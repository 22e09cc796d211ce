"""Exhaustive search over routes and grid start times for tiny instances."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .instance import Instance
from .schedule import Solution, construct_schedule, evaluate

MAX_COMBINATIONS = 10**6


class BudgetExceeded(RuntimeError):
    def __init__(self, count: int, limit: int):
        super().__init__(f"{count} combinations exceed the limit of {limit}")
        self.count = count
        self.limit = limit


@dataclass(frozen=True)
class OracleGrid:
    step: float = 1.0

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("grid step must be > 0")

    def starts(self, trip) -> list:
        """``earliest, earliest + step, ...`` up to and including the latest start."""
        n = int(math.floor(trip.max_stagger / self.step + 1e-9))
        out = [trip.earliest + i * self.step for i in range(n + 1)]
        if trip.latest_start - out[-1] > 1e-9:
            out.append(trip.latest_start)
        return out


def count_combinations(instance: Instance, grid: OracleGrid) -> int:
    total = 1
    for trip in instance.trips:
        total *= len(trip.routes) * len(grid.starts(trip))
    return total


def solve_exhaustive(instance: Instance, grid: OracleGrid | None = None, alpha: float = 10.0,
                     feasible_only: bool = False, scope: str = "system",
                     limit: int = MAX_COMBINATIONS):
    """Cheapest assignment on the grid; ties go to the lexicographically first
    (trip, route, start) tuple. Returns ``(solution, cost)`` or ``(None, None)``
    when ``feasible_only`` excludes everything."""
    grid = grid or OracleGrid()
    count = count_combinations(instance, grid)
    if count > limit:
        raise BudgetExceeded(count, limit)
    options = [[(p, s) for p in range(len(t.routes)) for s in grid.starts(t)] for t in instance.trips]
    best, best_cost = None, None
    sol = Solution.empty(instance.n_trips)
    for combo in itertools.product(*options):
        for r, (p, s) in enumerate(combo):
            sol.route[r] = p
            sol.start[r] = s
        cost = evaluate(instance, sol, construct_schedule(instance, sol), alpha, scope)
        if feasible_only and not cost.feasible:
            continue
        if best_cost is None or cost.cost < best_cost.cost:
            best, best_cost = sol.copy(), cost
    return best, best_cost


def gap(cost: float, optimum: float) -> float:
    """Relative gap to the optimum; zero-cost optima use the absolute value."""
    if optimum > 1e-9:
        return (cost - optimum) / optimum
    return cost - optimum

