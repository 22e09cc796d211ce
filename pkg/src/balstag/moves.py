"""Routing operator and the insert / remove / local-search operators.

All operators work on a :class:`~balstag.incremental.ScheduleState` in place.
"""
from __future__ import annotations

import enum
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field

from .incremental import Remove, ScheduleState
from .network import EPS
from .schedule import CostBreakdown

IMPROVE_TOL = 1e-9


class OperatorMode(enum.Enum):
    INTEG = "integ"
    STAG = "stag"  # route fixed
    BAL = "bal"    # start fixed to the earliest departure

    @classmethod
    def parse(cls, value) -> "OperatorMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown operator mode {value!r}") from None


class Order(enum.Enum):
    EARLIEST = "earliest"
    DEADLINE = "deadline"
    DELAY = "delay"


@dataclass
class MoveCandidate:
    trip: int
    route: int
    start: float
    gain: int
    cost: CostBreakdown


@dataclass
class MoveContext:
    """Settings shared by the operators during one solver run.

    ``fixed_routes`` gives the route each trip keeps under STAG. ``grid`` snaps
    candidate start times up onto ``earliest + k * grid``.
    """

    mode: OperatorMode = OperatorMode.INTEG
    alpha: float = 10.0
    fixed_routes: list | None = None
    grid: float | None = None
    tries: int = 3
    last_delay: dict = field(default_factory=dict)


def _pos(state: ScheduleState, r: int, a: int) -> int:
    return state.schedule.arcs[r].index(a)


def _exit(state: ScheduleState, r: int, a: int) -> float:
    return state.schedule.arr[r][_pos(state, r, a)]


def snap_start(trip, s: float, grid: float | None) -> float:
    hi = trip.latest_start
    s = min(max(s, trip.earliest), hi)
    if not grid:
        return s
    steps = math.ceil((s - trip.earliest) / grid - 1e-9)
    return min(hi, trip.earliest + steps * grid)


def resolve_conflict_shift(state: ScheduleState, r: int, k: int) -> float:
    """Start time that makes ``r`` enter its ``k``-th arc when the trip right
    ahead of it leaves, clamped to the staggering window."""
    sched = state.schedule
    a = sched.arcs[r][k]
    theta = sched.dep[r][k]
    s = state.solution.start[r]
    lst = state.index.dep[a]
    i = bisect_left(lst, (theta, r)) - 1
    if i < 0:
        return s
    omega = _exit(state, lst[i][1], a)
    if omega <= theta + EPS:
        return s
    return min(s + (omega - theta), state.instance.trips[r].latest_start)


def _conflicts(state: ScheduleState, a: int, r: int, theta: float, omega: float, own) -> tuple:
    """(predecessors still on the arc at ``theta``, successors entering before
    ``omega``) for a label of ``r``, ignoring ``r``'s own label ``own``."""
    dep, arr = state.index.dep[a], state.index.arr[a]
    preds = bisect_left(dep, (theta, r)) - bisect_right(arr, (theta + EPS, math.inf))
    lo = bisect_right(dep, (theta, r))
    hi = max(lo, bisect_left(dep, (omega - EPS, -1)))
    succs = hi - lo
    if own is not None:
        own_theta, own_omega = own
        key = (own_theta, r)
        if key < (theta, r) and own_omega > theta + EPS:
            preds -= 1
        if lo <= bisect_left(dep, key) < hi and key > (theta, r):
            succs -= 1
    return preds, succs


def net_conflict_gain(state: ScheduleState, r: int, k: int, start: float) -> int:
    """Conflicts on the trip's ``k``-th arc removed minus conflicts created when
    its start moves to ``start``; the arc entry shifts by the same amount and
    the exit is re-estimated from this arc's delay only."""
    sched = state.schedule
    a = sched.arcs[r][k]
    theta, omega = sched.dep[r][k], sched.arr[r][k]
    before = sum(_conflicts(state, a, r, theta, omega, (theta, omega)))
    new_theta = theta + (start - state.solution.start[r])
    preds, _ = _conflicts(state, a, r, new_theta, new_theta, (theta, omega))
    new_omega = new_theta + state.nominal[a] + state.delays.delay(a, preds)
    preds, succs = _conflicts(state, a, r, new_theta, new_omega, (theta, omega))
    return before - (preds + succs)


def trim_forward_shift(state: ScheduleState, r: int) -> float:
    """Earliest start that keeps every arc entry behind the exits of the trips
    that currently enter that arc before ``r``."""
    sched = state.schedule
    trip = state.instance.trips[r]
    s = state.solution.start[r]
    slack = math.inf
    for k, a in enumerate(sched.arcs[r]):
        theta = sched.dep[r][k]
        lst = state.index.dep[a]
        i = bisect_left(lst, (theta, r))
        if i == 0:
            continue
        latest = max(max(t, _exit(state, r2, a)) for t, r2 in lst[:i])
        slack = min(slack, max(0.0, theta - latest))
    if slack == math.inf:
        return trip.earliest
    return max(trip.earliest, s - slack)


def allowed_routes(state: ScheduleState, r: int, ctx: MoveContext):
    if ctx.mode is OperatorMode.STAG:
        if ctx.fixed_routes is not None:
            return [ctx.fixed_routes[r]]
        cur = state.solution.route[r]
        return [cur if cur >= 0 else 0]
    return list(range(len(state.instance.trips[r].routes)))


def breakdown(state: ScheduleState, alpha: float) -> CostBreakdown:
    congestion = detour = 0.0
    for r, t in enumerate(state.terms):
        if t is not None and state.in_scope[r]:
            congestion += t[0]
            detour += t[1]
    total = congestion + detour
    return CostBreakdown(total, congestion, detour, state.sum_late, alpha, total + alpha * state.sum_late)


def _stagger_search(state: ScheduleState, r: int, ctx: MoveContext, cost: float) -> tuple:
    """Push the start later one conflict at a time while the cost improves."""
    trip = state.instance.trips[r]
    n_arcs = len(state.schedule.arcs[r])
    budget = 10 * n_arcs
    gain = 0
    while budget > 0:
        s = state.solution.start[r]
        options = []
        for k in range(n_arcs):
            target = snap_start(trip, resolve_conflict_shift(state, r, k), ctx.grid)
            if target > s + EPS:
                options.append((-net_conflict_gain(state, r, k, target), k, target))
        if not options:
            break
        options.sort()
        moved = False
        for neg_gain, _, target in options[:ctx.tries]:
            budget -= 1
            update = state.place(r, state.solution.route[r], target)
            c = state.cost(ctx.alpha)
            if c < cost - IMPROVE_TOL:
                cost, gain, moved = c, -neg_gain, True
                break
            state.rollback(update)
            if budget <= 0:
                break
        if not moved:
            break
    return cost, gain


def best_assignment(state: ScheduleState, r: int, ctx: MoveContext) -> MoveCandidate:
    """Try every allowed route, searching start times on each; leave the trip on
    the cheapest assignment found. The incoming assignment is a candidate when
    the mode allows it."""
    trip = state.instance.trips[r]
    sol = state.solution
    best = None
    routes = allowed_routes(state, r, ctx)
    if sol.route[r] in routes and (ctx.mode is not OperatorMode.BAL or sol.start[r] == trip.earliest):
        best = (state.cost(ctx.alpha), sol.route[r], sol.start[r], 0)
    for p in routes:
        start = snap_start(trip, trip.earliest, ctx.grid)
        if sol.route[r] != p or sol.start[r] != start:
            state.place(r, p, start)
        cost = state.cost(ctx.alpha)
        gain = 0
        if ctx.mode is not OperatorMode.BAL and trip.max_stagger > 0:
            cost, gain = _stagger_search(state, r, ctx, cost)
            trimmed = snap_start(trip, trim_forward_shift(state, r), ctx.grid)
            if trimmed < sol.start[r] - EPS:
                update = state.place(r, p, trimmed)
                c = state.cost(ctx.alpha)
                if c <= cost + IMPROVE_TOL:
                    cost = c
                else:
                    state.rollback(update)
        if best is None or cost < best[0] - IMPROVE_TOL:
            best = (cost, p, sol.start[r], gain)
    _, p, s, gain = best
    if sol.route[r] != p or sol.start[r] != s:
        state.place(r, p, s)
    return MoveCandidate(r, p, s, gain, breakdown(state, ctx.alpha))


def remove(state: ScheduleState, trips, ctx: MoveContext | None = None):
    for r in trips:
        if state.solution.route[r] < 0:
            continue
        if ctx is not None:
            ctx.last_delay[r] = state.trip_delay(r)
        state.apply(Remove(r))


def order_trips(state: ScheduleState, trips, order: Order, ctx: MoveContext):
    trips_data = state.instance.trips
    if order is Order.EARLIEST:
        return sorted(trips, key=lambda r: (trips_data[r].earliest, r))
    if order is Order.DEADLINE:
        return sorted(trips, key=lambda r: (trips_data[r].latest, r))
    if order is Order.DELAY:
        return sorted(trips, key=lambda r: (-ctx.last_delay.get(r, 0.0), r))
    raise ValueError(f"unknown order {order!r}")


def insert(state: ScheduleState, trips, order: Order, ctx: MoveContext):
    for r in order_trips(state, trips, order, ctx):
        best_assignment(state, r, ctx)


def local_search(state: ScheduleState, trips, ctx: MoveContext) -> int:
    """Reassign each trip (ascending earliest departure) when strictly cheaper.
    Returns the number of trips that moved."""
    moved = 0
    for r in order_trips(state, trips, Order.EARLIEST, ctx):
        if state.solution.route[r] < 0:
            continue
        before = (state.solution.route[r], state.solution.start[r])
        best_assignment(state, r, ctx)
        if (state.solution.route[r], state.solution.start[r]) != before:
            moved += 1
    return moved
