"""Incremental schedule maintenance.

A :class:`ScheduleState` keeps a schedule, per-arc sorted label indexes and
running cost terms for one solution. Changes (stagger, insert, reroute,
remove) are propagated through the labels they disturb in departure-time
order; everything else stays untouched.

Labels of trips whose timing is being recomputed are withdrawn from the arc
indexes and re-enter when processed. Because processing follows (time, trip)
order, the labels that precede the one being processed are final, so the flow
is the number of earlier entries minus the number of earlier exits.
"""
from __future__ import annotations

import heapq
import math
from bisect import bisect_left, bisect_right, insort
from dataclasses import dataclass

from .instance import Instance
from .network import EPS
from .schedule import Schedule, Solution, construct_schedule, in_scope

_INF = math.inf


class PropagationBudgetExceeded(RuntimeError):
    pass


# --------------------------------------------------------------------------
# Change requests

@dataclass(frozen=True)
class Stagger:
    trip: int
    start: float


@dataclass(frozen=True)
class Insert:
    trip: int
    route: int
    start: float


@dataclass(frozen=True)
class Reroute:
    trip: int
    route: int
    start: float


@dataclass(frozen=True)
class Remove:
    trip: int


# --------------------------------------------------------------------------
# Arc index

class ArcTripIndex:
    """Per arc, labels currently in place, sorted by entry ``(theta, trip)`` and
    by exit ``(omega, trip)``. Withdrawn (active) labels live in neither list."""

    def __init__(self, n_arcs: int):
        self.dep = [[] for _ in range(n_arcs)]
        self.arr = [[] for _ in range(n_arcs)]

    def insert(self, a, theta, omega, r):
        insort(self.dep[a], (theta, r))
        insort(self.arr[a], (omega, r))

    def remove(self, a, theta, omega, r):
        lst = self.dep[a]
        i = bisect_left(lst, (theta, r))
        if i >= len(lst) or lst[i] != (theta, r):
            raise KeyError(f"label ({theta}, {r}) missing on arc {a}")
        del lst[i]
        lst = self.arr[a]
        i = bisect_left(lst, (omega, r))
        if i >= len(lst) or lst[i] != (omega, r):
            raise KeyError(f"exit ({omega}, {r}) missing on arc {a}")
        del lst[i]

    def move_exit(self, a, old_omega, new_omega, r):
        lst = self.arr[a]
        i = bisect_left(lst, (old_omega, r))
        del lst[i]
        insort(lst, (new_omega, r))

    def count_before(self, a, theta, r) -> int:
        """Labels entering before ``(theta, r)`` and still on the arc at ``theta``."""
        return bisect_left(self.dep[a], (theta, r)) - bisect_right(self.arr[a], (theta + EPS, _INF))

    def successors_counting(self, a, theta, omega, r):
        """Positions of labels after ``(theta, r)`` that enter before ``omega``."""
        lst = self.dep[a]
        return bisect_right(lst, (theta, r)), bisect_left(lst, (omega - EPS, -1))

    def check(self):
        for lst in self.dep + self.arr:
            if any(x > y for x, y in zip(lst, lst[1:])):
                raise AssertionError("arc index out of order")


def activation_range(index: ArcTripIndex, arc: int, trip: int, old, new) -> set:
    """Trips on ``arc`` whose conflict status with ``trip`` flips.

    ``old`` and ``new`` are ``(theta, omega)`` pairs, or ``None`` when the label
    is absent before or after. A trip ``r'`` conflicts with ``trip`` when it
    enters after ``trip`` and before ``trip`` leaves; the trips to activate are
    the symmetric difference of the two entry-position ranges.
    """
    lst = index.dep[arc]

    def span(label):
        if label is None:
            return 0, 0
        theta, omega = label
        return bisect_right(lst, (theta, trip)), max(bisect_right(lst, (theta, trip)),
                                                       bisect_left(lst, (omega - EPS, -1)))

    lo1, hi1 = span(old)
    lo2, hi2 = span(new)
    if (lo1, hi1) == (lo2, hi2):
        return set()
    first = set(range(lo1, hi1))
    second = set(range(lo2, hi2))
    return {lst[i][1] for i in first ^ second if lst[i][1] != trip}


# --------------------------------------------------------------------------
# State

@dataclass
class Update:
    """Undo record for one applied change."""

    snapshots: dict
    old_sums: tuple
    processed: int


class ScheduleState:
    def __init__(self, instance: Instance, solution: Solution | None = None, scope: str = "system",
                 flow_rule: str = "exact", budget_factor: int = 50):
        if flow_rule not in ("exact", "backward"):
            raise ValueError(f"unknown flow rule {flow_rule!r}")
        self.instance = instance
        self.scope = scope
        self.flow_rule = flow_rule
        self.budget_factor = budget_factor
        self.delays = instance.delays
        self.nominal = [a.nominal_time for a in instance.network.arcs]
        self.in_scope = [in_scope(instance, r, scope) for r in range(instance.n_trips)]
        self.journal = None  # when a list, every applied Update is appended
        self.solution = solution.copy() if solution is not None else Solution.empty(instance.n_trips)
        self.repair()

    # ----- bookkeeping

    def repair(self) -> Schedule:
        """Rebuild schedule, indexes and cost terms from scratch."""
        inst = self.instance
        self.schedule = construct_schedule(inst, self.solution)
        self.index = ArcTripIndex(len(inst.network.arcs))
        sched = self.schedule
        deps = [[] for _ in self.index.dep]
        arrs = [[] for _ in self.index.arr]
        for r, arcs in enumerate(sched.arcs):
            for k, a in enumerate(arcs):
                deps[a].append((sched.dep[r][k], r))
                arrs[a].append((sched.arr[r][k], r))
        for a in range(len(deps)):
            deps[a].sort()
            arrs[a].sort()
        self.index.dep, self.index.arr = deps, arrs
        self.n_present = [len(arcs) for arcs in sched.arcs]
        self.pending = [None] * inst.n_trips
        self.terms = [self._terms(r) for r in range(inst.n_trips)]
        self._resum()
        return sched

    def _resum(self):
        delay = late = 0.0
        for r, t in enumerate(self.terms):
            if t is not None and self.in_scope[r]:
                delay += t[0] + t[1]
                late += t[2]
        self.sum_delay, self.sum_late = delay, late

    def _terms(self, r):
        p = self.solution.route[r]
        if p < 0:
            return None
        trip = self.instance.trips[r]
        chosen = trip.routes[p].free_flow_time
        arrival = self.schedule.arr[r][-1]
        return (math.fsum(self.schedule.delay[r]),
                chosen - trip.shortest_free_flow,
                max(0.0, arrival - trip.latest))

    def cost(self, alpha: float) -> float:
        return self.sum_delay + alpha * self.sum_late

    @property
    def feasible(self) -> bool:
        return self.sum_late <= EPS

    def trip_cost(self, r: int, alpha: float) -> float:
        t = self.terms[r]
        return 0.0 if t is None else t[0] + t[1] + alpha * t[2]

    def trip_delay(self, r: int) -> float:
        t = self.terms[r]
        return 0.0 if t is None else t[0] + t[1]

    def trip_lateness(self, r: int) -> float:
        t = self.terms[r]
        return 0.0 if t is None else t[2]

    def check(self):
        """Index integrity: sorted, and exactly the labels of present trips."""
        self.index.check()
        expected = [[] for _ in self.index.dep]
        for r, arcs in enumerate(self.schedule.arcs):
            for k in range(self.n_present[r]):
                expected[arcs[k]].append((self.schedule.dep[r][k], r))
        for a, labels in enumerate(expected):
            if sorted(labels) != self.index.dep[a]:
                raise AssertionError(f"arc {a}: index does not match schedule")

    # ----- flow counting

    def _count(self, a, theta, r):
        if self.flow_rule == "exact":
            return self.index.count_before(a, theta, r)
        # FIFO backward scan from the insertion position
        lst = self.index.dep[a]
        i = bisect_left(lst, (theta, r)) - 1
        count = 0
        sched = self.schedule
        while i >= 0:
            r2 = lst[i][1]
            k2 = sched.arcs[r2].index(a)
            if sched.arr[r2][k2] <= theta + EPS:
                break
            count += 1
            i -= 1
        return count

    # ----- change application

    def apply(self, change) -> Update:
        if not isinstance(change, (Stagger, Insert, Reroute, Remove)):
            raise TypeError(f"unknown change {change!r}")
        snapshots = {}
        old_sums = (self.sum_delay, self.sum_late)
        queue = []
        queued = set()
        sched = self.schedule
        sol = self.solution

        def snap(r):
            if r not in snapshots:
                snapshots[r] = (sol.route[r], sol.start[r], sched.arcs[r], list(sched.dep[r]),
                                list(sched.arr[r]), list(sched.flow[r]), list(sched.delay[r]),
                                self.terms[r])

        def push(theta, r, k):
            key = (theta, r, k)
            if key not in queued:
                queued.add(key)
                heapq.heappush(queue, key)

        def activate(a, r, old, new):
            for r2 in activation_range(self.index, a, r, old, new):
                k2 = sched.arcs[r2].index(a)
                push(sched.dep[r2][k2], r2, k2)

        def withdraw_from(r, k0):
            arcs = sched.arcs[r]
            for k in range(k0, self.n_present[r]):
                a = arcs[k]
                label = (sched.dep[r][k], sched.arr[r][k])
                self.index.remove(a, label[0], label[1], r)
                activate(a, r, label, None)
            self.n_present[r] = min(self.n_present[r], k0)

        def start_trip(r, route, start):
            arcs = self.instance.route_arcs(r, route)
            sol.assign(r, route, start)
            n = len(arcs)
            sched.arcs[r] = arcs
            sched.dep[r] = [0.0] * n
            sched.arr[r] = [0.0] * n
            sched.flow[r] = [0] * n
            sched.delay[r] = [0.0] * n
            self.n_present[r] = 0
            self.pending[r] = start
            push(start, r, 0)

        r0 = change.trip
        snap(r0)
        present = sol.route[r0] >= 0
        if isinstance(change, Insert):
            if present:
                raise ValueError(f"trip {r0} is already scheduled")
            start_trip(r0, change.route, change.start)
        else:
            if not present:
                raise ValueError(f"trip {r0} is not scheduled")
            withdraw_from(r0, 0)
            if isinstance(change, Stagger):
                start_trip(r0, sol.route[r0], change.start)
            elif isinstance(change, Reroute):
                start_trip(r0, change.route, change.start)
            else:
                sol.drop(r0)
                sched.arcs[r0] = ()
                sched.dep[r0], sched.arr[r0], sched.flow[r0], sched.delay[r0] = [], [], [], []
                self.pending[r0] = None

        budget = self.budget_factor * max(1, sum(len(x) for x in sched.arcs)) * max(1, len(sol.route))
        processed = 0
        nominal = self.nominal
        delay_of = self.delays.delay
        index = self.index
        while queue:
            theta, r, k = heapq.heappop(queue)
            queued.discard((theta, r, k))
            processed += 1
            if processed > budget:
                raise PropagationBudgetExceeded(f"more than {budget} label updates")
            if sol.route[r] < 0:
                continue
            arcs = sched.arcs[r]
            a = arcs[k]
            if k < self.n_present[r]:
                if sched.dep[r][k] != theta:
                    continue
                f = self._count(a, theta, r)
                if f == sched.flow[r][k]:
                    continue
                snap(r)
                d = delay_of(a, f)
                omega_old = sched.arr[r][k]
                omega = theta + nominal[a] + d
                index.move_exit(a, omega_old, omega, r)
                sched.flow[r][k] = f
                sched.delay[r][k] = d
                sched.arr[r][k] = omega
                activate(a, r, (theta, omega_old), (theta, omega))
                if k + 1 < len(arcs):
                    withdraw_from(r, k + 1)
                    self.pending[r] = omega
                    push(omega, r, k + 1)
            elif k == self.n_present[r] and self.pending[r] == theta:
                snap(r)
                f = self._count(a, theta, r)
                d = delay_of(a, f)
                omega = theta + nominal[a] + d
                sched.dep[r][k] = theta
                sched.arr[r][k] = omega
                sched.flow[r][k] = f
                sched.delay[r][k] = d
                index.insert(a, theta, omega, r)
                self.n_present[r] = k + 1
                activate(a, r, None, (theta, omega))
                if k + 1 < len(arcs):
                    self.pending[r] = omega
                    push(omega, r, k + 1)
                else:
                    self.pending[r] = None

        for r in snapshots:
            self.terms[r] = self._terms(r)
        # a fresh sum keeps totals free of add/subtract drift
        self._resum()
        update = Update(snapshots, old_sums, processed)
        if self.journal is not None:
            self.journal.append(update)
        return update

    def rollback(self, update: Update):
        if self.journal and self.journal[-1] is update:
            self.journal.pop()
        sched, sol = self.schedule, self.solution
        for r in update.snapshots:
            for k in range(self.n_present[r]):
                self.index.remove(sched.arcs[r][k], sched.dep[r][k], sched.arr[r][k], r)
        for r, (route, start, arcs, dep, arr, flow, delay, terms) in update.snapshots.items():
            sol.route[r], sol.start[r] = route, start
            sched.arcs[r], sched.dep[r], sched.arr[r], sched.flow[r], sched.delay[r] = arcs, dep, arr, flow, delay
            self.terms[r] = terms
            self.n_present[r] = len(arcs)
            self.pending[r] = None
            for k, a in enumerate(arcs):
                self.index.insert(a, dep[k], arr[k], r)
        self.sum_delay, self.sum_late = update.old_sums

    def begin(self):
        """Start journaling updates; pair with :meth:`undo` or :meth:`commit`."""
        self.journal = []

    def commit(self):
        self.journal = None

    def undo(self):
        journal, self.journal = self.journal, None
        for update in reversed(journal):
            self.rollback(update)

    # ----- convenience

    def place(self, r: int, route: int, start: float) -> Update:
        """Schedule ``r`` on ``route`` at ``start`` with the matching change kind."""
        cur = self.solution.route[r]
        if cur < 0:
            return self.apply(Insert(r, route, start))
        if cur == route:
            return self.apply(Stagger(r, start))
        return self.apply(Reroute(r, route, start))


def update_schedule(state: ScheduleState, change) -> Schedule:
    state.apply(change)
    return state.schedule


def repair(state: ScheduleState) -> Schedule:
    return state.repair()
