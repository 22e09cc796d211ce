"""Solutions, schedule construction and cost evaluation."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .instance import Instance
from .network import EPS

SCOPES = ("system", "fleet")


@dataclass
class Solution:
    """Route index (``-1`` when the trip is absent) and start time per trip."""

    route: list
    start: list

    @classmethod
    def empty(cls, n_trips: int) -> "Solution":
        return cls([-1] * n_trips, [math.nan] * n_trips)

    def __len__(self):
        return len(self.route)

    def present(self, r: int) -> bool:
        return self.route[r] >= 0

    def present_trips(self):
        return [r for r, p in enumerate(self.route) if p >= 0]

    def copy(self) -> "Solution":
        return Solution(list(self.route), list(self.start))

    def assign(self, r: int, route_index: int, start: float):
        self.route[r] = int(route_index)
        self.start[r] = float(start)

    def drop(self, r: int):
        self.route[r] = -1
        self.start[r] = math.nan

    def same_as(self, other: "Solution", tol: float = 0.0) -> bool:
        if self.route != other.route:
            return False
        for a, b, p in zip(self.start, other.start, self.route):
            if p >= 0 and abs(a - b) > tol:
                return False
        return True

    def to_json(self) -> dict:
        return {"trips": [
            {"trip": r, "route_index": p, "start_time_s": s}
            for r, (p, s) in enumerate(zip(self.route, self.start)) if p >= 0
        ], "n_trips": len(self.route)}

    @classmethod
    def from_json(cls, data: dict) -> "Solution":
        sol = cls.empty(int(data["n_trips"]))
        for item in data["trips"]:
            sol.assign(int(item["trip"]), int(item["route_index"]), float(item["start_time_s"]))
        return sol


class SolutionError(ValueError):
    pass


def check_solution(instance: Instance, solution: Solution):
    if len(solution) != instance.n_trips:
        raise SolutionError(f"solution covers {len(solution)} trips, instance has {instance.n_trips}")
    for r, trip in enumerate(instance.trips):
        p = solution.route[r]
        if p < 0:
            continue
        if p >= len(trip.routes):
            raise SolutionError(f"trip {r}: route index {p} out of range")
        s = solution.start[r]
        if not (trip.earliest - EPS <= s <= trip.latest_start + EPS):
            raise SolutionError(f"trip {r}: start {s} outside [{trip.earliest}, {trip.latest_start}]")


@dataclass
class Schedule:
    """Per trip, per arc of its chosen route: departure, arrival, flow and delay."""

    arcs: list
    dep: list
    arr: list
    flow: list
    delay: list

    def arrival(self, r: int) -> float:
        return self.arr[r][-1] if self.arcs[r] else math.nan

    def present(self, r: int) -> bool:
        return bool(self.arcs[r])

    def __len__(self):
        return len(self.arcs)

    def copy(self) -> "Schedule":
        return Schedule(list(self.arcs), [list(x) for x in self.dep], [list(x) for x in self.arr],
                        [list(x) for x in self.flow], [list(x) for x in self.delay])

    def max_abs_diff(self, other: "Schedule") -> float:
        """Largest entrywise time difference; ``inf`` on structural mismatch."""
        if self.arcs != other.arcs or self.flow != other.flow:
            return math.inf
        worst = 0.0
        for mine, theirs in ((self.dep, other.dep), (self.arr, other.arr), (self.delay, other.delay)):
            for x, y in zip(mine, theirs):
                for u, v in zip(x, y):
                    worst = max(worst, abs(u - v))
        return worst

    def rows(self):
        for r, arcs in enumerate(self.arcs):
            for k, a in enumerate(arcs):
                yield r, a, self.dep[r][k], self.arr[r][k], self.flow[r][k], self.delay[r][k]


def construct_schedule(instance: Instance, solution: Solution, backend=None) -> Schedule:
    """Event sweep: trips enter arcs in (time, trip id) order and see the flow of
    trips that entered earlier and have not left yet."""
    kern = backend or kernels.active
    n = instance.n_trips
    route_arcs = []
    offsets = [0]
    starts = np.zeros(n)
    present = np.zeros(n, dtype=np.uint8)
    arc_lists = []
    for r in range(n):
        p = solution.route[r]
        arcs = instance.route_arcs(r, p) if p >= 0 else ()
        arc_lists.append(arcs)
        route_arcs.extend(arcs)
        offsets.append(len(route_arcs))
        if p >= 0:
            starts[r] = solution.start[r]
            present[r] = 1
    kind, alpha, beta, gamma, slopes, thresholds = _kernel_params(instance)
    dep, arr, flow, delay = kern.construct_schedule(
        np.asarray(route_arcs, dtype=np.int64), np.asarray(offsets, dtype=np.int64), starts, present,
        instance.network.nominal, kind, alpha, beta, gamma, slopes, thresholds, EPS)
    dep, arr, flow, delay = dep.tolist(), arr.tolist(), flow.tolist(), delay.tolist()
    sched = Schedule(arc_lists, [], [], [], [])
    for r in range(n):
        lo, hi = offsets[r], offsets[r + 1]
        sched.dep.append(dep[lo:hi])
        sched.arr.append(arr[lo:hi])
        sched.flow.append(flow[lo:hi])
        sched.delay.append(delay[lo:hi])
    return sched


def _kernel_params(instance: Instance):
    cache = instance.__dict__.get("_kernel_params")
    if cache is None:
        cache = instance.__dict__["_kernel_params"] = instance.delays.kernel_params()
    return cache


@dataclass
class CostBreakdown:
    total_delay: float = 0.0
    congestion_delay: float = 0.0
    detour_delay: float = 0.0
    infeasibility: float = 0.0
    alpha: float = 1.0
    cost: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def feasible(self) -> bool:
        return self.infeasibility <= EPS


def trip_terms(instance: Instance, solution: Solution, schedule: Schedule, r: int):
    """``(congestion, detour, lateness)`` of one present trip."""
    trip = instance.trips[r]
    arrival = schedule.arrival(r)
    chosen = trip.routes[solution.route[r]].free_flow_time
    detour = chosen - trip.shortest_free_flow
    # summed arc delays stay exactly zero in free flow, unlike arrival - start - chosen
    congestion = math.fsum(schedule.delay[r])
    lateness = max(0.0, arrival - trip.latest)
    return congestion, detour, lateness


def in_scope(instance: Instance, r: int, scope: str) -> bool:
    if scope == "system":
        return True
    if scope == "fleet":
        return instance.trips[r].controlled
    raise ValueError(f"unknown objective scope {scope!r}")


def evaluate(instance: Instance, solution: Solution, schedule: Schedule, alpha: float = 1.0,
             scope: str = "system") -> CostBreakdown:
    congestion = detour = late = 0.0
    for r in range(instance.n_trips):
        if solution.route[r] < 0 or not in_scope(instance, r, scope):
            continue
        c, d, l = trip_terms(instance, solution, schedule, r)
        congestion += c
        detour += d
        late += l
    total = congestion + detour
    return CostBreakdown(total, congestion, detour, late, alpha, total + alpha * late)


def check_feasibility(instance: Instance, schedule: Schedule):
    return [r for r in range(len(schedule))
            if schedule.present(r) and schedule.arrival(r) > instance.trips[r].latest + EPS]


def recount_flows(schedule: Schedule):
    """Quadratic pairwise recount of every arc flow, independent of the sweep."""
    labels = {}
    for r, arcs in enumerate(schedule.arcs):
        for k, a in enumerate(arcs):
            labels.setdefault(a, []).append((schedule.dep[r][k], r, schedule.arr[r][k]))
    flows = [[0] * len(arcs) for arcs in schedule.arcs]
    for r, arcs in enumerate(schedule.arcs):
        for k, a in enumerate(arcs):
            theta = schedule.dep[r][k]
            count = 0
            for theta2, r2, omega2 in labels[a]:
                if r2 == r:
                    continue
                before = theta2 < theta or (theta2 == theta and r2 < r)
                if before and omega2 > theta + EPS:
                    count += 1
            flows[r][k] = count
    return flows


def write_schedule_csv(schedule: Schedule, path, header_comment: str | None = None):
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow(["trip", "arc", "departure_s", "arrival_s", "flow", "delay_s"])
        for row in schedule.rows():
            w.writerow([row[0], row[1], repr(row[2]), repr(row[3]), row[4], repr(row[5])])


def save_solution(solution: Solution, path, meta: dict | None = None):
    data = solution.to_json()
    if meta:
        data["meta"] = meta
    Path(path).write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


def load_solution(path) -> Solution:
    return Solution.from_json(json.loads(Path(path).read_text()))
