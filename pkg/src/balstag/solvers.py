"""Baselines (reactive user optimum, greedy insertion) and the LNS solver."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .incremental import Insert, ScheduleState
from .instance import Instance
from .moves import (
    IMPROVE_TOL,
    MoveContext,
    OperatorMode,
    Order,
    breakdown,
    insert,
    local_search,
    remove,
)
from .schedule import Solution, construct_schedule, evaluate

ALPHA_MIN, ALPHA_MAX = 1e-2, 1e3
VARIANTS = ("rduo", "greedy", "stag", "bal", "integ")


@dataclass
class LnsParams:
    pool_fraction: float = 0.4
    sample_fraction: float = 0.1
    max_cycles: int = 2
    time_limit: float = 60.0
    max_iterations: int | None = None
    seed: int = 0
    mode: OperatorMode = OperatorMode.INTEG
    alpha_initial: float = 10.0
    alpha_min: float = ALPHA_MIN
    alpha_max: float = ALPHA_MAX
    alpha_streak: int = 10
    grid: float | None = None
    multi_start: bool = True  # INTEG may start from the STAG or BAL construction

    def __post_init__(self):
        self.mode = OperatorMode.parse(self.mode)
        for name in ("pool_fraction", "sample_fraction"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must be in (0, 1], got {v}")
        if self.max_cycles < 1:
            raise ValueError("max_cycles must be >= 1")
        if not ALPHA_MIN <= self.alpha_min <= self.alpha_initial <= self.alpha_max <= ALPHA_MAX:
            raise ValueError(f"alpha bounds must satisfy {ALPHA_MIN} <= min <= initial <= max <= {ALPHA_MAX}")

    @classmethod
    def stag_preset(cls, **kw) -> "LnsParams":
        kw.setdefault("mode", OperatorMode.STAG)
        return cls(pool_fraction=0.5, sample_fraction=0.1, max_cycles=25, **kw)


@dataclass
class ControlScenario:
    control_fraction: float = 1.0
    objective: str = "welfare"
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.control_fraction <= 1:
            raise ValueError("control_fraction must be in [0, 1]")
        if self.objective not in ("welfare", "fleet"):
            raise ValueError(f"unknown objective {self.objective!r}")

    @property
    def scope(self) -> str:
        return "system" if self.objective == "welfare" else "fleet"

    def apply(self, instance: Instance) -> Instance:
        """Randomly designate controlled trips; the rest follow the baseline."""
        if self.control_fraction >= 1:
            return instance.with_control([True] * instance.n_trips)
        rng = np.random.default_rng([self.seed, 7])
        return instance.with_control(rng.random(instance.n_trips) < self.control_fraction)


# --------------------------------------------------------------------------
# Baselines

def build_rduo(instance: Instance) -> Solution:
    """Each trip departs at its earliest time on the route that is fastest for
    itself given the trips already on the network."""
    state = ScheduleState(instance)
    order = sorted(range(instance.n_trips), key=lambda r: (instance.trips[r].earliest, r))
    for r in order:
        trip = instance.trips[r]
        best = None
        for p in range(len(trip.routes)):
            update = state.apply(Insert(r, p, trip.earliest))
            travel = state.schedule.arrival(r) - trip.earliest
            if best is None or travel < best[0] - IMPROVE_TOL:
                best = (travel, p)
            state.rollback(update)
        state.apply(Insert(r, best[1], trip.earliest))
    return state.solution.copy()


def _controlled(instance: Instance):
    return [r for r, t in enumerate(instance.trips) if t.controlled]


def greedy_assignment(instance: Instance, mode=OperatorMode.INTEG, alpha: float = 10.0,
                      rduo: Solution | None = None, scope: str = "system", grid=None) -> Solution:
    """Insert controlled trips by ascending deadline at their cheapest
    assignment; uncontrolled trips stay at the reactive baseline."""
    mode = OperatorMode.parse(mode)
    rduo = rduo if rduo is not None else build_rduo(instance)
    ctx = MoveContext(mode=mode, alpha=alpha, fixed_routes=list(rduo.route), grid=grid)
    start = rduo.copy()
    controlled = _controlled(instance)
    for r in controlled:
        start.drop(r)
    state = ScheduleState(instance, start, scope=scope)
    insert(state, controlled, Order.DEADLINE, ctx)
    late = [r for r in controlled if state.trip_lateness(r) > 0]
    if late:
        local_search(state, late, ctx)
    return state.solution.copy()


# --------------------------------------------------------------------------
# LNS

@dataclass
class LnsResult:
    solution: Solution
    cost: float
    log: list
    alphas: list
    iterations: int
    timed_out: bool
    initial: str

    def log_without_time(self):
        return [{k: v for k, v in rec.items() if k != "t_s"} for rec in self.log]


class _Lns:
    def __init__(self, instance, params, scenario, rduo, greedy):
        self.instance = instance
        self.params = params
        self.scope = scenario.scope
        self.rng = np.random.default_rng(params.seed)
        self.alpha_ref = params.alpha_initial
        self.ctx = MoveContext(mode=params.mode, alpha=params.alpha_initial,
                               fixed_routes=list(rduo.route), grid=params.grid)
        self.movable = _controlled(instance)
        self.t0 = time.perf_counter()
        self.iterations = 0
        self.timed_out = False
        self.log = []
        self.alphas = [self.ctx.alpha]
        self.feasible_streak = self.infeasible_streak = 0

        c_rduo = self._fresh_cost(rduo)
        c_greedy = self._fresh_cost(greedy)
        if c_greedy < c_rduo:
            init, name, self.best = greedy, "greedy", c_greedy
        else:
            init, name, self.best = rduo, "rduo", c_rduo
        self.initial = name
        self.state = ScheduleState(instance, init, scope=self.scope)
        self._record("init:" + name)
        self.seen_delay = None
        self.seen_late = None

    def _fresh_cost(self, solution):
        sched = construct_schedule(self.instance, solution)
        return evaluate(self.instance, solution, sched, self.alpha_ref, self.scope).cost

    def _record(self, operator):
        b = breakdown(self.state, self.alpha_ref)
        self.log.append({
            "t_s": round(time.perf_counter() - self.t0, 6), "iteration": self.iterations,
            "cost": b.cost, "total_delay": b.total_delay, "congestion": b.congestion_delay,
            "detour": b.detour_delay, "infeasibility": b.infeasibility, "alpha": self.ctx.alpha,
            "operator": operator,
        })

    def _out_of_budget(self):
        p = self.params
        if p.max_iterations is not None and self.iterations >= p.max_iterations:
            return True
        if time.perf_counter() - self.t0 > p.time_limit:
            self.timed_out = True
            return True
        return False

    def _adapt_alpha(self):
        p = self.params
        if self.state.feasible:
            self.feasible_streak += 1
            self.infeasible_streak = 0
            if self.feasible_streak >= p.alpha_streak:
                self.ctx.alpha = max(p.alpha_min, self.ctx.alpha / 10)
                self.feasible_streak = 0
        else:
            self.infeasible_streak += 1
            self.feasible_streak = 0
            if self.infeasible_streak >= p.alpha_streak:
                self.ctx.alpha = min(p.alpha_max, self.ctx.alpha * 10)
                self.infeasible_streak = 0
        self.alphas.append(self.ctx.alpha)

    def _accept_if_better(self, operator) -> bool:
        """Keep the current state if it beats the incumbent after a full rebuild."""
        if self.state.cost(self.alpha_ref) >= self.best - IMPROVE_TOL:
            return False
        self.state.repair()
        cost = self.state.cost(self.alpha_ref)
        if cost >= self.best - IMPROVE_TOL:
            return False
        self.best = cost
        self._record(operator)
        return True

    def _pool(self, operator):
        st = self.state
        n = max(1, math.ceil(self.params.pool_fraction * len(self.movable)))
        if operator == "costly":
            ranked = sorted(self.movable, key=lambda r: (-st.trip_cost(r, self.ctx.alpha), r))
        else:
            sol = st.solution
            ranked = sorted(self.movable, key=lambda r: (sol.route[r] != 0, sol.start[r], r))
        pool = set(ranked[:n])
        pool.update(r for r in self.movable if st.trip_lateness(r) > 0)
        return sorted(pool)

    def _destroy_repair(self, pool, order):
        """Remove a random sample of the pool and reinsert it."""
        m = max(1, round(self.params.sample_fraction * len(pool)))
        sample = sorted(int(r) for r in self.rng.choice(pool, size=min(m, len(pool)), replace=False))
        st = self.state
        remove(st, sample, self.ctx)
        insert(st, sample, order, self.ctx)
        self._adapt_alpha()

    def _changed_trips(self):
        st = self.state
        delay = [st.trip_delay(r) for r in range(self.instance.n_trips)]
        late = [st.trip_lateness(r) for r in range(self.instance.n_trips)]
        if self.seen_delay is None:
            changed = list(self.movable)
        else:
            changed = [r for r in self.movable
                       if abs(delay[r] - self.seen_delay[r]) > IMPROVE_TOL
                       or abs(late[r] - self.seen_late[r]) > IMPROVE_TOL]
        self.seen_delay, self.seen_late = delay, late
        return changed

    def _run_operator(self, operator) -> bool:
        improved = False
        orders = [Order.EARLIEST, Order.DEADLINE, Order.DELAY]
        while not self._out_of_budget():
            pool = self._pool(operator)
            restart = False
            cycles = 0
            while cycles < self.params.max_cycles and not restart:
                for i in self.rng.permutation(len(orders)):
                    if self._out_of_budget():
                        return improved
                    self.iterations += 1
                    self.state.begin()
                    self._destroy_repair(pool, orders[i])
                    if self._accept_if_better(f"{operator}:{orders[i].value}"):
                        self.state.commit()
                        improved = restart = True
                        break
                    self.state.undo()
                cycles += 1
            if restart:
                continue
            if self._out_of_budget():
                break
            self.iterations += 1
            changed = self._changed_trips()
            self.state.begin()
            local_search(self.state, changed, self.ctx)
            if self._accept_if_better("local_search"):
                self.state.commit()
                improved = True
                continue
            self.state.undo()
            break
        return improved

    def run(self) -> LnsResult:
        if self.movable:
            while True:
                improved = False
                for operator in ("costly", "untouched"):
                    improved |= self._run_operator(operator)
                if not improved or self._out_of_budget():
                    break
        return LnsResult(self.state.solution.copy(), self.best, self.log, self.alphas,
                         self.iterations, self.timed_out, self.initial)


def initial_greedy(instance: Instance, params: LnsParams, scenario: ControlScenario,
                   rduo: Solution) -> Solution:
    """Greedy construction for ``params.mode``. The integrated mode admits the
    route-fixed and start-fixed constructions too, and keeps the cheapest."""
    modes = [params.mode]
    if params.mode is OperatorMode.INTEG and params.multi_start:
        modes += [OperatorMode.STAG, OperatorMode.BAL]
    best, best_cost = None, math.inf
    for mode in modes:
        sol = greedy_assignment(instance, mode, params.alpha_initial, rduo, scenario.scope, params.grid)
        cost = evaluate(instance, sol, construct_schedule(instance, sol), params.alpha_initial, scenario.scope).cost
        if cost < best_cost:
            best, best_cost = sol, cost
    return best


def lns(instance: Instance, params: LnsParams | None = None, scenario: ControlScenario | None = None,
        rduo: Solution | None = None, greedy: Solution | None = None) -> LnsResult:
    """Destroy-and-repair search started from the cheaper of the two baselines.

    ``instance`` must already carry the control flags of ``scenario``. The
    incumbent is compared at the initial infeasibility weight so that logged
    costs are comparable; the adaptive weight steers the repair moves only.
    """
    params = params or LnsParams()
    scenario = scenario or ControlScenario()
    rduo = rduo if rduo is not None else build_rduo(instance)
    if greedy is None:
        greedy = initial_greedy(instance, params, scenario, rduo)
    return _Lns(instance, params, scenario, rduo, greedy).run()


# --------------------------------------------------------------------------
# Variants and metrics

@dataclass
class VariantResult:
    variant: str
    solution: Solution
    metrics: dict
    trip_deltas: list
    arc_delays: list
    log: list = field(default_factory=list)
    alphas: list = field(default_factory=list)


def run_variant(instance: Instance, variant: str, params: LnsParams | None = None,
                scenario: ControlScenario | None = None, rduo: Solution | None = None,
                greedy: Solution | None = None) -> VariantResult:
    variant = str(variant).lower()
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {', '.join(VARIANTS)}")
    params = params or LnsParams()
    scenario = scenario or ControlScenario()
    t0 = time.perf_counter()
    rduo = rduo if rduo is not None else build_rduo(instance)
    log, alphas, timed_out = [], [], False
    alpha = params.alpha_initial
    if variant == "rduo":
        solution = rduo
    elif variant == "greedy":
        solution = greedy if greedy is not None else greedy_assignment(
            instance, OperatorMode.INTEG, alpha, rduo, scenario.scope, params.grid)
    else:
        p = replace(params, mode=OperatorMode.parse(variant))
        res = lns(instance, p, scenario, rduo, greedy)
        solution, log, alphas, timed_out = res.solution, res.log, res.alphas, res.timed_out
    runtime = time.perf_counter() - t0
    sched = construct_schedule(instance, solution)
    cost = evaluate(instance, solution, sched, alpha, scenario.scope)
    base_sched = construct_schedule(instance, rduo)
    metrics = {"variant": variant, **cost.to_dict(), "feasible": cost.feasible,
               "runtime_s": runtime, "seed": params.seed, "timed_out": timed_out,
               "n_trips": instance.n_trips}
    deltas = []
    for r in range(instance.n_trips):
        if solution.route[r] < 0:
            continue
        travel = sched.arrival(r) - solution.start[r]
        base_travel = base_sched.arrival(r) - rduo.start[r]
        deltas.append({"trip": r, "route_index": solution.route[r], "start_s": solution.start[r],
                       "stagger_s": solution.start[r] - instance.trips[r].earliest,
                       "travel_delta_s": travel - base_travel,
                       "arrival_delta_s": sched.arrival(r) - base_sched.arrival(r),
                       "controlled": instance.trips[r].controlled})
    per_arc = {}
    for r, a, _, _, f, d in sched.rows():
        tot, cnt, mx = per_arc.get(a, (0.0, 0, 0))
        per_arc[a] = (tot + d, cnt + 1, max(mx, f))
    arc_delays = [{"arc": a, "total_delay_s": v[0], "trips": v[1], "max_flow": v[2]}
                  for a, v in sorted(per_arc.items())]
    return VariantResult(variant, solution, metrics, deltas, arc_delays, log, alphas)
