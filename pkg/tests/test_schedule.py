import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from balstag import kernels
from balstag.schedule import (
    Solution,
    SolutionError,
    check_feasibility,
    check_solution,
    construct_schedule,
    evaluate,
    load_solution,
    recount_flows,
    save_solution,
    write_schedule_csv,
)

from helpers import one_arc_instance, random_instance, random_solution

BACKENDS = [kernels.python] + ([kernels.compiled] if kernels.compiled else [])


@pytest.mark.parametrize("backend", BACKENDS)
def test_two_trip_hand_trace(backend):
    inst = one_arc_instance(2, earliest=[0.0, 5.0])
    sol = Solution([0, 0], [0.0, 5.0])
    s = construct_schedule(inst, sol, backend)
    assert (s.flow[0], s.arr[0]) == ([0], [10.0])
    assert (s.flow[1], s.delay[1], s.arr[1]) == ([1], [1.0], [16.0])
    c = evaluate(inst, sol, s)
    assert (c.total_delay, c.congestion_delay, c.detour_delay, c.infeasibility) == (1.0, 1.0, 0.0, 0.0)


def test_hand_trace_deadline_violation():
    inst = one_arc_instance(2, earliest=[0.0, 5.0], latest=15.0)
    sol = Solution([0, 0], [0.0, 5.0])
    s = construct_schedule(inst, sol)
    assert check_feasibility(inst, s) == [1]
    c = evaluate(inst, sol, s, alpha=10)
    assert c.infeasibility == 1.0 and c.cost == 11.0 and not c.feasible


def test_exit_at_entry_instant_does_not_count():
    inst = one_arc_instance(2, earliest=[0.0, 10.0])
    s = construct_schedule(inst, Solution([0, 0], [0.0, 10.0]))
    assert s.flow[1] == [0] and s.arr[1] == [20.0]


def test_simultaneous_entry_tie_broken_by_trip_id():
    inst = one_arc_instance(3)
    s = construct_schedule(inst, Solution([0, 0, 0], [0.0, 0.0, 0.0]))
    assert [f[0] for f in s.flow] == [0, 1, 2]


def test_empty_and_single():
    inst = one_arc_instance(2)
    empty = Solution.empty(2)
    s = construct_schedule(inst, empty)
    assert s.arcs == [(), ()]
    assert evaluate(inst, empty, s).to_dict() == dict(total_delay=0.0, congestion_delay=0.0, detour_delay=0.0,
                                                    infeasibility=0.0, alpha=1.0, cost=0.0)
    inst = random_instance(1, n_trips=1)
    sol = Solution([0], [inst.trips[0].earliest])
    s = construct_schedule(inst, sol)
    assert all(d == 0 for d in s.delay[0])
    assert s.arrival(0) == pytest.approx(sol.start[0] + inst.trips[0].shortest_free_flow)
    assert evaluate(inst, sol, s).total_delay == pytest.approx(0.0, abs=1e-9)
    assert check_feasibility(inst, s) == []


def schedule_invariants(inst, sol, s):
    for r, arcs in enumerate(s.arcs):
        if sol.route[r] < 0:
            assert arcs == ()
            continue
        assert s.dep[r][0] == sol.start[r]
        for k, a in enumerate(arcs):
            tau = inst.network.arcs[a].nominal_time
            assert s.arr[r][k] == pytest.approx(s.dep[r][k] + tau + s.delay[r][k], abs=1e-9)
            assert s.delay[r][k] == inst.delays.delay(a, s.flow[r][k])
            if k:
                assert s.dep[r][k] == s.arr[r][k - 1]


@given(st.integers(0, 10**6), st.floats(0.3, 1.0))
def test_sweep_matches_recount(seed, p):
    inst = random_instance(seed % 50, n_trips=12, horizon=60)
    sol = random_solution(inst, np.random.default_rng(seed), p)
    s = construct_schedule(inst, sol)
    assert s.flow == recount_flows(s)
    schedule_invariants(inst, sol, s)
    c = evaluate(inst, sol, s, alpha=3.0)
    assert c.total_delay == pytest.approx(c.congestion_delay + c.detour_delay)
    assert c.cost == pytest.approx(c.total_delay + 3.0 * c.infeasibility)
    assert min(c.congestion_delay, c.detour_delay, c.infeasibility) >= -1e-9


def test_five_trips_3x3_recount():
    for seed in range(20):
        inst = random_instance(seed, n_trips=5, horizon=20)
        s = construct_schedule(inst, random_solution(inst, np.random.default_rng(seed)))
        assert s.flow == recount_flows(s)


def test_fleet_scope_counts_controlled_only():
    inst = random_instance(3, n_trips=10, horizon=30)
    inst = inst.with_control([r % 2 == 0 for r in range(10)])
    sol = random_solution(inst, np.random.default_rng(0))
    s = construct_schedule(inst, sol)
    system = evaluate(inst, sol, s, scope="system")
    fleet = evaluate(inst, sol, s, scope="fleet")
    assert fleet.total_delay <= system.total_delay + 1e-12
    with pytest.raises(ValueError):
        evaluate(inst, sol, s, scope="city")


def test_check_solution():
    inst = one_arc_instance(2, max_stagger=5)
    check_solution(inst, Solution([0, -1], [3.0, math.nan]))
    for bad in (Solution([0], [0.0]), Solution([1, 0], [0.0, 0.0]), Solution([0, 0], [6.0, 0.0])):
        with pytest.raises(SolutionError):
            check_solution(inst, bad)


def test_files(tmp_path):
    inst = one_arc_instance(2, earliest=[0.0, 5.0])
    sol = Solution([0, 0], [0.0, 5.0])
    save_solution(sol, tmp_path / "s.json", meta={"config_hash": "abc"})
    assert load_solution(tmp_path / "s.json").same_as(sol)
    write_schedule_csv(construct_schedule(inst, sol), tmp_path / "s.csv", "config_hash=abc")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "# config_hash=abc"
    rows = list(csv.DictReader(lines[1:]))
    assert rows[1] == {"trip": "1", "arc": "0", "departure_s": "5.0", "arrival_s": "16.0", "flow": "1",
                       "delay_s": "1.0"}
