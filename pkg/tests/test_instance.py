import json

import pytest

from balstag.instance import (
    Instance,
    InstanceError,
    generate_synthetic,
    instance_from_json,
    instance_to_json,
    load_instance,
    save_instance,
)
from balstag.network import Arc, Network, PiecewiseRecipe, grid_network

from helpers import arc, trip


def two_node():
    return Network([0, 1], [Arc(0, 0, 1, 2083.333, 300.0)])


def test_single_trip_two_node_network():
    inst = generate_synthetic(two_node(), 1, seed=3, sigma_fraction=0.1)
    t = inst.trips[0]
    assert len(t.routes) == 1 and t.routes[0].arcs == (0,)
    assert t.max_stagger == pytest.approx(30.0)
    assert t.latest == pytest.approx(t.earliest + 375.0)


def test_deadline_arithmetic():
    inst = generate_synthetic(two_node(), 1, seed=3)
    t = inst.trips[0]
    fixed = inst.with_trips([type(t)(0, 0, 1, 100.0, 100 + 1.25 * 300, 60.0, t.routes)])
    assert fixed.trips[0].latest == 475.0


def test_generation_deterministic_and_prefix_stable():
    net = grid_network(4, 4, seed=1)
    a = generate_synthetic(net, 30, seed=5)
    b = generate_synthetic(net, 30, seed=5)
    c = generate_synthetic(net, 40, seed=5)
    assert a == b
    assert a.trips == c.trips[:30]
    assert generate_synthetic(net, 30, seed=6).trips != a.trips


def test_generation_invariants():
    net = grid_network(4, 4, seed=2)
    inst = generate_synthetic(net, 50, seed=1, arrival_profile="peak", sigma_fraction=0.3)
    for t in inst.trips:
        assert 0 <= t.earliest < 3600 and t.earliest == int(t.earliest)
        assert t.earliest + t.shortest_free_flow <= t.latest
        assert t.max_stagger == pytest.approx(0.3 * t.shortest_free_flow, abs=1e-6)


def test_rduo_deadline_policy():
    net = grid_network(3, 3, seed=2)
    inst = generate_synthetic(net, 40, seed=1, horizon=60, deadline_policy="rduo")
    free = generate_synthetic(net, 40, seed=1, horizon=60)
    assert all(a.latest >= b.latest - 1e-9 for a, b in zip(inst.trips, free.trips))


def test_generation_errors():
    net = grid_network(3, 3)
    with pytest.raises(ValueError):
        generate_synthetic(net, 0)
    with pytest.raises(ValueError):
        generate_synthetic(net, 3, arrival_profile="bursty")
    with pytest.raises(ValueError):
        generate_synthetic(net, 3, deadline_policy="never")


def test_round_trip(tmp_path):
    inst = generate_synthetic(grid_network(4, 4, seed=0), 25, seed=2, delay_spec=PiecewiseRecipe())
    path = tmp_path / "inst.json"
    save_instance(inst, path, meta={"note": "x"})
    assert load_instance(path) == inst
    assert instance_from_json(instance_to_json(inst)) == inst


FIXTURE = {
    "network": {
        "nodes": [0, 1, 2],
        "arcs": [
            {"id": 0, "tail": 0, "head": 1, "length_m": 100.0, "nominal_s": 18.0},
            {"id": 1, "tail": 1, "head": 2, "length_m": 200.0, "nominal_s": 36.0},
            {"id": 2, "tail": 0, "head": 2, "length_m": 350.0, "nominal_s": 63.0},
        ],
    },
    "delay": {"type": "polynomial", "alpha": 0.1, "beta": 35, "gamma": 3},
    "trips": [
        {"id": 0, "origin": 0, "dest": 2, "earliest_s": 0, "latest_s": 100, "max_stagger_s": 10,
         "routes": [[0, 1], [2]]},
        {"id": 1, "origin": 0, "dest": 1, "earliest_s": 5, "latest_s": 40, "max_stagger_s": 0,
         "routes": [[0]], "controlled": False},
        {"id": 2, "origin": 1, "dest": 2, "earliest_s": 12.5, "latest_s": 60, "max_stagger_s": 3.5,
         "routes": [[1]]},
    ],
}


def test_hand_fixture():
    inst = instance_from_json(json.loads(json.dumps(FIXTURE)))
    assert inst.n_trips == 3
    t0, t1, t2 = inst.trips
    assert t0.routes[0].free_flow_time == 54.0 and t0.routes[1].free_flow_time == 63.0
    assert t0.routes[0].length == 300.0
    assert not t1.controlled and t0.controlled
    assert (t2.earliest, t2.latest, t2.max_stagger, t2.latest_start) == (12.5, 60.0, 3.5, 16.0)


def mutate(fn):
    data = json.loads(json.dumps(FIXTURE))
    fn(data)
    return data


@pytest.mark.parametrize("change, fragment", [
    (lambda d: d["trips"][1]["routes"][0].__setitem__(0, 9), "$.trips[1].routes[0][0]: arc 9 does not exist (trip 1)"),
    (lambda d: d["trips"][0].pop("latest_s"), "latest_s"),
    (lambda d: d["trips"][2].__setitem__("max_stagger_s", -1), "$.trips[2].max_stagger_s"),
    (lambda d: d["network"]["arcs"][0].__setitem__("length_m", "far"), "$.network.arcs[0].length_m"),
    (lambda d: d["trips"][0].__setitem__("routes", [[1, 0]]), "trip 0"),
    (lambda d: d["trips"][1].__setitem__("latest_s", 10), "trip 1"),
    (lambda d: d["delay"].__setitem__("type", "cubic"), "$.delay"),
])
def test_malformed(change, fragment):
    with pytest.raises(InstanceError) as err:
        instance_from_json(mutate(change))
    assert fragment in str(err.value)


def test_instance_validation_direct():
    net = Network([0, 1], [arc(0, 0, 1, 10)])
    good = trip(net, 0, [[0]], 0, 20)
    with pytest.raises(InstanceError):
        Instance(net, None, [trip(net, 1, [[0]])])
    with pytest.raises(InstanceError):
        Instance(net, None, [type(good)(0, 0, 1, 0.0, 5.0, 0.0, good.routes)])
