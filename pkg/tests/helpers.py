"""Small hand-built instances and random generators shared by the tests."""
import numpy as np

from balstag.instance import Instance, Trip, generate_synthetic
from balstag.network import DEFAULT_SPEED, Arc, Network, PiecewiseLinear, grid_network
from balstag.routes import Route, RouteSet
from balstag.schedule import Solution

UNIT_SLOPE = PiecewiseLinear((1.0,), (0.0,))


def arc(i, tail, head, tau):
    return Arc(i, tail, head, tau * DEFAULT_SPEED, float(tau))


def trip(network, i, routes, earliest=0.0, latest=1e6, max_stagger=0.0, controlled=True):
    rs = RouteSet(tuple(Route.from_arcs(network, r) for r in routes), len(routes), 1.0)
    first, last = network.arcs[routes[0][0]], network.arcs[routes[0][-1]]
    return Trip(i, first.tail, last.head, float(earliest), float(latest), float(max_stagger), rs, controlled)


def one_arc_instance(n_trips, tau=10.0, spec=UNIT_SLOPE, earliest=None, max_stagger=0.0, latest=1e6):
    """Every trip uses the single arc 0 -> 1."""
    net = Network([0, 1], [arc(0, 0, 1, tau)])
    earliest = earliest if earliest is not None else [0.0] * n_trips
    trips = [trip(net, i, [[0]], earliest[i], latest, max_stagger) for i in range(n_trips)]
    return Instance(net, spec, trips)


def two_route_network():
    """Direct arc 0->1 (10 s) and a detour 0->2->1 (6 s + 6 s)."""
    return Network([0, 1, 2], [arc(0, 0, 1, 10), arc(1, 0, 2, 6), arc(2, 2, 1, 6)])


def random_instance(seed, n_trips=20, size=3, horizon=120.0, spec=None, k=3, sigma=0.3):
    rng = np.random.default_rng(seed)
    net = grid_network(size, size, seed=seed)
    if spec is None:
        spec = UNIT_SLOPE if rng.random() < 0.5 else None
    return generate_synthetic(net, n_trips, seed=seed, horizon=horizon, delay_spec=spec, k=k,
                              sigma_fraction=sigma)


def random_solution(instance, rng, p_present=1.0):
    sol = Solution.empty(instance.n_trips)
    for r, t in enumerate(instance.trips):
        if rng.random() < p_present:
            sol.assign(r, int(rng.integers(len(t.routes))), t.earliest + rng.random() * t.max_stagger)
    return sol


ACCEPTANCE_LINES = []


def verdict(label, ok, detail=""):
    """Record and print one pass/fail line; the summary hook repeats them at the end."""
    line = f"{label}: {'PASS' if ok else 'FAIL'}" + (f"  {detail}" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok
