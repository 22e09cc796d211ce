import itertools

import pytest

from balstag.network import Arc, Network, NoPathError, grid_network, ring_network, shortest_path
from balstag.routes import Route, kspwlo, replay_certificate, similarity, single_via_candidates


def test_similarity_examples():
    net = Network([0, 1, 2, 3], [Arc(0, 0, 1, 100, 1), Arc(1, 1, 2, 200, 1), Arc(2, 1, 3, 300, 1),
                                 Arc(3, 2, 3, 50, 1)])
    p = Route.from_arcs(net, [0, 1])
    q = Route.from_arcs(net, [0, 2])
    assert similarity(net, p, p) == 1.0
    assert similarity(net, p, q) == pytest.approx(1 / 3)
    assert similarity(net, Route.from_arcs(net, [1]), Route.from_arcs(net, [2])) == 0.0
    with pytest.raises(ValueError):
        similarity(net, Route((), 0, 0), p)


def test_k1_is_shortest_path():
    net = grid_network(4, 4, seed=3)
    rs = kspwlo(net, 0, 15, k=1, theta=0.6)
    assert len(rs) == 1
    assert list(rs[0].arcs) == shortest_path(net, 0, 15)


def test_theta_one_gives_shortest_candidates():
    net = grid_network(4, 4, seed=4)
    cands = single_via_candidates(net, 1, 14)
    rs = kspwlo(net, 1, 14, k=4, theta=1.0)
    assert [r.arcs for r in rs] == [c.arcs for c in cands[:4]]


def test_parameter_errors():
    net = grid_network(3, 3)
    with pytest.raises(ValueError):
        kspwlo(net, 0, 8, k=0)
    with pytest.raises(ValueError):
        kspwlo(net, 0, 8, theta=0)
    with pytest.raises(ValueError):
        kspwlo(net, 0, 8, theta=1.5)
    oneway = Network([0, 1, 2], [Arc(0, 0, 1, 1, 1)])
    with pytest.raises(NoPathError):
        kspwlo(oneway, 0, 2)


def check_route_set(net, o, d, rs, theta):
    assert rs[0].arcs == tuple(shortest_path(net, o, d))
    lengths = [r.length for r in rs]
    assert lengths == sorted(lengths)
    for r in rs:
        r.check(net)
        assert net.arcs[r.arcs[0]].tail == o and net.arcs[r.arcs[-1]].head == d
    for p, q in itertools.combinations(rs, 2):
        assert similarity(net, p, q) <= theta + 1e-12
        assert p.arcs != q.arcs


@pytest.mark.parametrize("seed", range(5))
def test_route_set_invariants_6x6(seed):
    net = grid_network(6, 6, seed=seed)
    o, d = seed, 35 - seed
    rs = kspwlo(net, o, d, k=3, theta=0.6)
    check_route_set(net, o, d, rs, 0.6)
    assert replay_certificate(net, single_via_candidates(net, o, d), rs)


def test_ring_two_directions():
    net = ring_network(8, seed=1)
    rs = kspwlo(net, 0, 4, k=5, theta=0.6)
    # one path each way around, nothing else survives the overlap bound
    assert len(rs) == 2
    assert set(rs[0].arcs).isdisjoint(rs[1].arcs)


def test_certificate_detects_tampering():
    net = grid_network(5, 5, seed=9)
    rs = kspwlo(net, 0, 24, k=3, theta=0.6)
    cands = single_via_candidates(net, 0, 24)
    bad = type(rs)(tuple(reversed(rs.routes)), rs.k_requested, rs.theta)
    assert not replay_certificate(net, cands, bad)
