"""Alternative route sets: k shortest paths with limited overlap via single-via paths."""
from __future__ import annotations

from dataclasses import dataclass

from .network import Network, NoPathError, shortest_path, shortest_path_tree, tree_path

DEFAULT_K = 5
DEFAULT_THETA = 0.6


@dataclass(frozen=True)
class Route:
    arcs: tuple
    length: float
    free_flow_time: float

    @classmethod
    def from_arcs(cls, network: Network, arcs) -> "Route":
        arcs = tuple(int(a) for a in arcs)
        return cls(arcs, network.path_weight(arcs, "length"), network.path_weight(arcs, "nominal_time"))

    def __len__(self):
        return len(self.arcs)

    def check(self, network: Network):
        if not self.arcs:
            raise ValueError("empty route")
        if not network.is_path(self.arcs):
            raise ValueError(f"route {self.arcs} is not connected head-to-tail")
        if len(set(self.arcs)) != len(self.arcs):
            raise ValueError(f"route {self.arcs} repeats an arc")
        if abs(self.length - network.path_weight(self.arcs, "length")) > 1e-6:
            raise ValueError("route length does not match its arcs")
        if abs(self.free_flow_time - network.path_weight(self.arcs, "nominal_time")) > 1e-6:
            raise ValueError("route free-flow time does not match its arcs")


@dataclass(frozen=True)
class RouteSet:
    routes: tuple
    k_requested: int
    theta: float

    def __len__(self):
        return len(self.routes)

    def __getitem__(self, i):
        return self.routes[i]

    def __iter__(self):
        return iter(self.routes)

    @property
    def shortest(self) -> Route:
        return self.routes[0]


def similarity(network: Network, p: Route, q: Route) -> float:
    """Shared length over the shorter route's length."""
    if not p.arcs or not q.arcs:
        raise ValueError("similarity is undefined for empty routes")
    shared = set(p.arcs) & set(q.arcs)
    overlap = sum(network.arcs[a].length for a in shared)
    return overlap / min(p.length, q.length)


def _path_nodes(network: Network, origin: int, arcs) -> list:
    nodes = [origin]
    for a in arcs:
        nodes.append(network.arcs[a].head)
    return nodes


def single_via_candidates(network: Network, origin: int, dest: int):
    """Simple single-via paths sorted by (length, via node id), deduplicated.

    The forward shortest path is always first.
    """
    fwd_dist, fwd_pred = shortest_path_tree(network, origin, "length")
    if dest not in fwd_dist:
        raise NoPathError(f"no path from {origin} to {dest}")
    bwd_dist, bwd_pred = shortest_path_tree(network, dest, "length", reverse=True)

    best = shortest_path(network, origin, dest, "length")
    seen = {tuple(best)}
    candidates = [(network.path_weight(best), -1, tuple(best))]
    for via in sorted(fwd_dist):
        if via not in bwd_dist:
            continue
        head = tree_path(network, fwd_pred, origin, via)
        tail = tree_path(network, bwd_pred, dest, via, reverse=True)
        arcs = tuple(head + tail)
        if not arcs or arcs in seen:
            continue
        nodes = _path_nodes(network, origin, arcs)
        if len(set(nodes)) != len(nodes):
            continue
        seen.add(arcs)
        candidates.append((fwd_dist[via] + bwd_dist[via], via, arcs))
    candidates.sort(key=lambda c: (round(c[0], 6), c[1]))
    return [Route.from_arcs(network, arcs) for _, _, arcs in candidates]


def greedy_select(network: Network, candidates, k: int, theta: float):
    accepted = []
    for cand in candidates:
        if len(accepted) >= k:
            break
        if all(similarity(network, cand, r) <= theta + 1e-12 for r in accepted):
            accepted.append(cand)
    return accepted


def kspwlo(network: Network, origin: int, dest: int, k=DEFAULT_K, theta=DEFAULT_THETA) -> RouteSet:
    """Up to ``k`` short routes whose pairwise similarity is at most ``theta``.

    May return fewer than ``k`` routes when the single-via candidates run out.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not 0 < theta <= 1:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    if origin == dest:
        raise ValueError("origin and destination must differ")
    candidates = single_via_candidates(network, origin, dest)
    return RouteSet(tuple(greedy_select(network, candidates, k, theta)), k, theta)


def replay_certificate(network: Network, candidates, route_set: RouteSet) -> bool:
    """Replay the greedy pass over ``candidates`` and compare with ``route_set``."""
    expected = greedy_select(network, candidates, route_set.k_requested, route_set.theta)
    return [r.arcs for r in expected] == [r.arcs for r in route_set.routes]
