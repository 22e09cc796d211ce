"""Road network, congestion delay functions and free-flow shortest paths."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

# Global absolute tolerance for time comparisons, in seconds.
EPS = 1e-9

# 20 km/h in m/s
DEFAULT_SPEED = 20.0 / 3.6


class NetworkError(ValueError):
    pass


class NoPathError(NetworkError):
    pass


class DelaySpecError(ValueError):
    pass


@dataclass(frozen=True)
class Arc:
    id: int
    tail: int
    head: int
    length: float
    nominal_time: float

    def __post_init__(self):
        if not self.length > 0:
            raise NetworkError(f"arc {self.id}: length must be > 0, got {self.length}")
        if not self.nominal_time > 0:
            raise NetworkError(f"arc {self.id}: nominal_time must be > 0, got {self.nominal_time}")
        if self.tail == self.head:
            raise NetworkError(f"arc {self.id}: self-loop on node {self.tail}")


class Network:
    """Directed graph with dense arc ids ``0..|A|-1``. Immutable after construction."""

    def __init__(self, nodes, arcs):
        self.nodes = tuple(sorted(set(nodes)))
        self.arcs = tuple(arcs)
        node_set = set(self.nodes)
        self.out_adjacency = {v: [] for v in self.nodes}
        self.in_adjacency = {v: [] for v in self.nodes}
        for i, arc in enumerate(self.arcs):
            if arc.id != i:
                raise NetworkError(f"arc ids must be dense 0..{len(self.arcs) - 1}; position {i} has id {arc.id}")
            if arc.tail not in node_set or arc.head not in node_set:
                raise NetworkError(f"arc {arc.id} references an undeclared node ({arc.tail}->{arc.head})")
            self.out_adjacency[arc.tail].append(arc.id)
            self.in_adjacency[arc.head].append(arc.id)
        for adj in (self.out_adjacency, self.in_adjacency):
            for v in adj:
                adj[v] = tuple(sorted(adj[v]))
        self.nominal = np.array([a.nominal_time for a in self.arcs], dtype=np.float64)
        self.length = np.array([a.length for a in self.arcs], dtype=np.float64)

    def __len__(self):
        return len(self.arcs)

    def __eq__(self, other):
        return isinstance(other, Network) and self.nodes == other.nodes and self.arcs == other.arcs

    def __repr__(self):
        return f"Network(nodes={len(self.nodes)}, arcs={len(self.arcs)})"

    def is_path(self, arc_ids) -> bool:
        for a, b in zip(arc_ids, arc_ids[1:]):
            if self.arcs[a].head != self.arcs[b].tail:
                return False
        return True

    def path_weight(self, arc_ids, weight="length") -> float:
        values = self.length if weight == "length" else self.nominal
        return float(sum(values[a] for a in arc_ids))

    def to_json(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "arcs": [
                {"id": a.id, "tail": a.tail, "head": a.head, "length_m": a.length, "nominal_s": a.nominal_time}
                for a in self.arcs
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Network":
        arcs = [Arc(int(a["id"]), int(a["tail"]), int(a["head"]), float(a["length_m"]), float(a["nominal_s"]))
                for a in data["arcs"]]
        arcs.sort(key=lambda a: a.id)
        return cls([int(v) for v in data["nodes"]], arcs)


# --------------------------------------------------------------------------
# Delay functions

@dataclass(frozen=True)
class Polynomial:
    """``tau * alpha * [((f + beta) / tau)^gamma - (beta / tau)^gamma]``."""

    alpha: float = 0.1
    beta: float = 35.0
    gamma: float = 3.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise DelaySpecError(f"polynomial alpha must be > 0, got {self.alpha}")
        if not self.beta >= 0:
            raise DelaySpecError(f"polynomial beta must be >= 0, got {self.beta}")
        if not self.gamma >= 1:
            raise DelaySpecError(f"polynomial gamma must be >= 1, got {self.gamma}")


@dataclass(frozen=True)
class PiecewiseLinear:
    """Convex piecewise-linear delay with cumulative slopes past each threshold."""

    slopes: tuple
    thresholds: tuple

    def __post_init__(self):
        object.__setattr__(self, "slopes", tuple(float(s) for s in self.slopes))
        object.__setattr__(self, "thresholds", tuple(float(p) for p in self.thresholds))
        if len(self.slopes) < 1 or len(self.slopes) != len(self.thresholds):
            raise DelaySpecError("piecewise delay needs K >= 1 matching slopes and thresholds")
        if any(not s > 0 for s in self.slopes):
            raise DelaySpecError(f"piecewise slopes must be > 0, got {self.slopes}")
        if any(p < 0 for p in self.thresholds):
            raise DelaySpecError(f"piecewise thresholds must be >= 0, got {self.thresholds}")
        if any(b <= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise DelaySpecError(f"piecewise thresholds must be strictly increasing, got {self.thresholds}")


@dataclass(frozen=True)
class PiecewiseRecipe:
    """Per-arc piecewise delay derived from nominal time and a capacity headway.

    First breakpoint is ``ceil(tau / headway)`` trips, the k-th is k times that,
    and the k-th slope is ``0.5 * k * tau / p1``.
    """

    headway_s: float = 15.0
    segments: int = 3

    def __post_init__(self):
        if not self.headway_s > 0:
            raise DelaySpecError(f"headway_s must be > 0, got {self.headway_s}")
        if int(self.segments) != self.segments or self.segments < 1:
            raise DelaySpecError(f"segments must be an integer >= 1, got {self.segments}")

    def for_arc(self, nominal_time: float) -> PiecewiseLinear:
        p1 = math.ceil(nominal_time / self.headway_s - 1e-12)
        p1 = max(p1, 1)
        ks = range(1, int(self.segments) + 1)
        return PiecewiseLinear(
            slopes=tuple(0.5 * k * nominal_time / p1 for k in ks),
            thresholds=tuple(float(k * p1) for k in ks),
        )


DelaySpec = Union[Polynomial, PiecewiseLinear, PiecewiseRecipe]


def compute_delay(spec: DelaySpec, nominal_time: float, flow: int) -> float:
    if flow < 0:
        raise ValueError(f"flow must be nonnegative, got {flow}")
    if isinstance(spec, Polynomial):
        if flow == 0:
            return 0.0
        t = nominal_time
        return t * spec.alpha * (((flow + spec.beta) / t) ** spec.gamma - (spec.beta / t) ** spec.gamma)
    if isinstance(spec, PiecewiseRecipe):
        spec = spec.for_arc(nominal_time)
    if isinstance(spec, PiecewiseLinear):
        best = 0.0
        acc = 0.0
        for mu, p in zip(spec.slopes, spec.thresholds):
            acc += mu * (flow - p)
            if acc > best:
                best = acc
        return best
    raise DelaySpecError(f"unknown delay spec {spec!r}")


def compute_travel_time(spec: DelaySpec, nominal_time: float, flow: int) -> float:
    return nominal_time + compute_delay(spec, nominal_time, flow)


def delay_spec_to_json(spec: DelaySpec) -> dict:
    if isinstance(spec, Polynomial):
        return {"type": "polynomial", "alpha": spec.alpha, "beta": spec.beta, "gamma": spec.gamma}
    if isinstance(spec, PiecewiseRecipe):
        return {"type": "piecewise", "headway_s": spec.headway_s, "segments": spec.segments}
    if isinstance(spec, PiecewiseLinear):
        return {"type": "piecewise_fixed", "slopes": list(spec.slopes), "thresholds": list(spec.thresholds)}
    raise DelaySpecError(f"unknown delay spec {spec!r}")


def delay_spec_from_json(data: dict) -> DelaySpec:
    kind = data.get("type")
    if kind == "polynomial":
        return Polynomial(float(data["alpha"]), float(data["beta"]), float(data["gamma"]))
    if kind == "piecewise":
        return PiecewiseRecipe(float(data.get("headway_s", 15.0)), int(data.get("segments", 3)))
    if kind == "piecewise_fixed":
        return PiecewiseLinear(tuple(data["slopes"]), tuple(data["thresholds"]))
    raise DelaySpecError(f"unknown delay spec type {kind!r}")


class ArcDelays:
    """Per-arc delay evaluation with memoised integer-flow tables."""

    def __init__(self, network: Network, spec: DelaySpec):
        self.spec = spec
        self.nominal = [a.nominal_time for a in network.arcs]
        if isinstance(spec, PiecewiseRecipe):
            self.per_arc = [spec.for_arc(t) for t in self.nominal]
        else:
            self.per_arc = [spec] * len(self.nominal)
        self._tables = [[0.0] for _ in self.nominal]

    def delay(self, arc: int, flow: int) -> float:
        table = self._tables[arc]
        if flow >= len(table):
            spec, tau = self.per_arc[arc], self.nominal[arc]
            table.extend(compute_delay(spec, tau, f) for f in range(len(table), flow + 1))
        return table[flow]

    def kernel_params(self):
        """Flat parameter block consumed by the schedule kernels."""
        n = len(self.nominal)
        if isinstance(self.spec, Polynomial):
            return (0, self.spec.alpha, self.spec.beta, self.spec.gamma,
                    np.zeros((n, 1)), np.zeros((n, 1)))
        k = len(self.per_arc[0].slopes) if n else 1
        slopes = np.zeros((n, k))
        thresholds = np.zeros((n, k))
        for a, pw in enumerate(self.per_arc):
            if len(pw.slopes) != k:
                raise DelaySpecError("all arcs must share the number of piecewise segments")
            slopes[a] = pw.slopes
            thresholds[a] = pw.thresholds
        return (1, 0.0, 0.0, 1.0, slopes, thresholds)


# --------------------------------------------------------------------------
# Shortest paths

def _weights(network: Network, weight: str):
    if weight == "length":
        return network.length
    if weight in ("nominal_time", "time"):
        return network.nominal
    raise ValueError(f"unknown weight {weight!r}")


def shortest_path_tree(network: Network, source: int, weight="length", reverse=False):
    """Dijkstra from ``source`` (or towards it when ``reverse``).

    Returns ``(dist, pred)`` where ``pred[v]`` is the arc entering ``v`` on the
    tree (leaving ``v`` when reversed). Ties prefer the smaller arc id.
    """
    w = _weights(network, weight)
    adj = network.in_adjacency if reverse else network.out_adjacency
    dist = {source: 0.0}
    pred = {}
    done = set()
    heap = [(0.0, source)]
    while heap:
        d, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        for a in adj[v]:
            arc = network.arcs[a]
            u = arc.tail if reverse else arc.head
            if u in done:
                continue
            nd = d + w[a]
            old = dist.get(u)
            if old is None or nd < old - 1e-12:
                dist[u] = nd
                pred[u] = a
                heapq.heappush(heap, (nd, u))
            elif abs(nd - old) <= 1e-12 and a < pred[u]:
                pred[u] = a
    return dist, pred


def tree_path(network: Network, pred: dict, source: int, target: int, reverse=False):
    """Arc list from the tree; for reverse trees the path runs target -> source."""
    path = []
    v = target
    while v != source:
        a = pred.get(v)
        if a is None:
            raise NoPathError(f"no path between {source} and {target}")
        path.append(a)
        v = network.arcs[a].head if reverse else network.arcs[a].tail
    if not reverse:
        path.reverse()
    return path


def shortest_path(network: Network, origin: int, dest: int, weight="length"):
    if origin not in network.out_adjacency or dest not in network.out_adjacency:
        raise NetworkError(f"unknown node in ({origin}, {dest})")
    if origin == dest:
        return []
    dist, pred = shortest_path_tree(network, origin, weight)
    if dest not in dist:
        raise NoPathError(f"no path from {origin} to {dest}")
    return tree_path(network, pred, origin, dest)


# --------------------------------------------------------------------------
# Synthetic networks

def _arc_pair(arcs, u, v, length, speed):
    arcs.append(Arc(len(arcs), u, v, length, length / speed))
    arcs.append(Arc(len(arcs), v, u, length, length / speed))


def grid_network(rows: int, cols: int, spacing=150.0, jitter=0.3, speed=DEFAULT_SPEED, seed=0) -> Network:
    """Bidirectional grid; arc lengths are ``spacing`` scaled by U(1-jitter, 1+jitter)."""
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise NetworkError("grid needs at least two nodes")
    rng = np.random.default_rng([seed, 17])
    arcs = []
    node = lambda i, j: i * cols + j  # noqa: E731
    for i in range(rows):
        for j in range(cols):
            if j + 1 < cols:
                length = float(spacing * rng.uniform(1 - jitter, 1 + jitter))
                _arc_pair(arcs, node(i, j), node(i, j + 1), round(length, 3), speed)
            if i + 1 < rows:
                length = float(spacing * rng.uniform(1 - jitter, 1 + jitter))
                _arc_pair(arcs, node(i, j), node(i + 1, j), round(length, 3), speed)
    return Network(range(rows * cols), arcs)


def ring_network(n: int, chords=0, spacing=150.0, jitter=0.3, speed=DEFAULT_SPEED, seed=0) -> Network:
    """Bidirectional ring with ``chords`` random bidirectional shortcuts."""
    if n < 3:
        raise NetworkError("ring needs at least three nodes")
    rng = np.random.default_rng([seed, 29])
    arcs = []
    for i in range(n):
        length = float(spacing * rng.uniform(1 - jitter, 1 + jitter))
        _arc_pair(arcs, i, (i + 1) % n, round(length, 3), speed)
    seen = {(min(i, (i + 1) % n), max(i, (i + 1) % n)) for i in range(n)}
    tries = 0
    while chords > 0 and tries < 50 * n:
        tries += 1
        u, v = sorted(int(x) for x in rng.choice(n, size=2, replace=False))
        if (u, v) in seen:
            continue
        seen.add((u, v))
        gap = min(v - u, n - (v - u))
        length = float(spacing * gap * rng.uniform(0.6, 1.0))
        _arc_pair(arcs, u, v, round(length, 3), speed)
        chords -= 1
    return Network(range(n), arcs)


def parse_network_spec(text: str, seed=0) -> Network:
    """``grid:RxC`` or ``ring:N[+CHORDS]``."""
    kind, _, rest = text.partition(":")
    try:
        if kind == "grid":
            r, c = rest.lower().split("x")
            return grid_network(int(r), int(c), seed=seed)
        if kind == "ring":
            n, _, ch = rest.partition("+")
            return ring_network(int(n), chords=int(ch or 0), seed=seed)
    except ValueError as exc:
        raise NetworkError(f"bad network spec {text!r}: {exc}") from exc
    raise NetworkError(f"bad network spec {text!r}; expected grid:RxC or ring:N[+CHORDS]")
