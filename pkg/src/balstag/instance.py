"""Trips, instances, synthetic instance generation and instance files."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import jsonschema
import numpy as np

from .network import (
    ArcDelays,
    DelaySpec,
    Network,
    NetworkError,
    NoPathError,
    Polynomial,
    delay_spec_from_json,
    delay_spec_to_json,
)
from .routes import DEFAULT_K, DEFAULT_THETA, Route, RouteSet, kspwlo

SCHEMA_VERSION = 1
DEADLINE_FACTOR = 1.25


class InstanceError(ValueError):
    """Schema or reference violation, prefixed with the JSON path."""


@dataclass(frozen=True)
class Trip:
    id: int
    origin: int
    dest: int
    earliest: float
    latest: float
    max_stagger: float
    routes: RouteSet
    controlled: bool = True

    @property
    def shortest_free_flow(self) -> float:
        return self.routes[0].free_flow_time

    @property
    def latest_start(self) -> float:
        return self.earliest + self.max_stagger


@dataclass(eq=True)
class Instance:
    network: Network
    delay_spec: DelaySpec
    trips: list
    horizon: float = 3600.0

    def __post_init__(self):
        self.trips = list(self.trips)
        self.validate()

    def validate(self):
        nodes = set(self.network.nodes)
        for i, trip in enumerate(self.trips):
            if trip.id != i:
                raise InstanceError(f"trips[{i}].id: ids must be dense 0..{len(self.trips) - 1}, got {trip.id}")
            if trip.origin not in nodes or trip.dest not in nodes:
                raise InstanceError(f"trips[{i}]: unknown origin/destination node (trip {trip.id})")
            if trip.max_stagger < 0:
                raise InstanceError(f"trips[{i}].max_stagger_s: must be >= 0 (trip {trip.id})")
            if not trip.routes.routes:
                raise InstanceError(f"trips[{i}].routes: empty route set (trip {trip.id})")
            for j, route in enumerate(trip.routes):
                try:
                    route.check(self.network)
                except ValueError as exc:
                    raise InstanceError(f"trips[{i}].routes[{j}]: {exc} (trip {trip.id})") from None
                first, last = self.network.arcs[route.arcs[0]], self.network.arcs[route.arcs[-1]]
                if first.tail != trip.origin or last.head != trip.dest:
                    raise InstanceError(f"trips[{i}].routes[{j}]: does not join origin to destination (trip {trip.id})")
            if trip.earliest + trip.shortest_free_flow > trip.latest + 1e-9:
                raise InstanceError(
                    f"trips[{i}].latest_s: shortest route infeasible under free flow (trip {trip.id})")

    @cached_property
    def delays(self) -> ArcDelays:
        return ArcDelays(self.network, self.delay_spec)

    @property
    def n_trips(self) -> int:
        return len(self.trips)

    def route_arcs(self, trip: int, route_index: int) -> tuple:
        return self.trips[trip].routes[route_index].arcs

    def with_trips(self, trips) -> "Instance":
        return Instance(self.network, self.delay_spec, trips, self.horizon)

    def with_control(self, flags) -> "Instance":
        flags = list(flags)
        return self.with_trips([replace(t, controlled=bool(f)) for t, f in zip(self.trips, flags)])


# --------------------------------------------------------------------------
# Synthetic generation

def trip_rng(seed: int, trip_index: int, stream: int = 0) -> np.random.Generator:
    """Independent stream per trip: adding trips never perturbs earlier ones."""
    return np.random.default_rng([int(seed), int(stream), int(trip_index)])


def _sample_departure(rng, profile: str, horizon: float) -> float:
    if profile == "uniform":
        # homogeneous Poisson arrivals conditioned on the count are iid uniform
        t = rng.uniform(0.0, horizon)
    elif profile == "peak":
        t = rng.triangular(0.0, horizon / 2.0, horizon)
    else:
        raise ValueError(f"unknown arrival profile {profile!r}")
    return float(math.floor(t))


def generate_synthetic(
    network: Network,
    n_trips: int,
    arrival_profile: str = "uniform",
    sigma_fraction: float = 0.2,
    deadline_policy: str = "freeflow",
    k: int = DEFAULT_K,
    theta: float = DEFAULT_THETA,
    seed: int = 0,
    horizon: float = 3600.0,
    delay_spec: DelaySpec | None = None,
    control_fraction: float = 1.0,
    max_retries: int = 100,
) -> Instance:
    """Random trips over ``network``.

    ``sigma_fraction`` sets the maximum staggering as a share of the shortest
    route's free-flow time. ``deadline_policy`` is ``"freeflow"`` (125% of the
    shortest free-flow time) or ``"rduo"`` (125% of the travel time observed in
    the reactive user optimum, computed after generation).
    """
    if n_trips < 1:
        raise ValueError("n_trips must be >= 1")
    if sigma_fraction < 0:
        raise ValueError("sigma_fraction must be >= 0")
    if deadline_policy not in ("freeflow", "rduo"):
        raise ValueError(f"unknown deadline policy {deadline_policy!r}")
    delay_spec = delay_spec if delay_spec is not None else Polynomial()
    nodes = list(network.nodes)
    route_cache = {}
    trips = []
    for i in range(n_trips):
        rng = trip_rng(seed, i)
        for _ in range(max_retries):
            o, d = (int(x) for x in rng.choice(nodes, size=2, replace=False))
            if (o, d) not in route_cache:
                try:
                    route_cache[(o, d)] = kspwlo(network, o, d, k, theta)
                except NoPathError:
                    route_cache[(o, d)] = None
            if route_cache[(o, d)] is not None:
                break
        else:
            raise NetworkError(f"trip {i}: no connected OD pair after {max_retries} draws")
        routes = route_cache[(o, d)]
        earliest = _sample_departure(rng, arrival_profile, horizon)
        ff = routes[0].free_flow_time
        controlled = bool(rng.random() < control_fraction)
        trips.append(Trip(
            id=i, origin=o, dest=d, earliest=earliest,
            latest=earliest + DEADLINE_FACTOR * ff,
            max_stagger=round(sigma_fraction * ff, 6),
            routes=routes, controlled=controlled,
        ))
    instance = Instance(network, delay_spec, trips, horizon)
    if deadline_policy == "rduo":
        instance = apply_rduo_deadlines(instance)
    return instance


def apply_rduo_deadlines(instance: Instance, factor: float = DEADLINE_FACTOR) -> Instance:
    from .schedule import construct_schedule
    from .solvers import build_rduo

    solution = build_rduo(instance)
    schedule = construct_schedule(instance, solution)
    trips = []
    for t in instance.trips:
        travel = schedule.arrival(t.id) - solution.start[t.id]
        trips.append(replace(t, latest=t.earliest + factor * max(travel, t.shortest_free_flow)))
    return instance.with_trips(trips)


# --------------------------------------------------------------------------
# Files

_SCHEMA = {
    "type": "object",
    "required": ["network", "delay", "trips"],
    "properties": {
        "network": {
            "type": "object",
            "required": ["nodes", "arcs"],
            "properties": {
                "nodes": {"type": "array", "items": {"type": "integer"}},
                "arcs": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["id", "tail", "head", "length_m", "nominal_s"],
                        "properties": {
                            "id": {"type": "integer", "minimum": 0},
                            "tail": {"type": "integer"},
                            "head": {"type": "integer"},
                            "length_m": {"type": "number", "exclusiveMinimum": 0},
                            "nominal_s": {"type": "number", "exclusiveMinimum": 0},
                        },
                    },
                },
            },
        },
        "delay": {"type": "object", "required": ["type"]},
        "horizon_s": {"type": "number"},
        "trips": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "origin", "dest", "earliest_s", "latest_s", "max_stagger_s", "routes"],
                "properties": {
                    "id": {"type": "integer", "minimum": 0},
                    "origin": {"type": "integer"},
                    "dest": {"type": "integer"},
                    "earliest_s": {"type": "number"},
                    "latest_s": {"type": "number"},
                    "max_stagger_s": {"type": "number", "minimum": 0},
                    "controlled": {"type": "boolean"},
                    "k": {"type": "integer", "minimum": 1},
                    "theta": {"type": "number"},
                    "routes": {
                        "type": "array",
                        "minItems": 1,
                        "items": {"type": "array", "minItems": 1, "items": {"type": "integer"}},
                    },
                },
            },
        },
    },
}


def instance_to_json(instance: Instance) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "network": instance.network.to_json(),
        "delay": delay_spec_to_json(instance.delay_spec),
        "horizon_s": instance.horizon,
        "trips": [
            {
                "id": t.id, "origin": t.origin, "dest": t.dest,
                "earliest_s": t.earliest, "latest_s": t.latest, "max_stagger_s": t.max_stagger,
                "controlled": t.controlled, "k": t.routes.k_requested, "theta": t.routes.theta,
                "routes": [list(r.arcs) for r in t.routes],
            }
            for t in instance.trips
        ],
    }


def instance_from_json(data: dict) -> Instance:
    try:
        jsonschema.validate(data, _SCHEMA)
    except jsonschema.ValidationError as exc:
        raise InstanceError(f"{exc.json_path}: {exc.message}") from None
    try:
        network = Network.from_json(data["network"])
    except NetworkError as exc:
        raise InstanceError(f"$.network: {exc}") from None
    try:
        spec = delay_spec_from_json(data["delay"])
    except (ValueError, KeyError) as exc:
        raise InstanceError(f"$.delay: {exc}") from None
    n_arcs = len(network.arcs)
    trips = []
    for i, raw in enumerate(data["trips"]):
        for j, arcs in enumerate(raw["routes"]):
            for m, a in enumerate(arcs):
                if not 0 <= a < n_arcs:
                    raise InstanceError(f"$.trips[{i}].routes[{j}][{m}]: arc {a} does not exist (trip {raw['id']})")
        routes = RouteSet(
            tuple(Route.from_arcs(network, arcs) for arcs in raw["routes"]),
            int(raw.get("k", len(raw["routes"]))),
            float(raw.get("theta", 1.0)),
        )
        trips.append(Trip(
            id=int(raw["id"]), origin=int(raw["origin"]), dest=int(raw["dest"]),
            earliest=float(raw["earliest_s"]), latest=float(raw["latest_s"]),
            max_stagger=float(raw["max_stagger_s"]), routes=routes,
            controlled=bool(raw.get("controlled", True)),
        ))
    try:
        return Instance(network, spec, trips, float(data.get("horizon_s", 3600.0)))
    except InstanceError as exc:
        raise InstanceError(f"$.{exc}") from None


def save_instance(instance: Instance, path, meta: dict | None = None):
    data = instance_to_json(instance)
    if meta:
        data["meta"] = meta
    Path(path).write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


def load_instance(path) -> Instance:
    return instance_from_json(json.loads(Path(path).read_text()))
