"""Linear congestion estimator vs. the single-server bottleneck queue.

With Poisson arrivals at rate ``lam`` and a deterministic service time ``tau``
the bottleneck is an M/D/1 queue. The linear estimator charges ``phi * tau``
per trip already on the arc; choosing ``phi = 1 / (2 - rho)`` makes its
expected travel time equal to the queue's.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class BottleneckConfig:
    tau: float
    rate: float

    def __post_init__(self):
        if self.tau <= 0:
            raise DomainError("tau must be > 0")
        if self.rate < 0 or self.rate * self.tau >= 1:
            raise DomainError(f"need 0 <= rate * tau < 1, got {self.rate * self.tau}")

    @classmethod
    def from_rho(cls, tau: float, rho: float) -> "BottleneckConfig":
        return cls(tau, rho / tau)

    @property
    def rho(self) -> float:
        return self.rate * self.tau

    @property
    def phi(self) -> float:
        return phi_for_rho(self.rho)


def phi_for_rho(rho: float) -> float:
    if not 0 < rho <= 1:
        raise DomainError(f"rho must be in (0, 1], got {rho}")
    return 1.0 / (2.0 - rho)


def expected_bottleneck_time(tau: float, rho: float) -> float:
    """Mean sojourn time of the M/D/1 queue (Pollaczek-Khinchine)."""
    if not 0 <= rho < 1:
        raise DomainError(f"rho must be in [0, 1), got {rho}")
    return tau + tau * rho / (2.0 * (1.0 - rho))


def expected_linear_time(tau: float, rho: float, phi: float) -> float:
    """Fixed point of ``T = tau + phi * tau * E[f]`` with ``E[f] = rho * T / tau``."""
    if phi * rho >= 1:
        raise DomainError(f"phi * rho must be < 1, got {phi * rho}")
    return tau + phi * tau * rho / (1.0 - phi * rho)


@dataclass
class SimulationResult:
    n: int
    mean: float        # after warm-up truncation
    se: float
    raw_mean: float
    raw_se: float
    warmup: int
    little_l: float    # mean number in system seen by arrivals
    little_lw: float   # rate * mean sojourn
    little_se: float

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.mean - target) <= k * self.se

    @property
    def little_ok(self) -> bool:
        return abs(self.little_l - self.little_lw) <= 3.0 * self.little_se


def batch_means(x: np.ndarray, n_batches: int = 50) -> tuple:
    """Mean and standard error from non-overlapping batch means."""
    n = len(x)
    if n == 0:
        return math.nan, math.nan
    mean = float(np.mean(x))
    if n < 2 * n_batches:
        return mean, float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    size = n // n_batches
    means = x[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return mean, float(np.std(means, ddof=1) / math.sqrt(n_batches))


def simulate_bottleneck(config: BottleneckConfig, n_arrivals: int, seed: int = 0,
                        warmup_fraction: float = 0.01, backend=None) -> SimulationResult:
    """Unit-capacity FIFO bottleneck fed by Poisson arrivals.

    A trip arriving to an idle arc needs ``tau``; otherwise it waits for the
    trip in service to finish and for every queued trip ahead of it.
    """
    if n_arrivals < 1:
        raise ValueError("n_arrivals must be >= 1")
    kern = backend or kernels.active
    rng = np.random.default_rng(seed)
    if config.rate == 0:
        # no traffic: space arrivals so that none ever overlaps
        gaps = np.full(n_arrivals, 2.0 * config.tau)
    else:
        gaps = rng.exponential(1.0 / config.rate, n_arrivals)
    travel, seen = kern.simulate_bottleneck(gaps, config.tau)
    travel = np.asarray(travel)
    seen = np.asarray(seen, dtype=np.float64)
    warm = int(warmup_fraction * n_arrivals)
    raw_mean, raw_se = batch_means(travel)
    mean, se = batch_means(travel[warm:])
    diff = seen[warm:] - config.rate * travel[warm:]
    _, little_se = batch_means(diff)
    return SimulationResult(
        n=n_arrivals, mean=mean, se=se, raw_mean=raw_mean, raw_se=raw_se, warmup=warm,
        little_l=float(np.mean(seen[warm:])), little_lw=float(config.rate * np.mean(travel[warm:])),
        little_se=little_se,
    )


def validation_table(rhos, tau: float = 1.0, n: int = 100_000, seed: int = 0):
    """Rows of (rho, analytic, linear, simulated, se) for a grid of intensities."""
    rows = []
    for i, rho in enumerate(rhos):
        analytic = expected_bottleneck_time(tau, rho)
        linear = expected_linear_time(tau, rho, phi_for_rho(rho))
        sim = simulate_bottleneck(BottleneckConfig.from_rho(tau, rho), n, seed + i)
        rows.append((rho, analytic, linear, sim.mean, sim.se))
    return rows
