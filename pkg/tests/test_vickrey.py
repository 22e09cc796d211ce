import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from balstag.vickrey import (
    BottleneckConfig,
    DomainError,
    expected_bottleneck_time,
    expected_linear_time,
    phi_for_rho,
    simulate_bottleneck,
    validation_table,
)


def test_phi_examples():
    assert phi_for_rho(1.0) == 1.0
    assert phi_for_rho(0.5) == pytest.approx(2 / 3)
    assert phi_for_rho(1e-12) == pytest.approx(0.5)
    for bad in (0.0, -0.1, 1.01):
        with pytest.raises(DomainError):
            phi_for_rho(bad)


def test_phi_monotone():
    rhos = [i / 100 for i in range(1, 101)]
    phis = [phi_for_rho(r) for r in rhos]
    assert all(b > a for a, b in zip(phis, phis[1:]))
    assert 0.5 < phis[0] and phis[-1] == 1.0


def test_bottleneck_time_examples():
    assert expected_bottleneck_time(1.0, 0.0) == 1.0
    assert expected_bottleneck_time(1.0, 0.5) == 1.5
    assert expected_bottleneck_time(1.0, 0.8) == pytest.approx(3.0)
    with pytest.raises(DomainError):
        expected_bottleneck_time(1.0, 1.0)


def test_linear_time_examples():
    assert expected_linear_time(7.0, 0.0, 0.6) == 7.0
    assert expected_linear_time(3.0, 0.5, 1.0) == 6.0
    with pytest.raises(DomainError):
        expected_linear_time(1.0, 1.0, 1.0)


@given(st.floats(1e-6, 0.999), st.floats(0.01, 1000))
def test_identity(rho, tau):
    a = expected_linear_time(tau, rho, phi_for_rho(rho))
    b = expected_bottleneck_time(tau, rho)
    assert abs(a - b) <= 1e-12 * b


def test_single_arrival_exact():
    r = simulate_bottleneck(BottleneckConfig(2.5, 0.1), 1, seed=0)
    assert r.mean == 2.5 and r.raw_mean == 2.5
    assert simulate_bottleneck(BottleneckConfig(2.5, 0.0), 10).mean == 2.5


def test_simulation_deterministic_and_close():
    cfg = BottleneckConfig.from_rho(1.0, 0.5)
    a = simulate_bottleneck(cfg, 200_000, seed=3)
    b = simulate_bottleneck(cfg, 200_000, seed=3)
    assert a == b
    assert a.warmup == 2000
    assert a.within(1.5, 4.0)
    assert a.little_ok


def test_config_validation():
    with pytest.raises(DomainError):
        BottleneckConfig(0.0, 0.1)
    with pytest.raises(DomainError):
        BottleneckConfig(1.0, 1.0)
    cfg = BottleneckConfig.from_rho(4.0, 0.25)
    assert cfg.rate == 0.0625 and cfg.rho == 0.25 and math.isclose(cfg.phi, 1 / 1.75)


def test_validation_table_columns():
    rows = validation_table([0.2, 0.4], tau=1.0, n=20_000, seed=1)
    assert [r[0] for r in rows] == [0.2, 0.4]
    for rho, analytic, linear, sim, se in rows:
        assert analytic == pytest.approx(linear, rel=1e-12)
        assert se > 0
