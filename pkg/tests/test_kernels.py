import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from balstag import kernels
from balstag.network import PiecewiseRecipe
from balstag.schedule import construct_schedule

from helpers import random_instance, random_solution

needs_compiled = pytest.mark.skipif(kernels.compiled is None, reason="compiled extension not built")


def test_backend_selection():
    assert kernels.active in (kernels.python, kernels.compiled)
    assert kernels.BACKEND in ("python", "cython")


def test_env_forces_pure_python():
    code = "from balstag import kernels; print(kernels.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                         env={"BALSTAG_PURE_PYTHON": "1", "PATH": ""}, check=True)
    assert out.stdout.strip() == "python"


@needs_compiled
@given(st.integers(0, 10**6), st.booleans())
def test_schedule_backends_agree(seed, piecewise):
    inst = random_instance(seed % 40, n_trips=25, horizon=60, spec=PiecewiseRecipe() if piecewise else None)
    sol = random_solution(inst, np.random.default_rng(seed), 0.8)
    a = construct_schedule(inst, sol, kernels.python)
    b = construct_schedule(inst, sol, kernels.compiled)
    assert a.max_abs_diff(b) == 0.0


@needs_compiled
@given(st.integers(0, 10**6), st.floats(0.05, 0.95))
def test_bottleneck_backends_agree(seed, rho):
    gaps = np.random.default_rng(seed).exponential(1 / rho, 500)
    ta, sa = kernels.python.simulate_bottleneck(gaps, 1.0)
    tb, sb = kernels.compiled.simulate_bottleneck(gaps, 1.0)
    assert np.array_equal(ta, tb) and np.array_equal(sa, sb)


def test_bottleneck_lindley_by_hand():
    # arrivals at 0, 0.5, 3 with service 1: second waits 0.5, third finds the server idle
    travel, seen = kernels.active.simulate_bottleneck(np.array([0.0, 0.5, 2.5]), 1.0)
    assert travel.tolist() == [1.0, 1.5, 1.0]
    assert seen.tolist() == [0, 1, 0]
