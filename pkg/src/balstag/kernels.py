"""Kernel backend selection.

The compiled ``_core`` extension is used when it imports; otherwise, or when
``BALSTAG_PURE_PYTHON=1`` is set, the pure-Python kernels take over.
"""
import os

from . import _pykernels

python = _pykernels

try:
    if os.environ.get("BALSTAG_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python kernels requested")
    from . import _core as compiled
except ImportError:
    compiled = None

active = compiled if compiled is not None else python
BACKEND = "cython" if compiled is not None else "python"

construct_schedule = active.construct_schedule
simulate_bottleneck = active.simulate_bottleneck
