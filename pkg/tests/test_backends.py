import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from mapfluct import _accel, kernels

TESTS = Path(__file__).resolve().parent

# Runs a fixed set of small simulations and prints a digest of every output array.
PROBE = """
import hashlib, json, sys
import numpy as np
sys.path.insert(0, {tests!r})
from conftest import creeping_map, oscillating_map, two_phase_ladder
from mapfluct import _accel
from mapfluct.laws import Exponential
from mapfluct.model import CompoundPoisson, LevyComponentSpec, MapSpec
from mapfluct.simulator import estimate_ladder_spec, run_ladder, sample_overshoots, simulate_endpoints

def digest(*arrays):
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()

out = {{"jit": _accel.JIT_ENABLED}}
b = sample_overshoots(creeping_map(), [0.5, 2.0], 300, np.random.default_rng(1), max_horizon=1e3)
out["passage"] = digest(b.overshoot, b.passage_time, b.phase, b.crept, b.censored)
r = run_ladder(two_phase_ladder(), 300, np.random.default_rng(2), levels=[1.0, 5.0], start_value=0.3, start_phase=1)
out["sawtooth"] = digest(r.overshoot, r.phase)
e = simulate_endpoints(oscillating_map(), 5.0, 300, np.random.default_rng(3))
out["endpoints"] = digest(e.value, e.phase, e.switches, e.occupation)
est = estimate_ladder_spec(creeping_map(), 200, np.random.default_rng(4))
out["creeping_ladder"] = digest(est.f_counts, *est.jump_bin_intensity(0))
up = MapSpec((LevyComponentSpec(-1.0, 0.0, CompoundPoisson(2.0, Exponential(1.0))),), [[0.0]])
est = estimate_ladder_spec(up, 200, np.random.default_rng(5), edges=np.linspace(0.0, 4.0, 21))
out["epoch_ladder"] = digest(*est.jump_bin_intensity(0))
print(json.dumps(out))
"""


def _probe(disable_jit: bool) -> dict:
    env = dict(os.environ, MAPFLUCT_DISABLE_JIT="1" if disable_jit else "0")
    proc = subprocess.run([sys.executable, "-c", PROBE.format(tests=str(TESTS))], env=env, capture_output=True,
                          text=True, timeout=600)
    assert proc.returncode == 0, proc.stderr
    return json.loads(proc.stdout.strip().splitlines()[-1])


def test_environment_flag_selects_the_interpreter():
    assert _probe(True)["jit"] is False


@pytest.mark.skipif(not _accel.JIT_ENABLED, reason="numba unavailable or disabled")
def test_compiled_and_interpreted_backends_agree_bit_for_bit():
    jit, py = _probe(False), _probe(True)
    assert jit.pop("jit") is True and py.pop("jit") is False
    assert jit == py


@pytest.mark.skipif(not _accel.JIT_ENABLED, reason="numba unavailable or disabled")
def test_python_twin_is_the_undecorated_source():
    twin = _accel.python_version_of(kernels.ladder_sawtooth)
    assert twin is kernels.ladder_sawtooth.py_func
    assert not hasattr(twin, "py_func")


def test_python_version_of_plain_function_is_identity():
    def f(x):
        return x

    assert _accel.python_version_of(f) is f
