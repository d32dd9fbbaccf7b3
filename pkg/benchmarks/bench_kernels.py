"""Time the compiled kernels against their interpreted fallback.

Each backend runs in its own interpreter because the backend is fixed at
import time by ``MAPFLUCT_DISABLE_JIT``. Compilation is excluded by a
warm-up call. Usage: ``python3 benchmarks/bench_kernels.py [--paths N]``.
"""

import argparse
import json
import os
import subprocess
import sys

WORKLOAD = """
import json, time
import numpy as np
from mapfluct import _accel
from mapfluct.laws import Exponential, FiniteMixture
from mapfluct.model import CompoundPoisson, LadderSpec, LevyComponentSpec, MapSpec
from mapfluct.simulator import run_ladder, sample_overshoots, simulate_endpoints

ladder = LadderSpec((1.0, 0.5), (CompoundPoisson(1.0, Exponential(2.0)), CompoundPoisson(2.0, Exponential(3.0))),
                    [[-1.0, 1.0], [1.0, -1.0]], [[None, Exponential(1.0)], [Exponential(1.0), None]])
spec = MapSpec(
    (LevyComponentSpec(1.0, 0.0, CompoundPoisson(1.0, FiniteMixture((0.5, 0.5), (Exponential(1.0), Exponential(2.0).negated())))),
     LevyComponentSpec(0.5, 0.0, CompoundPoisson(2.0, FiniteMixture((0.4, 0.6), (Exponential(1.5), Exponential(1.0).negated()))))),
    [[-1.0, 1.0], [2.0, -2.0]], [[None, Exponential(2.0)], [Exponential(1.0).negated(), None]])
jobs = {{
    "ladder_sawtooth": lambda n: run_ladder(ladder, n, np.random.default_rng(0), levels=[10.0, 50.0]),
    "map_passage": lambda n: sample_overshoots(spec, [1.0, 5.0], n, np.random.default_rng(0)),
    "map_endpoints": lambda n: simulate_endpoints(spec, 20.0, n, np.random.default_rng(0)),
}}
out = {{"jit": _accel.JIT_ENABLED}}
for name, job in jobs.items():
    job(10)
    t0 = time.perf_counter()
    job({paths})
    out[name] = time.perf_counter() - t0
print(json.dumps(out))
"""


def run_backend(disable_jit: bool, paths: int) -> dict:
    env = dict(os.environ, MAPFLUCT_DISABLE_JIT="1" if disable_jit else "0")
    proc = subprocess.run([sys.executable, "-c", WORKLOAD.format(paths=paths)], env=env, capture_output=True,
                          text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=2000)
    args = ap.parse_args(argv)
    jit, py = run_backend(False, args.paths), run_backend(True, args.paths)
    if not jit.pop("jit"):
        print("numba unavailable: both runs used the interpreter")
    py.pop("jit")
    print(f"{'kernel':<18}{'compiled s':>12}{'interpreted s':>15}{'speed-up':>10}   ({args.paths} paths)")
    for name in jit:
        print(f"{name:<18}{jit[name]:>12.4f}{py[name]:>15.4f}{py[name] / jit[name]:>10.1f}")


if __name__ == "__main__":
    main()
