"""Time the numba kernels against the pure-Python fallback.

Each mode runs in its own interpreter because the JIT switch is read at
import time. Usage::

    python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import json
import os
import subprocess
import sys

WORKLOAD = """
import json, sys, time
import numpy as np
from stockflow import _jit, kernels
from stockflow.oilmarket import OilMarketParams, run, scenario_b

repeat = int(sys.argv[1])
p = OilMarketParams()
doc, _ = scenario_b(p, 1)
x = np.random.default_rng(0).normal(size=1_000_000)


def best(fn):
    fn()  # warm up (compile or load from cache)
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


print(json.dumps({
    "jit": not _jit.JIT_DISABLED and _jit.HAVE_NUMBA,
    "scenario_b_rk4": best(lambda: run(p, doc, kind="rk4", record=())),
    "scenario_b_euler": best(lambda: run(p, doc, kind="euler", record=())),
    "central_moments_1e6": best(lambda: kernels.central_moments(x)),
}))
"""


def measure(disable_jit: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("STOCKFLOW_DISABLE_JIT", None)
    if disable_jit:
        env["STOCKFLOW_DISABLE_JIT"] = "1"
    out = subprocess.run([sys.executable, "-c", WORKLOAD, str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5, help="timed runs per workload (best is kept)")
    args = parser.parse_args(argv)

    fast = measure(False, args.repeat)
    slow = measure(True, args.repeat)
    if not fast.pop("jit"):
        print("warning: numba not active, both columns use the Python path", file=sys.stderr)
    slow.pop("jit")

    print(f"{'workload':<22}{'jit (ms)':>12}{'python (ms)':>14}{'speedup':>10}")
    for name, t_fast in fast.items():
        t_slow = slow[name]
        print(f"{name:<22}{t_fast * 1e3:>12.2f}{t_slow * 1e3:>14.2f}{t_slow / t_fast:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
