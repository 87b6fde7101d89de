"""The numba kernels and the pure-Python fallback must agree bit for bit."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from stockflow import _jit, kernels
from stockflow.oilmarket import OilMarketParams, run, scenario_b

SCRIPT = """
import json, sys
from stockflow import _jit
from stockflow.oilmarket import OilMarketParams, run, scenario_b
doc, _ = scenario_b(OilMarketParams(), 1)
traj = run(OilMarketParams(), doc, kind=sys.argv[1], record=("Ratio", "SpareSupply"))
print(json.dumps({"jit": not _jit.JIT_DISABLED, "cols": {k: [float(v).hex() for v in traj[k]] for k in traj.columns()}}))
"""


def _run_subprocess(disable: bool, kind: str):
    env = dict(os.environ)
    env.pop("STOCKFLOW_DISABLE_JIT", None)
    if disable:
        env["STOCKFLOW_DISABLE_JIT"] = "1"
    out = subprocess.run([sys.executable, "-c", SCRIPT, kind], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


@pytest.mark.parametrize("kind", ["euler", "rk4"])
def test_fallback_matches_jit_bit_for_bit(kind):
    plain = _run_subprocess(True, kind)
    assert plain["jit"] is False
    doc, _ = scenario_b(OilMarketParams(), 1)
    traj = run(OilMarketParams(), doc, kind=kind, record=("Ratio", "SpareSupply"))
    for name, values in plain["cols"].items():
        assert [float(v).hex() for v in traj[name]] == values, name


@pytest.mark.skipif(not _jit.HAVE_NUMBA or _jit.JIT_DISABLED, reason="numba not active")
def test_central_moments_python_impl_matches():
    rng = np.random.default_rng(0)
    for n in (1, 2, 7, 1000):
        x = rng.normal(3, 2, n)
        assert kernels.central_moments(x) == _jit.python_impl(kernels.central_moments)(x)


def test_central_moments_definition():
    x = np.array([1.0, 2.0, 4.0, 9.0])
    mean, s2, s3, s4 = kernels.central_moments(x)
    d = x - 4.0
    assert (mean, s2, s3, s4) == (4.0, float(np.sum(d ** 2)), float(np.sum(d ** 3)), float(np.sum(d ** 4)))
