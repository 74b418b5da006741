import json
import os
import subprocess
import sys

import numpy as np
import pytest

from fairlevel import _kernels_py, kernels

compiled = pytest.importorskip("fairlevel._kernels")


def test_backend_is_compiled_when_built():
    if not os.environ.get("FAIRLEVEL_PURE_PYTHON"):
        assert kernels.BACKEND == "cython"


@pytest.mark.parametrize("seed", range(20))
def test_breakpoint_scan_parity(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 40))
    eta = rng.random(n)
    nu = rng.normal(size=n)
    nu[rng.random(n) < 0.2] = 0.0
    weight = rng.random(n)
    # include exact breakpoints so boundary bookkeeping is exercised
    lambdas = np.concatenate([rng.normal(size=30), (eta - 0.5)[nu != 0] / nu[nu != 0], [0.0]])
    a = compiled.breakpoint_scan(eta, nu, weight, 0.5, lambdas, 1e-12)
    b = _kernels_py.breakpoint_scan(eta, nu, weight, 0.5, lambdas, 1e-12)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("seed", range(20))
def test_edge_search_parity(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(1, 7))
    gain = rng.normal(size=n)
    slope = rng.normal(size=n)
    delta = float(rng.random()) * 0.5
    a = compiled.edge_search(gain, slope, -delta, delta)
    b = _kernels_py.edge_search(gain, slope, -delta, delta)
    assert (a is None) == (b is None)
    if a is not None:
        assert a[0] == pytest.approx(b[0], abs=1e-12)
        np.testing.assert_allclose(a[1], b[1], atol=1e-12)


def test_edge_search_infeasible():
    # slope 1 on one coordinate, bounds outside [0, 1]
    one = np.array([1.0])
    assert _kernels_py.edge_search(one, one, 2.0, 3.0) is None
    assert compiled.edge_search(one, one, 2.0, 3.0) is None


def test_edge_search_fractional_vertex():
    # minimise -f0 - f1 subject to f0 - f1 in [-0.5, 0.5]: f = (1, 1), value -2
    value, vec = _kernels_py.edge_search([-1.0, -1.0], [1.0, -1.0], -0.5, 0.5)
    assert value == pytest.approx(-2.0)
    # minimise -f0 subject to f0 <= 0.25: the optimum is the fractional edge point
    value, vec = _kernels_py.edge_search([-1.0, 1.0], [1.0, 0.0], -1.0, 0.25)
    assert value == pytest.approx(-0.25) and vec[0] == pytest.approx(0.25) and vec[1] == 0.0


SCRIPT = """
import json
from fairlevel import BACKEND, Notion, Regime, load_corpus, solve
out = {"backend": BACKEND, "results": []}
for pop in load_corpus():
    for regime in Regime:
        for notion in Notion:
            r = solve(pop, 0.5, notion, regime, 0.05)
            out["results"].append([pop.name, regime.value, notion.value, r.achieved_risk, r.lambda_star])
print(json.dumps(out))
"""


def _run(env_extra):
    env = {k: v for k, v in os.environ.items() if k != "FAIRLEVEL_PURE_PYTHON"}
    env.update(env_extra)
    proc = subprocess.run([sys.executable, "-c", SCRIPT], capture_output=True, text=True,
                          env=env, check=True)
    return json.loads(proc.stdout)


def test_pure_python_fallback_matches():
    pure = _run({"FAIRLEVEL_PURE_PYTHON": "1"})
    fast = _run({})
    assert pure["backend"] == "python" and fast["backend"] == "cython"
    for a, b in zip(pure["results"], fast["results"]):
        assert a[:3] == b[:3]
        assert a[3] == pytest.approx(b[3], abs=1e-12)
        assert a[4] == pytest.approx(b[4], abs=1e-12)
