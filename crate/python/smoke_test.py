"""Smoke test for the Python bindings: run with `python python/smoke_test.py`
or under pytest after `pip install --no-build-isolation -e crates/python`."""

import json
import math

import numpy as np

import besovlab


def test_interval_spectrum_matches_closed_form():
    n = 31
    sp = besovlab.Spectral(besovlab.Grid.interval(n))
    h = 1.0 / (n + 1)
    k = np.arange(1, n + 1)
    exact = 4.0 / h**2 * np.sin(k * math.pi * h / 2.0) ** 2
    assert np.allclose(sp.eigenvalues, exact, rtol=1e-10)


def test_semigroup_and_norms():
    grid = besovlab.Grid.interval(63)
    sp = besovlab.Spectral(grid)
    x = np.array([p[0] for p in sp.positions()])
    f = np.exp(-((x - 0.5) ** 2) / 0.01)
    c = np.array(sp.coefficients(list(f)))
    assert np.allclose(sp.synthesize(list(c)), f, atol=1e-12)
    # e^{-tA} acts diagonally on eigen-coefficients
    t = 1e-3
    u = np.array(sp.semigroup(list(f), t))
    lam = np.array(sp.eigenvalues)
    assert np.allclose(sp.coefficients(list(u)), c * np.exp(-t * lam), atol=1e-12)
    # L^2 contraction and a finite Besov norm, inf spelled as a float
    assert sp.lp_norm(list(u), 2.0) <= sp.lp_norm(list(f), 2.0)
    assert math.isfinite(sp.besov_norm(list(f), 0.5, math.inf, 2.0))
    # blocks reassemble the field
    lo, hi = sp.j_range
    total = sum(np.array(sp.block(list(f), j)) for j in range(lo, hi + 1))
    assert np.allclose(total, f, atol=1e-10)


def test_fit_and_runner():
    slope, _, r2 = besovlab.fit_rate([(1, 8), (2, 2), (4, 0.5)])
    assert abs(slope + 2) < 1e-12 and abs(r2 - 1) < 1e-12
    assert "partition" in besovlab.suites()
    cfg = {"domain": {"kind": "interval", "n": 63}, "suites": [{"suite": "partition"}]}
    csv, js, ok = besovlab.run_config(json.dumps(cfg))
    assert ok and csv.startswith("suite,param_json,value,target,tol,pass")
    assert len(json.loads(js)["rows"]) == 1


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_"):
            fn()
            print("ok", name)
