"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line with the measured quantity; the lines are
printed in the pytest terminal summary and by ``python3 tests/test_acceptance.py``.
"""
import subprocess
import sys
import time

import numpy as np
import pytest

from dhs.abstract import random_symmetric, triangularize_coupling, verify_batch
from dhs.bounds import (
    TolerancePolicy,
    exact_rhs_vector,
    geometric_max,
    lp_check,
    run_suite,
    yang_bound,
)
from dhs.complex import build_complex, drift_apply
from dhs.complex.exterior import (
    contraction_bound_check,
    contraction_quadratic,
    form_inner,
    random_form,
    wedge_contract,
)
from dhs.manifold import (
    circle_backend,
    icosphere,
    mesh_backend,
    regular_polygon,
    shrinker_residual,
    sphere_backend,
)
from dhs.spectrum import (
    analytic_sphere_spectrum,
    convergence_study,
    coordinate_eigenfunction_check,
    solve_degree,
)

RESULTS = {}
_STUDIES = {}


def record(num, title, ok, detail):
    RESULTS[num] = (bool(ok), f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {title} :: {detail}")
    return bool(ok)


def s2_study():
    if "s2" not in _STUDIES:
        t = time.perf_counter()
        _STUDIES["s2"] = convergence_study(2, 0, [3, 4, 5], count=17)
        _STUDIES["s2_time"] = (time.perf_counter() - t) / 3
    return _STUDIES["s2"], _STUDIES["s2_time"]


def test_1_oracle_convergence():
    st, per_level = s2_study()
    ok = st.errors[-1] <= 0.02 and min(st.orders) >= 1.5 and per_level <= 60
    detail = (f"sizes={st.sizes} max rel err={['%.2e' % e for e in st.errors]} "
              f"orders={['%.2f' % o for o in st.orders]} mean time/level={per_level:.1f}s")
    assert record(1, "S^2(sqrt2) p=0 first 16 nonzero eigenvalues", ok, detail), detail


def test_2_equality_cases():
    y1 = yang_bound([0.0], [2.0], 2)
    y2 = yang_bound([0.0, 1.0, 1.0, 1.0], [2.0, 6.0, 6.0, 6.0], 2)
    b = sphere_backend(2)
    spec = analytic_sphere_spectrum(2, 0, 9)
    lp = lp_check(spec, exact_rhs_vector(spec, b)[0], 2, 1)
    ok = abs(y1 - 1.0) <= 1e-9 and abs(y2 - 3.0) <= 3e-9 and abs(lp) <= 1e-9
    detail = f"yang_bound={y1!r}, {y2!r}; lp slack(i=1)={lp!r}"
    assert record(2, "Yang and LP equality on S^2(sqrt2)", ok, detail), detail


def test_3_analytic_inequality_suite():
    t = time.perf_counter()
    worst = {}
    for m, degrees in ((1, (0, 1)), (2, (0, 2)), (3, (0, 3))):
        b = sphere_backend(m)
        for p in degrees:
            spec = analytic_sphere_spectrum(m, p, 51 + m)
            rows = run_suite(spec, m, geometric_max(b, p), exact_rhs_vector(spec, b), kmax=50, imax=50)
            for r in rows:
                key = r.inequality
                worst[key] = min(worst.get(key, np.inf), r.slack)
    elapsed = time.perf_counter() - t
    ok = min(worst.values()) >= -1e-9 and elapsed <= 10
    detail = "min slack " + ", ".join(f"{k}={v:.2e}" for k, v in sorted(worst.items())) + f"; {elapsed:.2f}s"
    assert record(3, "analytic spheres m=1,2,3, k,i<=50", ok, detail), detail


def test_4_mesh_mode_soundness():
    s2_tol = s2_study()[0].mesh_tol
    c_tol = convergence_study(1, 0, [64, 128, 256], count=17).mesh_tol
    # curvature is estimated from the raw meshes, not taken from the analytic sphere
    cases = [("icosphere 10242", mesh_backend(icosphere(5, np.sqrt(2))), s2_tol),
             ("256-gon", mesh_backend(regular_polygon(256, 1.0)), c_tol)]
    parts, ok = [], True
    for name, b, tol in cases:
        cx = build_complex(b)
        m = b.intrinsic_dim
        fails, worst = 0, np.inf
        for p in range(m + 1):
            spec = solve_degree(cx, p, 53)
            rows = run_suite(spec, m, geometric_max(b, p), None, kmax=50, imax=50,
                             tolerance=TolerancePolicy(rel=tol))
            fails += sum(not r.passed for r in rows)
            worst = min(worst, min(r.slack / max(1.0, abs(r.bound)) for r in rows))
        ok &= fails == 0
        parts.append(f"{name}: tol={tol:.2e} failures={fails} min relative slack={worst:.2e}")
    detail = "; ".join(parts)
    assert record(4, "geometric-max suite on discrete spectra", ok, detail), detail


def test_5_abstract_theorems():
    t = time.perf_counter()
    summary = verify_batch(1000, seed=7)
    rng = np.random.default_rng(8)
    tri = 0.0
    for _ in range(100):
        n = int(rng.integers(3, 13))
        count = int(rng.integers(1, min(3, n - 1) + 1))
        i = int(rng.integers(1, n - count + 1))
        res = triangularize_coupling(random_symmetric(rng, n), [random_symmetric(rng, n) for _ in range(count)], i)
        tri = max(tri, res.max_violation)
    elapsed = time.perf_counter() - t
    ok = (summary["ah_max_violation"] <= 1e-10 and summary["lpt_max_residual"] <= 1e-10
          and tri <= 1e-10 and not summary["failures"] and elapsed <= 30)
    detail = (f"AH max violation={summary['ah_max_violation']:.1e}, LP max residual="
              f"{summary['lpt_max_residual']:.1e}, triangular max={tri:.1e}; {elapsed:.1f}s")
    assert record(5, "1000 AH/LP trials + 100 triangularizations", ok, detail), detail


def test_6_exterior_algebra():
    rng = np.random.default_rng(6)
    agree, slack = 0.0, np.inf
    for _ in range(10 ** 4):
        m = int(rng.integers(1, 7))
        p = int(rng.integers(1, min(m, 4) + 1))
        a = rng.standard_normal((m, m))
        t = a + a.T
        phi = random_form(m, p, rng)
        x, y = form_inner(wedge_contract(t, phi), phi), contraction_quadratic(t, phi)
        agree = max(agree, abs(x - y) / max(1.0, abs(x)))
        slack = min(slack, contraction_bound_check(t, phi))
    ok = agree <= 1e-12 and slack >= -1e-12
    detail = f"max relative disagreement={agree:.1e}, min bound slack={slack:.3e}"
    assert record(6, "10^4 random (T, phi), m<=6, p<=4", ok, detail), detail


def test_7_structural_checks():
    s2 = build_complex(sphere_backend(2, samples=4))
    circ = build_complex(circle_backend(256))
    dd = abs(s2.d[1].astype(np.int64) @ s2.d[0].astype(np.int64)).max()
    const = max(np.abs(drift_apply(cx, np.ones(cx.size(0)))).max() for cx in (s2, circ))
    res = [coordinate_eigenfunction_check(build_complex(b), b) for b in (circle_backend(n) for n in (64, 128, 256))]
    orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    analytic = max(shrinker_residual(sphere_backend(m)) for m in (1, 2, 3, 4))
    mesh = shrinker_residual(mesh_backend(icosphere(5, np.sqrt(2))))
    ok = dd == 0 and const == 0.0 and orders.min() >= 1.0 and analytic == 0.0 and mesh <= 0.05
    detail = (f"|d.d|max={dd}, |L 1|max={const}, coordinate residual orders={np.round(orders, 2).tolist()}, "
              f"shrinker residual analytic={analytic} icosphere(10242)={mesh:.2e}")
    assert record(7, "structural identities", ok, detail), detail


def test_8_cli_determinism(tmp_path):
    outs = []
    for name in ("a.json", "b.json"):
        path = tmp_path / name
        proc = subprocess.run([sys.executable, "-m", "dhs.cli", "verify", "--builtin", "sphere:m=2",
                               "--seed", "7", "--threads", "4", "--output", str(path)],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs.append(path.read_bytes())
    ok = outs[0] == outs[1]
    detail = f"two runs, {len(outs[0])} bytes each, identical={ok}"
    assert record(8, "verify --builtin sphere:m=2 --seed 7 --threads 4", ok, detail), detail


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
