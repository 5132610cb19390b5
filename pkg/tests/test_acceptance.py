"""The twelve acceptance criteria, one test (group) per criterion.

Each test records its measured numbers through the ``detail`` fixture; the
terminal summary prints one PASS/FAIL line per criterion.
"""
from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats
from scipy.optimize import brentq

from critheat import geometry as geo
from critheat.pv_quadrature import PVConfig, profile_ratio, residual_perturbation
from critheat.special_functions import StableParams, c1, c_kp, gamma_alpha_p, w_dk

from oracles import sphere_distance, w_closed

pytestmark = pytest.mark.acceptance


# 1 -------------------------------------------------------------------------

def test_criterion_01_constant_zeros_and_limits(detail):
    zeros = {a: c1(StableParams(3, a), a - 1.0) for a in (1.2, 1.5, 1.8)}
    small = {(d, k): c_kp(StableParams(d, 1.0), k, 1e-4) for d, k in ((4, 2), (3, 3))}
    detail(1, "max |C(1,a-1)| = %.2e, C(k,1e-4) = %s" % (
        max(abs(v) for v in zeros.values()), ", ".join(f"{v:.2e}" for v in small.values())))
    assert all(abs(v) < 1e-10 for v in zeros.values())
    assert all(v < 1e-3 for v in small.values())


# 2 -------------------------------------------------------------------------

def test_criterion_02_gamma_symmetry(detail):
    rng = np.random.default_rng(20240602)
    worst = 0.0
    for _ in range(20):
        a = rng.uniform(1.05, 1.95)
        p = rng.uniform(0.01, a - 1.0 - 0.01)
        worst = max(worst, abs(gamma_alpha_p(a, p) - gamma_alpha_p(a, a - 1.0 - p)))
    detail(2, f"max asymmetry {worst:.2e} over 20 draws")
    assert worst < 1e-10


# 3 -------------------------------------------------------------------------

def test_criterion_03_w_closed_form(detail):
    worst = 0.0
    for d in range(2, 6):
        for k in range(1, d + 1):
            for a in (0.5, 1.0, 1.5, 1.9):
                w = w_dk(StableParams(d, a), k)
                worst = max(worst, abs(w - w_closed(d, k, a)) / w_closed(d, k, a))
    detail(3, f"max relative deviation {worst:.2e}")
    assert worst < 1e-8


# 4 -------------------------------------------------------------------------

CRIT4 = [(2, 1.0, 0.5), (2, 1.5, 1.0), (2, 0.6, 0.3), (3, 1.0, 0.5), (3, 1.2, 0.6), (3, 1.7, 1.2)]


def test_criterion_04_constant_vs_pv(detail):
    errs = []
    for d, a, p in CRIT4:
        ratio, _ = profile_ratio(d, d, a, p)
        errs.append(abs(ratio - 1.0))
    detail(4, "max |c_kp - pv| / c_kp = %.2e over %d cases" % (max(errs), len(errs)))
    assert max(errs) < 1e-3


# 5 -------------------------------------------------------------------------

CRIT5 = [(1, 1.0, 0.5), (1, 1.5, 0.8), (1, 0.8, 0.3),
         (2, 1.0, 0.4), (2, 1.5, 1.0), (2, 0.5, 0.2),
         (3, 1.0, 0.5), (3, 1.2, 0.6), (3, 1.7, 1.2)]


def test_criterion_05_harmonic_profile(detail):
    ratios = [profile_ratio(3, k, a, p)[0] for k, a, p in CRIT5]
    dev = max(abs(r - 1.0) for r in ratios)
    detail(5, f"ratios in [{min(ratios):.6f}, {max(ratios):.6f}] on D1, D2, D3 (d=3)")
    assert dev <= 0.02


# 6 -------------------------------------------------------------------------

@pytest.fixture(scope="module")
def cusp_residuals():
    spec = geo.SubmanifoldSpec(1, 0.5, geo.power_cone(2, 1, [1.0], 0.5))
    alpha, p = 1.2, 0.5
    out = []
    for m in range(3, 9):
        dl = 2.0 ** -m
        # point straight above the cusp at true distance exactly dl
        s = brentq(lambda s: geo.true_distance(spec, np.array([0.0, s])) - dl, dl, 4 * dl, xtol=1e-15)
        res, err = residual_perturbation(spec, np.array([0.0, s]), p, alpha, PVConfig(tol=1e-2),
                                         with_error=True)
        out.append((dl, res, err))
    return alpha, p, out


def test_criterion_06_perturbation_decay(cusp_residuals, detail):
    alpha, p, rows = cusp_residuals
    dl = np.array([r[0] for r in rows])
    scaled = np.array([r[1] for r in rows]) * dl ** (alpha - p)
    errs = np.array([r[2] for r in rows]) * dl ** (alpha - p)
    # scaled residual must shrink as delta -> 0, i.e. along increasing m
    inversions = int(np.sum(np.diff(scaled) >= 0))
    slope = stats.linregress(np.log(dl), np.log(scaled)).slope
    detail(6, "scaled residuals " + ", ".join(f"{v:.3f}" for v in scaled)
           + f"; slope {slope:.3f}; {inversions} inversions")
    assert np.all(errs < 0.1 * scaled)
    assert inversions <= 1
    assert slope >= 0.05


# 7 -------------------------------------------------------------------------

def _normal_sequence(base, normal, ms=range(3, 9)):
    return np.array([base + 2.0 ** -m * normal for m in ms])


def test_criterion_07_geometry_lemmas(detail):
    # power cone y2 = |y1|^{3/2}, approach along the normal at y1 = 0.5
    cone = geo.SubmanifoldSpec(1, 0.5, geo.power_cone(2, 1, 1.0, 0.5), chart_radius=10.0)
    a = 0.5
    slope = 1.5 * math.sqrt(a)
    nrm = np.array([-slope, 1.0]) / math.hypot(slope, 1.0)
    rep1 = geo.check_key_lemma(cone, _normal_sequence(np.array([a, a ** 1.5]), nrm))

    # S^2 in R^4 through its upper-cap chart, approach off the pole; delta from the closed form
    cap = geo.SubmanifoldSpec(2, 1.0, geo.sphere_cap(4, 2), chart_radius=0.9)
    base = np.array([0.3, 0.2, math.sqrt(1 - 0.13), 0.0])
    nrm = (base + np.array([0.0, 0.0, 0.0, 1.0])) / math.sqrt(2.0)
    rep2 = geo.check_key_lemma(cap, _normal_sequence(base, nrm), delta_fn=sphere_distance)

    detail(7, f"max/median: power cone {rep1.spread:.2f}, sphere chart {rep2.spread:.2f}")
    for rep in (rep1, rep2):
        assert np.all(np.isfinite(rep.ratios))
        assert rep.max_ratio <= 10.0 * rep.median_ratio


# 8, 12 ---------------------------------------------------------------------

def test_criterion_08_exponent_recovery(simulation, detail):
    run = simulation("punctured_plane", workers=1)
    assert run.code == 0
    assert run.manifest["paths"] == 200_000 and run.manifest["steps"] == 2000
    detail(8, f"slope {run.slope:.4f} +/- {run.stderr:.4f}, target {run.manifest['predicted']:.4f}")
    assert abs(run.manifest["predicted"] - 0.5) < 1e-8
    assert abs(run.slope - 0.5) <= 0.1


def test_criterion_12_determinism(simulation, detail):
    one = simulation("punctured_plane", workers=1)
    two = simulation("punctured_plane", workers=2)
    assert one.code == 0 and two.code == 0
    same = one.csv_bytes == two.csv_bytes
    detail(12, f"survival.csv with 1 and 2 workers: {'identical' if same else 'different'} "
               f"({len(one.csv_bytes)} bytes)")
    assert same


# 9 -------------------------------------------------------------------------

def test_criterion_09_sphere_example(simulation, detail):
    run = simulation("ex1.3")
    assert run.code == 0
    detail(9, f"slope {run.slope:.4f} +/- {run.stderr:.4f}, target 0.4")
    assert abs(run.manifest["predicted"] - 0.4) < 1e-8
    assert abs(run.slope - 0.4) <= 0.15


# 10 ------------------------------------------------------------------------

def test_criterion_10_locality(simulation, detail):
    # same near component x0 (p0 = 0.5), far component x1 at two very different lambdas
    base = simulation("ex1.2")
    alt = simulation("ex1.2", x1=0.8)
    assert base.code == 0 and alt.code == 0
    diff = abs(base.slope - alt.slope)
    sigma = math.hypot(base.stderr, alt.stderr)
    detail(10, f"slopes {base.slope:.4f} (p1=0.3), {alt.slope:.4f} (p1=0.8); "
               f"|diff| {diff:.4f} vs 3 sigma {3 * sigma:.4f}")
    for run in (base, alt):
        assert abs(run.manifest["predicted"] - 0.5) < 1e-8
        assert abs(run.slope - 0.5) <= 0.15
    assert diff <= 3.0 * sigma


# 11 ------------------------------------------------------------------------

def test_criterion_11_envelope_band(simulation, detail):
    ratios = {name: simulation(name).ratios for name in ("punctured_plane", "ex1.3", "ex1.2")}
    lo = min(min(r) for r in ratios.values())
    hi = max(max(r) for r in ratios.values())
    detail(11, "ratio ranges " + "; ".join(f"{k} [{min(v):.3f}, {max(v):.3f}]" for k, v in ratios.items()))
    assert all(len(r) == 6 for r in ratios.values())
    assert 0.2 <= lo and hi <= 5.0
