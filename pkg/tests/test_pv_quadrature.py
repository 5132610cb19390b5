import csv
import math

import numpy as np
import pytest
from scipy import stats
from scipy.optimize import brentq

from critheat import geometry as geo
from critheat.domain_model import model_set
from critheat.errors import DomainError, NonConvergence, OutsideDomain, SingularityTooClose
from critheat.pv_quadrature import (G_WEIGHTS, GK_NODES, GK_WEIGHTS, Constant, DeltaPower, PVConfig,
                                    RadialPower, VerticalPower, graph_domain, profile_ratio, pv_apply,
                                    residual_perturbation, write_shell_csv)
from critheat.special_functions import c_kp, c_tilde

from oracles import ctilde_closed


def test_gk_rule():
    assert GK_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-14)
    assert G_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-14)
    for n in range(0, 23):
        exact = 0.0 if n % 2 else 2.0 / (n + 1)
        assert GK_WEIGHTS @ GK_NODES ** n == pytest.approx(exact, abs=1e-14)
        if n <= 13:
            assert G_WEIGHTS @ GK_NODES ** n == pytest.approx(exact, abs=1e-14)
    # Gauss weights vanish on the Kronrod-only nodes
    assert np.count_nonzero(G_WEIGHTS) == 7


def test_config_validation():
    with pytest.raises(DomainError):
        PVConfig(inner_radius=0.0)
    with pytest.raises(DomainError):
        PVConfig(inner_radius=1.0, outer_radius=0.5)
    with pytest.raises(DomainError):
        PVConfig(compensation_order="third")


def test_constant_is_zero():
    assert pv_apply(model_set(2, 1, 1.2), Constant(3.0), np.array([0.2, 0.5])) == 0.0


def test_radial_power_off_center():
    # on R^2 minus a point the operator is the full-space one, so |y - c|^p gives c_tilde |x - c|^{p-a}
    c = np.array([1.0, 0.5])
    x = np.array([0.0, 1.0])
    v, e = pv_apply(model_set(2, 2, 1.0), RadialPower(0.5, c), x, with_error=True)
    ref = ctilde_closed(1.0, 2, 0.5) * np.linalg.norm(x - c) ** -0.5
    assert v == pytest.approx(ref, rel=1e-6)
    assert abs(v - ref) <= 10 * e


@pytest.mark.parametrize("k,alpha,p", [(1, 1.2, 0.5), (1, 0.7, 0.3), (2, 1.5, 1.0), (2, 0.6, 0.3)])
def test_profile_ratio_d2(k, alpha, p):
    ratio, err = profile_ratio(2, k, alpha, p)
    assert ratio == pytest.approx(1.0, abs=1e-5)
    assert err < 1e-4


def test_scaling_covariance():
    for k, alpha, p in [(1, 1.2, 0.5), (2, 1.0, 0.4)]:
        dom = model_set(2, k, alpha)
        x = np.array([0.3, 1.0])
        base = pv_apply(dom, DeltaPower(p), x)
        for s in (10.0, 0.05):
            assert pv_apply(dom, DeltaPower(p), s * x) == pytest.approx(s ** (p - alpha) * base, rel=1e-2)


def test_compensation_halving():
    dom = model_set(2, 1, 1.5)
    x = np.array([0.3, 0.7])
    v1, e1 = pv_apply(dom, DeltaPower(0.8), x, PVConfig(inner_radius=1e-4), with_error=True)
    v2, _ = pv_apply(dom, DeltaPower(0.8), x, PVConfig(inner_radius=5e-5), with_error=True)
    assert abs(v1 - v2) < e1


def test_too_close_and_outside():
    dom = model_set(2, 1, 1.0)
    with pytest.raises(SingularityTooClose):
        pv_apply(dom, DeltaPower(0.5), np.array([0.0, 5e-4]))
    with pytest.raises(OutsideDomain):
        pv_apply(dom, DeltaPower(0.5), np.array([0.0, -0.5]))
    with pytest.raises(DomainError):
        pv_apply(dom, DeltaPower(0.5), np.array([0.0, 0.5, 1.0]))


def test_nonconvergence_carries_result():
    cfg = PVConfig(tol=1e-14, max_panels=40)
    with pytest.raises(NonConvergence) as info:
        pv_apply(model_set(2, 1, 1.5), DeltaPower(0.8), np.array([0.0, 1.0]), cfg)
    assert info.value.achieved > 0
    assert math.isfinite(info.value.result.value)


def test_details_and_shell_csv(tmp_path):
    res = pv_apply(model_set(2, 2, 1.0), DeltaPower(0.5), np.array([0.0, 1.0]), details=True)
    assert res.shells and res.evaluations > 0 and res.delta == pytest.approx(1.0)
    assert math.fsum(s.contribution for s in res.shells) == pytest.approx(res.value, rel=1e-6)
    path = tmp_path / "shells.csv"
    write_shell_csv(res, path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["shell", "inner_radius", "contribution", "error_estimate"]
    assert len(rows) == len(res.shells)
    radii = [float(r["inner_radius"]) for r in rows]
    assert radii == sorted(radii)


def test_deterministic():
    dom = model_set(2, 1, 1.3)
    x = np.array([0.1, 0.4])
    assert pv_apply(dom, DeltaPower(0.6), x) == pv_apply(dom, DeltaPower(0.6), x)


def test_flat_graph_residual_zero():
    flat = geo.SubmanifoldSpec(1, 1.0, geo.polynomial(2, 1, const=[0.0]))
    res, err = residual_perturbation(flat, np.array([0.3, 0.25]), 0.5, 1.2, with_error=True)
    scale = c_kp(graph_domain(flat, 1.2).params, 1, 0.5) * 0.25 ** (0.5 - 1.2)
    assert res < 1e-6 * scale


def test_vertical_power_codim_two_flat():
    # flat codim-2 graph in R^3: vertical distance equals the model-set distance
    g = geo.SubmanifoldSpec(2, 1.0, geo.polynomial(3, 2))
    dom = graph_domain(g, 1.0)
    x = np.array([0.2, 0.6, 0.0])
    v = pv_apply(dom, VerticalPower(0.4, "c0"), x)
    assert v == pytest.approx(c_kp(dom.params, 2, 0.4) * 0.6 ** (0.4 - 1.0), rel=1e-4)


def test_sphere_cap_vertical_rejected():
    cap = geo.SubmanifoldSpec(1, 1.0, geo.sphere_cap(2, 1, 2.0), chart_radius=1.0)
    with pytest.raises(DomainError):
        pv_apply(graph_domain(cap, 1.0), VerticalPower(0.5, "outer"), np.array([0.0, 2.5]))


@pytest.mark.slow
def test_dominance_slope_gap():
    # residual of h^p on the cusp must grow strictly slower than delta^{q-a} for q = p + 0.2
    spec = geo.SubmanifoldSpec(1, 0.5, geo.power_cone(2, 1, [1.0], 0.5))
    alpha, p = 1.2, 0.5
    q = p + 0.2
    ds, rs = [], []
    for m in range(3, 7):
        dl = 2.0 ** -m
        s = brentq(lambda s: geo.true_distance(spec, np.array([0.0, s])) - dl, dl, 4 * dl, xtol=1e-15)
        rs.append(residual_perturbation(spec, np.array([0.0, s]), p, alpha, PVConfig(tol=1e-2)))
        ds.append(dl)
    slope = stats.linregress(np.log(ds), np.log(rs)).slope
    assert slope - (q - alpha) >= 0.05
