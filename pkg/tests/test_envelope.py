import csv
import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from critheat.cli import bundled_config
from critheat.domain_model import model_set, parse_domain
from critheat.envelope import (EnvelopeParams, batch_envelope, crossover_radius, envelope_params, free_kernel,
                               product_envelope, read_points_csv, survival_envelope, survival_factors)
from critheat.errors import DomainError, OutsideDomain
from critheat.exponent_solver import solve_all
from critheat.special_functions import StableParams

P2 = StableParams(2, 1.0)


@pytest.fixture(scope="module")
def ex12():
    dom = parse_domain(bundled_config("ex1.2"))
    return dom, solve_all(dom)


@pytest.fixture(scope="module")
def ex13():
    dom = parse_domain(bundled_config("ex1.3"))
    return dom, solve_all(dom)


def test_free_kernel_examples():
    assert free_kernel(P2, 1.0, [0, 0], [0, 0]) == 1.0
    assert free_kernel(P2, 1.0, [0, 0], [2.0, 0]) == pytest.approx(0.125)
    t = 0.3
    r = crossover_radius(P2, t)
    assert free_kernel(P2, t, [0, 0], [r, 0]) == pytest.approx(t ** -2.0, rel=1e-12)
    with pytest.raises(DomainError):
        free_kernel(P2, 0.0, [0, 0], [1, 0])


@settings(max_examples=50, deadline=None)
@given(s=st.floats(0.01, 100.0), t=st.floats(0.01, 10.0), alpha=st.floats(0.2, 1.9),
       x=st.lists(st.floats(-5, 5), min_size=3, max_size=3), y=st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_free_kernel_scaling(s, t, alpha, x, y):
    prm = StableParams(3, alpha)
    c = s ** (1 / alpha)
    lhs = free_kernel(prm, s * t, c * np.array(x), c * np.array(y))
    assert lhs == pytest.approx(s ** (-3 / alpha) * free_kernel(prm, t, x, y), rel=1e-10)


def test_survival_examples(ex12):
    dom = model_set(2, 2, 1.0, 1.0)
    table = solve_all(dom)
    p = table.entries[0].p
    assert survival_envelope(dom, table, 1.0, [1.0, 0]) == 1.0
    assert survival_envelope(dom, table, 1.0, [0.5, 0]) == pytest.approx(0.5 ** p)
    d12, t12 = ex12
    x = np.array([0.0, 0.1])
    assert survival_envelope(d12, t12, 1.0, x) == pytest.approx(0.1 ** 0.5, rel=1e-8)
    f = survival_factors(d12, t12, 1.0, x)
    assert f[1] == 1.0


def test_survival_range_and_monotonicity(ex13):
    dom, table = ex13
    rng = np.random.default_rng(0)
    on = np.array([1.0, 0, 0, 0])
    prev = 0.0
    for s in [0.01, 0.05, 0.2, 0.5, 0.99, 1.0, 1.5]:
        v = survival_envelope(dom, table, 1.0, on + [0, 0, 0, s])
        assert 0 < v <= 1 and v >= prev
        assert (v == 1.0) == (s >= 1.0)
        prev = v
    # larger exponent, smaller envelope
    big = solve_all(dom.with_lambdas({"S2": dom.components[0].lam * 2}))
    for x in rng.normal(size=(10, 4)) * 0.3 + on:
        assert survival_envelope(dom, big, 1.0, x) <= survival_envelope(dom, table, 1.0, x)


def test_product_envelope(ex13):
    dom, table = ex13
    x = np.array([3.0, 0, 0, 0])
    y = np.array([0, 3.0, 0, 1.0])
    assert product_envelope(dom, table, 1.0, x, y) == free_kernel(dom.params, 1.0, x, y)
    rng = np.random.default_rng(1)
    for _ in range(10):
        a, b = rng.normal(size=(2, 4))
        v = product_envelope(dom, table, 0.5, a, b)
        assert v == pytest.approx(product_envelope(dom, table, 0.5, b, a), rel=1e-15)
        expect = (survival_envelope(dom, table, 0.5, a) * survival_envelope(dom, table, 0.5, b)
                  * free_kernel(dom.params, 0.5, a, b))
        assert v == pytest.approx(expect, rel=1e-14)


def test_horizon_refusal(ex12, caplog):
    dom, table = ex12
    with caplog.at_level(logging.WARNING):
        with pytest.raises(DomainError):
            survival_envelope(dom, table, 2.0, [0.0, 0.5])
    assert "horizon" in caplog.text


def test_outside_and_on_boundary(ex12):
    dom, table = ex12
    with pytest.raises(OutsideDomain):
        survival_envelope(dom, table, 1.0, [0.0, 0.0])
    half = model_set(2, 1, 1.5)
    with pytest.raises(OutsideDomain):
        survival_envelope(half, solve_all(half), 1.0, [0.0, -1.0])


def test_params():
    dom = model_set(2, 2, 1.0)
    ep = envelope_params(dom)
    assert ep.c == 5.0 and len(ep.exponents.entries) == 1
    with pytest.raises(DomainError):
        EnvelopeParams(dom.params, ep.exponents, 0.5)


def test_batch_csv(tmp_path, ex12):
    dom, table = ex12
    pts = tmp_path / "pts.csv"
    pts.write_text("t,x1,x2,y1,y2\n1.0,0.0,0.2,0.5,0.5\n0.5,1.0,1.0,2.0,0.1\n")
    rows = read_points_csv(pts, 2)
    out = tmp_path / "env.csv"
    assert batch_envelope(dom, table, rows, out) == 2
    with open(out, newline="") as fh:
        recs = list(csv.DictReader(fh))
    assert list(recs[0]) == ["t", "x1", "x2", "y1", "y2", "envelope", "free_kernel",
                             "fx_x0", "fx_x1", "fy_x0", "fy_x1"]
    r = recs[0]
    assert float(r["envelope"]) == pytest.approx(product_envelope(dom, table, 1.0, [0, 0.2], [0.5, 0.5]))
    assert float(r["fx_x0"]) == pytest.approx(0.2 ** 0.5)


def test_read_points_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("1.0,0,0,1\n")
    with pytest.raises(DomainError):
        read_points_csv(bad, 2)
