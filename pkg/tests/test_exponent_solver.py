import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from critheat import exponent_solver as es
from critheat.cli import bundled_config
from critheat.domain_model import model_set, parse_domain
from critheat.errors import BracketError, DomainError, ValidationError
from critheat.special_functions import StableParams, c_kp


def test_lambda_to_zero_limits():
    assert abs(es.solve_exponent(StableParams(3, 1.5), 1, 1e-6) - 0.5) < 1e-3
    assert es.solve_exponent(StableParams(4, 1.0), 2, 1e-6) < 1e-2


def test_round_trip_example():
    prm = StableParams(4, 1.0)
    assert es.solve_exponent(prm, 2, c_kp(prm, 2, 0.37)) == pytest.approx(0.37, abs=1e-8)


@settings(max_examples=25, deadline=None)
@given(d=st.integers(2, 4), kk=st.integers(0, 3), alpha=st.floats(0.3, 1.9), frac=st.floats(0.05, 0.95))
def test_round_trip_property(d, kk, alpha, frac):
    k = 1 + kk % d
    lo, hi = es.exponent_range(alpha, k)
    p = lo + frac * (alpha - lo)
    prm = StableParams(d, alpha)
    lam = c_kp(prm, k, p)
    if k == 1 and p <= 0.5 * (alpha - 1.0):
        return
    assert es.solve_exponent(prm, k, lam, tol=1e-12) == pytest.approx(p, abs=1e-8)


@settings(max_examples=15, deadline=None)
@given(l1=st.floats(0.01, 5.0), l2=st.floats(0.01, 5.0))
def test_monotone_response(l1, l2):
    prm = StableParams(3, 1.2)
    if abs(l1 - l2) < 1e-6:
        return
    p1, p2 = es.solve_exponent(prm, 2, l1), es.solve_exponent(prm, 2, l2)
    assert (p1 < p2) == (l1 < l2)


def test_errors():
    prm = StableParams(3, 1.0)
    with pytest.raises(DomainError):
        es.solve_exponent(prm, 2, 0.0)
    with pytest.raises(DomainError):
        es.solve_exponent(prm, 4, 1.0)
    with pytest.raises(BracketError) as info:
        es.solve_exponent(prm, 2, 1e12)
    lo, hi = info.value.bracket
    assert lo == 0.0 and hi == pytest.approx(1.0 - es.UPPER_GAP)


@pytest.mark.parametrize("k,alpha", [(1, 1.5), (1, 0.7), (3, 1.0)])
def test_bracket_stays_inside_range(monkeypatch, k, alpha):
    seen = []
    real = es.c_kp

    def spy(params, kk, p, cfg=None):
        seen.append(p)
        return real(params, kk, p, cfg)
    monkeypatch.setattr(es, "c_kp", spy)
    prm = StableParams(3, alpha)
    es.solve_exponent(prm, k, 0.3)
    lo = max(alpha - 1.0, 0.0) if k == 1 else 0.0
    assert seen and all(lo < p < alpha for p in seen)


def test_solve_all_examples():
    t2 = es.solve_all(parse_domain(bundled_config("ex1.2")))
    assert [e.k for e in t2.entries] == [2, 2]
    assert t2.by_name()["x0"].p == pytest.approx(0.5, abs=1e-8)
    assert t2.by_name()["x1"].p == pytest.approx(0.3, abs=1e-8)
    t3 = es.solve_all(parse_domain(bundled_config("ex1.3")))
    assert len(t3.entries) == 1 and t3.entries[0].k == 2
    assert t3.entries[0].p == pytest.approx(0.4, abs=1e-8)
    assert all(e.residual < 1e-9 for e in t2.entries + t3.entries)


def test_solve_all_ordering():
    cfg = {"d": 3, "alpha": 1.0, "components": [
        {"name": "pt", "shape": "point", "location": [0, 5.0, 0], "lambda": 0.5},
        {"name": "line", "shape": "affine", "basepoint": [0, 0, 0], "normals": [[0, 1, 0], [0, 0, 1]],
         "lambda": 0.5}]}
    table = es.solve_all(parse_domain(cfg))
    assert [e.name for e in table.entries] == ["line", "pt"]
    assert [(e.k, e.j) for e in table.entries] == [(2, 0), (3, 0)]


def test_half_space_zero_lambda_rejected():
    with pytest.raises(ValidationError):
        model_set(3, 1, 1.0, lam=0.0)
    dom = model_set(3, 1, 1.0).with_lambdas({"outer": 0.0})
    with pytest.raises(DomainError):
        es.solve_all(dom)


def test_as_dict():
    rows = es.solve_all(model_set(2, 2, 1.0, 0.2)).as_dict()
    assert rows[0]["name"] == "c0" and np.isfinite(rows[0]["p"])
