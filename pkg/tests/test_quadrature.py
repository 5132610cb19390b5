import math

import pytest

from critheat.errors import NonConvergence
from critheat.quadrature import DEFAULT, QuadratureConfig, integrate_adaptive, midpoint_sum, tanh_sinh


@pytest.mark.parametrize("sub", ["none", "power_left", "power_right", "both"])
def test_adaptive_endpoint_singularity(sub):
    # int_0^1 x^{-1/2} (1-x)^{-1/3} dx = B(1/2, 2/3)
    ref = math.gamma(0.5) * math.gamma(2 / 3) / math.gamma(0.5 + 2 / 3)
    v, e = integrate_adaptive(lambda x: x ** -0.5 * (1 - x) ** (-1 / 3), 0.0, 1.0, DEFAULT.with_substitution(sub))
    assert v == pytest.approx(ref, rel=1e-9)


def test_adaptive_infinite():
    v, _ = integrate_adaptive(lambda r: 1 / (1 + r * r), 0.0, math.inf)
    assert v == pytest.approx(math.pi / 2, rel=1e-12)


def test_tanh_sinh():
    v, _ = tanh_sinh(lambda x: math.log(x), 0.0, 1.0)
    assert v == pytest.approx(-1.0, abs=1e-10)
    with pytest.raises(NonConvergence):
        tanh_sinh(lambda x: math.sin(200 * x), 0.0, 10.0, max_level=4)


def test_midpoint():
    assert midpoint_sum(lambda x: x * x, 0.0, 1.0, 10_000, chunk=999) == pytest.approx(1 / 3, abs=1e-8)


def test_config():
    assert DEFAULT.tightened(10).abs_tol == pytest.approx(DEFAULT.abs_tol / 10)
    with pytest.raises(ValueError):
        QuadratureConfig(abs_tol=0)
    with pytest.raises(ValueError):
        QuadratureConfig(endpoint_substitution="odd")
