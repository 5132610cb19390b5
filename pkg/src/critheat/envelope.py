"""Two-sided heat kernel envelope: free stable kernel times per-component boundary factors."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .domain_model import DomainSpec, component_distances
from .errors import DomainError, OutsideDomain
from .exponent_solver import ExponentTable, solve_all
from .special_functions import StableParams

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnvelopeParams:
    """``c`` is only a display band: q ~ envelope means envelope/c <= q <= c envelope."""
    params: StableParams
    exponents: ExponentTable
    c: float = 5.0

    def __post_init__(self):
        if not self.c >= 1.0:
            raise DomainError("comparability constant c must be >= 1")


def free_kernel(params: StableParams, t: float, x, y) -> float:
    """min(t^{-d/a}, t / |x - y|^{d+a})."""
    if not t > 0:
        raise DomainError("t must be positive")
    d, alpha = params.d, params.alpha
    r = float(np.linalg.norm(np.asarray(x, float) - np.asarray(y, float)))
    on_diag = t ** (-d / alpha)
    if r == 0.0:
        return on_diag
    return min(on_diag, t / r ** (d + alpha))


def _check_horizon(domain: DomainSpec, t: float) -> None:
    if not t > 0:
        raise DomainError("t must be positive")
    if t > domain.horizon_cap:
        log.warning("t=%g exceeds the horizon cap T=%g; refusing to extrapolate", t, domain.horizon_cap)
        raise DomainError(f"t={t:g} exceeds horizon cap T={domain.horizon_cap:g}")


def _exponent_vector(domain: DomainSpec, exponents: ExponentTable) -> np.ndarray:
    by_name = exponents.by_name()
    try:
        return np.array([by_name[c.name].p for c in domain.all_components()])
    except KeyError as exc:
        raise DomainError(f"no exponent for component {exc.args[0]!r}") from None


def survival_factors(domain: DomainSpec, exponents: ExponentTable, t: float, x) -> np.ndarray:
    """(1 ^ delta_j(x) / t^{1/a})^{p_j}, one factor per component (outer first)."""
    _check_horizon(domain, t)
    x = np.asarray(x, float)
    if not bool(domain.in_outer(x)):
        raise OutsideDomain(f"{x.tolist()} lies outside D'")
    dist = component_distances(domain, x)
    if np.any(dist == 0.0):
        raise OutsideDomain(f"{x.tolist()} lies on the boundary")
    scale = t ** (1.0 / domain.alpha)
    return np.minimum(1.0, dist / scale) ** _exponent_vector(domain, exponents)


def survival_envelope(domain: DomainSpec, exponents: ExponentTable, t: float, x) -> float:
    return float(np.prod(survival_factors(domain, exponents, t, x)))


def product_envelope(domain: DomainSpec, exponents: ExponentTable, t: float, x, y) -> float:
    return (survival_envelope(domain, exponents, t, x) * survival_envelope(domain, exponents, t, y)
            * free_kernel(domain.params, t, x, y))


def envelope_params(domain: DomainSpec, c: float = 5.0, tol: float = 1e-10) -> EnvelopeParams:
    return EnvelopeParams(domain.params, solve_all(domain, tol), c)


def read_points_csv(path, d: int):
    """Rows of (t, x_1..x_d, y_1..y_d); a header row is skipped if present."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for i, rec in enumerate(csv.reader(fh)):
            if not rec or rec[0].lstrip().startswith("#"):
                continue
            try:
                vals = [float(v) for v in rec]
            except ValueError:
                if i == 0:
                    continue
                raise DomainError(f"line {i + 1}: non-numeric entry") from None
            if len(vals) != 1 + 2 * d:
                raise DomainError(f"line {i + 1}: expected {1 + 2 * d} columns, got {len(vals)}")
            rows.append((vals[0], np.array(vals[1:1 + d]), np.array(vals[1 + d:])))
    return rows


def batch_envelope(domain: DomainSpec, exponents: ExponentTable, rows, out_path) -> int:
    """Write t, x.., y.., envelope, free kernel and every boundary factor for x and y."""
    d = domain.d
    names = [c.name for c in domain.all_components()]
    header = (["t"] + [f"x{i + 1}" for i in range(d)] + [f"y{i + 1}" for i in range(d)]
              + ["envelope", "free_kernel"] + [f"fx_{n}" for n in names] + [f"fy_{n}" for n in names])
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t, x, y in rows:
            fx = survival_factors(domain, exponents, t, x)
            fy = survival_factors(domain, exponents, t, y)
            fk = free_kernel(domain.params, t, x, y)
            env = float(np.prod(fx) * np.prod(fy) * fk)
            w.writerow([repr(float(v)) for v in [t, *x, *y, env, fk, *fx, *fy]])
    return len(rows)


def crossover_radius(params: StableParams, t: float) -> float:
    """|x - y| at which the two branches of the free kernel meet: t^{1/a}."""
    return t ** (1.0 / params.alpha)


__all__ = [
    "EnvelopeParams", "free_kernel", "survival_factors", "survival_envelope", "product_envelope",
    "envelope_params", "read_points_csv", "batch_envelope", "crossover_radius",
]
