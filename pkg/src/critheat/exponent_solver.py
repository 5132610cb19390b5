"""Invert lambda = C(d,k,alpha,p) for the boundary exponent p."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import BracketError, DomainError
from .quadrature import DEFAULT, QuadratureConfig
from .special_functions import StableParams, c_kp

# C is never evaluated closer than this to the blow-up at p = alpha
UPPER_GAP = 1e-6


@dataclass(frozen=True)
class ExponentEntry:
    k: int
    j: int
    name: str
    lam: float
    p: float
    residual: float


@dataclass
class ExponentTable:
    entries: list[ExponentEntry]

    def by_name(self) -> dict[str, ExponentEntry]:
        return {e.name: e for e in self.entries}

    def as_dict(self) -> list[dict]:
        return [e.__dict__.copy() for e in self.entries]


def exponent_range(alpha: float, k: int) -> tuple[float, float]:
    """Open interval searched for p: (max(alpha-1, 0), alpha) for k = 1, (0, alpha) otherwise."""
    lo = max(alpha - 1.0, 0.0) if k == 1 else 0.0
    return lo, alpha - UPPER_GAP


def solve_exponent(params: StableParams, k: int, lam: float, tol: float = 1e-10,
                   cfg: QuadratureConfig = DEFAULT, max_iter: int = 200) -> float:
    """The unique p with C(d,k,alpha,p) = lam.

    C vanishes at the lower end of the range (limit for p -> 0+, exact zero at
    p = alpha-1 for k = 1), so that end is never evaluated. Coarse bisection is
    followed by Illinois-modified regula falsi.
    """
    if not lam > 0 or not math.isfinite(lam):
        raise DomainError(f"lambda={lam} must be positive and finite")
    if not 1 <= k <= params.d:
        raise DomainError(f"k={k} outside [1, d={params.d}]")
    alpha = params.alpha
    lo, hi = exponent_range(alpha, k)

    def f(p):
        return c_kp(params, k, p, cfg) - lam

    f_lo = -lam
    f_hi = f(hi)
    if f_hi < 0:
        raise BracketError(f"lambda={lam} exceeds C(k, alpha - {UPPER_GAP:g}) = {f_hi + lam:.6g}",
                           bracket=(lo, hi))
    target = tol * max(1.0, lam)
    width0 = hi - lo
    it = 0
    while hi - lo > width0 / 64 and it < max_iter:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        it += 1
        if abs(fm) <= target:
            return mid
        if fm < 0:
            lo, f_lo = mid, fm
        else:
            hi, f_hi = mid, fm
    side = 0
    while it < max_iter:
        p = (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
        if not lo < p < hi:
            p = 0.5 * (lo + hi)
        fp = f(p)
        it += 1
        if abs(fp) <= target or hi - lo <= 4e-16 * max(1.0, abs(p)):
            return p
        if fp < 0:
            lo, f_lo = p, fp
            if side == -1:
                f_hi *= 0.5
            side = -1
        else:
            hi, f_hi = p, fp
            if side == 1:
                f_lo *= 0.5
            side = 1
    raise BracketError(f"no convergence after {max_iter} evaluations", bracket=(lo, hi))


def solve_all(domain, tol: float = 1e-10, cfg: QuadratureConfig = DEFAULT) -> ExponentTable:
    """One entry per boundary component, ordered by codimension then listing order."""
    comps = domain.all_components()
    order = sorted(range(len(comps)), key=lambda i: (comps[i].codim, i))
    counters: dict[int, int] = {}
    entries, failures = [], []
    for i in order:
        c = comps[i]
        j = counters.get(c.codim, 0)
        counters[c.codim] = j + 1
        try:
            p = solve_exponent(domain.params, c.codim, c.lam, tol, cfg)
        except (DomainError, BracketError) as exc:
            failures.append((c.name, exc))
            continue
        res = abs(c_kp(domain.params, c.codim, p, cfg) - c.lam)
        entries.append(ExponentEntry(c.codim, j, c.name, c.lam, p, res))
    if failures:
        msg = "; ".join(f"component {name}: {exc}" for name, exc in failures)
        first = failures[0][1]
        err = BracketError(msg, bracket=first.bracket) if isinstance(first, BracketError) else DomainError(msg)
        err.failures = failures
        raise err
    return ExponentTable(entries)


__all__ = ["ExponentEntry", "ExponentTable", "exponent_range", "solve_exponent", "solve_all"]
