"""Closed-form constants of the critical killing problem.

All constants are deterministic quadratures. Each public evaluator returns a
float by default, or ``(value, est_error)`` with ``with_error=True``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

from scipy.special import beta as beta_fn
from scipy.special import gamma as gamma_fn
from scipy.special import gammaln

from .errors import DomainError
from .quadrature import DEFAULT, QuadratureConfig, integrate_adaptive

# upper limit of the explicitly integrated part of the s-integral in c_tilde;
# beyond it the integrand is replaced by its power-law expansion
S_TAIL = 1.0e6


def a_norm(d: int, alpha: float) -> float:
    """Normalisation making the PV operator have Fourier symbol -|xi|^alpha."""
    if not 0.0 < alpha < 2.0:
        raise DomainError(f"alpha={alpha} outside (0, 2)")
    if d < 1:
        raise DomainError(f"d={d} must be >= 1")
    # 2^a G((d+a)/2) / (pi^{d/2} |G(-a/2)|), with |G(-a/2)| = G(1-a/2)/(a/2)
    log_v = (alpha * math.log(2.0) + gammaln(0.5 * (d + alpha)) - 0.5 * d * math.log(math.pi)
             - gammaln(1.0 - 0.5 * alpha) + math.log(0.5 * alpha))
    return math.exp(log_v)


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere in R^n (n >= 1; equals 2 for n = 1)."""
    if n < 1:
        raise DomainError("sphere_area needs n >= 1")
    return 2.0 * math.pi ** (0.5 * n) / gamma_fn(0.5 * n)


@dataclass(frozen=True)
class StableParams:
    d: int
    alpha: float
    a_norm: float = field(default=float("nan"))

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0:
            raise DomainError(f"alpha={self.alpha} outside (0, 2)")
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"d={self.d} must be a positive integer")
        value = a_norm(self.d, self.alpha)
        if math.isnan(self.a_norm):
            object.__setattr__(self, "a_norm", value)
        elif abs(self.a_norm - value) > 1e-12 * value:
            raise DomainError("a_norm does not match the closed-form normalisation")


def _check_p(alpha, p):
    if not 0.0 < alpha < 2.0:
        raise DomainError(f"alpha={alpha} outside (0, 2)")
    if not 0.0 < p < alpha:
        raise DomainError(f"p={p} outside (0, alpha={alpha})")


def _ret(value, err, with_error):
    return (float(value), float(err)) if with_error else float(value)


# ---------------------------------------------------------------------------
# codimension one

def _gamma_integrand_t(alpha, p):
    b = alpha - p - 1.0

    def f(t):
        lt = math.log(t)
        return math.expm1(p * lt) * -math.expm1(b * lt) / (1.0 - t) ** (1.0 + alpha)
    return f


def _gamma_integrand_u(alpha, p):
    """Integrand in u = 1 - t; accurate as u -> 0."""
    b = alpha - p - 1.0

    def f(u):
        lt = math.log1p(-u)
        return math.expm1(p * lt) * -math.expm1(b * lt) / u ** (1.0 + alpha)
    return f


def gamma_alpha_p(alpha: float, p: float, cfg: QuadratureConfig = DEFAULT,
                  with_error: bool = False):
    """int_0^1 (t^p - 1)(1 - t^{alpha-p-1}) / (1-t)^{1+alpha} dt."""
    _check_p(alpha, p)
    if alpha - p - 1.0 == 0.0:
        return _ret(0.0, 0.0, with_error)
    # t in (0, 1/2] carries the t^{alpha-p-1} singularity, u = 1-t in (0, 1/2]
    # carries the u^{1-alpha} one
    b = alpha - p - 1.0
    if b < 0.0:
        # peel off t^b exactly; as p -> alpha it is barely integrable and
        # its integral (~ 1/(alpha-p)) defeats the adaptive rule
        def rest(t):
            return math.expm1(p * math.log(t)) / (1.0 - t) ** (1.0 + alpha) + t ** b * (
                -math.expm1(p * math.log(t)) / (1.0 - t) ** (1.0 + alpha) - 1.0)
        v1, e1 = integrate_adaptive(rest, 0.0, 0.5, cfg)
        v1 += 0.5 ** (b + 1.0) / (b + 1.0)
    else:
        v1, e1 = integrate_adaptive(_gamma_integrand_t(alpha, p), 0.0, 0.5, cfg)
    v2, e2 = integrate_adaptive(_gamma_integrand_u(alpha, p), 0.0, 0.5, cfg)
    return _ret(v1 + v2, e1 + e2, with_error)


def c1(params: StableParams, p: float, cfg: QuadratureConfig = DEFAULT,
       with_error: bool = False):
    """C(1, p): harmonic-profile constant of the half-space."""
    d, alpha = params.d, params.alpha
    if d < 2:
        raise DomainError("C(1,p) needs d >= 2")
    g, err = gamma_alpha_p(alpha, p, cfg, with_error=True)
    pref = params.a_norm * 0.5 * sphere_area(d - 1) * beta_fn(0.5 * (alpha + 1.0), 0.5 * (d - 1))
    return _ret(pref * g, abs(pref) * err, with_error)


# ---------------------------------------------------------------------------
# higher codimension

def w_dk(params: StableParams, k: int, cfg: QuadratureConfig = DEFAULT,
         with_error: bool = False):
    """W(d,k) = int_{R^{d-k}} (1 + |u|^2)^{-(d+alpha)/2} du by radial reduction."""
    d, alpha = params.d, params.alpha
    if not 1 <= k <= d:
        raise DomainError(f"k={k} outside [1, d={d}]")
    m = d - k
    if m == 0:
        return _ret(1.0, 0.0, with_error)
    e = 0.5 * (d + alpha)

    def f(r):
        return r ** (m - 1) / (1.0 + r * r) ** e

    v1, e1 = integrate_adaptive(f, 0.0, 1.0, cfg)
    v2, e2 = integrate_adaptive(f, 1.0, math.inf, cfg)
    area = sphere_area(m)
    return _ret(area * (v1 + v2), area * (e1 + e2), with_error)


def _h_prefactor(k):
    return 2.0 * math.pi * math.pi ** (0.5 * (k - 3)) / gamma_fn(0.5 * (k - 1))


@lru_cache(maxsize=65536)
def _h_sk_cached(s, k, alpha, cfg):
    s2m1 = (s - 1.0) * (s + 1.0)

    def front(th):  # cos >= 0
        st, ct = math.sin(th), math.cos(th)
        root = math.sqrt(s2m1 + ct * ct)
        return st ** (k - 2) * (root + ct) ** (1.0 + alpha) / root

    def back(th):  # cos < 0: root + cos = (s^2-1)/(root - cos), no cancellation
        st, ct = math.sin(th), math.cos(th)
        root = math.sqrt(s2m1 + ct * ct)
        return st ** (k - 2) * (s2m1 / (root - ct)) ** (1.0 + alpha) / root

    v1, e1 = integrate_adaptive(front, 0.0, 0.5 * math.pi, cfg)
    v2, e2 = integrate_adaptive(back, 0.5 * math.pi, math.pi, cfg)
    pref = _h_prefactor(k)
    return pref * (v1 + v2), pref * (e1 + e2)


def h_sk(s: float, k: int, alpha: float, cfg: QuadratureConfig = DEFAULT,
         with_error: bool = False):
    """Angular factor H(s, k) of the radial reduction in R^k."""
    if not s > 1.0:
        raise DomainError(f"s={s} must exceed 1")
    if k < 2:
        raise DomainError(f"k={k} must be >= 2")
    v, e = _h_sk_cached(float(s), int(k), float(alpha), cfg)
    return _ret(v, e, with_error)


def _ctilde_tail(alpha, k, p, S):
    """int_S^inf of the large-s expansion of the c_tilde integrand (without A(k))."""
    ck = sphere_area(k)  # limit of H(s,k)/s^alpha
    # (s^p - 1)(1 - s^{alpha-k-p}) s^{-1-2 alpha} s^alpha, termwise
    terms = ((p - alpha, 1.0), (-alpha, -1.0), (-k, -1.0), (-k - p, 1.0))
    tail = sum(c * S ** e / (-e) for e, c in terms)
    return ck * tail


@lru_cache(maxsize=4096)
def _c_tilde_cached(alpha, k, p, cfg):
    e_exp = -k + alpha - p
    inner = cfg.tightened(10.0)

    def g_near(sig):  # s = 1 + sig
        s = 1.0 + sig
        ls = math.log1p(sig)
        num = math.expm1(p * ls) * -math.expm1(e_exp * ls)
        return num * s * (sig * (s + 1.0)) ** (-1.0 - alpha) * _h_sk_cached(s, k, alpha, inner)[0]

    def g_log(w):  # s = e^w
        s = math.exp(w)
        num = math.expm1(p * w) * -math.expm1(e_exp * w)
        return num * s * s * ((s - 1.0) * (s + 1.0)) ** (-1.0 - alpha) * _h_sk_cached(s, k, alpha, inner)[0]

    v1, e1 = integrate_adaptive(g_near, 0.0, 1.0, cfg)
    v2, e2 = integrate_adaptive(g_log, math.log(2.0), math.log(S_TAIL), cfg)
    tail = _ctilde_tail(alpha, k, p, S_TAIL)
    # the expansion drops O(s^-2) relative terms
    e3 = 10.0 * abs(tail) / S_TAIL ** 2
    total = v1 + v2 + tail
    # inner H errors enter relatively
    rel_h = 10.0 * inner.rel_tol
    err = e1 + e2 + e3 + rel_h * abs(total)
    return total, err


def c_tilde(alpha: float, k: int, p: float, cfg: QuadratureConfig = DEFAULT,
            with_error: bool = False):
    """Full-space constant: A(k,-a) p.v. int_{R^k} (|y|^p-|x|^p)/|y-x|^{k+a} = c_tilde |x|^{p-a}."""
    _check_p(alpha, p)
    if k < 2:
        raise DomainError(f"k={k} must be >= 2")
    v, e = _c_tilde_cached(float(alpha), int(k), float(p), cfg)
    a = a_norm(k, alpha)
    return _ret(a * v, a * e, with_error)


def c_kp(params: StableParams, k: int, p: float, cfg: QuadratureConfig = DEFAULT,
         with_error: bool = False):
    """C(d, k, alpha, p); delegates to :func:`c1` for k = 1."""
    d, alpha = params.d, params.alpha
    if not 1 <= k <= d:
        raise DomainError(f"k={k} outside [1, d={d}]")
    _check_p(alpha, p)
    if k == 1:
        return c1(params, p, cfg, with_error=with_error)
    w, ew = w_dk(params, k, cfg, with_error=True)
    ct, ec = c_tilde(alpha, k, p, cfg, with_error=True)
    ratio = params.a_norm / a_norm(k, alpha)
    value = ratio * w * ct
    err = ratio * (abs(w) * ec + abs(ct) * ew)
    return _ret(value, err, with_error)


# ---------------------------------------------------------------------------
# tabulation

@dataclass(frozen=True)
class ConstantEntry:
    k: int
    p: float
    value: float
    est_error: float


@dataclass
class ConstantTable:
    entries: list[ConstantEntry]

    def monotone_violations(self, alpha: float) -> list[tuple[ConstantEntry, ConstantEntry]]:
        """Adjacent pairs (same k) breaking strict increase where it is expected.

        For k = 1 only the range p > (alpha-1)/2 is checked.
        """
        bad = []
        by_k: dict[int, list[ConstantEntry]] = {}
        for e in self.entries:
            by_k.setdefault(e.k, []).append(e)
        for k, rows in by_k.items():
            rows = sorted(rows, key=lambda e: e.p)
            if k == 1:
                rows = [e for e in rows if e.p > 0.5 * (alpha - 1.0)]
            for a, b in zip(rows, rows[1:]):
                if not b.value > a.value:
                    bad.append((a, b))
        return bad


def constant_table(params: StableParams, k: int, ps: Sequence[float],
                   cfg: QuadratureConfig = DEFAULT) -> ConstantTable:
    rows = []
    for p in ps:
        v, e = c_kp(params, k, float(p), cfg, with_error=True)
        rows.append(ConstantEntry(k, float(p), v, e))
    return ConstantTable(rows)


__all__ = [
    "StableParams", "a_norm", "sphere_area", "gamma_alpha_p", "c1", "w_dk", "h_sk",
    "c_tilde", "c_kp", "ConstantEntry", "ConstantTable", "constant_table",
]
