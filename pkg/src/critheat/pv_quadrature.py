"""Principal-value integrals A(d,-a) p.v. int_D (u(y) - u(x)) |y-x|^{-d-a} dy.

Polar coordinates around x: y = x + r w. The radial integral runs over
adaptive Gauss-Kronrod panels (dyadic shells, geometric refinement around
every radius where the sphere |y - x| = r touches a singular set, log-variable
panels in the far field). For each radius the sphere integral is split as
w = cos(phi) n + sin(phi) eta with n pointing to the nearest singular point;
along phi the rule is composite Gauss-Legendre, geometrically graded towards
every point where the integrand has a kink or jump (domain crossings, valleys
of a distance function), and eta runs over a fixed rule on S^{d-2}.

For r < delta(x) the symmetrised integrand (u(x+rw) + u(x-rw))/2 - u(x) is
used, so the gradient term cancels exactly; inside r < eps the remainder is
taken as c r^2 (second order) or dropped (zeroth order).
"""
from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_legendre

from . import geometry as geo
from .domain_model import Component, DomainSpec, component_distances
from .errors import DomainError, NonConvergence, OutsideDomain, SingularityTooClose
from .special_functions import c_kp, sphere_area

# Gauss-Kronrod 15/7 (QUADPACK qk15)
_XGK = np.array([0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                 0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                 0.207784955007898467600689403773245, 0.0])
_WGK = np.array([0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                 0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                 0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                0.381830050505118944950369775488975, 0.417959183673469387755102040816327])
GK_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
GK_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
# Gauss weights live on the odd-indexed Kronrod nodes
G_WEIGHTS = np.zeros(15)
G_WEIGHTS[1::2] = np.concatenate([_WG[:-1], _WG[::-1]])

COMPENSATIONS = ("zeroth", "second")


@dataclass(frozen=True)
class PVConfig:
    """``shell_count``: geometric refinement levels on each side of a singular radius."""
    inner_radius: float = 1e-4
    compensation_order: str = "second"
    outer_radius: float = 1e14
    shell_count: int = 24
    tol: float = 1e-4
    phi_levels: int = 10
    phi_order: int = 8
    eta_nodes: int = 64
    max_panels: int = 600

    def __post_init__(self):
        if not self.inner_radius > 0:
            raise DomainError("inner_radius must be positive")
        if not self.outer_radius > self.inner_radius:
            raise DomainError("outer_radius must exceed inner_radius")
        if self.compensation_order not in COMPENSATIONS:
            raise DomainError(f"compensation_order must be one of {COMPENSATIONS}")
        if self.shell_count < 1 or self.phi_levels < 1 or self.phi_order < 2 or self.eta_nodes < 4:
            raise DomainError("resolution parameters too small")
        if not self.tol > 0:
            raise DomainError("tol must be positive")


# ---------------------------------------------------------------------------
# test functions

@dataclass(frozen=True)
class DeltaPower:
    """u = delta_D(y)^p, the distance to the nearest boundary component."""
    p: float


@dataclass(frozen=True)
class VerticalPower:
    """u = h(y)^p with h the vertical distance to the named component's chart."""
    p: float
    component: str


@dataclass(frozen=True)
class RadialPower:
    """u = |y - center|^p."""
    p: float
    center: tuple


@dataclass(frozen=True)
class Constant:
    value: float = 1.0


@dataclass
class _Bound:
    value: object            # Y (..., d) -> u
    growth: float            # u(y) = O(|y|^growth)
    features: list           # [(fn, signed)] whose zeros / minima are kinks of the integrand
    anchors: list            # [(distance from x, foot, tangent rows)] of singular sets


def _feature(domain: DomainSpec, comp: Component):
    spec = comp.spec
    if comp is domain.outer:
        sign = domain.outer_sign
        return (lambda y: sign * geo.signed_distance(spec, y)), True
    if spec.is_graph:
        return spec.shape.vertical, False
    return spec.shape.distance, False


def _growth(spec: geo.SubmanifoldSpec, p: float) -> float:
    """Exponent g with h(y)^p = O(|y|^g) on D, for the vertical distance of a graph."""
    if not spec.is_graph:
        return p
    g = spec.shape
    if g.family == "power_cone":
        if spec.codim == 1 and min(g.params["c"]) >= 0:
            return p    # D lies above a graph bounded below
        return p * (1.0 + float(g.params["beta"]))
    if g.family == "polynomial":
        return 2.0 * p if np.any(np.asarray(g.params["quadratic"])) else p
    raise DomainError(f"vertical power on a {g.family} chart is not defined far from the chart")


def _anchor(comp: Component, x):
    dist, foot = geo.nearest_point(comp.spec, x)
    return dist, foot, comp.spec.shape.tangent(foot)


def _bind(domain: DomainSpec, u, x) -> _Bound:
    comps = domain.all_components()
    feats = [_feature(domain, c) for c in comps]
    anchors = [_anchor(c, x) for c in comps]
    if isinstance(u, Constant):
        c = float(u.value)
        return _Bound(lambda y: np.full(np.shape(y)[:-1], c), 0.0, feats, anchors)
    if not u.p > 0:
        raise DomainError("test-function power must be positive")
    if isinstance(u, DeltaPower):
        p = u.p

        def value(y):
            return np.min(component_distances(domain, y), axis=0) ** p
        growth = max([p] + [_growth(c.spec, p) if not c.spec.is_graph else p for c in comps])
        return _Bound(value, growth, feats, anchors)
    if isinstance(u, VerticalPower):
        comp = domain.component(u.component)
        p = u.p
        shape = comp.spec.shape

        def value(y):
            if comp.spec.is_graph:
                return shape.vertical(y) ** p
            return shape.distance(y) ** p
        return _Bound(value, _growth(comp.spec, p), feats, anchors)
    if isinstance(u, RadialPower):
        c = np.asarray(u.center, float)
        p = u.p

        def value(y):
            return np.linalg.norm(y - c, axis=-1) ** p

        def dist_c(y):
            return np.linalg.norm(y - c, axis=-1)
        dc = float(np.linalg.norm(np.asarray(x, float) - c))
        return _Bound(value, p, feats + [(dist_c, False)], anchors + [(dc, c, np.zeros((0, c.size)))])
    raise DomainError(f"unknown test function {u!r}")


# ---------------------------------------------------------------------------
# angular rule

def _frame(anchors, x, d):
    dist, foot, tang = min(anchors, key=lambda a: a[0])
    n = (foot - x) / dist
    cols = [n]
    for v in list(tang) + list(np.eye(d)):
        w = v - sum((v @ c) * c for c in cols)
        nw = np.linalg.norm(w)
        if nw > 1e-8:
            cols.append(w / nw)
        if len(cols) == d:
            break
    return n, np.array(cols[1:])


def _psi_rule(m: int):
    """Periodic trapezoid rule on [0, 2 pi) after psi = tau - sin(2 tau)/2.

    The map is flat to second order at psi = 0 and pi, where the eta circle
    passes through the tangent directions of the nearest singular set and the
    phi-integrated integrand has a |psi|^{1+p} kink.
    """
    tau = 2.0 * np.pi * np.arange(m) / m
    return tau - 0.5 * np.sin(2.0 * tau), (2.0 * np.pi / m) * (1.0 - np.cos(2.0 * tau))


def _eta_rule(d: int, basis: np.ndarray, m: int):
    """Nodes and weights on the unit sphere of span(basis), a (d-2)-sphere."""
    if d == 2:
        return np.stack([basis[0], -basis[0]]), np.ones(2)
    if d == 3:
        m += m % 2
        psi, w = _psi_rule(m)
        return np.cos(psi)[:, None] * basis[0] + np.sin(psi)[:, None] * basis[1], w
    if d == 4:
        # eta = cos(th) b0 + sin(th) (cos(psi) b1 + sin(psi) b2); the tangent
        # direction b0 is a kink of the integrand, so th = tau - sin(2 tau)/2 as well
        n1 = max(4, m // 4)
        n2 = max(8, m // 2)
        tau, wt = roots_legendre(n1)
        tau = 0.5 * np.pi * (tau + 1.0)
        th = tau - 0.5 * np.sin(2.0 * tau)
        wc = 0.5 * np.pi * wt * (1.0 - np.cos(2.0 * tau)) * np.sin(th)
        c, s = np.cos(th), np.sin(th)
        psi, wp = _psi_rule(n2)
        eta = (c[:, None, None] * basis[0]
               + (s[:, None] * np.cos(psi))[..., None] * basis[1]
               + (s[:, None] * np.sin(psi))[..., None] * basis[2]).reshape(-1, 4)
        return eta, (wc[:, None] * wp).ravel()
    # d > 4: scrambled Sobol points pushed to the sphere, fixed seed
    from scipy.stats import norm, qmc
    k = d - 1
    n = 2 ** int(math.ceil(math.log2(m * 8)))
    pts = qmc.Sobol(k, scramble=True, seed=12345).random(n)
    g = norm.ppf(np.clip(pts, 1e-12, 1 - 1e-12))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g @ basis, np.full(n, sphere_area(k) / n)


def _graded_reference(levels: int, order: int, sigma: float = 0.15):
    """Nodes/weights on (0, 1) geometrically graded towards 0."""
    x, w = roots_legendre(order)
    edges = np.concatenate([[0.0], sigma ** np.arange(levels, -1, -1.0)])
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (b - a) * x + 0.5 * (a + b))
        weights.append(0.5 * (b - a) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _first_two(mask):
    """Column indices of the first two True entries per row (and validity)."""
    i1 = np.argmax(mask, axis=1)
    ok1 = mask[np.arange(len(mask)), i1]
    m2 = mask.copy()
    m2[np.arange(len(mask)), i1] = False
    i2 = np.argmax(m2, axis=1)
    ok2 = m2[np.arange(len(mask)), i2]
    return (i1, ok1), (i2, ok2)


_GRID = np.linspace(0.0, np.pi, 65)
_GOLD = 0.5 * (math.sqrt(5.0) - 1.0)


def _breakpoints(point_fn, feats, rows):
    """Kink locations in phi per eta row: sign changes and local minima of |feature|."""
    found = []
    grid = np.broadcast_to(_GRID, (rows, _GRID.size))
    for fn, signed in feats:
        vals = fn(point_fn(grid, None))
        a = np.abs(vals)
        change = np.zeros_like(a, dtype=bool)
        if signed:
            s = np.sign(vals)
            change = s[:, :-1] * s[:, 1:] < 0
            for idx, ok in _first_two(change):
                lo, hi = _GRID[idx], _GRID[idx + 1]
                flo = np.take_along_axis(vals, idx[:, None], 1)[:, 0]
                for _ in range(46):
                    mid = 0.5 * (lo + hi)
                    fm = fn(point_fn(mid[:, None], None))[:, 0]
                    left = np.sign(fm) == np.sign(flo)
                    lo = np.where(left, mid, lo)
                    flo = np.where(left, fm, flo)
                    hi = np.where(left, hi, mid)
                found.append(np.where(ok, 0.5 * (lo + hi), np.nan))
        inner = (a[:, 1:-1] <= a[:, :-2]) & (a[:, 1:-1] <= a[:, 2:])
        if signed:
            inner &= ~(change[:, :-1] | change[:, 1:])
        if not inner.any():
            continue
        masked = np.where(inner, a[:, 1:-1], np.inf)
        i = np.argmin(masked, axis=1)
        ok = np.isfinite(masked[np.arange(rows), i])
        lo, hi = _GRID[i], _GRID[i + 2]
        c = hi - _GOLD * (hi - lo)
        e = lo + _GOLD * (hi - lo)
        fc = np.abs(fn(point_fn(c[:, None], None))[:, 0])
        fe = np.abs(fn(point_fn(e[:, None], None))[:, 0])
        for _ in range(44):
            left = fc < fe
            hi = np.where(left, e, hi)
            lo = np.where(left, lo, c)
            e_new = np.where(left, c, lo + _GOLD * (hi - lo))
            c_new = np.where(left, hi - _GOLD * (hi - lo), e)
            fe_new = np.where(left, fc, np.nan)
            fc_new = np.where(left, np.nan, fe)
            need_c = np.isnan(fc_new)
            need_e = np.isnan(fe_new)
            if need_c.any():
                fc_new = np.where(need_c, np.abs(fn(point_fn(c_new[:, None], None))[:, 0]), fc_new)
            if need_e.any():
                fe_new = np.where(need_e, np.abs(fn(point_fn(e_new[:, None], None))[:, 0]), fe_new)
            c, e, fc, fe = c_new, e_new, fc_new, fe_new
        found.append(np.where(ok, 0.5 * (lo + hi), np.nan))
    b = np.full((rows, len(found) + 2), np.pi)
    b[:, 0] = 0.0
    for j, f in enumerate(found):
        b[:, j + 1] = np.where(np.isnan(f), np.pi, np.clip(f, 0.0, np.pi))
    return np.sort(b, axis=1)


def _graded_nodes(breaks, tref, wref):
    """Nodes/weights on [0, pi] per row, graded towards each breakpoint from both sides."""
    a, b = breaks[:, :-1], breaks[:, 1:]
    m = 0.5 * (a + b)
    left = a[..., None] + (m - a)[..., None] * tref
    right = b[..., None] - (b - m)[..., None] * tref
    wl = (m - a)[..., None] * wref
    wr = (b - m)[..., None] * wref
    rows = breaks.shape[0]
    return (np.concatenate([left, right], -1).reshape(rows, -1),
            np.concatenate([wl, wr], -1).reshape(rows, -1))


class _Sphere:
    """Angular integral G(r) = int_{S^{d-1}} [integrand] dw for one evaluation point."""

    def __init__(self, domain, bound, x, delta, cfg: PVConfig):
        self.domain, self.bound, self.x, self.delta, self.cfg = domain, bound, x, delta, cfg
        d = domain.d
        self.d = d
        self.n, basis = _frame(bound.anchors, x, d)
        # the half-resolution eta rule only serves the error estimate
        self.rules = (_eta_rule(d, basis, cfg.eta_nodes), _eta_rule(d, basis, cfg.eta_nodes // 2))
        self.eta, self.eta_w = self.rules[0]
        self.ux = float(bound.value(x[None, :])[0])
        self.fine = _graded_reference(cfg.phi_levels, cfg.phi_order)
        self.coarse = _graded_reference(max(1, cfg.phi_levels - 1), max(2, cfg.phi_order - 1))
        self.evals = 0

    def _points(self, r, eta):
        """phi (rows, K) -> points (rows, K, d); rows run over (radius, eta) pairs."""
        x, n = self.x, self.n
        eta = np.tile(eta, (len(r), 1))
        rr = np.repeat(r, len(eta) // len(r))[:, None, None]

        def fn(phi, _):
            c, s = np.cos(phi), np.sin(phi)
            return x + rr * (c[..., None] * n + s[..., None] * eta[:, None, :])
        return fn

    def _group(self, r, kind, coarse, eta):
        rows = len(r) * len(eta)
        fwd = self._points(r, eta)
        if kind == "plain":
            breaks = np.tile([0.0, np.pi], (rows, 1))
        else:
            feats = list(self.bound.features)
            if kind == "sym":
                feats += [((lambda y, f=f: f(2.0 * self.x - y)), s) for f, s in feats]
            breaks = _breakpoints(fwd, feats, rows)
        tref, wref = self.coarse if coarse else self.fine
        phi, w = _graded_nodes(breaks, tref, wref)
        y = fwd(phi, None)
        if kind == "out":
            f = np.where(self.domain.in_outer(y), self.bound.value(y) - self.ux, 0.0)
        else:
            f = 0.5 * (self.bound.value(y) + self.bound.value(2.0 * self.x - y)) - self.ux
        self.evals += f.size
        jac = np.sin(phi) ** (self.d - 2) if self.d > 2 else 1.0
        return (w * jac * f).reshape(len(r), len(eta), -1).sum(axis=2)

    def many(self, r, coarse: bool = False, eta_coarse: bool = False) -> np.ndarray:
        """G at each radius; ``coarse`` degrades the phi rule, ``eta_coarse`` the eta rule."""
        eta, eta_w = self.rules[1 if eta_coarse else 0]
        r = np.asarray(r, float)
        out = np.empty((len(r), len(eta)))
        kinds = np.where(r < 0.5 * self.delta, 0, np.where(r < self.delta, 1, 2))
        for code, kind in enumerate(("plain", "sym", "out")):
            sel = kinds == code
            if sel.any():
                out[sel] = self._group(r[sel], kind, coarse, eta)
        return out @ eta_w

    def __call__(self, r: float, coarse: bool = False, eta_coarse: bool = False) -> float:
        return float(self.many([r], coarse, eta_coarse)[0])


# ---------------------------------------------------------------------------
# radial panels

@dataclass
class ShellRecord:
    index: int
    r_in: float
    r_out: float
    contribution: float
    error: float


@dataclass
class PVResult:
    value: float
    error: float
    shells: list[ShellRecord] = field(default_factory=list)
    evaluations: int = 0
    delta: float = 0.0
    error_parts: dict = field(default_factory=dict)


def _gk_panel(fn, a, b):
    c, h = 0.5 * (a + b), 0.5 * (b - a)
    vals = fn(c + h * GK_NODES)
    k = h * float(GK_WEIGHTS @ vals)
    g = h * float(G_WEIGHTS @ vals)
    return k, abs(k - g)


def _radial_edges(delta, others, eps, r1, levels):
    edges = {eps, r1}
    r = eps
    while r < 0.5 * delta:
        edges.add(r)
        r *= 2.0
    edges.add(0.5 * delta)
    for rad in [delta] + [o for o in others if eps < o < r1]:
        edges.add(rad)
        for i in range(1, levels + 1):
            for e in (rad * (1 - 2.0 ** -i), rad * (1 + 2.0 ** -i)):
                if eps < e < r1:
                    edges.add(e)
    r = 2.0 * delta
    while r < r1:
        edges.add(r)
        r *= 2.0
    return sorted(edges)


def _inner_model(g, eps: float, alpha: float, noise: float) -> float:
    """int_0^eps G(r) r^{-1-alpha} dr from G at eps, eps/2, eps/4, eps/8."""
    h = g[:-1] - 4.0 * g[1:]          # removes the r^2 part
    b_only = g[0] * eps ** (-alpha) / (2.0 - alpha)
    if min(abs(h[0]), abs(h[1])) < 100 * noise or h[0] * h[1] <= 0:
        return b_only
    q = math.log2(h[0] / h[1])
    if q <= alpha:
        raise NonConvergence(f"u is not smooth enough at x: local order {q:.3g} <= alpha",
                             achieved=math.inf)
    shrink = 1.0 - 4.0 * 2.0 ** -q
    if abs(shrink) < 1e-2 or q > 4.0:
        return b_only
    a = h[0] / (eps ** q * shrink)
    b = (g[0] - a * eps ** q) / eps ** 2
    return a * eps ** (q - alpha) / (q - alpha) + b * eps ** (2.0 - alpha) / (2.0 - alpha)


def pv_apply(domain: DomainSpec, u, x, cfg: PVConfig = PVConfig(), with_error: bool = False,
             details: bool = False):
    """A(d,-a) p.v. int_D (u(y) - u(x)) / |y - x|^{d+a} dy.

    Returns the value, ``(value, error)`` with ``with_error``, or a
    :class:`PVResult` (per-shell breakdown) with ``details``. Raises
    :class:`NonConvergence` when the error estimate exceeds ``cfg.tol`` times
    the natural scale max(|value|, |u(x)| delta^{-a}).
    """
    x = np.asarray(x, float)
    d, alpha = domain.d, domain.alpha
    if x.shape != (d,):
        raise DomainError(f"x must have {d} coordinates")
    if not bool(domain.in_outer(x)):
        raise OutsideDomain(f"{x.tolist()} lies outside D'")
    bound = _bind(domain, u, x)
    if not bound.anchors:
        raise DomainError("pv_apply needs at least one singular set to orient the sphere rule")
    radii = [a[0] for a in bound.anchors]
    delta = min(radii)
    eps = cfg.inner_radius
    if delta == 0.0:
        raise OutsideDomain("x lies on the singular set")
    if delta < 10.0 * eps:
        raise SingularityTooClose(f"delta(x)={delta:.3g} < 10 * inner_radius={eps:.3g}")
    if isinstance(u, Constant):
        res = PVResult(0.0, 0.0, [], 0, delta)
        return res if details else ((0.0, 0.0) if with_error else 0.0)
    sph = _Sphere(domain, bound, x, delta, cfg)
    far = max(radii + [float(np.linalg.norm(x))])
    r1 = max(64.0 * delta, 8.0 * far)
    if r1 >= cfg.outer_radius:
        raise DomainError("outer_radius too small for this evaluation point")
    edges = _radial_edges(delta, radii[1:] if len(radii) > 1 else [], eps, r1, cfg.shell_count)

    def f_r(r):
        return sph.many(r) * r ** (-1.0 - alpha)

    def f_w(w):
        r = np.exp(w)
        return sph.many(r) * r ** (-alpha)

    panels = []  # (-err, a, b, is_log, value)
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = _gk_panel(f_r, a, b)
        panels.append((-e, a, b, False, v))
    w0, w1 = math.log(r1), math.log(cfg.outer_radius)
    nlog = max(1, int(math.ceil(w1 - w0)))
    for i in range(nlog):
        a, b = w0 + (w1 - w0) * i / nlog, w0 + (w1 - w0) * (i + 1) / nlog
        v, e = _gk_panel(f_w, a, b)
        panels.append((-e, a, b, True, v))

    # inner ball: G(r) ~ a r^q + b r^2 below eps (q = 1 + beta when u is only
    # C^{1,beta} at x). The model fitted at eps is compared with the one fitted
    # at eps/2 plus a Gauss-Kronrod panel over [eps/2, eps].
    gs = sph.many(eps * 2.0 ** -np.arange(5))
    noise = 1e-13 * sphere_area(d) * (abs(sph.ux) + 1e-300)
    inner = float(_inner_model(gs[:4], eps, alpha, noise))
    shifted = _inner_model(gs[1:], 0.5 * eps, alpha, noise) + _gk_panel(f_r, 0.5 * eps, eps)[0]
    inner_err = float(abs(inner - shifted)) + noise * eps ** (-alpha) / (2.0 - alpha)
    if cfg.compensation_order == "zeroth":
        inner_err = abs(inner) + inner_err
        inner = 0.0

    # far tail beyond the cutoff: G(r) ~ G(R) (r/R)^growth, so the tail is
    # G(R) R^{-a} / (a - growth); added as a correction with half its size as error
    # The same prediction made one log panel earlier, compared with that panel's
    # integral plus the prediction at R, gives the error estimate.
    big = cfg.outer_radius
    gap = max(alpha - bound.growth, 1e-3)
    tail = sph(big) * big ** (-alpha) / gap
    last = max((p for p in panels if p[3]), key=lambda p: p[2])
    r_prev = math.exp(last[1])
    tail_prev = sph(r_prev) * r_prev ** (-alpha) / gap
    tail_err = abs(tail_prev - (last[4] + tail))

    scale_ref = abs(sph.ux) * delta ** (-alpha) + 1e-300
    heapq.heapify(panels)
    a_norm = domain.params.a_norm

    def totals():
        val = math.fsum(p[4] for p in panels) + inner + tail
        return val, math.fsum(-p[0] for p in panels)

    val, err = totals()
    while len(panels) < cfg.max_panels and err > 0.1 * cfg.tol * max(abs(val), scale_ref):
        e, a, b, is_log, _ = heapq.heappop(panels)
        m = 0.5 * (a + b)
        fn = f_w if is_log else f_r
        for lo, hi in ((a, m), (m, b)):
            v, e2 = _gk_panel(fn, lo, hi)
            heapq.heappush(panels, (-e2, lo, hi, is_log, v))
        val, err = totals()
    # angular error: coarse-vs-fine rule at the radii of the largest panels
    # (largest relative change, times the total absolute panel mass)
    rel = 0.0
    probe = sorted(panels, key=lambda p: -abs(p[4]))[:8]
    for _, a, b, is_log, v in probe:
        m = 0.5 * (a + b)
        r = math.exp(m) if is_log else m
        fine, crude, half = sph(r), sph(r, coarse=True), sph(r, eta_coarse=True)
        if fine != 0.0:
            rel = max(rel, (abs(fine - crude) + abs(fine - half)) / abs(fine))
    ang_err = rel * math.fsum(abs(p[4]) for p in panels)
    parts = {"radial": err, "inner": inner_err, "tail": tail_err, "angular": ang_err}
    err += inner_err + tail_err + ang_err
    value = a_norm * val
    error = a_norm * err
    shells = []
    ordered = sorted(panels, key=lambda p: (p[3], p[1]))
    for i, (e, a, b, is_log, v) in enumerate(ordered):
        lo, hi = (math.exp(a), math.exp(b)) if is_log else (a, b)
        shells.append(ShellRecord(i + 1, lo, hi, a_norm * v, -a_norm * e))
    shells.insert(0, ShellRecord(0, 0.0, eps, a_norm * inner, a_norm * inner_err))
    shells.append(ShellRecord(len(shells) + 1, big, math.inf, a_norm * tail, a_norm * tail_err))
    res = PVResult(value, error, shells, sph.evals, delta, {k: float(a_norm * v) for k, v in parts.items()})
    if error > cfg.tol * max(abs(value), a_norm * scale_ref):
        exc = NonConvergence(f"PV error estimate {error:.3g} above tolerance", achieved=error)
        exc.result = res
        raise exc
    if details:
        return res
    return (value, error) if with_error else value


def write_shell_csv(result: PVResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["shell", "inner_radius", "contribution", "error_estimate"])
        for s in result.shells:
            w.writerow([s.index, repr(float(s.r_in)), repr(float(s.contribution)), repr(float(s.error))])


# ---------------------------------------------------------------------------
# identities

def profile_ratio(d: int, k: int, alpha: float, p: float, x=None, cfg: PVConfig = PVConfig()):
    """pv_apply(delta^p) / (C(k,p) delta^{p-alpha}) on the model set D_k."""
    from .domain_model import model_set
    dom = model_set(d, k, alpha)
    if x is None:
        x = np.zeros(d)
        x[-1] = 1.0
    x = np.asarray(x, float)
    val, err = pv_apply(dom, DeltaPower(p), x, cfg, with_error=True)
    dist = float(np.min(component_distances(dom, x)))
    ref = c_kp(dom.params, k, p) * dist ** (p - alpha)
    return val / ref, err / abs(ref)


def graph_domain(spec: geo.SubmanifoldSpec, alpha: float) -> DomainSpec:
    """Region above a codimension-one graph, or R^d minus a higher-codimension one."""
    from .special_functions import StableParams
    params = StableParams(spec.ambient, alpha)
    comp = Component(spec, 1.0, "outer" if spec.codim == 1 else "c0")
    if spec.codim == 1:
        return DomainSpec(params, (), comp, 1.0)
    return DomainSpec(params, (comp,))


def residual_perturbation(spec: geo.SubmanifoldSpec, x, p: float, alpha: float,
                          cfg: PVConfig = PVConfig(), with_error: bool = False):
    """|pv_apply(h^p, x) - C(k,p) h(x)^p delta(x)^{-alpha}| for a graph chart."""
    dom = graph_domain(spec, alpha)
    name = dom.all_components()[0].name
    val, err = pv_apply(dom, VerticalPower(p, name), x, cfg, with_error=True)
    h = geo.vertical_distance(spec, x)
    delta = geo.true_distance(spec, x)
    ref = c_kp(dom.params, spec.codim, p) * h ** p * delta ** (-alpha)
    res = abs(val - ref)
    return (res, err) if with_error else res


__all__ = [
    "PVConfig", "DeltaPower", "VerticalPower", "RadialPower", "Constant", "PVResult", "ShellRecord",
    "pv_apply", "write_shell_csv", "profile_ratio", "graph_domain", "residual_perturbation",
    "GK_NODES", "GK_WEIGHTS", "G_WEIGHTS",
]
