"""Submanifolds of R^d: points, round spheres, affine planes and graph charts.

A graph chart of codimension k writes points as y = (y~, y') with y~ the first
d-k coordinates and y' the last k, and the manifold as y' = G(y~).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from .errors import ChartError, DomainError, ProjectionNonConvergence


def _orthonormal_rows(m: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(np.atleast_2d(np.asarray(m, float)).T)
    if np.any(np.abs(np.diag(r)) < 1e-12):
        raise DomainError("frame vectors are linearly dependent")
    # keep the orientation of the given vectors
    return (q * np.sign(np.diag(r))).T


@dataclass(frozen=True, eq=False)
class Point:
    location: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "location", np.asarray(self.location, float).ravel())

    @property
    def ambient(self) -> int:
        return self.location.size

    @property
    def codim(self) -> int:
        return self.ambient

    def distance(self, y):
        return np.linalg.norm(np.asarray(y, float) - self.location, axis=-1)

    def foot(self, y):
        return self.location.copy()

    def tangent(self, foot):
        return np.zeros((0, self.ambient))


@dataclass(frozen=True, eq=False)
class Sphere:
    """Round m-sphere of radius ``radius`` inside the (m+1)-plane ``center + span(axes)``.

    ``axes`` defaults to the first m+1 coordinate directions.
    """
    center: np.ndarray
    radius: float
    m: int
    axes: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.center, float).ravel()
        object.__setattr__(self, "center", c)
        if not self.radius > 0:
            raise DomainError("sphere radius must be positive")
        if not 1 <= self.m <= c.size - 1:
            raise DomainError(f"sphere dimension m={self.m} must lie in [1, d-1]")
        ax = np.eye(c.size)[: self.m + 1] if self.axes is None else _orthonormal_rows(self.axes)
        if ax.shape != (self.m + 1, c.size):
            raise DomainError("sphere axes must be m+1 vectors in R^d")
        object.__setattr__(self, "axes", ax)

    @property
    def ambient(self) -> int:
        return self.center.size

    @property
    def codim(self) -> int:
        return self.ambient - self.m

    def _split(self, y):
        u = np.asarray(y, float) - self.center
        a = u @ self.axes.T
        na = np.linalg.norm(a, axis=-1)
        rest2 = np.maximum(np.einsum("...i,...i->...", u, u) - na * na, 0.0)
        return a, na, rest2

    def distance(self, y):
        _, na, rest2 = self._split(y)
        return np.sqrt((na - self.radius) ** 2 + rest2)

    def signed(self, y):
        """Codimension one only: positive outside the ball."""
        _, na, _ = self._split(y)
        return na - self.radius

    def foot(self, y):
        a, na, _ = self._split(y)
        dirn = a / na if na > 0 else np.eye(self.m + 1)[0]
        return self.center + self.radius * dirn @ self.axes

    def tangent(self, foot):
        # tangent space of the sphere at ``foot``: directions in span(axes) orthogonal to the radius
        rad = (foot - self.center) @ self.axes.T
        rad = rad / np.linalg.norm(rad)
        basis = np.eye(self.m + 1) - np.outer(rad, rad)
        q, r = np.linalg.qr(basis)
        keep = np.abs(np.diag(r)) > 1e-10
        return (q[:, keep].T) @ self.axes


@dataclass(frozen=True, eq=False)
class Affine:
    """Affine plane ``{y : N (y - basepoint) = 0}`` with orthonormal normal rows N."""
    basepoint: np.ndarray
    normals: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basepoint, float).ravel()
        object.__setattr__(self, "basepoint", b)
        n = _orthonormal_rows(self.normals)
        if n.shape[1] != b.size:
            raise DomainError("normal frame and basepoint dimensions differ")
        object.__setattr__(self, "normals", n)

    @property
    def ambient(self) -> int:
        return self.basepoint.size

    @property
    def codim(self) -> int:
        return self.normals.shape[0]

    def distance(self, y):
        return np.linalg.norm((np.asarray(y, float) - self.basepoint) @ self.normals.T, axis=-1)

    def signed(self, y):
        """Codimension one only: positive on the side the normal points to."""
        return (np.asarray(y, float) - self.basepoint) @ self.normals[0]

    def foot(self, y):
        y = np.asarray(y, float)
        return y - ((y - self.basepoint) @ self.normals.T) @ self.normals

    def tangent(self, foot):
        d = self.ambient
        proj = np.eye(d) - self.normals.T @ self.normals
        q, r = np.linalg.qr(proj)
        keep = np.abs(np.diag(r)) > 1e-10
        return q[:, keep].T


@dataclass(frozen=True, eq=False)
class Graph:
    """Graph chart y' = G(y~) with G: R^{d-k} -> R^k.

    ``gamma`` maps (..., d-k) -> (..., k) and ``jac`` maps (..., d-k) -> (..., k, d-k).
    """
    d: int
    k: int
    gamma: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray]
    center: np.ndarray
    family: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= self.k <= self.d - 1:
            raise DomainError(f"graph codimension k={self.k} must lie in [1, d-1]")
        c = np.asarray(self.center, float).ravel()
        if c.size != self.d - self.k:
            raise DomainError("chart center must have d-k coordinates")
        object.__setattr__(self, "center", c)

    @property
    def ambient(self) -> int:
        return self.d

    @property
    def codim(self) -> int:
        return self.k

    def split(self, y):
        y = np.asarray(y, float)
        return y[..., : self.d - self.k], y[..., self.d - self.k:]

    def vertical(self, y):
        yt, yp = self.split(y)
        return np.linalg.norm(yp - self.gamma(yt), axis=-1)

    def signed(self, y):
        """Codimension one only: y_d - G(y~), positive above the graph."""
        yt, yp = self.split(y)
        return yp[..., 0] - self.gamma(yt)[..., 0]

    def lift(self, u):
        u = np.asarray(u, float)
        return np.concatenate([u, self.gamma(u)], axis=-1)

    def tangent(self, foot):
        yt, _ = self.split(foot)
        j = self.jac(yt)
        v = np.concatenate([np.eye(self.d - self.k), j.T], axis=1)
        return _orthonormal_rows(v)


# ---------------------------------------------------------------------------
# builtin graph families

def power_cone(d: int, k: int, c, beta: float, center=None) -> Graph:
    """G_i(y~) = c_i |y~ - center|^{1+beta}."""
    c = np.broadcast_to(np.asarray(c, float), (k,)).copy()
    ctr = np.zeros(d - k) if center is None else np.asarray(center, float)
    e = 1.0 + beta

    def gamma(u):
        r = np.linalg.norm(np.asarray(u, float) - ctr, axis=-1)
        return r[..., None] ** e * c

    def jac(u):
        w = np.asarray(u, float) - ctr
        r = np.linalg.norm(w, axis=-1)
        # grad |w|^e = e |w|^{e-2} w, continuous at 0 since e > 1
        with np.errstate(invalid="ignore", divide="ignore"):
            s = np.where(r > 0, e * r ** (e - 2.0), 0.0)
        g = s[..., None] * w
        return c[:, None] * g[..., None, :]

    return Graph(d, k, gamma, jac, ctr, "power_cone", {"c": c.tolist(), "beta": beta})


def polynomial(d: int, k: int, const=None, linear=None, quadratic=None) -> Graph:
    """G_i(y~) = const_i + linear_i . y~ + y~^T quadratic_i y~ / 2."""
    m = d - k
    a0 = np.zeros(k) if const is None else np.asarray(const, float).reshape(k)
    a1 = np.zeros((k, m)) if linear is None else np.asarray(linear, float).reshape(k, m)
    a2 = np.zeros((k, m, m)) if quadratic is None else np.asarray(quadratic, float).reshape(k, m, m)
    a2 = 0.5 * (a2 + np.swapaxes(a2, 1, 2))

    def gamma(u):
        u = np.asarray(u, float)
        return a0 + u @ a1.T + 0.5 * np.einsum("...i,kij,...j->...k", u, a2, u)

    def jac(u):
        u = np.asarray(u, float)
        return a1 + np.einsum("kij,...j->...ki", a2, u)

    params = {"const": a0.tolist(), "linear": a1.tolist(), "quadratic": a2.tolist()}
    return Graph(d, k, gamma, jac, np.zeros(m), "polynomial", params)


def sphere_cap(d: int, m: int, radius: float = 1.0, center=None) -> Graph:
    """Upper cap of the m-sphere of ``Sphere(center, radius, m)`` as a graph.

    Chart coordinates are y_1..y_m; G = (c_{m+1} + sqrt(R^2 - |y~ - c~|^2), c_{m+2}, ..., c_d).
    """
    k = d - m
    ctr = np.zeros(d) if center is None else np.asarray(center, float)
    ct, cp = ctr[:m], ctr[m:]
    r2 = radius * radius

    def gamma(u):
        w = np.asarray(u, float) - ct
        q = r2 - np.einsum("...i,...i->...", w, w)
        if np.any(q <= 0):
            raise ChartError("point outside the sphere-cap chart")
        out = np.broadcast_to(cp, q.shape + (k,)).copy()
        out[..., 0] += np.sqrt(q)
        return out

    def jac(u):
        w = np.asarray(u, float) - ct
        q = r2 - np.einsum("...i,...i->...", w, w)
        out = np.zeros(q.shape + (k, m))
        out[..., 0, :] = -w / np.sqrt(q)[..., None]
        return out

    return Graph(d, k, gamma, jac, ct, "sphere_cap", {"radius": radius, "center": ctr.tolist()})


# ---------------------------------------------------------------------------
# specs

@dataclass(frozen=True, eq=False)
class SubmanifoldSpec:
    codim: int
    beta: float
    shape: Point | Sphere | Affine | Graph
    chart_radius: float = math.inf
    holder_const: float = 0.0

    def __post_init__(self):
        if self.shape.codim != self.codim:
            raise DomainError(f"shape has codimension {self.shape.codim}, spec says {self.codim}")
        if not 0.0 < self.beta <= 1.0:
            raise DomainError(f"beta={self.beta} outside (0, 1]")
        if not self.chart_radius > 0:
            raise DomainError("chart_radius must be positive")

    @property
    def ambient(self) -> int:
        return self.shape.ambient

    @property
    def is_graph(self) -> bool:
        return isinstance(self.shape, Graph)


def _check_chart(spec: SubmanifoldSpec, y):
    if not spec.is_graph:
        return
    yt, _ = spec.shape.split(y)
    if np.any(np.linalg.norm(yt - spec.shape.center, axis=-1) >= spec.chart_radius):
        raise ChartError("point outside the graph chart")


def vertical_distance(spec: SubmanifoldSpec, y) -> float:
    """|y' - G(y~)| for graphs; the exact distance for closed-form shapes."""
    y = np.asarray(y, float)
    if spec.is_graph:
        _check_chart(spec, y)
        return float(spec.shape.vertical(y))
    return float(spec.shape.distance(y))


def signed_distance(spec: SubmanifoldSpec, y):
    """Signed vertical distance of a codimension-one component (vectorised)."""
    if spec.codim != 1:
        raise DomainError("signed distance needs codimension 1")
    return spec.shape.signed(np.asarray(y, float))


def _graph_project(g: Graph, y, u0, tol):
    yt, yp = g.split(y)
    m = g.d - g.k

    def res(u):
        return np.concatenate([u - yt, g.gamma(u) - yp])

    def jac(u):
        return np.concatenate([np.eye(m), g.jac(u)], axis=0)

    sol = optimize.least_squares(res, u0, jac=jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return sol.x, float(np.linalg.norm(sol.fun)), float(np.linalg.norm(sol.grad))


def nearest_point(spec: SubmanifoldSpec, y, tol: float = 1e-12) -> tuple[float, np.ndarray]:
    """Distance from ``y`` to the manifold and a nearest point on it."""
    y = np.asarray(y, float)
    g = spec.shape
    if not spec.is_graph:
        return float(g.distance(y)), g.foot(y)
    _check_chart(spec, y)
    yt, _ = g.split(y)
    h = float(g.vertical(y))
    if h == 0.0:
        return 0.0, y.copy()
    best_u, best, best_grad = _graph_project(g, y, yt.copy(), tol)
    # the nearest point lies within distance h of (y~, G(y~)), so |u - y~| <= h;
    # restart from a coarse grid of that ball to escape nonconvex local minima
    m = g.d - g.k
    n1 = 9 if m == 1 else (5 if m == 2 else 3)
    axes = [np.linspace(-h, h, n1)] * m
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, m)
    grid = grid[np.linalg.norm(grid, axis=1) <= h * (1 + 1e-12)]
    cand = yt + grid
    cand = cand[np.linalg.norm(cand - g.center, axis=1) < spec.chart_radius]
    if cand.size:
        vals = np.linalg.norm(g.lift(cand) - y, axis=1)
        for i in np.argsort(vals)[:3]:
            u, f, gr = _graph_project(g, y, cand[i], tol)
            if f < best - tol * max(1.0, best):
                best_u, best, best_grad = u, f, gr
    # the distance error is quadratic in the error of the foot point, so
    # stationarity to sqrt(tol) gives the distance to ~tol
    if not best_grad <= math.sqrt(tol) * max(1.0, best):
        raise ProjectionNonConvergence("graph projection did not reach stationarity", bound=best)
    return best, g.lift(best_u)


def true_distance(spec: SubmanifoldSpec, y, tol: float = 1e-12) -> float:
    return nearest_point(spec, y, tol)[0]


def distance_many(spec: SubmanifoldSpec, y, iters: int = 30):
    """Vectorised distance. Closed form for exact shapes; damped Gauss-Newton for graphs.

    The graph iteration is seeded at u = y~ and is meant for points close to the
    graph relative to its curvature radius (PV test functions, samples).
    """
    y = np.asarray(y, float)
    g = spec.shape
    if not spec.is_graph:
        return g.distance(y)
    yt, yp = g.split(y)
    m = g.d - g.k
    u = yt.copy()
    eye = np.eye(m)
    best = np.linalg.norm(np.concatenate([u - yt, g.gamma(u) - yp], -1), axis=-1)
    for _ in range(iters):
        r1, r2 = u - yt, g.gamma(u) - yp
        j = g.jac(u)
        jtj = eye + np.einsum("...ki,...kj->...ij", j, j)
        grad = r1 + np.einsum("...ki,...k->...i", j, r2)
        step = np.linalg.solve(jtj, grad[..., None])[..., 0]
        lam = np.ones(best.shape)
        for _ in range(8):
            un = u - lam[..., None] * step
            f = np.linalg.norm(np.concatenate([un - yt, g.gamma(un) - yp], -1), axis=-1)
            ok = f <= best
            if np.all(ok):
                break
            lam = np.where(ok, lam, 0.5 * lam)
        u = np.where(ok[..., None], un, u)
        best = np.where(ok, f, best)
    return best


# ---------------------------------------------------------------------------
# tangent planes

@dataclass(frozen=True, eq=False)
class TangentFrame:
    """Tangent plane of a graph at x0 = (x~, G(x~)).

    ``vectors`` are v_i = (e_i, dG/dx_i(x~)); the plane is the graph of the affine
    map G*(y~) = G(x~) + DG(x~)(y~ - x~).
    """
    basepoint: np.ndarray
    vectors: np.ndarray
    gamma0: np.ndarray
    jac0: np.ndarray

    def offset(self, u):
        m = self.jac0.shape[1]
        u = np.asarray(u, float)
        return self.gamma0 + (u - self.basepoint[:m]) @ self.jac0.T


def tangent_frame(spec: SubmanifoldSpec, x) -> TangentFrame:
    if not spec.is_graph:
        raise DomainError("tangent_frame needs a graph chart")
    x = np.asarray(x, float)
    _check_chart(spec, x)
    g = spec.shape
    xt, _ = g.split(x)
    g0 = g.gamma(xt)
    j0 = g.jac(xt)
    v = np.concatenate([np.eye(g.d - g.k), j0.T], axis=1)
    return TangentFrame(np.concatenate([xt, g0]), v, g0, j0)


def tangent_distance(frame: TangentFrame, y) -> float:
    """Euclidean distance from ``y`` to the tangent plane."""
    q = _orthonormal_rows(frame.vectors)
    w = np.asarray(y, float) - frame.basepoint
    return float(np.linalg.norm(w - (w @ q.T) @ q))


# ---------------------------------------------------------------------------
# lemma checks

@dataclass
class KeyLemmaReport:
    ratios: np.ndarray
    deltas: np.ndarray

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios))

    @property
    def median_ratio(self) -> float:
        return float(np.median(self.ratios))

    @property
    def spread(self) -> float:
        med = self.median_ratio
        return self.max_ratio / med if med > 0 else (0.0 if self.max_ratio == 0 else math.inf)


def check_key_lemma(spec: SubmanifoldSpec, samples, delta_fn=None, tol: float = 1e-13) -> KeyLemmaReport:
    """Ratios |h*_x(x) - delta(x)| / delta(x)^{1+beta} over the samples.

    ``delta_fn`` overrides the distance oracle (default: :func:`true_distance`).
    Affine specs have h* = delta exactly.
    """
    samples = np.atleast_2d(np.asarray(samples, float))
    ratios, deltas = [], []
    for x in samples:
        delta = float(delta_fn(x)) if delta_fn is not None else true_distance(spec, x, tol)
        if delta <= 0:
            raise DomainError("sample lies on the manifold")
        if spec.is_graph:
            hstar = tangent_distance(tangent_frame(spec, x), x)
        else:
            hstar = delta
        ratios.append(abs(hstar - delta) / delta ** (1.0 + spec.beta))
        deltas.append(delta)
    return KeyLemmaReport(np.array(ratios), np.array(deltas))


def holder_estimate(spec: SubmanifoldSpec, n: int = 400, seed: int = 0) -> tuple[float, float]:
    """Sampled (sup |DG|, Hoelder seminorm of DG with exponent beta) over the chart.

    Uses at most the ball of radius min(chart_radius, 1) around the chart center.
    """
    if not spec.is_graph:
        return 0.0, 0.0
    g = spec.shape
    m = g.d - g.k
    rng = np.random.default_rng(seed)
    rad = min(spec.chart_radius, 1.0) * 0.999
    dirs = rng.standard_normal((2 * n, m))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pts = g.center + dirs * rad * rng.random((2 * n, 1)) ** (1.0 / m)
    j = g.jac(pts)
    sup = float(np.max(np.linalg.norm(j, axis=-1)))
    a, b = pts[:n], pts[n:]
    dist = np.linalg.norm(a - b, axis=1)
    dj = np.linalg.norm(j[:n] - j[n:], axis=-1).max(axis=-1)
    semi = float(np.max(dj / dist ** spec.beta))
    return sup, semi


__all__ = [
    "Point", "Sphere", "Affine", "Graph", "power_cone", "polynomial", "sphere_cap",
    "SubmanifoldSpec", "TangentFrame", "KeyLemmaReport", "vertical_distance", "signed_distance",
    "nearest_point", "true_distance", "distance_many", "tangent_frame", "tangent_distance",
    "check_key_lemma", "holder_estimate",
]
