"""Monte Carlo survival probabilities under critical Feynman-Kac killing."""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .. import geometry as geo
from ..domain_model import DomainSpec, component_distances
from ..errors import ConfigError, InsufficientSignal, OutsideDomain
from ..special_functions import StableParams
from . import _kernel as K

OUTER_MODES = ("censored", "killed")
# paths per work item; fixed so the split never depends on the worker count
CHUNK = 4096


@dataclass(frozen=True)
class PathConfig:
    t: float
    n: int
    substep_refinement: int = 8
    seed: int = 0
    N: int = 10_000
    outer_mode: str = "censored"

    def __post_init__(self):
        if not self.t > 0:
            raise ConfigError("horizon t must be positive")
        if self.n < 10:
            raise ConfigError("need at least 10 steps")
        if self.N < 100:
            raise ConfigError("need at least 100 paths")
        if self.substep_refinement < 1:
            raise ConfigError("substep_refinement must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.outer_mode not in OUTER_MODES:
            raise ConfigError(f"outer_mode must be one of {OUTER_MODES}")


@dataclass
class SurvivalEstimate:
    x: tuple[float, ...]
    t: float
    mean_weight: float
    std_error: float
    n_exited: int
    n_weight_floor: int
    n_paths: int = 0
    wall_time: float = field(default=0.0, compare=False)

    @property
    def rel_error(self) -> float:
        return self.std_error / self.mean_weight if self.mean_weight > 0 else math.inf


@dataclass
class RegressionResult:
    slope: float
    intercept: float
    stderr: float
    window: tuple[float, float]
    points: list[tuple[float, float]]
    estimates: list[SurvivalEstimate] = field(default_factory=list)
    predicted: float | None = None


# ---------------------------------------------------------------------------
# domain encoding

@dataclass(frozen=True)
class _Encoded:
    ctype: np.ndarray
    cvec: np.ndarray
    crad: np.ndarray
    cframe: np.ndarray
    cnf: np.ndarray
    clam: np.ndarray
    otype: int
    ovec: np.ndarray
    orad: float
    oframe: np.ndarray
    osign: float
    olam: float

    def args(self):
        return (self.cvec, self.crad, self.cframe, self.cnf, self.clam,
                self.ovec, self.orad, self.oframe, self.osign, self.olam)

    def kernel(self):
        return K.make_kernel(self.ctype, self.otype)


def _shape_arrays(shape, d):
    frame = np.zeros((d, d))
    if isinstance(shape, geo.Point):
        return K.POINT, shape.location, 0.0, frame, 0
    if isinstance(shape, geo.Sphere):
        nf = shape.axes.shape[0]
        frame[:nf] = shape.axes
        return K.SPHERE, shape.center, shape.radius, frame, nf
    if isinstance(shape, geo.Affine):
        nf = shape.normals.shape[0]
        frame[:nf] = shape.normals
        return K.AFFINE, shape.basepoint, 0.0, frame, nf
    raise ConfigError("graph components are not supported by the path simulator")


def encode_domain(domain: DomainSpec) -> _Encoded:
    d = domain.d
    m = len(domain.components)
    ctype = np.zeros(m, np.int64)
    cvec = np.zeros((m, d))
    crad = np.zeros(m)
    cframe = np.zeros((m, d, d))
    cnf = np.zeros(m, np.int64)
    clam = np.zeros(m)
    for j, c in enumerate(domain.components):
        ctype[j], cvec[j], crad[j], cframe[j], cnf[j] = _shape_arrays(c.spec.shape, d)
        clam[j] = c.lam
    otype, ovec, orad, oframe, osign, olam = -1, np.zeros(d), 0.0, np.zeros((d, d)), 1.0, 0.0
    if domain.outer is not None:
        shape = domain.outer.spec.shape
        if isinstance(shape, geo.Sphere) and shape.m != d - 1:
            raise ConfigError("outer sphere must have codimension 1")
        otype, ovec, orad, oframe, _ = _shape_arrays(shape, d)
        osign, olam = float(domain.outer_sign), float(domain.outer.lam)
    return _Encoded(ctype, cvec, crad, cframe, cnf, clam, int(otype), np.asarray(ovec, float),
                    float(orad), oframe, osign, olam)


# ---------------------------------------------------------------------------
# sampling

class RngStream:
    """Counter-based stream ``(seed, stream)``; each call advances the counter."""

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self.counter = 0


def sample_stable_increment(params: StableParams, dt: float, rng: RngStream) -> np.ndarray:
    """One isotropic alpha-stable increment over ``dt`` (E e^{i xi.X} = e^{-dt |xi|^alpha})."""
    if not dt > 0:
        raise ConfigError("dt must be positive")
    y, rng.counter = K.one_increment(np.uint64(rng.seed), np.uint64(rng.stream), rng.counter,
                                     params.d, params.alpha, float(dt))
    return y


def sample_increments(params: StableParams, dt: float, size: int, seed: int = 0,
                      workers: int = 1) -> np.ndarray:
    """``size`` independent increments; row i uses stream i, so output is worker-independent."""
    if not dt > 0:
        raise ConfigError("dt must be positive")
    out = np.empty((size, params.d))
    _parallel(lambda a, b: K.sample_increments(np.uint64(seed), a, b, params.d, params.alpha,
                                               float(dt), out), size, workers)
    return out


def _parallel(fn, total, workers):
    bounds = [(a, min(a + CHUNK, total)) for a in range(0, total, CHUNK)]
    workers = max(1, int(workers))
    if workers == 1 or len(bounds) == 1:
        for a, b in bounds:
            fn(a, b)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for f in [pool.submit(fn, a, b) for a, b in bounds]:
            f.result()


def default_workers() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


def _check_start(domain, x):
    if x.shape != (domain.d,):
        raise ConfigError(f"start point must have {domain.d} coordinates")
    if not bool(domain.in_outer(x)):
        raise OutsideDomain(f"{x.tolist()} lies outside D'")


def run_weights(domain: DomainSpec, x, cfg: PathConfig, workers: int = 1):
    """Per-path weights, status flags and endpoints (index order)."""
    x = np.asarray(x, float)
    _check_start(domain, x)
    enc = encode_domain(domain)
    N = cfg.N
    w = np.empty(N)
    flags = np.empty(N, np.int64)
    ends = np.empty((N, domain.d))
    killed = cfg.outer_mode == "killed"
    run_paths = enc.kernel()

    def work(a, b):
        run_paths(np.uint64(cfg.seed), a, b, x, float(cfg.t), int(cfg.n), int(cfg.substep_refinement),
                    float(domain.alpha), killed, *enc.args(), w, flags, ends)

    _parallel(work, N, workers)
    return w, flags, ends


def _mean_se(w):
    n = len(w)
    mean = math.fsum(w) / n
    var = math.fsum((w - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def simulate_survival(domain: DomainSpec, x, cfg: PathConfig, workers: int = 1) -> SurvivalEstimate:
    """E[1{no exit} exp(-int_0^t kappa(X_s) ds)] over cfg.N paths started at ``x``."""
    t0 = time.perf_counter()
    w, flags, _ = run_weights(domain, x, cfg, workers)
    mean, se = _mean_se(w)
    return SurvivalEstimate(tuple(float(v) for v in np.asarray(x, float)), float(cfg.t), mean, se,
                            int(np.sum(flags == K.EXITED)), int(np.sum(flags == K.FLOOR)), cfg.N,
                            time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# exponent fits

def dyadic_grid(t: float, alpha: float, m_lo: int = 2, m_hi: int = 7) -> list[float]:
    """delta = t^{1/alpha} 2^{-m}, m = m_lo..m_hi."""
    s = t ** (1.0 / alpha)
    return [s * 2.0 ** (-m) for m in range(m_lo, m_hi + 1)]


def normal_ray(domain: DomainSpec, name: str):
    """(foot, unit normal) at a default chart point of component ``name``.

    Points: the coordinate direction leading away from the other components.
    Spheres: outward radial direction at center + R * axes[0]. Affine: first normal.
    """
    comp = domain.component(name)
    shape = comp.spec.shape
    d = domain.d
    if isinstance(shape, geo.Point):
        foot = shape.location
        best, nrm = -1.0, None
        for v in np.concatenate([np.eye(d), -np.eye(d)]):
            probe = foot + v
            others = [geo.distance_many(c.spec, probe) for c in domain.all_components() if c is not comp]
            score = min(others) if others else 0.0
            if score > best + 1e-12:
                best, nrm = score, v
        return foot.copy(), nrm
    if isinstance(shape, geo.Sphere):
        foot = shape.center + shape.radius * shape.axes[0]
        return foot, shape.axes[0].copy()
    if isinstance(shape, geo.Affine):
        foot = shape.basepoint.copy()
        nrm = shape.normals[0].copy()
        if comp is domain.outer:
            nrm = nrm * domain.outer_sign
        return foot, nrm
    raise ConfigError("normal_ray needs a point, sphere or affine component")


def fit_exponent(domain: DomainSpec, component: str, t: float, grid, cfg: PathConfig,
                 workers: int = 1, foot=None, normal=None, max_rel_error: float = 0.25) -> RegressionResult:
    """Least-squares slope of log P^x(survive t) against log delta along a normal ray.

    All grid points share the seed (common random numbers), which makes the
    slope far less noisy than the individual estimates.
    """
    grid = sorted(float(g) for g in grid)
    if len(grid) < 4:
        raise ConfigError("fit needs at least 4 grid points")
    scale = t ** (1.0 / domain.alpha)
    if not (grid[0] > 0 and grid[-1] < scale / 3.0 * (1 + 1e-12)):
        raise ConfigError("grid must lie in (0, t^{1/alpha}/3)")
    if foot is None or normal is None:
        foot, normal = normal_ray(domain, component)
    foot = np.asarray(foot, float)
    normal = np.asarray(normal, float) / np.linalg.norm(normal)
    run_cfg = PathConfig(t, cfg.n, cfg.substep_refinement, cfg.seed, cfg.N, cfg.outer_mode)
    ests, pts = [], []
    for g in grid:
        x = foot + g * normal
        est = simulate_survival(domain, x, run_cfg, workers)
        if not est.rel_error <= max_rel_error:
            raise InsufficientSignal(f"relative std error {est.rel_error:.3g} at delta={g:.3g}")
        ests.append(est)
        pts.append((math.log(g), math.log(est.mean_weight)))
    lx, ly = np.array(pts).T
    reg = stats.linregress(lx, ly)
    predicted = None
    comp = domain.component(component)
    from ..errors import BracketError, DomainError
    from ..exponent_solver import solve_exponent
    try:
        predicted = solve_exponent(domain.params, comp.codim, comp.lam)
    except (BracketError, DomainError):  # prediction is informational only
        predicted = None
    return RegressionResult(float(reg.slope), float(reg.intercept), float(reg.stderr),
                            (grid[0], grid[-1]), [(float(a), float(b)) for a, b in pts], ests, predicted)


# ---------------------------------------------------------------------------
# Varopoulos factorisation

@dataclass
class FactorizationReport:
    pairs: list[tuple[tuple[float, ...], tuple[float, ...]]]
    q_hat: list[float]
    q_se: list[float]
    px: list[float]
    py: list[float]
    p_env: list[float]
    ratios: list[float]
    ratio_se: list[float]

    @property
    def spread(self) -> float:
        return max(self.ratios) / min(self.ratios)

    def bounded(self, limit: float = 20.0) -> bool:
        return self.spread <= limit


def _ball_volume(d, h):
    return math.pi ** (0.5 * d) / math.gamma(0.5 * d + 1.0) * h ** d


def factorization_check(domain: DomainSpec, t: float, pairs, cfg: PathConfig, bin_width: float,
                        workers: int = 1, max_rel_error: float = 0.5) -> FactorizationReport:
    """Ratios q^D(t,x,y) / (P^x P^y p_env(t,x,y)) with q estimated by endpoint binning.

    q^D(t,x,y) ~ E[w 1{|X_t - y| < h}] / |B_h|. Survival probabilities are
    re-estimated from each endpoint of a pair with the same path budget.
    """
    from ..envelope import free_kernel
    run_cfg = PathConfig(t, cfg.n, cfg.substep_refinement, cfg.seed, cfg.N, cfg.outer_mode)
    vol = _ball_volume(domain.d, bin_width)
    cache: dict[tuple, tuple] = {}

    def runs(p):
        key = tuple(float(v) for v in p)
        if key not in cache:
            w, _, ends = run_weights(domain, np.asarray(p, float), run_cfg, workers)
            cache[key] = (w, ends)
        return cache[key]

    out = FactorizationReport([], [], [], [], [], [], [], [])
    for x, y in pairs:
        x, y = np.asarray(x, float), np.asarray(y, float)
        if np.linalg.norm(x - y) < 2 * bin_width:
            raise ConfigError("pair closer than twice the bin width")
        wx, ends = runs(x)
        wy, _ = runs(y)
        hit = np.linalg.norm(ends - y, axis=1) < bin_width
        contrib = np.where(hit, wx, 0.0)
        qm, qse = _mean_se(contrib)
        if qm <= 0 or qse / qm > max_rel_error:
            raise InsufficientSignal(f"too few weighted endpoints near {y.tolist()}")
        px, pxse = _mean_se(wx)
        py, pyse = _mean_se(wy)
        q = qm / vol
        env = free_kernel(domain.params, t, x, y)
        r = q / (px * py * env)
        # delta method, treating the three estimates as independent
        rse = r * math.sqrt((qse / qm) ** 2 + (pxse / px) ** 2 + (pyse / py) ** 2)
        out.pairs.append((tuple(x.tolist()), tuple(y.tolist())))
        out.q_hat.append(q)
        out.q_se.append(qse / vol)
        out.px.append(px)
        out.py.append(py)
        out.p_env.append(env)
        out.ratios.append(r)
        out.ratio_se.append(rse)
    return out


def min_component_distance(domain: DomainSpec, x) -> float:
    return float(np.min(component_distances(domain, np.asarray(x, float))))
