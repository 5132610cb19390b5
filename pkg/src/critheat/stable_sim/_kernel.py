"""numba kernels: stable increments by subordination and Feynman-Kac path weights.

Geometry is passed as flat arrays (see ``encode_domain``); component type
0 = point, 1 = sphere, 2 = affine.
"""
import math

import numba as nb
import numpy as np

from ._rng import normal_pair, path_key, uniform

FM = {"nsz", "arcp", "contract", "afn", "reassoc"}

POINT, SPHERE, AFFINE = 0, 1, 2
OK, FLOOR, EXITED = 0, 1, 2
EXP_FLOOR = 700.0
MAX_RESAMPLE = 64


@nb.njit(inline="always", fastmath=FM)
def subordinator(a, key, ctr):
    """Positive a-stable variate with E exp(-s S) = exp(-s^a), 0 < a < 1.

    Kanter's representation S = (A(U)/E)^{(1-a)/a}, U uniform on (0, pi),
    E standard exponential. For a = 1/2 it reduces to 1 / (4 cos^2(U/2) E).
    """
    u, ctr = uniform(key, ctr)
    v, ctr = uniform(key, ctr)
    e = -math.log(v)
    if a == 0.5:
        c = math.cos(0.5 * math.pi * u)
        return 1.0 / (4.0 * c * c * e), ctr
    U = math.pi * u
    ls = (math.log(math.sin(a * U)) - math.log(math.sin(U)) / a
          + (1.0 - a) / a * (math.log(math.sin((1.0 - a) * U)) - math.log(e)))
    return math.exp(ls), ctr


@nb.njit(inline="always", fastmath=FM)
def add_increment(x, out, d, alpha, scale, key, ctr):
    """out = x + increment over a step whose length is scale^alpha.

    Isotropic alpha-stable with E exp(i xi.X) = exp(-dt |xi|^alpha): Brownian motion
    with covariance 2 S I run for an (alpha/2)-stable subordinator time S.
    """
    s, ctr = subordinator(0.5 * alpha, key, ctr)
    sd = math.sqrt(2.0 * s) * scale
    q = 0
    while q < d:
        z1, z2, ctr = normal_pair(key, ctr)
        out[q] = x[q] + sd * z1
        if q + 1 < d:
            out[q + 1] = x[q + 1] + sd * z2
        q += 2
    return ctr


@nb.njit(inline="always", fastmath=FM)
def d_point(y, j, cvec, crad, cframe, cnf, d):
    r2 = 0.0
    for q in range(d):
        w = y[q] - cvec[j, q]
        r2 += w * w
    return math.sqrt(r2)


@nb.njit(inline="always", fastmath=FM)
def d_sphere(y, j, cvec, crad, cframe, cnf, d):
    u2 = 0.0
    a2 = 0.0
    for q in range(d):
        w = y[q] - cvec[j, q]
        u2 += w * w
    for r in range(cnf[j]):
        s = 0.0
        for q in range(d):
            s += cframe[j, r, q] * (y[q] - cvec[j, q])
        a2 += s * s
    dr = math.sqrt(a2) - crad[j]
    return math.sqrt(dr * dr + max(u2 - a2, 0.0))


@nb.njit(inline="always", fastmath=FM)
def d_affine(y, j, cvec, crad, cframe, cnf, d):
    a2 = 0.0
    for r in range(cnf[j]):
        s = 0.0
        for q in range(d):
            s += cframe[j, r, q] * (y[q] - cvec[j, q])
        a2 += s * s
    return math.sqrt(a2)


@nb.njit(inline="always", fastmath=FM)
def s_affine(y, ovec, orad, oframe, d):
    s = 0.0
    for q in range(d):
        s += oframe[0, q] * (y[q] - ovec[q])
    return s


@nb.njit(inline="always", fastmath=FM)
def s_sphere(y, ovec, orad, oframe, d):
    u2 = 0.0
    for q in range(d):
        w = y[q] - ovec[q]
        u2 += w * w
    return math.sqrt(u2) - orad


@nb.njit(inline="always", fastmath=FM)
def s_none(y, ovec, orad, oframe, d):
    return 1.0


@nb.njit(inline="always", fastmath=FM)
def _neg_power(r, alpha):
    if alpha == 1.0:
        return 1.0 / r
    return math.exp(-alpha * math.log(r))


_DIST = {POINT: "d_point", SPHERE: "d_sphere", AFFINE: "d_affine"}
_SIGNED = {-1: "s_none", SPHERE: "s_sphere", AFFINE: "s_affine"}

# A generic kernel that branches on the component type at run time is several
# times slower under numba than straight-line code, so the potential is
# generated per domain signature (component types, outer type) and compiled once.
_KAPPA_TEMPLATE = """
def kappa_dmin(y, alpha, cvec, crad, cframe, cnf, clam, ovec, orad, oframe, osign, olam, d):
    k = 0.0
    dmin = np.inf
{body}
    return k, dmin

def inside_outer(y, ovec, orad, oframe, osign, d):
    return osign * {signed}(y, ovec, orad, oframe, d) > 0.0
"""

_COMP_TEMPLATE = """
    r = {fn}(y, {j}, cvec, crad, cframe, cnf, d)
    if r < dmin:
        dmin = r
    if r == 0.0:
        k = np.inf
    elif clam[{j}] != 0.0:
        k += clam[{j}] * _neg_power(r, alpha)
"""

_OUTER_TEMPLATE = """
    r = osign * {signed}(y, ovec, orad, oframe, d)
    if r < 0.0:
        r = 0.0
    if r < dmin:
        dmin = r
    if r == 0.0:
        k = np.inf
    elif olam != 0.0:
        k += olam * _neg_power(r, alpha)
"""

_CACHE = {}


def make_kernel(ctypes, otype):
    """Compiled ``run_paths`` for the given component types and outer type (-1: none)."""
    key = (tuple(int(c) for c in ctypes), int(otype))
    if key in _CACHE:
        return _CACHE[key]
    body = "".join(_COMP_TEMPLATE.format(fn=_DIST[c], j=j) for j, c in enumerate(key[0]))
    if otype >= 0:
        body += _OUTER_TEMPLATE.format(signed=_SIGNED[otype])
    src = _KAPPA_TEMPLATE.format(body=body or "    pass", signed=_SIGNED[otype])
    ns = dict(np=np, math=math, d_point=d_point, d_sphere=d_sphere, d_affine=d_affine,
              s_affine=s_affine, s_sphere=s_sphere, s_none=s_none, _neg_power=_neg_power)
    exec(compile(src, f"<kappa {key}>", "exec"), ns)
    kappa_dmin = nb.njit(inline="always", fastmath=FM)(ns["kappa_dmin"])
    inside_outer = nb.njit(inline="always", fastmath=FM)(ns["inside_outer"])
    has_outer = otype >= 0

    @nb.njit(nogil=True, fastmath=FM)
    def run_paths(seed, start, stop, x0, t, n, refine, alpha, killed_outer,
                  cvec, crad, cframe, cnf, clam, ovec, orad, oframe, osign, olam,
                  w_out, flag_out, x_out):
        d = x0.shape[0]
        dt = t / n
        scale = dt ** (1.0 / alpha)
        thresh = 2.0 * scale
        dts = dt / refine
        scale_s = dts ** (1.0 / alpha)
        x = np.empty(d)
        y = np.empty(d)
        for i in range(start, stop):
            key = path_key(seed, i)
            ctr = 0
            for q in range(d):
                x[q] = x0[q]
            kp, dmin = kappa_dmin(x, alpha, cvec, crad, cframe, cnf, clam,
                                  ovec, orad, oframe, osign, olam, d)
            ex = 0.0
            flag = OK
            if kp == np.inf:
                flag = FLOOR
            j = 0
            while j < n and flag == OK:
                if refine > 1 and dmin < thresh:
                    m = refine
                    h = dts
                    sc = scale_s
                else:
                    m = 1
                    h = dt
                    sc = scale
                for _ in range(m):
                    ctr = add_increment(x, y, d, alpha, sc, key, ctr)
                    if has_outer and not inside_outer(y, ovec, orad, oframe, osign, d):
                        if killed_outer:
                            flag = EXITED
                            break
                        tries = 1
                        while tries < MAX_RESAMPLE:
                            ctr = add_increment(x, y, d, alpha, sc, key, ctr)
                            if inside_outer(y, ovec, orad, oframe, osign, d):
                                break
                            tries += 1
                        if tries == MAX_RESAMPLE:
                            for q in range(d):
                                y[q] = x[q]
                    kn, dn = kappa_dmin(y, alpha, cvec, crad, cframe, cnf, clam,
                                        ovec, orad, oframe, osign, olam, d)
                    ex += 0.5 * h * (kp + kn)
                    for q in range(d):
                        x[q] = y[q]
                    kp = kn
                    dmin = dn
                if flag == OK and not ex <= EXP_FLOOR:
                    flag = FLOOR
                j += 1
            w_out[i] = math.exp(-ex) if flag == OK else 0.0
            flag_out[i] = flag
            for q in range(d):
                x_out[i, q] = x[q]

    _CACHE[key] = run_paths
    return run_paths


@nb.njit(nogil=True, fastmath=FM)
def sample_increments(seed, start, stop, d, alpha, dt, out):
    """Rows start..stop-1 of ``out`` get independent increments over dt (stream = row)."""
    scale = dt ** (1.0 / alpha)
    z = np.zeros(d)
    y = np.empty(d)
    for i in range(start, stop):
        key = path_key(seed, i)
        add_increment(z, y, d, alpha, scale, key, 0)
        for q in range(d):
            out[i, q] = y[q]


@nb.njit(fastmath=FM)
def one_increment(seed, stream, ctr, d, alpha, dt):
    scale = dt ** (1.0 / alpha)
    z = np.zeros(d)
    y = np.empty(d)
    key = path_key(seed, stream)
    ctr = add_increment(z, y, d, alpha, scale, key, ctr)
    return y, ctr
