"""Open sets D = D' minus a finite union of submanifolds, with the killing potential.

Configs are YAML (or an equivalent dict); see ``CONFIG_SCHEMA``.
"""
from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field

import jsonschema
import numpy as np
import yaml

from . import geometry as geo
from .errors import DomainError, OutsideDomain, SchemaError, ValidationError
from .special_functions import StableParams

# kappa's value on the singular set
KAPPA_INF = math.inf

_vec = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_mat = {"type": "array", "items": _vec, "minItems": 1}

_SHAPE = {
    "type": "object",
    "required": ["shape"],
    "properties": {
        "name": {"type": "string"},
        "shape": {"enum": ["point", "sphere", "affine", "graph"]},
        "codim": {"type": "integer", "minimum": 1},
        "beta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "lambda": {"type": "number", "minimum": 0},
        "target_exponent": {"type": "number", "exclusiveMinimum": 0},
        "location": _vec,
        "center": _vec,
        "radius": {"type": "number", "exclusiveMinimum": 0},
        "m": {"type": "integer", "minimum": 1},
        "axes": _mat,
        "basepoint": _vec,
        "normals": _mat,
        "side": {"enum": ["inside", "outside"]},
        "family": {"enum": ["power_cone", "polynomial", "sphere_cap"]},
        "c": {"oneOf": [{"type": "number"}, _vec]},
        "const": _vec,
        "linear": _mat,
        "quadratic": {"type": "array"},
        "chart_radius": {"type": "number", "exclusiveMinimum": 0},
        "holder_const": {"type": "number", "minimum": 0},
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["d", "alpha", "components"],
    "properties": {
        "name": {"type": "string"},
        "d": {"type": "integer", "minimum": 1},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 2},
        "horizon_cap": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "outer": _SHAPE,
        "components": {"type": "array", "items": _SHAPE},
        "simulation": {"type": "object"},
    },
    "additionalProperties": False,
}


@dataclass(frozen=True, eq=False)
class Component:
    spec: geo.SubmanifoldSpec
    lam: float
    name: str

    @property
    def codim(self) -> int:
        return self.spec.codim


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """D = D' minus the components.

    ``outer`` (optional) is a codimension-one component bounding D'; D' is the
    side where ``outer_sign * signed_distance > 0``. Without it D' = R^d.
    """
    params: StableParams
    components: tuple[Component, ...]
    outer: Component | None = None
    outer_sign: float = 1.0
    horizon_cap: float = 1.0
    seed: int = 0
    name: str = ""
    separation: float = field(default=math.inf, compare=False)
    allow_zero_lambda: bool = False

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        d = self.params.d
        for c in self.all_components():
            if c.spec.ambient != d:
                raise ValidationError(f"component {c.name} lives in R^{c.spec.ambient}, domain in R^{d}")
            if c.lam < 0 or (c.lam == 0 and not self.allow_zero_lambda) or not math.isfinite(c.lam):
                raise ValidationError(f"component {c.name}: lambda must be > 0, got {c.lam}")
        if self.outer is not None and self.outer.codim != 1:
            raise ValidationError("the outer boundary must have codimension 1")
        for c in self.components:
            if c.codim == 1:
                raise ValidationError(f"component {c.name}: codimension-1 pieces must be declared as the outer boundary")
        names = [c.name for c in self.all_components()]
        if len(set(names)) != len(names):
            raise ValidationError("component names must be unique")

    @property
    def d(self) -> int:
        return self.params.d

    @property
    def alpha(self) -> float:
        return self.params.alpha

    def all_components(self) -> list[Component]:
        """Outer boundary first (tie order), then the listed components."""
        return ([self.outer] if self.outer is not None else []) + list(self.components)

    def component(self, name: str) -> Component:
        for c in self.all_components():
            if c.name == name:
                return c
        raise KeyError(name)

    def with_lambdas(self, lams: dict[str, float]) -> "DomainSpec":
        def upd(c):
            return Component(c.spec, float(lams.get(c.name, c.lam)), c.name) if c is not None else None
        return DomainSpec(self.params, tuple(upd(c) for c in self.components), upd(self.outer),
                          self.outer_sign, self.horizon_cap, self.seed, self.name, self.separation,
                          self.allow_zero_lambda or any(v == 0 for v in lams.values()))

    def in_outer(self, y):
        """Vectorised membership in D' (ignores the null components)."""
        y = np.asarray(y, float)
        if self.outer is None:
            return np.ones(y.shape[:-1], bool)
        return self.outer_sign * geo.signed_distance(self.outer.spec, y) > 0


def component_distances(domain: DomainSpec, y) -> np.ndarray:
    """Distances to every component, outer first; shape (n_components, ...)."""
    y = np.asarray(y, float)
    return np.stack([geo.distance_many(c.spec, y) for c in domain.all_components()])


def delta_D(domain: DomainSpec, x) -> tuple[float, str]:
    """min over components of the distance, with the argmin's name (ties: first in order)."""
    comps = domain.all_components()
    if not comps:
        return math.inf, ""
    dist = component_distances(domain, np.asarray(x, float))
    i = int(np.argmin(dist))
    return float(dist[i]), comps[i].name


def kappa(domain: DomainSpec, x) -> float:
    """sum_j lambda_j delta_j(x)^{-alpha}; ``KAPPA_INF`` on the singular set."""
    x = np.asarray(x, float)
    if not bool(domain.in_outer(x)):
        raise OutsideDomain(f"{x.tolist()} lies outside D'")
    total = 0.0
    for c, dist in zip(domain.all_components(), component_distances(domain, x)):
        if dist == 0.0:
            return KAPPA_INF
        total += c.lam * float(dist) ** (-domain.alpha)
    return total


class KillingPotential:
    def __init__(self, domain: DomainSpec):
        self.domain = domain

    def __call__(self, x) -> float:
        return kappa(self.domain, x)


# ---------------------------------------------------------------------------
# model sets

def model_set(d: int, k: int, alpha: float, lam: float = 1.0) -> DomainSpec:
    """D_1 = {y_d > 0} for k = 1; R^d minus {y_{d-k+1} = ... = y_d = 0} for k >= 2."""
    params = StableParams(d, alpha)
    if k == 1:
        spec = geo.SubmanifoldSpec(1, 1.0, geo.Affine(np.zeros(d), np.eye(d)[-1:]))
        return DomainSpec(params, (), Component(spec, lam, "outer"), 1.0, name=f"D1(d={d})")
    if not 2 <= k <= d:
        raise DomainError(f"k={k} outside [1, d]")
    shape = geo.Point(np.zeros(d)) if k == d else geo.Affine(np.zeros(d), np.eye(d)[d - k:])
    spec = geo.SubmanifoldSpec(k, 1.0, shape)
    return DomainSpec(params, (Component(spec, lam, "c0"),), name=f"D{k}(d={d})")


# ---------------------------------------------------------------------------
# separation

def _sample_component(spec: geo.SubmanifoldSpec, n: int, rng) -> np.ndarray:
    s = spec.shape
    if isinstance(s, geo.Point):
        return s.location[None, :]
    if isinstance(s, geo.Sphere):
        z = rng.standard_normal((n, s.m + 1))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        return s.center + s.radius * z @ s.axes
    if isinstance(s, geo.Affine):
        t = s.tangent(s.basepoint)
        z = rng.uniform(-10.0, 10.0, (n, t.shape[0]))
        return s.basepoint + z @ t
    m = s.d - s.k
    rad = min(spec.chart_radius, 10.0) * 0.999
    z = rng.standard_normal((n, m))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    u = s.center + z * rad * rng.random((n, 1)) ** (1.0 / m)
    return s.lift(u)


def _pair_distance(a: geo.SubmanifoldSpec, b: geo.SubmanifoldSpec, rng, n: int = 4000) -> float:
    sa, sb = a.shape, b.shape
    if isinstance(sb, geo.Point) and not isinstance(sa, geo.Point):
        a, b, sa, sb = b, a, sb, sa
    if isinstance(sa, geo.Point):
        return float(geo.distance_many(b, sa.location))
    if isinstance(sa, geo.Affine) and isinstance(sb, geo.Affine):
        ta, tb = sa.tangent(sa.basepoint), sb.tangent(sb.basepoint)
        m = np.concatenate([ta, -tb]).T
        rhs = sb.basepoint - sa.basepoint
        coef, *_ = np.linalg.lstsq(m, rhs, rcond=None)
        return float(np.linalg.norm(m @ coef - rhs))
    # sampled estimate, from the side whose samples are bounded
    if isinstance(sa, geo.Affine):
        a, b = b, a
    pts = _sample_component(a, n, rng)
    return float(np.min(geo.distance_many(b, pts)))


def separation(domain: DomainSpec, seed: int = 0) -> float:
    """min pairwise distance between components (outer included); permutation invariant."""
    comps = domain.all_components()
    best = math.inf
    for a, b in itertools.combinations(comps, 2):
        # order the pair canonically so the sampled estimate does not depend on listing order
        pa, pb = sorted((a, b), key=lambda c: _canonical_key(c.spec))
        best = min(best, _pair_distance(pa.spec, pb.spec, np.random.default_rng(seed)))
    return best


def _canonical_key(spec):
    s = spec.shape
    kind = type(s).__name__
    data = []
    for attr in ("location", "center", "basepoint", "radius"):
        v = getattr(s, attr, None)
        if v is not None:
            data.extend(np.ravel(v).tolist())
    return (kind, tuple(data))


# ---------------------------------------------------------------------------
# parsing

def _load(config):
    if isinstance(config, dict):
        return config
    if isinstance(config, bytes):
        config = config.decode("utf-8")
    if isinstance(config, (str, os.PathLike)) and os.path.exists(str(config)):
        with open(config, "rb") as fh:
            config = fh.read().decode("utf-8")
    try:
        data = yaml.safe_load(config)
    except yaml.YAMLError as exc:
        raise SchemaError(f"not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaError("top level must be a mapping")
    return data


def _path(err) -> str:
    parts = []
    for p in err.absolute_path:
        parts.append(f"[{p}]" if isinstance(p, int) else (f".{p}" if parts else str(p)))
    return "".join(parts) or "<root>"


def _need(entry, key, where):
    if key not in entry:
        raise SchemaError(f"missing field {key!r}", f"{where}.{key}".lstrip("."))
    return entry[key]


def _build_spec(entry: dict, d: int, where: str) -> tuple[geo.SubmanifoldSpec, float]:
    kind = entry["shape"]
    beta = float(entry.get("beta", 1.0))
    outer_sign = 1.0
    try:
        if kind == "point":
            shape = geo.Point(_need(entry, "location", where))
        elif kind == "sphere":
            center = _need(entry, "center", where)
            m = entry.get("m", len(center) - 1)
            shape = geo.Sphere(center, float(entry.get("radius", 1.0)), int(m), entry.get("axes"))
            outer_sign = -1.0 if entry.get("side", "inside") == "inside" else 1.0
        elif kind == "affine":
            shape = geo.Affine(_need(entry, "basepoint", where), _need(entry, "normals", where))
        else:
            fam = _need(entry, "family", where)
            k = int(_need(entry, "codim", where))
            if fam == "power_cone":
                shape = geo.power_cone(d, k, entry.get("c", 1.0), beta)
            elif fam == "polynomial":
                shape = geo.polynomial(d, k, entry.get("const"), entry.get("linear"), entry.get("quadratic"))
            else:
                shape = geo.sphere_cap(d, d - k, float(entry.get("radius", 1.0)), entry.get("center"))
    except DomainError as exc:
        raise ValidationError(f"{where}: {exc}") from exc
    if shape.ambient != d:
        raise ValidationError(f"{where}: shape lives in R^{shape.ambient}, expected R^{d}")
    codim = int(entry.get("codim", shape.codim))
    if codim != shape.codim:
        raise ValidationError(f"{where}.codim: declared {codim}, shape has codimension {shape.codim}")
    chart = float(entry.get("chart_radius", math.inf))
    spec = geo.SubmanifoldSpec(codim, beta, shape, chart, float(entry.get("holder_const", 0.0)))
    return spec, outer_sign


def _lambda(entry, params, k, where):
    has_l, has_p = "lambda" in entry, "target_exponent" in entry
    if has_l == has_p:
        raise SchemaError("give exactly one of 'lambda' and 'target_exponent'", where)
    if has_l:
        return float(entry["lambda"])
    from .special_functions import c_kp
    p = float(entry["target_exponent"])
    try:
        return float(c_kp(params, k, p))
    except DomainError as exc:
        raise ValidationError(f"{where}.target_exponent: {exc}") from exc


def parse_domain(config, check_separation: bool = True) -> DomainSpec:
    """Build and validate a :class:`DomainSpec` from YAML text, a path, bytes or a dict."""
    data = _load(config)
    validator = jsonschema.Draft7Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise SchemaError(err.message, _path(err))
    d, alpha = int(data["d"]), float(data["alpha"])
    try:
        params = StableParams(d, alpha)
    except DomainError as exc:
        raise ValidationError(str(exc)) from exc
    comps = []
    for i, entry in enumerate(data["components"]):
        where = f"components[{i}]"
        spec, _ = _build_spec(entry, d, where)
        if not (max(alpha - 1.0, 0.0) < spec.beta <= 1.0):
            raise ValidationError(f"{where}.beta: must lie in ((alpha-1)_+, 1]")
        comps.append(Component(spec, _lambda(entry, params, spec.codim, where), entry.get("name", f"c{i}")))
    outer, sign = None, 1.0
    if "outer" in data:
        spec, sign = _build_spec(data["outer"], d, "outer")
        if spec.codim != 1:
            raise ValidationError("outer: the outer boundary must have codimension 1")
        outer = Component(spec, _lambda(data["outer"], params, 1, "outer"), data["outer"].get("name", "outer"))
    dom = DomainSpec(params, tuple(comps), outer, sign, float(data.get("horizon_cap", 1.0)),
                     int(data.get("seed", 0)), str(data.get("name", "")))
    if check_separation:
        sep = separation(dom)
        if not sep > 1e-9:
            raise ValidationError(f"components overlap or touch (separation {sep:.3g}); disjointness violated")
        if outer is not None:
            for c in comps:
                pts = _sample_component(c.spec, 2000, np.random.default_rng(0))
                if not np.all(dom.in_outer(pts)):
                    raise ValidationError(f"component {c.name} is not contained in D'")
        object.__setattr__(dom, "separation", sep)
    return dom


__all__ = [
    "CONFIG_SCHEMA", "KAPPA_INF", "Component", "DomainSpec", "KillingPotential", "parse_domain",
    "kappa", "delta_D", "component_distances", "model_set", "separation",
]
