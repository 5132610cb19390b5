"""Command line front end: constants, solve, pv-check, simulate, envelope, reproduce.

Exit codes: 0 success, 1 an acceptance band failed, 2 usage or configuration
error, 3 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import json
import logging
import platform
import subprocess
import sys
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .domain_model import model_set, parse_domain
from .envelope import batch_envelope, read_points_csv, survival_envelope
from .errors import (BracketError, ChartError, ConfigError, CritHeatError, DomainError,
                     InsufficientSignal, NonConvergence, OutsideDomain, SchemaError,
                     SingularityTooClose, ValidationError)
from .exponent_solver import solve_all
from .pv_quadrature import DeltaPower, PVConfig, pv_apply, write_shell_csv
from .quadrature import DEFAULT
from .special_functions import StableParams, c_kp
from .stable_sim import PathConfig, default_workers, dyadic_grid, fit_exponent, normal_ray
from .svg import loglog_svg

log = logging.getLogger("critheat")

EXIT_OK, EXIT_BAND, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
EXAMPLES = ("ex1.2", "ex1.3")
SLOPE_BAND = 0.15
ENVELOPE_BAND = 5.0
PV_BAND = 0.02


class UsageError(CritHeatError):
    pass


# ---------------------------------------------------------------------------
# config and manifest plumbing

def bundled_config(name: str) -> Path:
    path = resources.files("critheat") / "configs" / f"{name}.yaml"
    if not path.is_file():
        raise UsageError(f"no bundled config {name!r}")
    return Path(str(path))


def load_config(path) -> tuple[dict, bytes]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        cfg = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping")
    return cfg, raw


def _git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True, text=True,
                             cwd=Path(__file__).parent, timeout=10)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


class Run:
    """Output directory plus manifest bookkeeping for one command."""

    def __init__(self, args, config_bytes: bytes | None = None, seed=None):
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []
        self.manifest = {
            "command": [Path(sys.argv[0]).name] + sys.argv[1:],
            "config_sha256": hashlib.sha256(config_bytes).hexdigest() if config_bytes is not None else None,
            "seed": seed,
            "versions": self._versions(),
            "start": dt.datetime.now(dt.timezone.utc).isoformat(),
        }

    @staticmethod
    def _versions():
        import numba
        import scipy
        return {"critheat": __version__, "git": _git_describe(), "python": platform.python_version(),
                "numpy": np.__version__, "scipy": scipy.__version__, "numba": numba.__version__}

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def finish(self, **extra) -> Path:
        self.manifest.update(extra)
        self.manifest["end"] = dt.datetime.now(dt.timezone.utc).isoformat()
        self.manifest["outputs"] = sorted(set(self.files))
        p = self.out / "manifest.json"
        text = json.dumps(self.manifest, indent=2, sort_keys=True, default=_json_default)
        p.write_text(text + "\n", encoding="utf-8")
        return p


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"not a comma separated list of numbers: {text!r}") from None


# ---------------------------------------------------------------------------
# commands

def cmd_constants(args) -> int:
    grid = _float_list(args.p_grid)
    if not grid:
        raise UsageError("empty p grid")
    params = StableParams(args.d, args.alpha)
    cfg = DEFAULT if args.tol is None else DEFAULT.tightened(args.tol / DEFAULT.abs_tol)
    rows = []
    for p in sorted(grid):
        v, e = c_kp(params, args.k, p, cfg, with_error=True)
        rows.append((p, v, e))
    # monotone on the range where it is guaranteed: ((a-1)/2, a) for k = 1
    lo = 0.5 * (args.alpha - 1.0) if args.k == 1 else 0.0
    mono = [r for r in rows if r[0] > lo]
    bad = [(a[0], b[0]) for a, b in zip(mono, mono[1:]) if not b[1] > a[1]]
    if bad:
        print(f"C(k,p) not strictly increasing between p={bad[0][0]} and p={bad[0][1]}", file=sys.stderr)
        return EXIT_BAND
    run = Run(args)
    with open(run.path("constants.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "C", "est_error"])
        for p, v, e in rows:
            w.writerow([repr(p), repr(v), repr(e)])
    run.finish(d=args.d, k=args.k, alpha=args.alpha)
    for p, v, e in rows:
        print(f"p={p:<8g} C={v:.12g}  (+/- {e:.2g})")
    return EXIT_OK


def _domain_from_args(args):
    cfg, raw = load_config(args.config)
    return parse_domain(cfg), cfg, raw


def cmd_solve(args) -> int:
    domain, _, raw = _domain_from_args(args)
    table = solve_all(domain, args.tol or 1e-10)
    run = Run(args, raw, domain.seed)
    payload = {"d": domain.d, "alpha": domain.alpha, "entries": table.as_dict()}
    text = json.dumps(payload, indent=2, sort_keys=True)
    run.path("exponents.json").write_text(text + "\n", encoding="utf-8")
    run.finish()
    print(text)
    return EXIT_OK


def cmd_pv_check(args) -> int:
    dom = model_set(args.d, args.k, args.alpha)
    x = np.zeros(args.d)
    x[-1] = args.delta
    cfg = PVConfig(tol=args.tol) if args.tol else PVConfig()
    res = pv_apply(dom, DeltaPower(args.p), x, cfg, details=True)
    ref = c_kp(dom.params, args.k, args.p) * args.delta ** (args.p - args.alpha)
    ratio = res.value / ref
    run = Run(args)
    if args.verbose:
        write_shell_csv(res, run.path("shells.csv"))
    ok = abs(ratio - 1.0) <= PV_BAND
    run.finish(d=args.d, k=args.k, alpha=args.alpha, p=args.p, ratio=ratio, error=res.error, passed=ok)
    print(f"pv / (C(k,p) delta^(p-alpha)) = {ratio:.10f}  (est. error {res.error / abs(ref):.2g}); "
          f"{'PASS' if ok else 'FAIL'} band 1 +/- {PV_BAND}")
    return EXIT_OK if ok else EXIT_BAND


def _path_config(args, cfg: dict, domain) -> PathConfig:
    sim = cfg.get("simulation", {}) or {}
    return PathConfig(
        t=float(sim.get("t", 1.0)),
        n=int(args.steps or sim.get("steps", 1000)),
        substep_refinement=int(sim.get("substep_refinement", 8)),
        seed=int(args.seed if args.seed is not None else domain.seed),
        N=int(args.paths or sim.get("paths", 10_000)),
        outer_mode=str(sim.get("outer_mode", "censored")),
    )


def _simulate(domain, cfg: dict, pcfg: PathConfig, component: str, workers: int):
    grid = dyadic_grid(pcfg.t, domain.alpha)
    foot, normal = normal_ray(domain, component)
    fit = fit_exponent(domain, component, pcfg.t, grid, pcfg, workers, foot, normal)
    table = solve_all(domain)
    envs = [survival_envelope(domain, table, pcfg.t, e.x) for e in fit.estimates]
    return fit, table, grid, envs


def write_survival_csv(path, domain, fit, grid, envs) -> None:
    d = domain.d
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["delta"] + [f"x{i + 1}" for i in range(d)]
                   + ["mean_weight", "std_error", "n_exited", "n_weight_floor", "envelope", "ratio"])
        for g, est, env in zip(grid, fit.estimates, envs):
            w.writerow([repr(float(g))] + [repr(float(v)) for v in est.x]
                       + [repr(est.mean_weight), repr(est.std_error), est.n_exited, est.n_weight_floor,
                          repr(env), repr(est.mean_weight / env)])


def cmd_simulate(args) -> int:
    domain, cfg, raw = _domain_from_args(args)
    pcfg = _path_config(args, cfg, domain)
    component = args.component or (cfg.get("simulation") or {}).get("near") or domain.all_components()[0].name
    workers = args.workers or default_workers()
    fit, table, grid, envs = _simulate(domain, cfg, pcfg, component, workers)
    run = Run(args, raw, pcfg.seed)
    write_survival_csv(run.path("survival.csv"), domain, fit, grid, envs)
    predicted = table.by_name()[component].p
    run.finish(component=component, slope=fit.slope, slope_stderr=fit.stderr, predicted=predicted,
               paths=pcfg.N, steps=pcfg.n, workers=workers)
    print(f"{component}: fitted slope {fit.slope:.4f} +/- {fit.stderr:.4f}, predicted p = {predicted:.4f}")
    return EXIT_OK


def cmd_envelope(args) -> int:
    domain, _, raw = _domain_from_args(args)
    if not args.points:
        raise UsageError("--points CSV is required")
    table = solve_all(domain)
    rows = read_points_csv(args.points, domain.d)
    run = Run(args, raw, domain.seed)
    n = batch_envelope(domain, table, rows, run.path("envelope.csv"))
    run.finish(rows=n)
    print(f"wrote {n} rows to {run.out / 'envelope.csv'}")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    if args.example not in EXAMPLES:
        raise UsageError(f"unknown example {args.example!r}; choose from {', '.join(EXAMPLES)}")
    cfg, raw = load_config(bundled_config(args.example))
    domain = parse_domain(cfg)
    pcfg = _path_config(args, cfg, domain)
    workers = args.workers or default_workers()
    table = solve_all(domain).by_name()
    run = Run(args, raw, pcfg.seed)
    series, lines, summary, failures = [], [], [], []
    names = [args.component] if args.component else [c.name for c in domain.all_components()]
    for name in names:
        fit, _, grid, envs = _simulate(domain, cfg, pcfg, name, workers)
        write_survival_csv(run.path(f"survival_{name}.csv"), domain, fit, grid, envs)
        p = table[name].p
        ratios = [e.mean_weight / v for e, v in zip(fit.estimates, envs)]
        slope_ok = abs(fit.slope - p) <= SLOPE_BAND
        env_ok = all(1.0 / ENVELOPE_BAND <= r <= ENVELOPE_BAND for r in ratios)
        summary.append((name, p, fit.slope, fit.stderr, min(ratios), max(ratios), slope_ok, env_ok))
        if not slope_ok:
            failures.append(f"slope near {name}: {fit.slope:.3f} vs p = {p:.3f} +/- {SLOPE_BAND}")
        if not env_ok:
            failures.append(f"envelope band near {name}: ratios in [{min(ratios):.3g}, {max(ratios):.3g}]")
        series.append((f"{name}: simulated", grid, [e.mean_weight for e in fit.estimates]))
        # predicted slope through the geometric mean of the data
        icpt = float(np.mean([b for _, b in fit.points]) - p * np.mean([a for a, _ in fit.points]))
        lines.append((f"{name}: slope p = {p:.3f}", p, icpt))
    svg = loglog_svg(series, lines, title=f"{args.example}: survival probability vs distance",
                     xlabel="delta", ylabel="P(survive t)")
    run.path("survival.svg").write_text(svg, encoding="utf-8")
    with open(run.path("summary.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["component", "p", "slope", "slope_stderr", "ratio_min", "ratio_max", "slope_ok", "envelope_ok"])
        for row in summary:
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:6]] + [int(row[6]), int(row[7])])
    run.finish(example=args.example, paths=pcfg.N, steps=pcfg.n, workers=workers, failures=failures)
    print(f"{'component':<10} {'p':>8} {'slope':>8} {'stderr':>8} {'ratio range':>18}")
    for name, p, s, se, rmin, rmax, *_ in summary:
        print(f"{name:<10} {p:8.4f} {s:8.4f} {se:8.4f}   [{rmin:6.3f}, {rmax:6.3f}]")
    if failures:
        print(f"FAILED: {failures[0]}", file=sys.stderr)
        return EXIT_BAND
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML domain configuration")
    common.add_argument("--seed", type=int, help="64-bit seed (overrides the config)")
    common.add_argument("--paths", type=int, help="Monte Carlo paths per start point")
    common.add_argument("--steps", type=int, help="time steps per path")
    common.add_argument("--workers", type=int, help="worker threads (default: all cores)")
    common.add_argument("--tol", type=float, help="numerical tolerance")
    common.add_argument("--out", default="critheat-out", help="output directory")
    common.add_argument("--verbose", action="store_true", help="debug logging and per-shell CSV")

    ap = argparse.ArgumentParser(prog="critheat", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"critheat {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", parents=[common], help="tabulate C(k,p)")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--p-grid", required=True, help="comma separated exponents")
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("solve", parents=[common], help="solve the boundary exponents of a config")
    p.set_defaults(func=cmd_solve, needs_config=True)

    p = sub.add_parser("pv-check", parents=[common], help="check the harmonic profile on a model set")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--delta", type=float, default=1.0, help="distance of the evaluation point")
    p.set_defaults(func=cmd_pv_check)

    p = sub.add_parser("simulate", parents=[common], help="fit the survival exponent near a component")
    p.add_argument("--component", help="component to approach (default: simulation.near)")
    p.set_defaults(func=cmd_simulate, needs_config=True)

    p = sub.add_parser("envelope", parents=[common], help="evaluate the heat kernel envelope on a CSV")
    p.add_argument("--points", help="CSV rows t, x_1..x_d, y_1..y_d")
    p.set_defaults(func=cmd_envelope, needs_config=True)

    p = sub.add_parser("reproduce", parents=[common], help="run a bundled example end to end")
    p.add_argument("example", help="one of: " + ", ".join(EXAMPLES))
    p.add_argument("--component", help="only this component")
    p.set_defaults(func=cmd_reproduce)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "needs_config", False) and not args.config:
        print(f"critheat {args.command}: --config is required", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ConfigError, SchemaError, ValidationError, DomainError, OutsideDomain,
            ChartError) as exc:
        print(f"critheat {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NonConvergence, BracketError, SingularityTooClose, InsufficientSignal) as exc:
        print(f"critheat {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
