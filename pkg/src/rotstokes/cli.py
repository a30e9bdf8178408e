"""Command line: kernel evaluation, field tables, verification suites, decay scans.

Exit codes: 0 success, 1 a check failed, 2 bad configuration,
3 a quadrature did not converge.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import asymscan, exact, fields, fundsol, quad
from .core import KernelParams, perp, stokes_E

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
SUITES = ("centering", "kernels", "decay", "potentials", "exact")


class ConfigError(ValueError):
    pass


def _num(x):
    """Full-precision float for JSON/CSV output."""
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return str(x)
    return float(format(x, ".17g"))


def _fmt(x):
    return format(float(x), ".17g")


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _tolist(a):
    return [_tolist(v) for v in a] if np.ndim(a) else _num(a)


# ---------------------------------------------------------------------------
# config handling

def load_config(path, overrides: dict) -> dict:
    cfg = {}
    if path:
        try:
            cfg = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"config: cannot read {path}: {e}") from e
        if not isinstance(cfg, dict):
            raise ConfigError("config: top level must be a JSON object")
    for k, v in overrides.items():
        if v is not None:
            cfg[k] = v
    return cfg


def _params(cfg) -> KernelParams:
    try:
        a = float(cfg.get("a", 1.0))
        kw = {k: float(cfg[k]) for k in ("eps", "tol_abs", "tol_rel") if k in cfg}
        p = KernelParams(a=a, **kw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"a/eps/tol: {e}") from e
    if p.a == 0:
        raise ConfigError("a: must be nonzero")
    return p


def _grid(cfg):
    g = cfg.get("grid")
    if not isinstance(g, dict):
        raise ConfigError("grid: missing object {xmin,xmax,ymin,ymax,nx,ny}")
    try:
        xmin, xmax, ymin, ymax = (float(g[k]) for k in ("xmin", "xmax", "ymin", "ymax"))
        nx, ny = int(g["nx"]), int(g["ny"])
    except KeyError as e:
        raise ConfigError(f"grid.{e.args[0]}: missing") from e
    except (TypeError, ValueError) as e:
        raise ConfigError(f"grid: {e}") from e
    if nx < 2:
        raise ConfigError("grid.nx: must be >= 2")
    if ny < 2:
        raise ConfigError("grid.ny: must be >= 2")
    return np.linspace(xmin, xmax, nx), np.linspace(ymin, ymax, ny)


def _source(cfg) -> fields.SourceField:
    s = cfg.get("source", {"preset": "rot_gauss"})
    if isinstance(s, str):
        s = {"preset": s}
    if "grid_file" in s:
        try:
            data = np.load(s["grid_file"])
            return fields.grid_field(data["x1"], data["x2"], data["f1"], data["f2"])
        except (OSError, KeyError, ValueError) as e:
            raise ConfigError(f"source.grid_file: {e}") from e
    name = s.get("preset")
    if name not in fields.PRESETS:
        raise ConfigError(f"source.preset: unknown {name!r}; choose from {sorted(fields.PRESETS)}")
    kw = {k: v for k, v in s.items() if k != "preset"}
    try:
        return fields.PRESETS[name](**kw)
    except TypeError as e:
        raise ConfigError(f"source: {e}") from e


# ---------------------------------------------------------------------------
# kernel

def cmd_kernel(args) -> int:
    params = _params({"a": args.a})
    x, y = np.array(args.x, float), np.array(args.y, float)
    try:
        ev = fundsol.gamma(x, y, params, decompose=args.decompose)
    except fundsol.TooClose as e:
        raise ConfigError(f"x/y: {e}") from e
    out = {"x": _tolist(x), "y": _tolist(y), "a": _num(params.a),
           "gamma": _tolist(ev.value), "abs_error_estimate": _num(ev.abs_error_estimate)}
    if ev.decomposition:
        out["decomposition"] = {k: _tolist(v) for k, v in ev.decomposition.items()}
    sys.stdout.write(_dump(out))
    return EXIT_OK


# ---------------------------------------------------------------------------
# field

def field_table(cfg) -> str:
    params = _params(cfg)
    xs, ys = _grid(cfg)
    f = _source(cfg)
    want_grad = bool(cfg.get("grad", False))
    want_res = bool(cfg.get("residual", False))
    h = float(cfg.get("fd_step", 1e-2))
    workers = max(1, int(cfg.get("workers", 1)))

    def row(y2):
        lines = []
        for x1 in xs:
            x = np.array([x1, y2])
            s = fields.evaluate(f, x, params, grad=want_grad)
            vals = [x1, y2, s.u[0], s.u[1], s.p]
            if want_grad:
                vals += list(np.asarray(s.grad_u).ravel())
            if want_res:
                r = fields.pde_residual(f, x, params, h)
                vals += [r.momentum_residual[0], r.momentum_residual[1], r.divergence]
            lines.append([_fmt(v) for v in vals])
        return lines

    head = ["x1", "x2", "u1", "u2", "p"]
    if want_grad:
        head += ["du11", "du12", "du21", "du22"]
    if want_res:
        head += ["res1", "res2", "div"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(head)
    with ThreadPoolExecutor(workers) as ex:
        for lines in ex.map(row, ys):     # map keeps row order
            w.writerows(lines)
    return buf.getvalue()


def _write(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_field(args) -> int:
    cfg = load_config(args.config, {"a": args.a, "output": args.output})
    _write(field_table(cfg), cfg.get("output"))
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify

def _check(name, measured, expected, tolerance, ok=None):
    measured = float(measured)
    if ok is None:
        ok = abs(measured - float(expected)) <= tolerance
    return {"name": name, "status": "pass" if ok else "fail", "measured": _num(measured),
            "expected": _num(expected), "tolerance": _num(tolerance)}


def _suite_centering():
    p = KernelParams()
    radii = np.geomspace(0.05, 20, 20)
    err = max(abs(quad.centered_scalar_log([r, 0.0], p) - math.log(1 / r) / (2 * math.pi)) for r in radii)
    yield _check("centering-log-unit-radius", quad.centered_scalar_log([1.0, 0.0], p), 0.0, 1e-8)
    yield _check("centering-log-max-error", err, 0.0, 1e-8)
    rng = np.random.default_rng(7)
    e = 0.0
    for _ in range(5):
        r, th = rng.uniform(0.1, 10), rng.uniform(0, 2 * math.pi)
        x = r * np.array([math.cos(th), math.sin(th)])
        e = max(e, float(np.max(np.abs(quad.centered_stokes_E(x, p) - stokes_E(x)))))
    yield _check("centered-stokes-recovery", e, 0.0, 1e-6)


def _suite_kernels():
    p = KernelParams()
    tail = quad.TailStrategy(quad.ABSOLUTE)
    for m, r in ((2, 1.0), (3, 2.0)):
        val = quad.integrate_0_inf(lambda t: t**-m * np.exp(-r * r / t), p, tail).value
        yield _check(f"gamma-function-identity-m{m}-r{r:g}", val, math.gamma(m - 1) / r ** (2 * m - 2), 1e-10)
    from scipy.special import kv
    for a in (1.0, -4.0):
        C = fundsol.center_constant(a).value
        J = 2 * kv(0, np.sqrt(-1j * a))
        yield _check(f"center-constant-bessel-a{a:g}", np.max(np.abs(C - np.array(
            [[J.real, J.imag], [-J.imag, J.real]]) / (8 * math.pi))), 0.0, 1e-10)
    rng = np.random.default_rng(11)
    x = rng.uniform(-3, 3, (12, 2))
    y = rng.uniform(-3, 3, (12, 2))
    for a in (0.5, 4.0):
        g1, _ = fundsol.gamma_many(x, y, KernelParams(a=a))
        g2, _ = fundsol.gamma_many(y, x, KernelParams(a=-a))
        yield _check(f"transpose-law-a{a:g}", np.max(np.abs(g1 - np.swapaxes(g2, -1, -2))), 0.0, 4e-10)
    g = fundsol.gamma([1.5, -0.5], [0.2, 0.7], p, decompose=True)
    s = sum(g.decomposition.values())
    yield _check("decomposition-sum", np.max(np.abs(s - g.value)), 0.0, 1e-12)


def leading_remainder(r, y=(0.0, 1.0), a=1.0):
    """max over 16 directions of |Gamma_a(x, y) - leading term| at |x| = r."""
    th = 2 * np.pi * np.arange(asymscan.N_DIRECTIONS) / asymscan.N_DIRECTIONS
    x = r * np.stack([np.cos(th), np.sin(th)], -1)
    yy = np.broadcast_to(np.asarray(y, float), x.shape)
    g, _ = fundsol.gamma_many(x, yy, KernelParams(a=a))
    lead = fundsol.gamma_leading(x, yy)
    return float(np.max(np.linalg.norm(g - lead, ord=2, axis=(-2, -1))))


def _suite_decay():
    rep = asymscan.decay_scan(leading_remainder, [8, 16, 32, 64, 128], -2.0, 0.15)
    yield _check("leading-term-decay-slope", rep.fitted_exponent, -2.0, 0.15)
    syn = asymscan.decay_scan(lambda r: (3 + math.sin(r)) / r**2, [8, 16, 32, 64], -2.0, 0.15)
    yield _check("synthetic-power-law-slope", syn.fitted_exponent, -2.0, 0.15)


def _suite_potentials():
    p = KernelParams(a=1.0)
    rg = fields.rotational_gaussian()
    yield _check("rotational-gaussian-torque", rg.moment_torque, math.pi, 1e-10)
    x = np.array([100.0, 0.0])
    u = fields.velocity_potential(rg, x, p)
    lead = math.pi * perp(x) / (4 * math.pi * 100.0**2)
    yield _check("velocity-leading-term-rel-error", np.linalg.norm(u - lead) / np.linalg.norm(lead), 0.0, 0.05)
    dg = fields.directional_gaussian()
    pr = fields.pressure_potential(dg, x)
    yield _check("pressure-leading-term-rel-error", abs(pr - 1 / 200) / (1 / 200), 0.0, 0.05)
    x = np.array([3.0, 0.0])
    r2 = 9.0
    exact_u = perp(x) * (1 - math.exp(-r2)) / (4 * r2)
    yield _check("rotational-gaussian-closed-form", np.max(np.abs(fields.velocity_potential(rg, x, p) - exact_u)), 0.0, 1e-10)
    res = fields.pde_residual(rg, x, p, 1e-2)
    yield _check("pde-momentum-residual", np.linalg.norm(res.momentum_residual), 0.0, 1e-2)
    yield _check("pde-divergence", abs(res.divergence), 0.0, 1e-2)


def _suite_exact():
    for a in (0.5, -0.5, 1.0, -1.0, 4.0, -4.0):
        yield _check(f"torque-4pi-a-a{a:g}", exact.disk_torque(a), 4 * math.pi * a, 1e-9)
    sol = exact.DiskSolution(1.0)
    F = exact.boundary_integral_force(exact.BoundaryQuadrature(), lambda q: exact.disk_stress(sol, q))
    yield _check("net-force-zero", np.linalg.norm(F), 0.0, 1e-10)
    ns = exact.DiskSolution(3.0, "navier_stokes")
    yield _check("navier-stokes-disk-residual", np.linalg.norm(exact.ns_residual_check(ns, [2.0, 0.0])), 0.0, 1e-6)
    lhs, rhs, _ = exact.energy_balance_check(sol, 100.0)
    yield _check("energy-balance-sides", abs(lhs - rhs) / abs(lhs), 0.0, 0.01)
    yield _check("energy-dissipation-4pi-a2", lhs / (4 * math.pi), 1.0, 0.01)


_SUITE_FUNCS = {
    "centering": _suite_centering,
    "kernels": _suite_kernels,
    "decay": _suite_decay,
    "potentials": _suite_potentials,
    "exact": _suite_exact,
}


def run_verify(suite: str) -> dict:
    if suite != "all" and suite not in _SUITE_FUNCS:
        raise ConfigError(f"suite: unknown {suite!r}")
    names = SUITES if suite == "all" else (suite,)
    checks = []
    for n in names:
        checks.extend(_SUITE_FUNCS[n]())
    return {"suite": suite, "checks": checks}


def cmd_verify(args) -> int:
    report = run_verify(args.suite)
    for c in report["checks"]:
        print(f"{c['status'].upper():4s} {c['name']}", file=sys.stderr)
    _write(_dump(report), args.output)
    return EXIT_OK if all(c["status"] == "pass" for c in report["checks"]) else EXIT_FAIL


# ---------------------------------------------------------------------------
# scan

def _scan_quantity(cfg):
    kind = cfg.get("quantity", "gamma-leading")
    a = _params(cfg).a
    if kind == "gamma-leading":
        y = tuple(float(v) for v in cfg.get("y", (0.0, 1.0)))
        return lambda r: leading_remainder(r, y, a)
    if kind in ("velocity-leading", "pressure-leading"):
        f = _source(cfg)
        p = KernelParams(a=a)

        def q(r):
            def one(x):
                s = fields.evaluate(f, x, p, grad=False)
                if kind == "velocity-leading":
                    lead = f.moment_torque * perp(x) / (4 * math.pi * (x @ x))
                    return np.linalg.norm(s.u - lead)
                return abs(s.p - f.moment_force @ x / (2 * math.pi * (x @ x)))
            return asymscan.directional_max(one, r, int(cfg.get("directions", asymscan.N_DIRECTIONS)))
        return q
    raise ConfigError(f"quantity: unknown {kind!r}")


def cmd_scan(args) -> int:
    cfg = load_config(args.config, {"a": args.a, "output": args.output})
    radii = cfg.get("radii", [8, 16, 32, 64, 128])
    if len(radii) < 4:
        raise ConfigError("radii: need at least 4 entries")
    rep = asymscan.decay_scan(_scan_quantity(cfg), radii, float(cfg.get("expected_exponent", -2.0)),
                              float(cfg.get("tolerance", 0.15)))
    out = cfg.get("output")
    if out in (None, "-"):
        sys.stdout.write(rep.to_json() + "\n")
    else:
        Path(out).with_suffix(".json").write_text(rep.to_json() + "\n")
        Path(out).with_suffix(".csv").write_text(rep.to_csv())
    return EXIT_OK if rep.passed else EXIT_FAIL


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rotstokes", description="Rotating-frame Stokes kernels and potentials")
    sub = ap.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernel", help="evaluate Gamma_a(x, y)")
    k.add_argument("--x", nargs=2, type=float, required=True)
    k.add_argument("--y", nargs=2, type=float, required=True)
    k.add_argument("--a", type=float, default=1.0)
    k.add_argument("--decompose", action="store_true")
    k.set_defaults(func=cmd_kernel)

    f = sub.add_parser("field", help="tabulate u, p on a grid (CSV)")
    f.add_argument("--config", required=True)
    f.add_argument("--a", type=float)
    f.add_argument("--output")
    f.set_defaults(func=cmd_field)

    v = sub.add_parser("verify", help="run a verification suite (JSON report)")
    v.add_argument("suite", choices=SUITES + ("all",))
    v.add_argument("--output")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("scan", help="decay-rate scan (JSON + CSV)")
    s.add_argument("--config")
    s.add_argument("--a", type=float)
    s.add_argument("--output")
    s.set_defaults(func=cmd_scan)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (quad.NonConvergence, quad.ToleranceNotMet) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC

if __name__ == "__main__":
    sys.exit(main())
