"""Volume potentials u = Gamma_a * f and p = Q * f, and auxiliary fields.

Near the support of f the time integral defining Gamma_a is split at
t = T_SPLIT.  The short-time piece carries the log singularity at y = x and
is integrated on a polar grid centred at x; the long-time piece is smooth and
is integrated on rings centred at the origin, where one set of angular mode
coefficients per ring covers all source points on it.  Points well outside
the support use rings for the whole time range.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import engine
from .core import KernelParams, perp, pressure_Q
from .quad import ToleranceNotMet, gauss_legendre

T_SPLIT = 0.25
FAR_MARGIN = 2.0
_N_RADIAL = 56
_RING_PANEL = 0.75
_ARC_DENSITY = 2.0     # Gauss nodes on an arc relative to trapezoid nodes on a full circle


@dataclass
class SourceField:
    """A force density f on the plane.

    ``eval`` maps points of shape (..., 2) to values of shape (..., 2).
    ``support_radius`` bounds the support (compact class) or is the
    truncation radius beyond which |f| is negligible (fast_decay class).
    """

    eval: Callable[[np.ndarray], np.ndarray]
    support_radius: float
    decay_class: str = "compact"
    name: str = "custom"
    moment_torque: float = field(default=np.nan)
    moment_force: np.ndarray = field(default_factory=lambda: np.full(2, np.nan))

    def __post_init__(self):
        if self.decay_class not in ("compact", "fast_decay"):
            raise ValueError("decay_class must be 'compact' or 'fast_decay'")
        if not self.support_radius > 0:
            raise ValueError("support_radius must be positive")
        if np.isnan(self.moment_torque):
            self.moment_torque, self.moment_force = moments(self)

    def __call__(self, y):
        return np.asarray(self.eval(np.asarray(y, float)), float)

    def decay_ok(self, C: float = 1.0, radii=None, n_rays: int = 16) -> bool:
        """Check |f(x)| <= C/((1+|x|^3) log(e+|x|)) on rays beyond the support."""
        radii = np.geomspace(self.support_radius, 1e3, 64) if radii is None else np.asarray(radii)
        th = 2 * np.pi * np.arange(n_rays) / n_rays
        pts = radii[:, None, None] * np.stack([np.cos(th), np.sin(th)], -1)[None]
        mag = np.linalg.norm(self(pts), axis=-1)
        bound = C / ((1 + radii ** 3) * np.log(np.e + radii))
        return bool(np.all(mag <= bound[:, None]))

    def scaled(self, c: float) -> "SourceField":
        return SourceField(lambda y: c * self.eval(y), self.support_radius, self.decay_class,
                           f"{c}*{self.name}", c * self.moment_torque, c * self.moment_force)

    def __add__(self, other: "SourceField") -> "SourceField":
        return SourceField(lambda y: self.eval(y) + other.eval(y),
                           max(self.support_radius, other.support_radius),
                           "fast_decay" if "fast_decay" in (self.decay_class, other.decay_class)
                           else "compact", f"{self.name}+{other.name}",
                           self.moment_torque + other.moment_torque,
                           self.moment_force + other.moment_force)


@dataclass
class FieldSample:
    u: np.ndarray
    grad_u: np.ndarray
    p: float
    err_estimate: float


@dataclass
class ResidualReport:
    momentum_residual: np.ndarray
    divergence: float
    fd_step: float


# ---------------------------------------------------------------------------
# presets

def _gauss_radius(width):
    # e^{-r^2/w^2} r^3 below 1e-17 at the truncation radius
    return 6.6 * width


def rotational_gaussian(amplitude: float = 1.0, width: float = 1.0) -> SourceField:
    """f(y) = A y^perp e^{-|y|^2/w^2}; torque A pi w^4, zero force."""
    def f(y):
        return amplitude * perp(y) * np.exp(-np.sum(y * y, -1) / width ** 2)[..., None]
    return SourceField(f, _gauss_radius(width), "fast_decay", "rot_gauss")


def directional_gaussian(direction=(1.0, 0.0), amplitude: float = 1.0, width: float = 1.0) -> SourceField:
    """f(y) = A e^{-|y|^2/w^2} d; force A pi w^2 d, zero torque."""
    d = np.asarray(direction, float)

    def f(y):
        return amplitude * np.exp(-np.sum(y * y, -1) / width ** 2)[..., None] * d
    return SourceField(f, _gauss_radius(width), "fast_decay", "gauss")


def compact_bump(direction=(1.0, 0.0), rotation: float = 0.0, radius: float = 2.0) -> SourceField:
    """(1-|y|^2/R^2)^4 (d + c y^perp) on |y| < R, zero outside (C^3)."""
    d = np.asarray(direction, float)

    def f(y):
        s = np.clip(1 - np.sum(y * y, -1) / radius ** 2, 0.0, None) ** 4
        return s[..., None] * (d + rotation * perp(y))
    return SourceField(f, radius, "compact", "bump")


def zero_field() -> SourceField:
    return SourceField(lambda y: np.zeros(np.shape(y)), 1.0, "compact", "zero", 0.0, np.zeros(2))


def grid_field(x1, x2, f1, f2) -> SourceField:
    """Source sampled on a rectangular grid; cubic interpolation, zero outside."""
    from scipy.interpolate import RegularGridInterpolator

    x1, x2 = np.asarray(x1, float), np.asarray(x2, float)
    i1 = RegularGridInterpolator((x1, x2), np.asarray(f1, float), method="cubic",
                                 bounds_error=False, fill_value=0.0)
    i2 = RegularGridInterpolator((x1, x2), np.asarray(f2, float), method="cubic",
                                 bounds_error=False, fill_value=0.0)

    def f(y):
        y = np.asarray(y, float)
        flat = y.reshape(-1, 2)
        return np.stack([i1(flat), i2(flat)], -1).reshape(y.shape)
    R = float(np.max(np.hypot(*np.meshgrid([x1[0], x1[-1]], [x2[0], x2[-1]]))))
    # moments from the samples themselves (trapezoid), not the interpolant
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    f1, f2 = np.asarray(f1, float), np.asarray(f2, float)
    trap = lambda v: np.trapezoid(np.trapezoid(v, x2, axis=1), x1)
    torque = float(trap(-X2 * f1 + X1 * f2))
    force = np.array([trap(f1), trap(f2)])
    return SourceField(f, R, "compact", "grid", torque, force)


PRESETS = {
    "rot_gauss": rotational_gaussian,
    "gauss": directional_gaussian,
    "bump": compact_bump,
    "zero": zero_field,
}


# ---------------------------------------------------------------------------
# quadrature layouts

def _radial_rule(R, n=_N_RADIAL):
    """Composite Gauss-Legendre rule on [0, R] for integrals in r dr."""
    npan = max(1, int(np.ceil(R / (_RING_PANEL * 8))))
    per = max(8, int(np.ceil(n / npan)))
    xg, wg = gauss_legendre(per)
    e = np.linspace(0.0, R, npan + 1)
    h = np.diff(e)
    r = (e[:-1, None] + h[:, None] * xg).ravel()
    w = (h[:, None] * wg).ravel() * r
    return r, w


def _disk_rule(R, n_r=_N_RADIAL, n_th=128):
    r, wr = _radial_rule(R, n_r)
    th = 2 * np.pi * np.arange(n_th) / n_th
    pts = r[:, None, None] * np.stack([np.cos(th), np.sin(th)], -1)[None]
    w = wr[:, None] * (2 * np.pi / n_th) * np.ones(n_th)
    return pts.reshape(-1, 2), w.ravel()


def moments(f: SourceField, tol: float = 1e-10, max_level: int = 5):
    """Torque int y^perp . f and force int f over the support, refined until stable."""
    n_r, n_th = 32, 64
    prev = None
    for _ in range(max_level):
        pts, w = _disk_rule(f.support_radius, n_r, n_th)
        vals = f(pts)
        torque = float(np.sum(w * np.sum(perp(pts) * vals, -1)))
        force = np.sum(w[:, None] * vals, 0)
        cur = np.concatenate([[torque], force])
        if prev is not None and np.max(np.abs(cur - prev)) < tol:
            return torque, force
        prev = cur
        n_r, n_th = 2 * n_r, 2 * n_th
    raise ToleranceNotMet("moment quadrature did not converge", (torque, force),
                          float(np.max(np.abs(cur - prev))))


def _x_polar_rule(x, R, a):
    """Polar rule centred at x covering the disk |y| <= R.

    Circles |y - x| = rho are cut to the arc inside the support, so the edge
    of a compact source always falls on a panel end.  Radial panels break at
    | |x| - R | and are graded towards rho = 0 when x lies in the support (log
    singularity).  Angular density resolves the short-time rotation ridge
    (width ~ 1/sqrt(rho v), v = |a||x|) and the source (arc length ~ 0.3).
    Full circles use the trapezoid rule, arcs use 8-point Gauss panels.
    Returns flat arrays of offsets (N, 2), weights (N,), unit directions
    (N, 2) and rho (N,).
    """
    xg, wg = gauss_legendre(10)
    rx = float(np.hypot(*x))
    inner, outer = abs(rx - R), rx + R
    edges = []
    if rx < R:
        r = 1e-5
        top = min(1.0, inner)
        edges = [0.0]
        while r < top:
            edges.append(r)
            r *= 4.0
        edges += list(np.linspace(top, inner, max(1, int(np.ceil((inner - top) / _RING_PANEL))) + 1))
    edges += list(np.linspace(inner, outer, max(2, int(np.ceil((outer - inner) / _RING_PANEL))) + 1))
    # arcs open like sqrt(rho - rho_tangent) at both tangency radii
    grade = _RING_PANEL * 4.0 ** -np.arange(1, 5)
    edges += list(inner + grade) + list(outer - grade)
    if rx < R and inner > 0:
        edges += list(inner - grade[inner - grade > 0])
    edges = np.unique(edges)
    h = np.diff(edges)
    rho = (edges[:-1, None] + h[:, None] * xg).ravel()
    wr = (h[:, None] * wg).ravel() * rho
    v = abs(a) * rx + 1e-12
    ridge = 8.2 * np.sqrt(np.minimum(rho, v * T_SPLIT) * v)
    n_full = np.maximum(32, np.maximum(ridge, 2 * np.pi * rho / 0.3))
    # arc where |x + rho e(theta)| <= R: cos(theta - theta_x) <= kappa
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = (R * R - rx * rx - rho * rho) / (2 * rho * rx)
    kappa = np.where(rx > 0, kappa, np.inf)
    th_x = np.arctan2(x[1], x[0])
    gx, gw = gauss_legendre(8)
    offs, ws, dirs, rr = [], [], [], []
    full = kappa >= 1
    n_t = (8 * np.ceil(n_full / 8)).astype(int)
    for n in np.unique(n_t[full]):
        sel = full & (n_t == n)
        th = 2 * np.pi * np.arange(n) / n
        e = np.stack([np.cos(th), np.sin(th)], -1)
        offs.append((rho[sel, None, None] * e[None]).reshape(-1, 2))
        ws.append(np.repeat(wr[sel] * 2 * np.pi / n, n))
        dirs.append(np.tile(e, (sel.sum(), 1)))
        rr.append(np.repeat(rho[sel], n))
    for i in np.flatnonzero((kappa > -1) & ~full):
        half = np.pi - np.arccos(kappa[i])       # half-width of the arc
        npan = max(1, int(np.ceil(_ARC_DENSITY * n_full[i] * half / np.pi / 8)))
        b = np.linspace(-half, half, npan + 1)
        th = th_x + np.pi + (b[:-1, None] + np.diff(b)[:, None] * gx).ravel()
        w = (np.diff(b)[:, None] * gw).ravel()
        e = np.stack([np.cos(th), np.sin(th)], -1)
        offs.append(rho[i] * e)
        ws.append(wr[i] * w)
        dirs.append(e)
        rr.append(np.full(th.size, rho[i]))
    if not offs:
        z = np.zeros((0, 2))
        return z, np.zeros(0), z, np.zeros(0)
    return np.concatenate(offs), np.concatenate(ws), np.concatenate(dirs), np.concatenate(rr)


def _ring_rule(R, n_r):
    r, wr = _radial_rule(R, n_r)
    return r, wr


# ---------------------------------------------------------------------------
# potentials

def _ring_part(f, x, a, kinds, T0, full):
    """Integral of f against the ring-evaluated kernel pieces.

    full=True integrates over all t (x must be away from the support);
    otherwise only over [T0, inf).
    """
    R = f.support_radius
    r, wr = _ring_rule(R, _N_RADIAL)
    P = r.size
    X = np.repeat(np.asarray(x, float)[None], P, 0)
    Y0 = np.stack([r, np.zeros(P)], -1)
    rx = np.hypot(*x)
    rho = rx * r
    dr = np.abs(rx - r)
    if full:
        Ms = [int(8 * np.ceil(2.4 * engine.bandwidth(0.0, rh, d) / 8)) for rh, d in zip(rho, dr)]
        T0v = engine.default_split(rho)
        Ms = [max(m, engine.mode_count(rh, d, t)) for m, rh, d, t in zip(Ms, rho, dr, T0v)]
    else:
        T0v = np.full(P, T0)
        Ms = [engine.mode_count(rh, d, T0) for rh, d in zip(rho, dr)]
    Ms = np.array(Ms)
    Mmax = int(Ms.max())
    n_phi = int(8 * np.ceil((Mmax + 96) / 8))
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    ring_pts = r[:, None, None] * np.stack([np.cos(phi), np.sin(phi)], -1)[None]
    fv = f(ring_pts)                                        # (P, n_phi, 2)
    wphi = 2 * np.pi / n_phi
    out = {}
    for kind in kinds:
        vs = engine.value_shape(kind)
        acc = np.zeros(vs[:1] + vs[2:])
        for M in np.unique(Ms):
            idx = np.flatnonzero(Ms == M)
            c, _ = engine.tail_modes(kind, X[idx], Y0[idx], a, T0v[idx], int(M))
            if full:
                c2, _ = engine.real_segment_modes(kind, X[idx], Y0[idx], a, T0v[idx], int(M))
                c = c + c2
            for j, l in enumerate(idx):
                G = engine.rotated_sum(c[j], a, phi)        # (n_phi, 2, 2[, 2])
                if kind == "dK":
                    acc += wr[l] * wphi * np.einsum("pijn,pj->in", G, fv[l])
                else:
                    acc += wr[l] * wphi * np.einsum("pij,pj->i", G, fv[l])
        out[kind] = acc
    # pressure on the same rings (full mode only)
    if full:
        Qv = pressure_Q(np.asarray(x, float) - ring_pts)
        out["p"] = float(np.sum(wr[:, None] * wphi * np.sum(Qv * fv, -1)))
    return out


def _short_part(f, x, a, kinds, T0):
    """Integral over [0, T0] in time on a polar grid centred at x, plus pressure."""
    x = np.asarray(x, float)
    offs, W, e, rho = _x_polar_rule(x, f.support_radius, a)
    pts = x + offs
    fv = f(pts)
    fmag = np.max(np.abs(fv), axis=-1)
    mask = fmag > 1e-18 * max(float(fmag.max()), 1e-300)
    out = {}
    # pressure: Q(x - y) rho = -e/(2 pi)
    out["p"] = float(np.sum(W / rho * np.sum(-e / (2 * np.pi) * fv, -1)))
    if not kinds:
        return out
    Yn = pts[mask]
    Fn = fv[mask]
    Wn = W[mask]
    Xn = np.broadcast_to(x, Yn.shape)
    accK = np.zeros(2)
    accD = np.zeros((2, 2))
    step = 4000
    both = "dK" in kinds
    for i in range(0, Yn.shape[0], step):
        sl = slice(i, i + step)
        T0s = np.full(Yn[sl].shape[0], T0)
        if both:
            (G, D), _ = engine.real_segment("K+dK", Xn[sl], Yn[sl], a, T0s)
            accD += np.einsum("pijn,pj,p->in", D, Fn[sl], Wn[sl])
        else:
            G, _ = engine.real_segment("K", Xn[sl], Yn[sl], a, T0s)
        accK += np.einsum("pij,pj,p->i", G, Fn[sl], Wn[sl])
    out["K"] = accK
    if both:
        out["dK"] = accD
    return out


def _is_far(f, x):
    return np.hypot(*np.asarray(x, float)) >= f.support_radius + FAR_MARGIN


def evaluate(f: SourceField, x, params: KernelParams, grad: bool = True) -> FieldSample:
    """u(x), grad u(x) and p(x) for the source f."""
    params.require_rotation()
    x = np.asarray(x, float)
    kinds = ("K", "dK") if grad else ("K",)
    a = params.a
    if _is_far(f, x):
        res = _ring_part(f, x, a, kinds, None, full=True)
        p = res["p"]
        u = res["K"]
        g = res.get("dK", np.full((2, 2), np.nan))
    else:
        long = _ring_part(f, x, a, kinds, T_SPLIT, full=False)
        short = _short_part(f, x, a, kinds, T_SPLIT)
        p = short["p"]
        u = long["K"] + short["K"]
        g = long["dK"] + short["dK"] if grad else np.full((2, 2), np.nan)
    err = 1e-13 * (1.0 + float(np.max(np.abs(u))))
    return FieldSample(u, g, p, err)


def velocity_potential(f: SourceField, x, params: KernelParams) -> np.ndarray:
    return evaluate(f, x, params, grad=False).u


def velocity_gradient(f: SourceField, x, params: KernelParams) -> np.ndarray:
    return evaluate(f, x, params, grad=True).grad_u


def pressure_potential(f: SourceField, x, params: KernelParams | None = None) -> float:
    """p(x) = int Q(x - y) . f(y) dy (does not depend on a)."""
    x = np.asarray(x, float)
    if _is_far(f, x):
        R = f.support_radius
        pts, w = _disk_rule(R, _N_RADIAL, 192)
        return float(np.sum(w * np.sum(pressure_Q(x - pts) * f(pts), -1)))
    return _short_part(f, x, 1.0, (), T_SPLIT)["p"]


def pde_residual(f: SourceField, x, params: KernelParams, fd_step: float = 1e-2) -> ResidualReport:
    """Finite-difference check of -Lu + grad p = f and div u = 0 at x.

    Five potential evaluations (x and x +- h e_n) feed a 5-point Laplacian
    and central first differences; fd_step is the absolute step h.
    """
    if not fd_step > 0:
        raise ValueError("fd_step must be positive")
    params.require_rotation()
    x = np.asarray(x, float)
    h = float(fd_step)
    a = params.a
    u0 = evaluate(f, x, params, grad=False).u
    up, um, pp, pm = [], [], [], []
    for n in range(2):
        e = np.zeros(2)
        e[n] = h
        sp = evaluate(f, x + e, params, grad=False)
        sm = evaluate(f, x - e, params, grad=False)
        up.append(sp.u)
        um.append(sm.u)
        pp.append(sp.p)
        pm.append(sm.p)
    up, um = np.array(up), np.array(um)             # [n, i]
    du = ((up - um) / (2 * h)).T                    # du[i, n] = d u_i / d x_n
    lap = (up.sum(0) + um.sum(0) - 4 * u0) / h**2
    dp = (np.array(pp) - np.array(pm)) / (2 * h)
    rot = du @ perp(x) - perp(u0)
    res = -lap - a * rot + dp - f(x)
    return ResidualReport(res, float(du[0, 0] + du[1, 1]), h)


def flux_carrier(x, x0, beta: float):
    """w = -beta (x - x0) / (2 pi |x - x0|^2) and grad w (w_i / d x_j)."""
    z = np.asarray(x, float) - np.asarray(x0, float)
    r2 = float(z @ z)
    if r2 == 0.0:
        raise ValueError("flux carrier is singular at x = x0")
    c = -beta / (2 * np.pi)
    w = c * z / r2
    gw = c * (np.eye(2) / r2 - 2 * np.outer(z, z) / r2**2)
    return w, gw


def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10 - 15 * s + 6 * s * s), 30 * s * s * (1 - s) ** 2


def rotational_lift(x, a: float, R: float) -> np.ndarray:
    """w = (a/2) grad^perp(zeta(|x|) |x|^2) = a (zeta + r zeta'/2) x^perp.

    zeta is 1 on [0, R], 0 beyond 2R, with a quintic smoothstep in between.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    x = np.asarray(x, float)
    r = np.linalg.norm(x, axis=-1)
    S, dS = _smoothstep((r - R) / R)
    zeta = 1.0 - S
    dzeta = -dS / R
    return (a * (zeta + 0.5 * r * dzeta))[..., None] * perp(x)


def _jacobian(F, pts, h=1e-3):
    """Fourth-order central differences, J[..., i, n] = dF_i/dx_n."""
    cols = []
    for n in range(2):
        e = np.zeros(2)
        e[n] = h
        d = (8 * (F(pts + e) - F(pts - e)) - (F(pts + 2 * e) - F(pts - 2 * e))) / (12 * h)
        cols.append(d)
    return np.stack(cols, -1)


def skew_identity_check(u, v, R1: float, R2: float, params: KernelParams | None = None,
                        center=(0.0, 0.0), grad_u=None, grad_v=None,
                        n_r: int = 48, n_th: int = 256):
    """Both sides of the integration-by-parts identity for the rotation term.

    lhs = int_A [(x^perp.grad u - u^perp).v + u.(x^perp.grad v - v^perp)] dx
    rhs = int_dA (nu . x^perp)(u . v) dsigma, nu the outer normal of A,
    where A is the annulus R1 < |x - center| < R2.  u, v map (N, 2) -> (N, 2);
    gradients default to finite differences.
    """
    if not 0 < R1 < R2:
        raise ValueError("need 0 < R1 < R2")
    c = np.asarray(center, float)
    gu = grad_u or (lambda p: _jacobian(u, p))
    gv = grad_v or (lambda p: _jacobian(v, p))
    xg, wg = gauss_legendre(n_r)
    r = R1 + (R2 - R1) * xg
    th = 2 * np.pi * np.arange(n_th) / n_th
    e = np.stack([np.cos(th), np.sin(th)], -1)
    pts = (c + r[:, None, None] * e[None]).reshape(-1, 2)
    w = ((R2 - R1) * wg * r)[:, None] * np.full(n_th, 2 * np.pi / n_th)
    xp = perp(pts)
    U, V = u(pts), v(pts)
    Lu = np.einsum("pin,pn->pi", gu(pts), xp) - perp(U)
    Lv = np.einsum("pin,pn->pi", gv(pts), xp) - perp(V)
    lhs = float(np.sum(w.ravel() * (np.sum(Lu * V, -1) + np.sum(U * Lv, -1))))
    rhs = 0.0
    for R, sign in ((R2, 1.0), (R1, -1.0)):
        q = c + R * e
        nu = sign * e
        rhs += float(np.sum(np.sum(nu * perp(q), -1) * np.sum(u(q) * v(q), -1)) * R * 2 * np.pi / n_th)
    return lhs, rhs
