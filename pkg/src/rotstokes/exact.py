"""Rotating unit disk: closed-form flows, circle quadrature, force and torque.

The disk |y| <= 1 turns with angular velocity a in a fluid at rest at
infinity.  Both the Stokes and the Navier-Stokes problems are solved by the
rotlet v = a y^perp/|y|^2; only the pressure differs.  Normals on boundary
circles point out of the fluid by default; with that choice the torque the
fluid exerts on the disk is +4 pi a.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DomainError, cauchy_stress, perp

OUT_OF_FLUID = "out_of_fluid"
INTO_FLUID = "into_fluid"


@dataclass(frozen=True)
class DiskSolution:
    a: float
    variant: str = "stokes"
    p0: float = 0.0

    def __post_init__(self):
        if self.variant not in ("stokes", "navier_stokes"):
            raise ValueError("variant must be 'stokes' or 'navier_stokes'")


@dataclass(frozen=True)
class BoundaryQuadrature:
    """Equispaced trapezoid rule on the circle |y - center| = radius.

    ``fluid_outside`` says on which side of the circle the fluid lies; the
    normal is then oriented by ``normal_orientation`` relative to the fluid.
    """

    center: tuple = (0.0, 0.0)
    radius: float = 1.0
    n_nodes: int = 64
    normal_orientation: str = OUT_OF_FLUID
    fluid_outside: bool = True

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.n_nodes < 8:
            raise ValueError("n_nodes must be >= 8")
        if self.normal_orientation not in (OUT_OF_FLUID, INTO_FLUID):
            raise ValueError("bad normal_orientation")

    def nodes(self):
        th = 2 * np.pi * np.arange(self.n_nodes) / self.n_nodes
        e = np.stack([np.cos(th), np.sin(th)], -1)
        pts = np.asarray(self.center, float) + self.radius * e
        w = np.full(self.n_nodes, 2 * np.pi * self.radius / self.n_nodes)
        # radial e points into the fluid when the fluid is outside
        sign = -1.0 if self.fluid_outside else 1.0
        if self.normal_orientation == INTO_FLUID:
            sign = -sign
        return pts, w, sign * e


def _check_outside(y):
    y = np.asarray(y, float)
    if np.any(np.sum(y * y, -1) < (1 - 1e-12) ** 2):
        raise DomainError("point inside the disk")
    return y


def disk_velocity(sol: DiskSolution, y) -> np.ndarray:
    y = _check_outside(y)
    return sol.a * perp(y) / np.sum(y * y, -1)[..., None]


def disk_pressure(sol: DiskSolution, y):
    y = _check_outside(y)
    r2 = np.sum(y * y, -1)
    if sol.variant == "stokes":
        return sol.p0 + 0.0 * r2
    return sol.p0 - sol.a**2 / (2 * r2)


def disk_grad(sol: DiskSolution, y) -> np.ndarray:
    """G[..., i, j] = d v_i / d y_j."""
    y = _check_outside(y)
    y1, y2 = y[..., 0], y[..., 1]
    r4 = np.sum(y * y, -1) ** 2
    off = sol.a * (y2 * y2 - y1 * y1) / r4
    diag = 2 * sol.a * y1 * y2 / r4
    return np.stack([np.stack([diag, off], -1), np.stack([off, -diag], -1)], -2)


def disk_stress(sol: DiskSolution, y) -> np.ndarray:
    return cauchy_stress(disk_grad(sol, y), disk_pressure(sol, y))


def ns_residual_check(sol: DiskSolution, y, h: float = 2e-4) -> np.ndarray:
    """-Lap v + grad q + v.grad v at y by central differences of the closed forms."""
    y = _check_outside(y)
    if sol.a == 0:
        return np.zeros(2)
    if np.hypot(*y) - 2 * h <= 1:
        raise DomainError("point too close to the disk for the stencil")
    v0 = disk_velocity(sol, y)
    lap = -4 * v0
    gq = np.zeros(2)
    for n in range(2):
        e = np.zeros(2)
        e[n] = h
        lap = lap + disk_velocity(sol, y + e) + disk_velocity(sol, y - e)
        gq[n] = (disk_pressure(sol, y + e) - disk_pressure(sol, y - e)) / (2 * h)
    lap = lap / h**2
    conv = disk_grad(sol, y) @ v0
    return -lap + gq + conv


def boundary_integral_force(quad: BoundaryQuadrature, stress_at) -> np.ndarray:
    """int T nu dsigma; ``stress_at`` maps (N, 2) points to (N, 2, 2)."""
    pts, w, nu = quad.nodes()
    T = np.asarray(stress_at(pts))
    return np.einsum("n,nij,nj->i", w, T, nu)


def boundary_integral_torque(quad: BoundaryQuadrature, stress_at, velocity_at=None, a: float = 0.0) -> float:
    """int y^perp . ((T + a u (x) y^perp) nu) dsigma.

    The a-term is added only when ``velocity_at`` is given.
    """
    pts, w, nu = quad.nodes()
    T = np.asarray(stress_at(pts))
    Tn = np.einsum("nij,nj->ni", T, nu)
    yp = perp(pts)
    if velocity_at is not None:
        u = np.asarray(velocity_at(pts))
        Tn = Tn + a * u * np.sum(yp * nu, -1)[:, None]
    return float(np.sum(w * np.sum(yp * Tn, -1)))


def disk_torque(a: float, n_nodes: int = 64, orientation: str = OUT_OF_FLUID) -> float:
    sol = DiskSolution(a)
    quad = BoundaryQuadrature(radius=1.0, n_nodes=n_nodes, normal_orientation=orientation)
    return boundary_integral_torque(quad, lambda p: disk_stress(sol, p),
                                    lambda p: disk_velocity(sol, p), a)


def energy_balance_check(sol: DiskSolution, R_outer: float, params=None,
                         n_r: int = 64, n_th: int = 64):
    """Dissipation (1/2) int |Du|^2 over 1 < |x| < R_outer against boundary work.

    Returns (lhs, rhs, outer) where rhs sums the flux terms on both circles
    and ``outer`` is the contribution of the outer circle alone.
    """
    if not R_outer > 1:
        raise ValueError("R_outer must exceed 1")
    # radial nodes in s = log r, where |Du|^2 r dr = 8 a^2 e^{-2s} ds is smooth
    from .quad import gauss_legendre

    L = np.log(R_outer)
    npan = max(1, int(np.ceil(L / 0.5)))
    xg, wg = gauss_legendre(16)
    edges = np.linspace(0.0, L, npan + 1)
    s = (edges[:-1, None] + np.diff(edges)[:, None] * xg).ravel()
    ws = (np.diff(edges)[:, None] * wg).ravel()
    r = np.exp(s)
    th = 2 * np.pi * np.arange(n_th) / n_th
    pts = r[:, None, None] * np.stack([np.cos(th), np.sin(th)], -1)[None]
    G = disk_grad(sol, pts)
    D = G + np.swapaxes(G, -1, -2)
    dens = np.sum(D * D, axis=(-1, -2))
    lhs = 0.5 * float(np.sum((ws * r * r)[:, None] * dens) * 2 * np.pi / n_th)

    def work(quad):
        p, w, nu = quad.nodes()
        u = disk_velocity(sol, p)
        Tn = np.einsum("nij,nj->ni", disk_stress(sol, p), nu)
        dens = np.sum(Tn * u, -1) + 0.5 * sol.a * np.sum(nu * perp(p), -1) * np.sum(u * u, -1)
        return float(np.sum(w * dens))

    inner = work(BoundaryQuadrature(radius=1.0, n_nodes=n_th, fluid_outside=True))
    outer = work(BoundaryQuadrature(radius=R_outer, n_nodes=n_th, fluid_outside=False))
    return lhs, inner + outer, outer
