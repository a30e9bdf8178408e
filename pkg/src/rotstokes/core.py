"""Plane geometry, rotations and the closed-form kernels.

Vectors are arrays with a trailing axis of length 2 and matrices have
trailing shape (2, 2), so every function broadcasts over leading axes.
Kernels in the time variable also accept complex ``t`` (Re t > 0), which
the contour quadrature in :mod:`rotstokes.fundsol` relies on.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Vec2 = np.ndarray
Mat22 = np.ndarray

FOUR_PI = 4.0 * np.pi
# below this |w| the phi/psi functions are evaluated by their power series
_SERIES_W = 0.5
_NSERIES = 18


class DomainError(ValueError):
    """Argument outside the domain of a closed-form kernel."""


class SingularityError(DomainError):
    """Kernel evaluated at its singular point."""


@dataclass(frozen=True)
class KernelParams:
    """Angular velocity, resolvent damping and quadrature controls."""

    a: float = 1.0
    eps: float = 0.0
    tol_abs: float = 1e-10
    tol_rel: float = 1e-10
    t_split: float = 1.0
    max_periods: int = 512

    def __post_init__(self):
        for name in ("a", "eps", "tol_abs", "tol_rel", "t_split"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.eps < 0:
            raise ValueError("eps must be >= 0")
        if self.tol_abs <= 0 or self.tol_rel <= 0:
            raise ValueError("tolerances must be positive")
        if self.t_split <= 0:
            raise ValueError("t_split must be positive")
        if int(self.max_periods) != self.max_periods or self.max_periods < 1:
            raise ValueError("max_periods must be a positive integer")

    def require_rotation(self) -> None:
        if self.a == 0:
            raise ValueError("a must be nonzero for the rotating kernel")

    def replace(self, **kw) -> "KernelParams":
        d = dict(self.__dict__)
        d.update(kw)
        return KernelParams(**d)


def vec(x1, x2) -> Vec2:
    return np.array([x1, x2], dtype=float)


def perp(v) -> Vec2:
    v = np.asarray(v)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def outer(u, v) -> Mat22:
    return np.asarray(u)[..., :, None] * np.asarray(v)[..., None, :]


def rotation(t) -> Mat22:
    """O(t), counter-clockwise rotation by angle t."""
    c, s = np.cos(t), np.sin(t)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def _check_t(t):
    t = np.asarray(t)
    if np.iscomplexobj(t):
        if np.any(t.real <= 0):
            raise DomainError("Re t must be positive")
    elif np.any(t <= 0):
        raise DomainError("t must be positive")
    return t


def heat_kernel(x, t):
    """G(x,t) = exp(-|x|^2/4t)/(4 pi t)."""
    t = _check_t(t)
    x = np.asarray(x)
    q = np.sum(x * x, axis=-1)
    return np.exp(-q / (4 * t)) / (FOUR_PI * t)


def _series(w, coef):
    out = np.zeros_like(w) + coef[-1]
    for c in coef[-2::-1]:
        out = out * w + c
    return out


def _fact(n):
    return float(np.prod(np.arange(1, n + 1))) if n > 0 else 1.0


# phi1(w) = (1-e^-w)/w, psi2(w) = (1-e^-w-w e^-w)/w^2, dpsi2 = psi2'(w)
_PHI1 = [(-1) ** n / _fact(n + 1) for n in range(_NSERIES)]
_PSI2 = [(-1) ** n * (n + 1) / _fact(n + 2) for n in range(_NSERIES)]
_DPSI2 = [(-1) ** (n + 1) * (n + 1) * (n + 2) / _fact(n + 3) for n in range(_NSERIES)]


def phi_functions(w):
    """Return exp(-w), phi1(w), psi2(w) and psi2'(w) without cancellation."""
    w = np.asarray(w)
    shape = w.shape
    w = np.atleast_1d(w.astype(np.result_type(w, float)))
    e = np.exp(-w)
    small = np.abs(w) < _SERIES_W
    wl = np.where(small, 1.0, w)
    el = np.where(small, 1.0, e)
    phi1 = -np.expm1(-wl) / wl
    psi2 = (phi1 - el) / wl
    dpsi2 = (el - 2 * psi2) / wl
    if small.any():
        ws = w[small]
        phi1[small] = _series(ws, _PHI1)
        psi2[small] = _series(ws, _PSI2)
        dpsi2[small] = _series(ws, _DPSI2)
    return tuple(v.reshape(shape) for v in (e, phi1, psi2, dpsi2))


def k_coefficients(q, t):
    """Scalars (alpha, beta) with K(z,t) = alpha I + beta z(x)z, q = |z|^2."""
    e, phi1, psi2, _ = phi_functions(q / (4 * t))
    alpha = (e - 0.5 * phi1) / (FOUR_PI * t)
    beta = psi2 / (16 * np.pi * t * t)
    return alpha, beta


def k_derivative_coefficients(q, t):
    """(alpha, beta, alpha', beta') with primes taken in q = |z|^2.

    dK_ij/dz_m = 2 alpha' z_m d_ij + 2 beta' z_m z_i z_j + beta (d_im z_j + z_i d_jm).
    """
    e, phi1, psi2, dpsi2 = phi_functions(q / (4 * t))
    alpha = (e - 0.5 * phi1) / (FOUR_PI * t)
    beta = psi2 / (16 * np.pi * t * t)
    dalpha = (-e + 0.5 * psi2) / (16 * np.pi * t * t)
    dbeta = dpsi2 / (64 * np.pi * t ** 3)
    return alpha, beta, dalpha, dbeta


def _iso_plus_outer(alpha, beta, z):
    eye = np.eye(2)
    return alpha[..., None, None] * eye + beta[..., None, None] * outer(z, z)


def k_kernel(x, t) -> Mat22:
    """Unsteady Stokes kernel K(x,t) = G(x,t) I + H(x,t)."""
    t = _check_t(t)
    x = np.asarray(x)
    q = np.sum(x * x, axis=-1)
    alpha, beta = k_coefficients(q, t)
    return _iso_plus_outer(alpha, beta, x)


def h_kernel(x, t) -> Mat22:
    """H(x,t) = K(x,t) - G(x,t) I; finite at x = 0 where it equals -I/(8 pi t)."""
    t = _check_t(t)
    x = np.asarray(x)
    q = np.sum(x * x, axis=-1)
    _, phi1, psi2, _ = phi_functions(q / (4 * t))
    alpha = -phi1 / (8 * np.pi * t)
    beta = psi2 / (16 * np.pi * t * t)
    return _iso_plus_outer(alpha, beta, x)


def grad_k_kernel(x, t):
    """dK_ij/dx_m as an array with trailing axes (i, j, m)."""
    t = _check_t(t)
    x = np.asarray(x)
    q = np.sum(x * x, axis=-1)
    _, beta, da, db = k_derivative_coefficients(q, t)
    return _grad_from_coeffs(x, beta, da, db)


def _grad_from_coeffs(z, beta, da, db):
    eye = np.eye(2)
    zi = z[..., :, None, None]
    zj = z[..., None, :, None]
    zm = z[..., None, None, :]
    dij = eye[:, :, None]
    dim = eye[:, None, :]
    djm = eye[None, :, :]
    b = beta[..., None, None, None]
    return (2 * da[..., None, None, None] * zm * dij
            + 2 * db[..., None, None, None] * zm * zi * zj
            + b * (dim * zj + zi * djm))


def _nonzero(x):
    x = np.asarray(x, dtype=float)
    q = np.sum(x * x, axis=-1)
    if np.any(q == 0):
        raise SingularityError("kernel is singular at x = 0")
    return x, q


def stokes_E(x) -> Mat22:
    """Steady Stokes fundamental solution (1/4pi)[log(1/|x|) I + x(x)x/|x|^2]."""
    x, q = _nonzero(x)
    eye = np.eye(2)
    return (-0.5 * np.log(q)[..., None, None] * eye
            + outer(x, x) / q[..., None, None]) / FOUR_PI


def pressure_Q(x) -> Vec2:
    """Pressure kernel x/(2 pi |x|^2)."""
    x, q = _nonzero(x)
    return x / (2 * np.pi * q[..., None])


def cauchy_stress(grad_u, p) -> Mat22:
    """T = Du - p I with Du = grad_u + grad_u^T."""
    g = np.asarray(grad_u, dtype=float)
    du = g + np.swapaxes(g, -1, -2)
    return du - np.asarray(p, dtype=float)[..., None, None] * np.eye(2)


def modified_stress(grad_u, p, u, x, a) -> Mat22:
    """S = T + a(u(x)x^perp - x^perp(x)u)."""
    xp = perp(x)
    return cauchy_stress(grad_u, p) + a * (outer(u, xp) - outer(xp, u))
