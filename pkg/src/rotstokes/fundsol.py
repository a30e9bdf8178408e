"""Velocity kernel Gamma_a(x, y) of the rotating Stokes system.

Gamma_a(x, y) = int_0^inf O(at)^T K(O(at)x - y, t) dt is assembled as the
absolutely convergent centered part plus a constant center matrix,
Gamma_a = Gamma~_a + C_a, where C_a = int_0^inf O(at)^T e^{-1/4t}/(8 pi t) dt
comes from the oscillatory quadrature in :mod:`rotstokes.quad` and the centered
part from the contour engine in :mod:`rotstokes.engine`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import engine
from .core import KernelParams, outer, perp
from .quad import TailStrategy, integrate_0_inf

ETA_MIN = 1e-4


class TooClose(ValueError):
    """|x - y| below eta_min, inside the log-singular core."""


@dataclass
class GammaEval:
    value: np.ndarray
    abs_error_estimate: float
    decomposition: dict | None = None


@dataclass(frozen=True)
class CenterConstant:
    value: np.ndarray = field(compare=False)
    a: float = 0.0
    abs_error_estimate: float = 0.0


@lru_cache(maxsize=64)
def _center_cached(a: float, params: KernelParams) -> CenterConstant:
    res = integrate_0_inf(lambda t: np.exp(1j * a * t - 0.25 / t) / t, params,
                          TailStrategy.for_frequency(a))
    J = complex(res.value)
    c, s = J.real / (8 * np.pi), J.imag / (8 * np.pi)
    val = np.array([[c, s], [-s, c]])
    val.setflags(write=False)
    return CenterConstant(val, a, res.abs_error_estimate / (8 * np.pi))


def center_constant(a: float, params: KernelParams | None = None) -> CenterConstant:
    """C_a = int_0^inf O(at)^T e^{-1/4t}/(8 pi t) dt, of the form [[c, s], [-s, c]]."""
    if a == 0:
        raise ValueError("a must be nonzero")
    params = params or KernelParams(a=a)
    return _center_cached(float(a), params)


def _pairs(x, y, params):
    params.require_rotation()
    x = np.atleast_2d(np.asarray(x, float))
    y = np.atleast_2d(np.asarray(y, float))
    x, y = np.broadcast_arrays(x, y)
    d = np.hypot(x[:, 0] - y[:, 0], x[:, 1] - y[:, 1])
    if np.any(d < ETA_MIN):
        raise TooClose(f"|x - y| = {d.min():.3g} is below eta_min = {ETA_MIN:g}")
    return np.ascontiguousarray(x), np.ascontiguousarray(y)


def _error(values, trunc, a):
    # heuristic: mode truncation at the split time plus accumulated rounding
    scale = np.max(np.abs(values).reshape(values.shape[0], -1), axis=1)
    return 10.0 * trunc / abs(a) + 1e-15 * (1.0 + scale)


def gamma_many(x, y, params: KernelParams, kind: str = "Kc"):
    """Batched Gamma_a for pairs x[p], y[p]; returns (values, error estimates).

    kind "Kc" (default) integrates the centered kernel and adds C_a; kind "K"
    integrates the raw kernel directly on the rotated contour.  The two routes
    agree to rounding and are compared in the test suite.
    """
    x, y = _pairs(x, y, params)
    a = params.a
    if kind == "Kc":
        vals, trunc, _ = engine.time_integral("Kc", x, y, a)
        C = center_constant(a, params)
        vals = vals + C.value
        err = _error(vals, trunc, a) + C.abs_error_estimate
    elif kind == "K":
        vals, trunc, _ = engine.time_integral("K", x, y, a)
        err = _error(vals, trunc, a)
    else:
        raise ValueError(f"unsupported kind {kind!r}")
    return vals, err


def gamma(x, y, params: KernelParams, decompose: bool = False) -> GammaEval:
    """Gamma_a(x, y), optionally with the split into Gamma^0, Gamma^11, Gamma^12."""
    vals, err = gamma_many(x, y, params)
    out = GammaEval(vals[0], float(err[0]))
    if decompose:
        xx, yy = _pairs(x, y, params)
        C = center_constant(params.a, params).value
        parts = {}
        for name, kind, shift in (("gamma0", "g0", 2.0), ("gamma11", "g11", 0.0),
                                  ("gamma12", "g12", -1.0)):
            v, _, _ = engine.time_integral(kind, xx, yy, params.a)
            parts[name] = v[0] + shift * C
        out.decomposition = parts
    return out


def gamma_leading(x, y) -> np.ndarray:
    """Far-field leading term x^perp (x) y^perp / (4 pi |x|^2)."""
    x = np.asarray(x, float)
    q = np.sum(x * x, axis=-1)
    if np.any(q == 0):
        raise ValueError("x must be nonzero")
    return outer(perp(x), perp(y)) / (4 * np.pi * np.asarray(q)[..., None, None])


def grad_gamma_many(x, y, params: KernelParams):
    """Batched x-gradient, shape (P, 2, 2, 2) indexed [p, i, j, n] = d Gamma_ij / d x_n."""
    x, y = _pairs(x, y, params)
    vals, trunc, _ = engine.time_integral("dK", x, y, params.a)
    return vals, _error(vals, trunc, params.a)


def grad_gamma(x, y, params: KernelParams) -> np.ndarray:
    """d Gamma_ij / d x_n at one pair, from the analytically differentiated kernel."""
    return grad_gamma_many(x, y, params)[0][0]


def gamma_eps_many(x, y, params: KernelParams, method: str = "direct"):
    """Batched resolvent kernel int_0^inf e^{-eps t} O(at)^T K(O(at)x - y, t) dt.

    method "direct" integrates the damped integrand on the real axis up to
    t = 45/eps; "contour" uses the mode engine with the damping factor.
    """
    eps = params.eps
    if not eps > 0:
        raise ValueError("gamma_eps needs eps > 0")
    x, y = _pairs(x, y, params)
    a = params.a
    if method == "direct":
        T = np.full(x.shape[0], 45.0 / eps)
        vals, _ = engine.real_segment("K", x, y, a, T, eps)
        err = 1e-15 * (1.0 + np.max(np.abs(vals).reshape(len(vals), -1), axis=1)) \
            + np.exp(-45.0) / (8 * np.pi * 45.0)
        return vals, err
    if method == "contour":
        vals, trunc, _ = engine.time_integral("K", x, y, a, eps=eps)
        return vals, _error(vals, trunc, a)
    raise ValueError(f"unknown method {method!r}")


def gamma_eps(x, y, params: KernelParams, method: str = "direct") -> GammaEval:
    vals, err = gamma_eps_many(x, y, params, method)
    return GammaEval(vals[0], float(err[0]))
