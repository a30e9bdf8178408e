"""Improper time integrals over (0, inf).

Integrands are vectorised callables ``g(t)`` taking a 1-D array of times and
returning an array whose leading axis runs over those times.  Two classes are
supported: absolutely integrable integrands and oscillatory integrands that
only converge conditionally, such as e^{iat} g(t) with g ~ 1/t.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.integrate import quad_vec

from .core import FOUR_PI, KernelParams, k_kernel, stokes_E, _nonzero

ABSOLUTE = "direct_adaptive"
OSCILLATORY = "period_sum_accelerated"

# log-time window below t_split; the integrands we handle are bounded near t=0
_NEAR_DEPTH = 60.0
# log-time chunk length and count for absolutely convergent tails
_TAIL_CHUNK = 8.0
_TAIL_CHUNKS = 25
_GL_CHUNK = 24
_EULER_MIN = 6


class NonConvergence(RuntimeError):
    """Tail contributions fail to decrease."""


class ToleranceNotMet(RuntimeError):
    """Integration stopped before reaching tolerance; carries the best estimate."""

    def __init__(self, msg, best, error):
        super().__init__(msg)
        self.best = best
        self.error = error


@dataclass(frozen=True)
class TailStrategy:
    mode: str = ABSOLUTE
    period: float = 1.0

    def __post_init__(self):
        if self.mode not in (ABSOLUTE, OSCILLATORY):
            raise ValueError(f"unknown tail mode {self.mode!r}")
        if not self.period > 0:
            raise ValueError("period must be positive")

    @classmethod
    def for_frequency(cls, a: float) -> "TailStrategy":
        return cls(OSCILLATORY, 2 * np.pi / abs(a))


@dataclass
class QuadResult:
    value: float | np.ndarray
    abs_error_estimate: float
    evaluations: int
    tail_periods_used: int = 0


@lru_cache(maxsize=None)
def gauss_legendre(n: int):
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


def _scalarize(g):
    return lambda t: np.asarray(g(np.array([t])))[0]


def _log_quad(g, s0, s1, epsabs, epsrel):
    """Integrate g(t) dt over t in [e^s0, e^s1] in the variable s = log t."""
    g1 = _scalarize(g)

    def f(s):
        t = np.exp(s)
        return g1(t) * t

    val, err, info = quad_vec(f, s0, s1, epsabs=epsabs, epsrel=epsrel,
                              norm="max", limit=4000, full_output=True)
    return val, float(err), int(info.neval)


def _near(g, params):
    s1 = np.log(params.t_split)
    return _log_quad(g, s1 - _NEAR_DEPTH, s1, 0.05 * params.tol_abs, 0.05 * params.tol_rel)


def _absolute_tail(g, params):
    s = np.log(params.t_split)
    total, err, nev = 0.0, 0.0, 0
    small = 0
    prev = np.inf
    for _ in range(_TAIL_CHUNKS):
        v, e, n = _log_quad(g, s, s + _TAIL_CHUNK, 0.02 * params.tol_abs, 0.02 * params.tol_rel)
        total = total + v
        err += e
        nev += n
        s += _TAIL_CHUNK
        mag = float(np.max(np.abs(v)))
        if mag < 0.02 * params.tol_abs:
            small += 1
            if small == 2:
                return total, err + mag, nev
        else:
            small = 0
            if mag > 4 * prev and prev > params.tol_abs:
                raise NonConvergence("absolute-class tail is growing; integrand may not be integrable")
        prev = mag
    raise ToleranceNotMet("absolute-class tail still above tolerance at t = %.3g" % np.exp(s),
                          total, mag)


def _euler(partial):
    """Euler (repeated averaging) transform of a sequence of partial sums."""
    p = np.array(partial)
    while p.shape[0] > 1:
        p = 0.5 * (p[1:] + p[:-1])
    return p[0]


def _oscillatory_tail(g, params, period):
    half = 0.5 * period
    xg, wg = gauss_legendre(_GL_CHUNK)
    t0 = params.t_split
    max_chunks = 2 * int(params.max_periods)
    batch = 8
    chunks = []
    nev = 0
    best, prev_est, prev_inc = None, None, np.inf
    inc = np.inf
    history = []
    while len(chunks) < max_chunks:
        k0 = len(chunks)
        starts = t0 + half * np.arange(k0, k0 + batch)
        t = (starts[:, None] + half * xg[None, :]).ravel()
        vals = np.asarray(g(t))
        nev += t.size
        vals = vals.reshape((batch, _GL_CHUNK) + vals.shape[1:])
        sums = np.tensordot(wg * half, vals, axes=([0], [1]))
        chunks.extend(list(sums))
        if len(chunks) < 2 * _EULER_MIN:
            continue
        # a fixed prefix is summed directly; the averaged window follows it
        head = len(chunks) // 2
        base = np.sum(chunks[:head], axis=0)
        partial = base + np.cumsum(chunks[head:], axis=0)
        est = _euler(partial)
        est_prev = _euler(partial[:-1])
        inc = float(np.max(np.abs(est - est_prev)))
        history.append(inc)
        best = est
        if inc < params.tol_abs and prev_est is not None and \
                float(np.max(np.abs(est - prev_est))) < params.tol_abs:
            return est, inc, nev, len(chunks) // 2
        if len(history) >= 6 and min(history[-3:]) > 10 * min(history[:-3]) \
                and min(history[:-3]) > params.tol_abs:
            raise NonConvergence("oscillatory tail increments are not decreasing")
        prev_est = est
    raise ToleranceNotMet("oscillatory tail did not reach tolerance within max_periods",
                          best, inc)


def integrate_0_inf(g: Callable, params: KernelParams, tail: TailStrategy | None = None) -> QuadResult:
    """Integrate g over (0, inf).

    ``tail.mode`` declares the class: ``direct_adaptive`` for absolutely
    integrable g, ``period_sum_accelerated`` for oscillatory g whose tail is
    summed over half-period chunks with Euler acceleration.  The reported
    error is a heuristic (adaptive estimate plus acceleration increment).
    """
    tail = tail or TailStrategy()
    near, err, nev = _near(g, params)
    if tail.mode == ABSOLUTE:
        far, err2, nev2 = _absolute_tail(g, params)
        periods = 0
    else:
        far, err2, nev2, periods = _oscillatory_tail(g, params, tail.period)
    value = near + far
    if np.ndim(value) == 0:
        value = float(np.real_if_close(value)) if not np.iscomplexobj(value) else complex(value)
    return QuadResult(value, float(err + err2), int(nev + nev2), int(periods))


def _centered_log_integrand(q):
    def g(t):
        t = np.asarray(t, dtype=float)
        big = t >= 1.0
        ts = np.where(big, 1.0, t)
        tb = np.where(big, t, 1.0)
        small_t = (np.exp(-q / (4 * ts)) - np.exp(-1 / (4 * ts))) / (FOUR_PI * ts)
        large_t = np.exp(-1 / (4 * tb)) * np.expm1((1 - q) / (4 * tb)) / (FOUR_PI * tb)
        return np.where(big, large_t, small_t)
    return g


def centered_scalar_log(x, params: KernelParams | None = None) -> float:
    """Integral of G(x,t) - e^{-1/4t}/(4 pi t) over t; equals log(1/|x|)/(2 pi)."""
    params = params or KernelParams()
    _, q = _nonzero(x)
    return integrate_0_inf(_centered_log_integrand(float(q)), params).value


def centered_stokes_E(x, params: KernelParams | None = None) -> np.ndarray:
    """Integral of K(x,t) - e^{-e/4t}/(8 pi t) I over t; recovers stokes_E(x)."""
    params = params or KernelParams()
    x, _ = _nonzero(x)
    eye = np.eye(2)

    def g(t):
        t = np.asarray(t, dtype=float)
        sub = np.exp(-np.e / (4 * t)) / (8 * np.pi * t)
        return k_kernel(x, t) - sub[:, None, None] * eye

    return integrate_0_inf(g, params).value


__all__ = ["TailStrategy", "QuadResult", "NonConvergence", "ToleranceNotMet",
           "integrate_0_inf", "centered_scalar_log", "centered_stokes_E",
           "gauss_legendre", "stokes_E"]
