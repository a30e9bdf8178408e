import math

import numpy as np
import pytest
from scipy.integrate import quad as scalar_quad
from scipy.special import gammaincc

from oracles import OSC_A4_R2
from rotstokes.core import KernelParams, SingularityError, stokes_E
from rotstokes.quad import (ABSOLUTE, OSCILLATORY, NonConvergence, TailStrategy, ToleranceNotMet,
                            centered_scalar_log, centered_stokes_E, integrate_0_inf)

P = KernelParams()
ABS = TailStrategy(ABSOLUTE)


@pytest.mark.parametrize("m,r", [(2, 1.0), (2, 3.0), (3, 1.0), (3, 2.0)])
def test_euler_gamma_identity(m, r):
    res = integrate_0_inf(lambda t: np.exp(-r * r / t) / t**m, P, ABS)
    assert abs(res.value - math.gamma(m - 1) / r ** (2 * (m - 1))) < 1e-10
    assert res.abs_error_estimate >= 0 and res.evaluations > 0


def test_iterated_integrand():
    # g(t) = int_t^inf e^{-1/s} s^-4 ds = lower incomplete gamma(3, 1/t)
    def g(t):
        return np.array([scalar_quad(lambda s: np.exp(-1 / s) / s**4, ti, np.inf, epsabs=1e-15)[0]
                         for ti in np.atleast_1d(t)])

    # brute inner quadrature agrees with the incomplete-gamma form
    t = np.array([0.3, 1.0, 5.0])
    assert np.allclose(g(t), 2 * (1 - gammaincc(3, 1 / t)), atol=1e-13)
    res = integrate_0_inf(lambda t: 2 * (1 - gammaincc(3, 1 / np.asarray(t))), P, ABS)
    assert abs(res.value - 1.0) < 1e-10


def test_oscillatory_against_high_precision_reference():
    p = KernelParams(a=4.0)
    res = integrate_0_inf(lambda t: np.cos(4 * t) * np.exp(-4 / t) / t, p, TailStrategy.for_frequency(4.0))
    assert abs(res.value - OSC_A4_R2) < 1e-7
    assert abs(res.value - OSC_A4_R2) < 1e-12
    assert res.tail_periods_used > 0


def test_oscillatory_scaling_in_frequency():
    # |value| * |a| stays within a bounded band as a doubles
    r = 0.1
    vals = []
    for a in [1, 2, 4, 8, 16, 32, 64]:
        p = KernelParams(a=float(a))
        v = integrate_0_inf(lambda t: np.exp(1j * a * t - r * r / t) / t, p, TailStrategy.for_frequency(a)).value
        vals.append(abs(v) * a)
    assert max(vals) / min(vals) <= 50


def test_absolute_class_invariant_under_split():
    g = lambda t: np.exp(-2.0 / t) / t**2.5
    v1 = integrate_0_inf(g, P, ABS).value
    v2 = integrate_0_inf(g, P.replace(t_split=0.5), ABS).value
    assert abs(v1 - v2) < 2 * P.tol_abs


def test_non_integrable_tail_is_reported():
    with pytest.raises((NonConvergence, ToleranceNotMet)):
        integrate_0_inf(lambda t: np.asarray(t, float) ** 0.5 * np.exp(-1 / np.asarray(t, float)), P, ABS)


def test_oscillatory_tail_budget_exhausted():
    p = KernelParams(max_periods=8)
    with pytest.raises(ToleranceNotMet) as info:
        integrate_0_inf(lambda t: np.cos(t) / np.sqrt(t + 1.0), p, TailStrategy(OSCILLATORY, 2 * np.pi))
    assert info.value.best is not None


def test_tail_strategy_validation():
    with pytest.raises(ValueError):
        TailStrategy("nope", 1.0)
    with pytest.raises(ValueError):
        TailStrategy(OSCILLATORY, 0.0)


@pytest.mark.parametrize("r,expected", [(1.0, 0.0), (math.e, -1 / (2 * math.pi)),
                                        (0.5, math.log(2) / (2 * math.pi))])
def test_centered_log_values(r, expected):
    assert abs(centered_scalar_log([r, 0.0]) - expected) < 1e-8


def test_centered_log_many_radii():
    radii = np.geomspace(0.05, 20, 20)
    err = max(abs(centered_scalar_log([0.0, r]) - math.log(1 / r) / (2 * math.pi)) for r in radii)
    assert err < 1e-8


def test_centered_stokes_recovery():
    assert np.allclose(centered_stokes_E([1.0, 0.0]), np.diag([1.0, 0.0]) / (4 * np.pi), atol=1e-9)
    rng = np.random.default_rng(2)
    for _ in range(6):
        x = rng.uniform(-5, 5, 2)
        E = centered_stokes_E(x)
        assert np.max(np.abs(E - stokes_E(x))) < 10 * P.tol_abs
        assert np.max(np.abs(E - E.T)) < P.tol_abs


def test_centered_singular_at_origin():
    with pytest.raises(SingularityError):
        centered_scalar_log([0.0, 0.0])
