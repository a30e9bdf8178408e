import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rotstokes.asymscan import (HEADROOM, N_DIRECTIONS, DecayReport, decay_scan, directional_max,
                                fitted_bound_check, loglog_fit)
from rotstokes.core import DomainError


def test_exact_inverse_square():
    rep = decay_scan(lambda r: 1 / r**2, [8, 16, 32, 64], -2.0, 0.15)
    assert abs(rep.fitted_exponent + 2) < 1e-12
    assert rep.fitted_coefficient == pytest.approx(1.0, rel=1e-12)
    assert rep.regression_residual < 1e-12
    assert rep.passed and rep.bound_violations == 0


@settings(max_examples=40, deadline=None)
@given(st.floats(-4, 3), st.floats(0.1, 50))
def test_power_laws_recovered(k, C):
    rep = decay_scan(lambda r: C * r**k, [1.5, 3, 7, 20, 41], k, 1e-12)
    assert abs(rep.fitted_exponent - k) < 1e-12
    assert rep.fitted_coefficient == pytest.approx(C, rel=1e-11)


def test_oscillating_amplitude():
    rep = decay_scan(lambda r: (3 + math.sin(r)) / r**2, [8, 16, 32, 64], -2.0, 0.15)
    assert rep.passed
    assert abs(rep.fitted_exponent + 2) < 0.15


def test_wrong_exponent_fails():
    rep = decay_scan(lambda r: 1 / r, [8, 16, 32, 64], -2.0, 0.15)
    assert not rep.passed and rep.bound_violations == 1


@pytest.mark.parametrize("values", [[1, 0, 1, 1], [1, -1, 1, 1], [1, float("nan"), 1, 1]])
def test_bad_values_raise(values):
    with pytest.raises(DomainError):
        loglog_fit([1, 2, 3, 4], values)


def test_radii_validation():
    with pytest.raises(DomainError):
        loglog_fit([1, 2, 3], [1, 1, 1])
    with pytest.raises(DomainError):
        loglog_fit([1, 2, 2, 4], [1, 1, 1, 1])


def test_directional_max_uses_sixteen_directions():
    seen = []

    def f(x):
        seen.append(x)
        return x[0] + 2 * x[1]

    m = directional_max(f, 3.0)
    assert len(seen) == N_DIRECTIONS == 16
    assert np.allclose([np.hypot(*x) for x in seen], 3.0)
    # max of 3 (cos t + 2 sin t) on the 16 sampled angles
    th = 2 * np.pi * np.arange(16) / 16
    assert m == pytest.approx(np.max(3 * (np.cos(th) + 2 * np.sin(th))), rel=1e-15)


def test_fitted_bound_identity():
    shape = lambda r: 1 / r**2  # noqa: E731
    rep = fitted_bound_check(shape, shape, [1, 2, 3], [4, 5, 6, 7])
    assert rep.fitted_coefficient == pytest.approx(1.0, rel=1e-15)
    assert rep.bound_violations == 0 and rep.passed
    assert np.allclose(rep.bounds, [HEADROOM / r**2 for r in (4, 5, 6, 7)])


def test_fitted_bound_catches_violation():
    rep = fitted_bound_check(lambda r: r, lambda r: 1.0, [1, 2], [3, 4, 5])
    assert rep.fitted_coefficient == 2.0
    assert rep.bound_violations == 1  # 5 > 2 * 2


def test_fitted_bound_requires_disjoint_sets():
    with pytest.raises(DomainError):
        fitted_bound_check(lambda r: 1.0, lambda r: 1.0, [1, 2], [2, 3])
    with pytest.raises(DomainError):
        fitted_bound_check(lambda p: 1.0, lambda p: 1.0, [(1.0, 0.5)], [(1.0, 0.5), (2.0, 1.0)])


def test_fitted_bound_rejects_vanishing_shape():
    with pytest.raises(DomainError):
        fitted_bound_check(lambda r: 1.0, lambda r: 0.0, [1], [2])
    with pytest.raises(DomainError):
        fitted_bound_check(lambda r: 1.0, lambda r: float(r < 2), [1], [2])


def _report():
    return decay_scan(lambda r: (3 + math.sin(r)) / r**2, [8, 16, 32, 64], -2.0, 0.15)


def test_serialisation_is_deterministic():
    a, b = _report(), _report()
    assert a.to_json() == b.to_json()
    assert a.to_csv() == b.to_csv()
    d = json.loads(a.to_json())
    assert d["radii"] == [8.0, 16.0, 32.0, 64.0]
    assert list(d) == sorted(d)


def test_csv_layout():
    rep = fitted_bound_check(lambda r: 1 / r**2, lambda r: 1 / r**2, [1.0], [2.0, 3.0])
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert rows[0] == ["radius", "value", "bound"]
    assert len(rows) == 3
    assert float(rows[1][1]) == 0.25 and float(rows[1][2]) == 2 * 0.25
    assert "\r" not in rep.to_csv()
    # full precision survives the round trip
    r = _report()
    back = [float(row[1]) for row in list(csv.reader(io.StringIO(r.to_csv())))[1:]]
    assert back == r.values
    assert list(csv.reader(io.StringIO(r.to_csv())))[1][2] == ""


def test_report_json_round_trip():
    rep = _report()
    d = json.loads(rep.to_json())
    assert DecayReport(**d).to_json() == rep.to_json()

