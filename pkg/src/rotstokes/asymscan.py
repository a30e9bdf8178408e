"""Decay-rate harness: dyadic sweeps, log-log fits and fitted-constant bounds."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import DomainError

N_DIRECTIONS = 16
HEADROOM = 2.0


@dataclass
class DecayReport:
    radii: list
    values: list
    fitted_exponent: float
    fitted_coefficient: float
    regression_residual: float
    bound_violations: int = 0
    expected_exponent: float | None = None
    tolerance: float | None = None
    bounds: list = field(default_factory=list)
    passed: bool = True

    def to_json(self) -> str:
        return json.dumps(_plain(asdict(self)), sort_keys=True, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["radius", "value", "bound"])
        bounds = self.bounds or [""] * len(self.radii)
        for r, v, b in zip(self.radii, self.values, bounds):
            w.writerow([_fmt(r), _fmt(v), _fmt(b) if b != "" else ""])
        return buf.getvalue()


def _fmt(x):
    return format(float(x), ".17g")


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def loglog_fit(radii, values):
    """Least-squares fit log v = log C + k log r; returns (k, C, rms residual)."""
    r = np.asarray(radii, float)
    v = np.asarray(values, float)
    if r.size < 4:
        raise DomainError("need at least 4 radii")
    if np.any(np.diff(r) <= 0):
        raise DomainError("radii must be strictly increasing")
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise DomainError("values must be finite and positive")
    lr, lv = np.log(r), np.log(v)
    k, c = np.polyfit(lr, lv, 1)
    res = float(np.sqrt(np.mean((lv - (k * lr + c)) ** 2)))
    return float(k), float(np.exp(c)), res


def decay_scan(quantity, radii, expected_exponent: float, tolerance: float) -> DecayReport:
    """Fit the decay exponent of ``quantity(r)`` over ``radii``."""
    radii = [float(r) for r in radii]
    values = [float(quantity(r)) for r in radii]
    k, C, res = loglog_fit(radii, values)
    ok = abs(k - expected_exponent) <= tolerance
    return DecayReport(radii, values, k, C, res, 0 if ok else 1, expected_exponent, tolerance, passed=ok)


def directional_max(fn, r: float, n_dir: int = N_DIRECTIONS) -> float:
    """max over n_dir equispaced unit directions e of fn(r e)."""
    th = 2 * np.pi * np.arange(n_dir) / n_dir
    return max(float(fn(r * np.array([np.cos(t), np.sin(t)]))) for t in th)


def fitted_bound_check(quantity, bound_shape, calib_set, test_set, headroom: float = HEADROOM) -> DecayReport:
    """Fit C = max over calib_set of quantity/bound_shape; count test points above headroom*C*bound.

    Items of the sets are passed unchanged to both callables.  ``radii`` in
    the report is the index of each test item.
    """
    calib_set, test_set = list(calib_set), list(test_set)
    if any(any(_same(c, t) for t in test_set) for c in calib_set):
        raise DomainError("calibration and test sets must be disjoint")
    ratios = []
    for c in calib_set:
        b = float(bound_shape(c))
        if b == 0:
            raise DomainError("bound shape vanishes")
        ratios.append(float(quantity(c)) / b)
    C = max(ratios)
    vals, bnds = [], []
    for t in test_set:
        b = float(bound_shape(t))
        if b == 0:
            raise DomainError("bound shape vanishes")
        vals.append(float(quantity(t)))
        bnds.append(headroom * C * b)
    viol = int(sum(v > b for v, b in zip(vals, bnds)))
    return DecayReport(list(range(len(test_set))), vals, float("nan"), C, 0.0, viol,
                       bounds=bnds, passed=viol == 0)


def _same(a, b):
    try:
        return bool(np.array_equal(np.asarray(a, dtype=object), np.asarray(b, dtype=object)))
    except Exception:
        return a == b
