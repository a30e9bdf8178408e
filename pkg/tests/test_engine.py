import numpy as np

from oracles import gamma_damped_brute, gamma_origin
from rotstokes import engine
from rotstokes.core import rotation


def test_origin_source_matches_bessel_form():
    rng = np.random.default_rng(0)
    for _ in range(10):
        x = rng.uniform(-6, 6, 2)
        a = float(rng.choice([-4, -1, 0.5, 2]))
        v, _, _ = engine.time_integral("K", x, [0.0, 0.0], a)
        assert np.max(np.abs(v[0] - gamma_origin(x, a))) < 1e-13


def test_damped_integral_matches_brute_real_axis():
    rng = np.random.default_rng(1)
    x = rng.uniform(-2, 2, (4, 2))
    y = rng.uniform(-2, 2, (4, 2))
    v, _, _ = engine.time_integral("K", x, y, 1.5, eps=0.2)
    for p in range(4):
        assert np.max(np.abs(v[p] - gamma_damped_brute(x[p], y[p], 1.5, 0.2))) < 1e-12


def test_split_time_does_not_matter():
    x = np.array([[2.0, 1.0], [0.3, -4.0]])
    y = np.array([[-1.0, 0.5], [0.2, 3.5]])
    v1, _, _ = engine.time_integral("K", x, y, 1.0, T0=0.5)
    v2, _, _ = engine.time_integral("K", x, y, 1.0, T0=3.0)
    assert np.max(np.abs(v1 - v2)) < 1e-13


def test_raw_and_centered_routes_agree_up_to_constant():
    from rotstokes.fundsol import center_constant
    rng = np.random.default_rng(2)
    x = rng.uniform(-10, 10, (20, 2))
    y = rng.uniform(-10, 10, (20, 2))
    for a in (0.5, -3.0):
        raw, _, _ = engine.time_integral("K", x, y, a)
        cen, _, _ = engine.time_integral("Kc", x, y, a)
        assert np.max(np.abs(raw - cen - center_constant(a).value)) < 1e-13


def test_ring_modes_reproduce_rotated_sources():
    # one set of angular modes at y0 gives Gamma at every y = O(phi) y0
    a = 1.3
    x = np.array([[1.7, -0.4]])
    y0 = np.array([[2.2, 0.0]])
    T0 = np.array([0.8])
    M = 256
    c = engine.tail_modes("K", x, y0, a, T0, M)[0] + engine.real_segment_modes("K", x, y0, a, T0, M)[0]
    phi = np.linspace(0, 2 * np.pi, 7, endpoint=False)
    ring = engine.rotated_sum(c[0], a, phi)
    ys = np.stack([rotation(p) @ y0[0] for p in phi])
    direct, _, _ = engine.time_integral("K", np.repeat(x, len(phi), 0), ys, a)
    assert np.max(np.abs(ring - direct)) < 1e-13


def test_gradient_kind_matches_differences():
    x = np.array([[1.2, 0.7]])
    y = np.array([[-0.5, 0.4]])
    g, _, _ = engine.time_integral("dK", x, y, 2.0)
    h = 1e-4
    for n in range(2):
        e = np.zeros(2)
        e[n] = h
        p, _, _ = engine.time_integral("K", x + e, y, 2.0)
        m, _, _ = engine.time_integral("K", x - e, y, 2.0)
        assert np.max(np.abs(g[0][..., n] - (p - m)[0] / (2 * h))) < 1e-8
