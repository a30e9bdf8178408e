"""Time-integral engine for rotated kernels.

Evaluates integrals of the form

    I(x, y) = int_0^inf e^{-eps t} O(at)^T kern(O(at)x - y, t) dt

for batches of pairs.  [0, T0] is integrated on the real axis with panels
sized by the local angular bandwidth of the integrand.  On [T0, inf) the
integrand is written as a Fourier series in the rotation angle,
F(t, psi) = sum_k F_k(t) e^{ik psi}, so that the real integrand is
sum_k F_k(t) e^{ikat}.  Every k != 0 term is integrated along a ray rotated
into the half plane where e^{ikat} decays, and the k = 0 term (which decays
like t^-2) along the real axis.  No centering subtraction is needed for
convergence, although centered integrands are supported.

Rotating the source point only shifts the angle and multiplies by a fixed
rotation: with y = O(phi) y0 the sampled integrand is F(t, psi - phi) O(phi)^T,
so a single set of mode coefficients serves a whole ring of source points.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from .core import _DPSI2, _PHI1, _PSI2, _SERIES_W, phi_functions
from .quad import gauss_legendre

KINDS = ("K", "Kc", "g0", "g11", "g12", "dK")
# kinds carrying the subtracted e^{-1/4t}/t term, whose onset sits where a
# pair at distance 1 has its Gaussian onset
_CENTERED = ("Kc", "g0", "g12")

_PI = np.pi
_NODES = 20          # Gauss-Legendre nodes per panel
_C_OSC = 8.0         # max phase change (radians) per real-axis panel
_GRADE = 0.7         # relative panel width near t = 0
_BETA_STAR = 12.0    # target rho/(2 T0) for the default split time
_T_MIN = 0.5
_RAY = np.pi / 4     # contour angle
_BLOCK = 250_000     # complex samples per vectorised block


def bandwidth(t, rho, dr):
    """Number of angular Fourier modes needed at time t.

    The Gaussian e^{rho cos(psi)/2t} spreads over ~sqrt(rho/2t) modes; when the
    radii differ by dr the spread saturates at t ~ dr^2/4.
    """
    return 9.0 * np.sqrt(rho / (2.0 * np.maximum(np.abs(t), 0.25 * dr * dr))) + 10.0


def default_split(rho):
    return np.maximum(_T_MIN, np.asarray(rho) / (2 * _BETA_STAR))


def _coeffs(kind, q, t, want_grad=False):
    """Scalar coefficient functions for each kernel kind.

    Returns (alpha, beta) with kern = alpha I + beta z(x)z, or for 'dK' the
    tuple (beta, alpha', beta').
    """
    w = q / (4 * t)
    e, phi1, psi2, dpsi2 = phi_functions(w)
    inv = 1.0 / t
    if kind == "dK":
        beta = psi2 * inv * inv / (16 * _PI)
        da = (-e + 0.5 * psi2) * inv * inv / (16 * _PI)
        db = dpsi2 * inv ** 3 / (64 * _PI)
        return beta, da, db
    beta = psi2 * inv * inv / (16 * _PI)
    if kind == "K":
        alpha = (e - 0.5 * phi1) * inv / (4 * _PI)
    elif kind == "Kc":
        alpha = (e - 0.5 * phi1 - 0.5 * np.exp(-0.25 * inv)) * inv / (4 * _PI)
    elif kind == "g0":
        alpha = (e - np.exp(-0.25 * inv)) * inv / (4 * _PI)
        beta = np.zeros_like(beta)
    elif kind == "g11":
        alpha = np.zeros_like(beta)
    elif kind == "g12":
        alpha = (-phi1 + np.exp(-0.25 * inv)) * inv / (8 * _PI)
        beta = np.zeros_like(beta)
    else:
        raise ValueError(f"unknown kernel kind {kind!r}")
    return alpha, beta


def value_shape(kind):
    return (2, 2, 2) if kind == "dK" else (2, 2)


def pulled_kernel(kind, x, y, c, s, t):
    """O^T kern(Ox - y, t) (or its x-gradient) with O = [[c,-s],[s,c]].

    x, y have shape (..., 2); c, s, t broadcast against x[..., 0].
    """
    x0, x1 = x[..., 0], x[..., 1]
    y0, y1 = y[..., 0], y[..., 1]
    z0 = c * x0 - s * x1 - y0
    z1 = s * x0 + c * x1 - y1
    # u = O^T z = x - O^T y
    u0 = x0 - (c * y0 + s * y1)
    u1 = x1 - (-s * y0 + c * y1)
    q = z0 * z0 + z1 * z1
    shape = np.broadcast_shapes(np.shape(z0), np.shape(t))
    if kind != "dK":
        alpha, beta = _coeffs(kind, q, t)
        dt = np.result_type(alpha, z0)
        out = np.empty(shape + (2, 2), dtype=dt)
        out[..., 0, 0] = alpha * c + beta * u0 * z0
        out[..., 0, 1] = alpha * s + beta * u0 * z1
        out[..., 1, 0] = -alpha * s + beta * u1 * z0
        out[..., 1, 1] = alpha * c + beta * u1 * z1
        return out
    beta, da, db = _coeffs(kind, q, t)
    dt = np.result_type(beta, z0)
    out = np.empty(shape + (2, 2, 2), dtype=dt)
    ot = ((c, s), (-s, c))      # ot[i][j] = O_ji
    o = ((c, -s), (s, c))       # o[j][n] = O_jn
    u = (u0, u1)
    z = (z0, z1)
    for i in range(2):
        for j in range(2):
            for n in range(2):
                v = 2 * da * ot[i][j] * u[n] + 2 * db * u[i] * z[j] * u[n] + beta * u[i] * o[j][n]
                if i == n:
                    v = v + beta * z[j]
                out[..., i, j, n] = v
    return out


# ---------------------------------------------------------------------------
# node layouts

def _flat_panels(starts, ends, counts):
    """Equal panels between per-pair starts/ends; returns node t, weight, owner."""
    xg, wg = gauss_legendre(_NODES)
    owner = np.repeat(np.arange(counts.size), counts)
    idx = np.arange(owner.size) - np.repeat(np.cumsum(counts) - counts, counts)
    h = (ends - starts) / np.maximum(counts, 1)
    a = starts[owner] + idx * h[owner]
    t = (a[:, None] + h[owner][:, None] * xg).ravel()
    w = (h[owner][:, None] * wg).ravel()
    return t, w, np.repeat(owner, _NODES)


def swept_distance(x, y, a, T0):
    """Distance from y to the arc {O(theta) x : theta between 0 and a T0}.

    Collisions O(at)x = y with t in [0, T0] can only occur when this is small;
    it floors the time scale entering the bandwidth estimate.
    """
    rx = np.hypot(x[:, 0], x[:, 1])
    ry = np.hypot(y[:, 0], y[:, 1])
    sweep = abs(a) * np.asarray(T0, float)
    lo = np.where(a > 0, 0.0, -sweep)
    rel = np.arctan2(y[:, 1], y[:, 0]) - np.arctan2(x[:, 1], x[:, 0])
    off = np.mod(rel - lo, 2 * np.pi)
    inside = (off <= sweep) | (sweep >= 2 * np.pi)
    gap = np.minimum(off - sweep, 2 * np.pi - off)
    gap = np.where(inside, 0.0, gap)
    dist2 = rx * rx + ry * ry - 2 * rx * ry * np.cos(gap)
    return np.sqrt(np.maximum(dist2, (rx - ry) ** 2))


def real_segment_nodes(d, rho, dr, T0, a, eps=0.0, ngrid=128):
    """Quadrature nodes on [0, T0] for each pair.

    Panel widths follow min(GRADE t, C_OSC/(|a| B(t))) with B the local
    angular bandwidth; panels are placed by equidistributing that density.
    ``dr`` is the distance floor used in B (see swept_distance).
    Returns flat arrays (t, w, owner).
    """
    d = np.atleast_1d(np.asarray(d, float))
    rho = np.broadcast_to(np.asarray(rho, float), d.shape)
    dr = np.broadcast_to(np.asarray(dr, float), d.shape)
    T0 = np.broadcast_to(np.asarray(T0, float), d.shape)
    P = d.size
    # below tlo the Gaussian factor is under e^-40 and only rotation matters
    tlo = np.minimum(d * d / 160.0, 0.5 * T0)
    u = np.linspace(0.0, 1.0, ngrid)
    lt = np.log(tlo)[:, None] + np.log(T0 / tlo)[:, None] * u
    tt = np.exp(lt)
    width = np.minimum(_GRADE * tt, _C_OSC / (abs(a) * bandwidth(tt, rho[:, None], dr[:, None])
                                              + 2 * eps * tt + 1e-300))
    if eps > 0:
        width = np.minimum(width, _C_OSC / eps)
    dens = tt / width        # panels per unit log t
    cum = np.concatenate([np.zeros((P, 1)),
                          np.cumsum(0.5 * (dens[:, 1:] + dens[:, :-1]) * np.diff(lt, axis=1), axis=1)],
                         axis=1)
    total = cum[:, -1]
    n = np.maximum(1, np.ceil(total).astype(int))
    # invert the cumulative density row by row on one flattened monotone array
    stride = total.max() + 2.0
    off = np.arange(P)[:, None] * stride
    flat_c = (cum + off).ravel()
    flat_l = lt.ravel()
    owner = np.repeat(np.arange(P), n + 1)
    j = np.arange(owner.size) - np.repeat(np.cumsum(n + 1) - (n + 1), n + 1)
    target = j * (total / n)[owner] + off[owner, 0]
    edges_l = np.interp(target, flat_c, flat_l)
    edges = np.exp(edges_l)
    # panel boundaries: first panel [0, tlo], then the equidistributed ones
    last = np.cumsum(n + 1) - 1
    keep = np.ones(owner.size, bool)
    keep[last] = False
    a_ = edges[keep]
    b_ = edges[np.flatnonzero(keep) + 1]
    own = owner[keep]
    n0 = np.maximum(1, np.ceil(tlo * (abs(a) * bandwidth(0.0, rho, dr) + eps) / _C_OSC)).astype(int)
    own0 = np.repeat(np.arange(P), n0)
    k0 = np.arange(own0.size) - np.repeat(np.cumsum(n0) - n0, n0)
    h0 = (tlo / n0)[own0]
    a_ = np.concatenate([k0 * h0, a_])
    b_ = np.concatenate([(k0 + 1) * h0, b_])
    own = np.concatenate([own0, own])
    xg, wg = gauss_legendre(_NODES)
    h = b_ - a_
    t = (a_[:, None] + h[:, None] * xg).ravel()
    w = (h[:, None] * wg).ravel()
    return t, w, np.repeat(own, _NODES)


def _contour_s_nodes(a, M):
    lam = 1.0 / (abs(a) * np.sin(_RAY))
    first = lam / max(M / 2, 1)
    npan = int(np.ceil(np.log2(64.0 / first * lam))) + 1
    br = np.concatenate([[0.0], np.geomspace(first, 64.0 * lam, npan)])
    xg, wg = gauss_legendre(_NODES)
    h = np.diff(br)
    s = (br[:-1, None] + h[:, None] * xg).ravel()
    w = (h[:, None] * wg).ravel()
    return s, w


def _mode0_t_nodes(T0, T1, eps):
    xg, wg = gauss_legendre(_NODES)
    ts, ws = [], []
    nlog = int(np.ceil(np.log(T1 / T0))) if T1 > T0 else 0
    if nlog:
        e = np.geomspace(T0, T1, nlog + 1)
        h = np.diff(e)
        ts.append((e[:-1, None] + h[:, None] * xg).ravel())
        ws.append((h[:, None] * wg).ravel())
    if eps == 0:
        # t = T1/v on v in (0, 1]; the integrand is smooth in v there
        ts.append(T1 / xg)
        ws.append(wg * T1 / xg ** 2)
    else:
        send = max(1.0, np.log(60.0 / (eps * T1)) + 1.0)
        e = T1 * np.exp(np.linspace(0.0, send, int(np.ceil(send)) + 1))
        h = np.diff(e)
        ts.append((e[:-1, None] + h[:, None] * xg).ravel())
        ws.append((h[:, None] * wg).ravel())
    t = np.concatenate(ts)
    w = np.concatenate(ws) * np.exp(-eps * t)
    return t, w


def mode_count(rho, dr, T0):
    B = bandwidth(T0 / np.sqrt(2.0), rho, dr)
    return int(8 * np.ceil(2.2 * np.max(B) / 8))


# ---------------------------------------------------------------------------
# integrals

def _geometry(x, y):
    rx = np.hypot(x[:, 0], x[:, 1])
    ry = np.hypot(y[:, 0], y[:, 1])
    d = np.hypot(x[:, 0] - y[:, 0], x[:, 1] - y[:, 1])
    return d, rx * ry, np.abs(rx - ry), rx + ry


_KIND_ID = {"K": 0, "Kc": 1, "g0": 2, "g11": 3, "g12": 4, "dK": 5, "K+dK": 6}
_PHI1_C = np.array(_PHI1[:16])
_PSI2_C = np.array(_PSI2[:16])
_DPSI2_C = np.array(_DPSI2[:16])


@njit(cache=True)
def _horner(c, w):
    v = c[c.size - 1]
    for i in range(c.size - 2, -1, -1):
        v = v * w + c[i]
    return v


@njit(cache=True)
def _accumulate(kid, x, y, a, eps, t, w, owner, out, series_w, cphi, cpsi, cdpsi):
    """Sequential sum of weighted pulled kernels over real-axis nodes."""
    inv16pi = 1.0 / (16.0 * math.pi)
    inv4pi = 1.0 / (4.0 * math.pi)
    for i in range(t.size):
        p = owner[i]
        tt = t[i]
        c = math.cos(a * tt)
        s = math.sin(a * tt)
        x0 = x[p, 0]
        x1 = x[p, 1]
        y0 = y[p, 0]
        y1 = y[p, 1]
        z0 = c * x0 - s * x1 - y0
        z1 = s * x0 + c * x1 - y1
        u0 = x0 - (c * y0 + s * y1)
        u1 = x1 - (-s * y0 + c * y1)
        q = z0 * z0 + z1 * z1
        wv = q / (4.0 * tt)
        e = math.exp(-wv)
        if wv < series_w:
            phi1 = _horner(cphi, wv)
            psi2 = _horner(cpsi, wv)
            dpsi2 = _horner(cdpsi, wv)
        else:
            phi1 = -math.expm1(-wv) / wv
            psi2 = (phi1 - e) / wv
            dpsi2 = (e - 2.0 * psi2) / wv
        inv = 1.0 / tt
        wt = w[i]
        if eps != 0.0:
            wt *= math.exp(-eps * tt)
        beta = psi2 * inv * inv * inv16pi
        if kid != 5:
            if kid == 0 or kid == 6:
                alpha = (e - 0.5 * phi1) * inv * inv4pi
            elif kid == 1:
                alpha = (e - 0.5 * phi1 - 0.5 * math.exp(-0.25 * inv)) * inv * inv4pi
            elif kid == 2:
                alpha = (e - math.exp(-0.25 * inv)) * inv * inv4pi
                beta = 0.0
            elif kid == 3:
                alpha = 0.0
            else:
                alpha = (-phi1 + math.exp(-0.25 * inv)) * inv * 0.5 * inv4pi
                beta = 0.0
            out[p, 0] += wt * (alpha * c + beta * u0 * z0)
            out[p, 1] += wt * (alpha * s + beta * u0 * z1)
            out[p, 2] += wt * (-alpha * s + beta * u1 * z0)
            out[p, 3] += wt * (alpha * c + beta * u1 * z1)
        if kid >= 5:
            k = 0 if kid == 5 else 4
            beta = psi2 * inv * inv * inv16pi
            da = (-e + 0.5 * psi2) * inv * inv * inv16pi
            db = dpsi2 * inv * inv * inv * 0.25 * inv16pi
            # F_ijn = 2 da O_ji u_n + 2 db u_i z_j u_n + beta d_in z_j + beta u_i O_jn
            # O_ji: (0,0)=c (0,1)=s (1,0)=-s (1,1)=c ; O_jn: (0,0)=c (0,1)=-s (1,0)=s (1,1)=c
            for i_ in range(2):
                ui = u0 if i_ == 0 else u1
                for j_ in range(2):
                    zj = z0 if j_ == 0 else z1
                    if i_ == j_:
                        oji = c
                    elif i_ == 0:
                        oji = s
                    else:
                        oji = -s
                    for n_ in range(2):
                        un = u0 if n_ == 0 else u1
                        if j_ == n_:
                            ojn = c
                        elif j_ == 0:
                            ojn = -s
                        else:
                            ojn = s
                        v = 2.0 * da * oji * un + 2.0 * db * ui * zj * un + beta * ui * ojn
                        if i_ == n_:
                            v += beta * zj
                        out[p, k + 4 * i_ + 2 * j_ + n_] += wt * v


def real_segment(kind, x, y, a, T0, eps=0.0):
    """Direct integral over [0, T0] (T0 per pair) for pairs x[p], y[p].

    kind "K+dK" returns a tuple (K values, dK values) from a single pass.
    """
    x = np.ascontiguousarray(x, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    d, rho, _, _ = _geometry(x, y)
    T0 = np.broadcast_to(np.asarray(T0, float), d.shape)
    dg = np.minimum(d, 1.0) if kind in _CENTERED else d
    t, w, own = real_segment_nodes(dg, rho, swept_distance(x, y, a, T0), T0, a, eps)
    kid = _KIND_ID[kind]
    ncol = 12 if kid == 6 else (8 if kid == 5 else 4)
    out = np.zeros((x.shape[0], ncol))
    _accumulate(kid, x, y, float(a), float(eps), t, w, own.astype(np.int64), out,
                _SERIES_W, _PHI1_C, _PSI2_C, _DPSI2_C)
    if kid == 6:
        return (out[:, :4].reshape(-1, 2, 2), out[:, 4:].reshape(-1, 2, 2, 2)), t.size
    return out.reshape((x.shape[0],) + value_shape(kind)), t.size


def tail_modes(kind, x, y, a, T0, M, eps=0.0):
    """Mode coefficients of the [T0, inf) integral.

    Returns c with shape (P, M//2, ...) where c[:, m] is the integral of the
    mode k = sign(a) m; modes -k contribute the complex conjugate.  Also
    returns the magnitude of the two highest sampled modes at t = T0 as a
    truncation indicator.
    """
    P = x.shape[0]
    vs = value_shape(kind)
    sgn = 1 if a > 0 else -1
    psi = 2 * np.pi * np.arange(M) / M
    cp, sp = np.cos(psi), np.sin(psi)
    s, ws = _contour_s_nodes(a, M)
    ray = np.exp(1j * _RAY)
    half = M // 2
    ks = sgn * np.arange(half)
    out = np.zeros((P, half) + vs, dtype=complex)
    trunc = np.zeros(P)
    _, _, _, rsum = _geometry(x, y)
    T0 = np.broadcast_to(np.asarray(T0, float), (P,))
    per = max(1, _BLOCK // (M * s.size))
    for p0 in range(0, P, per):
        sl = slice(p0, min(P, p0 + per))
        xp, yp, T0p = x[sl, None, None, :], y[sl, None, None, :], T0[sl, None, None]
        tc = T0p + s[None, :, None] * ray
        F = pulled_kernel(kind, xp, yp, cp, sp, tc)        # (p, J, M, ...)
        Fk = np.fft.fft(F, axis=2) / M
        trunc[sl] = np.abs(Fk[:, 0, half - 2:half + 3]).reshape(Fk.shape[0], -1).max(axis=1)
        Fk = Fk[:, :, ks % M]                              # (p, J, half, ...)
        ph = np.exp(1j * ks[None, None, :] * a * tc - eps * tc) * (ws * ray)[None, :, None]
        out[sl] += np.einsum("pjk,pjk...->pk...", ph, Fk)
        out[sl, 0] = 0.0
        # mode 0 on the real axis
        for q in range(sl.start, sl.stop):
            T1 = max(T0[q], 4.0 * rsum[q] ** 2)
            t0, w0 = _mode0_t_nodes(T0[q], T1, eps)
            F0 = pulled_kernel(kind, x[q], y[q], cp[None, :], sp[None, :], t0[:, None])
            out[q, 0] = np.tensordot(w0, F0.mean(axis=1), 1)
    return out, trunc


def real_segment_modes(kind, x, y, a, T0, M, eps=0.0):
    """Mode coefficients of the [0, T0] integral, from angular samples."""
    d, rho, _, _ = _geometry(x, y)
    T0 = np.broadcast_to(np.asarray(T0, float), d.shape)
    dg = np.minimum(d, 1.0) if kind in _CENTERED else d
    t, w, own = real_segment_nodes(dg, rho, swept_distance(x, y, a, T0), T0, a, eps)
    P = x.shape[0]
    vs = value_shape(kind)
    sgn = 1 if a > 0 else -1
    half = M // 2
    ks = sgn * np.arange(half)
    psi = 2 * np.pi * np.arange(M) / M
    cp, sp = np.cos(psi), np.sin(psi)
    out = np.zeros((P, half) + vs, dtype=complex)
    step = max(1, _BLOCK // M)
    for i in range(0, t.size, step):
        tt, ww, oo = t[i:i + step], w[i:i + step], own[i:i + step]
        F = pulled_kernel(kind, x[oo][:, None, :], y[oo][:, None, :], cp, sp, tt[:, None])
        Fk = (np.fft.fft(F, axis=1) / M)[:, ks % M]
        ph = np.exp(1j * ks[None, :] * a * tt[:, None] - eps * tt[:, None]) * ww[:, None]
        contrib = (Fk * ph.reshape(ph.shape + (1,) * len(vs))).reshape(tt.size, -1)
        for col in range(contrib.shape[1]):
            re = np.bincount(oo, weights=contrib[:, col].real, minlength=P)
            im = np.bincount(oo, weights=contrib[:, col].imag, minlength=P)
            out.reshape(P, -1)[:, col] += re + 1j * im
    return out, t.size * M


def sum_modes(c):
    """Real value sum_k C_k from one-sided coefficients."""
    return np.real(c[:, 0]) + 2.0 * np.real(np.sum(c[:, 1:], axis=1))


def rotated_sum(c, a, phi):
    """Evaluate [sum_k C_k e^{-ik phi}] O(phi)^T for each angle.

    c: (half, ...) one-sided coefficients for a base source point y0; returns
    the kernel for source points O(phi) y0, shape (len(phi), ...).
    """
    sgn = 1 if a > 0 else -1
    m = np.arange(c.shape[0])
    E = np.exp(-1j * sgn * np.outer(phi, m))          # (nphi, half)
    flat = c.reshape(c.shape[0], -1)
    S = np.real(E[:, :1] @ flat[:1]) + 2.0 * np.real(E[:, 1:] @ flat[1:])
    S = S.reshape((phi.size,) + c.shape[1:])
    R = np.stack([np.stack([np.cos(phi), -np.sin(phi)], -1),
                  np.stack([np.sin(phi), np.cos(phi)], -1)], -2)
    # right factor O(phi)^T acts on the second (column) index
    if S.ndim == 3:
        return np.einsum("pib,pjb->pij", S, R)
    return np.einsum("pibn,pjb->pijn", S, R)


def time_integral(kind, x, y, a, eps=0.0, T0=None):
    """Full integral for batches of pairs; returns (values, truncation indicator, nodes)."""
    x = np.atleast_2d(np.asarray(x, float))
    y = np.atleast_2d(np.asarray(y, float))
    x, y = np.broadcast_arrays(x, y)
    d, rho, dr, _ = _geometry(x, y)
    if T0 is None:
        T0 = default_split(rho)
    T0 = np.broadcast_to(np.asarray(T0, float), rho.shape)
    vs = value_shape(kind)
    out = np.zeros((x.shape[0],) + vs)
    trunc = np.zeros(x.shape[0])
    nev = 0
    real, n = real_segment(kind, x, y, a, T0, eps)
    out += real
    nev += n
    # group pairs by mode count to avoid oversampling small pairs
    Ms = np.array([mode_count(r, q, t) for r, q, t in zip(rho, dr, T0)])
    for M in np.unique(Ms):
        idx = np.flatnonzero(Ms == M)
        c, tr = tail_modes(kind, x[idx], y[idx], a, T0[idx], int(M), eps)
        out[idx] += sum_modes(c)
        trunc[idx] = tr
        nev += idx.size * int(M) * 300
    return out, trunc, nev
