"""Hot numeric kernels, each in a numba flavour and a pure-numpy flavour.

The ``*_nb`` functions are explicit loops compiled by numba; the ``*_np``
functions are vectorised numpy.  Callers go through the unsuffixed
dispatchers, which pick a flavour from :data:`infogame._accel.USE_NUMBA`.
Both flavours must agree to rounding; ``tests/test_kernels.py`` holds them
to that.
"""
from __future__ import annotations

import math

import numpy as np

from . import _accel
from ._accel import njit

# ---------------------------------------------------------------------------
# Lorenz-95 (two-dimensional) tendency and RK4 integration
# ---------------------------------------------------------------------------


@njit
def l95_tendency_nb(y, forcing, ghost):
    n_mem, n_lon, n_lat = y.shape
    out = np.empty_like(y)
    c = 2.0 / 3.0
    for m in range(n_mem):
        for i in range(n_lon):
            ip1 = (i + 1) % n_lon
            im1 = (i - 1) % n_lon
            im2 = (i - 2) % n_lon
            for j in range(n_lat):
                yp1 = y[m, i, j + 1] if j + 1 < n_lat else ghost
                ym1 = y[m, i, j - 1] if j >= 1 else ghost
                ym2 = y[m, i, j - 2] if j >= 2 else ghost
                out[m, i, j] = (
                    (y[m, ip1, j] - y[m, im2, j]) * y[m, im1, j]
                    + c * (yp1 - ym2) * ym1
                    - y[m, i, j]
                    + forcing
                )
    return out


def l95_tendency_np(y, forcing, ghost):
    # latitude padded with two ghost rows below and one above; padded k = j + 2
    yp = np.pad(y, ((0, 0), (0, 0), (2, 1)), mode="constant", constant_values=ghost)
    lon = (np.roll(y, -1, axis=1) - np.roll(y, 2, axis=1)) * np.roll(y, 1, axis=1)
    lat = (2.0 / 3.0) * (yp[:, :, 3:] - yp[:, :, :-3]) * yp[:, :, 1:-2]
    return lon + lat - y + forcing


@njit
def l95_rk4_nb(y, dt, steps, forcing, ghost):
    """Returns (state, first_bad_step); first_bad_step is -1 when all finite."""
    x = y.copy()
    for s in range(steps):
        k1 = l95_tendency_nb(x, forcing, ghost)
        k2 = l95_tendency_nb(x + 0.5 * dt * k1, forcing, ghost)
        k3 = l95_tendency_nb(x + 0.5 * dt * k2, forcing, ghost)
        k4 = l95_tendency_nb(x + dt * k3, forcing, ghost)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        for v in x.ravel():
            if not math.isfinite(v):
                return x, s
    return x, -1


def l95_rk4_np(y, dt, steps, forcing, ghost):
    x = y.copy()
    for s in range(steps):
        k1 = l95_tendency_np(x, forcing, ghost)
        k2 = l95_tendency_np(x + 0.5 * dt * k1, forcing, ghost)
        k3 = l95_tendency_np(x + 0.5 * dt * k2, forcing, ghost)
        k4 = l95_tendency_np(x + dt * k3, forcing, ghost)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            return x, s
    return x, -1


def l95_tendency(y, forcing=8.0, ghost=4.0):
    y = np.ascontiguousarray(y, dtype=np.float64)
    if _accel.USE_NUMBA:
        return l95_tendency_nb(y, float(forcing), float(ghost))
    return l95_tendency_np(y, float(forcing), float(ghost))


def l95_rk4(y, dt, steps, forcing=8.0, ghost=4.0):
    y = np.ascontiguousarray(y, dtype=np.float64)
    if _accel.USE_NUMBA:
        return l95_rk4_nb(y, float(dt), int(steps), float(forcing), float(ghost))
    return l95_rk4_np(y, float(dt), int(steps), float(forcing), float(ghost))


# ---------------------------------------------------------------------------
# Gaussian joint-action enumeration: 0.5 * [logdet(C1_u) - logdet(C2_u)] for
# every joint selection u, in itertools.product order.
# ---------------------------------------------------------------------------


@njit
def _chol_append(L, C, cur, m):
    # extend the Cholesky factor of C[cur[:m], cur[:m]] by row m; returns the
    # squared new diagonal (non-positive means the extension is not PD)
    p = cur[m]
    ss = 0.0
    for r in range(m):
        v = C[p, cur[r]]
        for c in range(r):
            v -= L[m, c] * L[r, c]
        v /= L[r, r]
        L[m, r] = v
        ss += v * v
    d = C[p, p] - ss
    L[m, m] = math.sqrt(d) if d > 0.0 else math.nan
    return d


@njit
def enumerate_logdet_gap_nb(C1, C2, pts, kk, nact):
    n_agents = nact.shape[0]
    total = 1
    for i in range(n_agents):
        total *= nact[i]
    off = np.zeros(n_agents + 1, np.int64)
    for i in range(n_agents):
        off[i + 1] = off[i] + kk[i]
    dim = off[n_agents]
    L1 = np.zeros((dim, dim))
    L2 = np.zeros((dim, dim))
    cur = np.zeros(dim, np.int64)
    ld1 = np.zeros(n_agents + 1)
    ld2 = np.zeros(n_agents + 1)
    ctr = np.zeros(n_agents, np.int64)
    out = np.empty(total)
    start = 0
    for flat in range(total):
        # only the agents at or after the odometer carry need new rows
        for i in range(start, n_agents):
            a = ctr[i]
            s1 = ld1[i]
            s2 = ld2[i]
            for q in range(kk[i]):
                m = off[i] + q
                cur[m] = pts[i, a, q]
                d1 = _chol_append(L1, C1, cur, m)
                d2 = _chol_append(L2, C2, cur, m)
                if d1 > 0.0 and d2 > 0.0:
                    s1 += math.log(d1)
                    s2 += math.log(d2)
                else:
                    s1 = math.nan
            ld1[i + 1] = s1
            ld2[i + 1] = s2
        out[flat] = 0.5 * (ld1[n_agents] - ld2[n_agents])
        i = n_agents - 1
        while i >= 0:
            ctr[i] += 1
            if ctr[i] < nact[i]:
                break
            ctr[i] = 0
            i -= 1
        start = i if i >= 0 else 0
    return out


def enumerate_logdet_gap_np(C1, C2, pts, kk, nact, chunk=100_000):
    nact = np.asarray(nact, dtype=np.int64)
    total = int(np.prod(nact))
    out = np.empty(total)
    for lo in range(0, total, chunk):
        flat = np.arange(lo, min(total, lo + chunk))
        acts = np.unravel_index(flat, tuple(nact))
        idx = np.concatenate([pts[i, acts[i], : kk[i]] for i in range(len(nact))], axis=1)
        vals = []
        for C in (C1, C2):
            sub = C[idx[:, :, None], idx[:, None, :]]
            sign, ld = np.linalg.slogdet(sub)
            vals.append(np.where(sign > 0, ld, np.nan))
        out[flat] = 0.5 * (vals[0] - vals[1])
    return out


def enumerate_logdet_gap(C1, C2, pts, kk, nact):
    C1 = np.ascontiguousarray(C1, dtype=np.float64)
    C2 = np.ascontiguousarray(C2, dtype=np.float64)
    pts = np.ascontiguousarray(pts, dtype=np.int64)
    kk = np.ascontiguousarray(kk, dtype=np.int64)
    nact = np.ascontiguousarray(nact, dtype=np.int64)
    if _accel.USE_NUMBA:
        return enumerate_logdet_gap_nb(C1, C2, pts, kk, nact)
    return enumerate_logdet_gap_np(C1, C2, pts, kk, nact)


# ---------------------------------------------------------------------------
# Mixture entropy reduction: H_k = -sum_{r,c} wr[r] wc[k,c] q log q with
# q = Q[r, k, c].  Zero-weight (padding) nodes and q == 0 contribute nothing.
# ---------------------------------------------------------------------------


@njit
def mixture_entropy_nb(Q, wr, wc):
    n_r, n_k, n_c = Q.shape
    out = np.zeros(n_k)
    for r in range(n_r):
        w = wr[r]
        for k in range(n_k):
            acc = 0.0
            for c in range(n_c):
                q = Q[r, k, c]
                if q > 0.0:
                    acc += wc[k, c] * q * math.log(q)
            out[k] -= w * acc
    return out


def mixture_entropy_np(Q, wr, wc):
    with np.errstate(divide="ignore", invalid="ignore"):
        qlq = np.where(Q > 0.0, Q * np.log(np.where(Q > 0.0, Q, 1.0)), 0.0)
    return -np.einsum("r,kc,rkc->k", wr, wc, qlq)


def mixture_entropy(Q, wr, wc):
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    wr = np.ascontiguousarray(wr, dtype=np.float64)
    wc = np.ascontiguousarray(wc, dtype=np.float64)
    if _accel.USE_NUMBA:
        return mixture_entropy_nb(Q, wr, wc)
    return mixture_entropy_np(Q, wr, wc)
