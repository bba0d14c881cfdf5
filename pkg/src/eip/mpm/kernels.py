"""Compiled per-particle kernels.

Every kernel works on a half-open particle range ``[p0, p1)`` and releases the
GIL, so the driver can run disjoint ranges on worker threads.  Scatter kernels
write into caller-owned grid buffers; the driver decides whether that buffer is
the shared grid (serial mode) or a per-chunk scratch grid (parallel mode).

Error reporting: kernels return the index of the first offending particle, or -1.
"""
from __future__ import annotations

import numpy as np
from numba import njit

ERR_NONE = 0
ERR_ESCAPE = 1
ERR_INVERSION = 2


@njit(nogil=True, cache=True)
def _det3(a):
    return (
        a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
        - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
        + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0])
    )


@njit(nogil=True, cache=True)
def _cofactor3(a, out):
    for i in range(3):
        i1 = (i + 1) % 3
        i2 = (i + 2) % 3
        for j in range(3):
            j1 = (j + 1) % 3
            j2 = (j + 2) % 3
            out[i, j] = a[i1, j1] * a[i2, j2] - a[i1, j2] * a[i2, j1]


@njit(nogil=True, cache=True)
def polar_rotation(F, R, work):
    """Rotation factor of F (det F > 0) by scaled Newton iteration X <- (gX + (gX)^-T) / 2.

    ``work`` is a (3, 3) scratch buffer.  Determinant scaling is used while far
    from convergence and dropped for the final quadratically converging steps.
    """
    for i in range(3):
        for j in range(3):
            R[i, j] = F[i, j]
    scaled = True
    for _ in range(60):
        det = _det3(R)
        _cofactor3(R, work)  # cof(X) = det(X) X^-T
        g = abs(det) ** (-1.0 / 3.0) if scaled else 1.0
        diff = 0.0
        norm = 0.0
        for i in range(3):
            for j in range(3):
                new = 0.5 * (g * R[i, j] + work[i, j] / (g * det))
                d = new - R[i, j]
                diff += d * d
                norm += new * new
                R[i, j] = new
        if diff < 1e-4 * norm:
            scaled = False
        if diff <= 1e-28 * norm:
            break


@njit(nogil=True, cache=True)
def affine_momentum(F, C, mass, gamma, mu, lam, A, p0, p1):
    """A_p = m_p C_p - gamma P(F_p) F_p^T.  Returns first particle with det F <= 0, else -1."""
    R = np.empty((3, 3))
    work = np.empty((3, 3))
    cof = np.empty((3, 3))
    P = np.empty((3, 3))
    for p in range(p0, p1):
        Fp = F[p]
        J = _det3(Fp)
        if not J > 0.0:
            return p
        polar_rotation(Fp, R, work)
        _cofactor3(Fp, cof)
        s = lam * (J - 1.0)
        for i in range(3):
            for j in range(3):
                P[i, j] = 2.0 * mu * (Fp[i, j] - R[i, j]) + s * cof[i, j]
        for i in range(3):
            for j in range(3):
                pf = 0.0
                for k in range(3):
                    pf += P[i, k] * Fp[j, k]
                A[p, i, j] = mass[p] * C[p, i, j] - gamma * pf
    return -1


@njit(nogil=True, cache=True)
def _weights(xp, inv_dx, base, fx, w):
    for a in range(3):
        xg = xp[a] * inv_dx
        b = int(np.floor(xg - 0.5))
        f = xg - b
        base[a] = b
        fx[a] = f
        w[a, 0] = 0.5 * (1.5 - f) ** 2
        w[a, 1] = 0.75 - (f - 1.0) ** 2
        w[a, 2] = 0.5 * (f - 0.5) ** 2


@njit(nogil=True, cache=True)
def _outside(xp, inv_dx, n):
    for a in range(3):
        xg = xp[a] * inv_dx
        if not (xg >= 2.0 and xg <= n - 2.0):
            return True
    return False


@njit(nogil=True, cache=True)
def p2g(x, v, A, mass_q, mass_unit, inv_dx, dx, n, lo, grid_mq, grid_mom, p0, p1):
    """Scatter mass (fixed-point quanta) and momentum to box-local grid buffers.

    Each particle's quantized mass is split over its 27 nodes; the rounding
    remainder goes to the center node so the quanta sum exactly to mass_q[p].
    """
    base = np.empty(3, dtype=np.int64)
    fx = np.empty(3)
    w = np.empty((3, 3))
    q = np.empty(27, dtype=np.int64)
    for p in range(p0, p1):
        xp = x[p]
        if _outside(xp, inv_dx, n):
            return p
        _weights(xp, inv_dx, base, fx, w)
        mq = mass_q[p]
        total = 0
        s = 0
        for i in range(3):
            for j in range(3):
                for k in range(3):
                    if i == 1 and j == 1 and k == 1:
                        q[s] = 0
                    else:
                        q[s] = np.int64(w[0, i] * w[1, j] * w[2, k] * mq + 0.5)
                        total += q[s]
                    s += 1
        q[13] = mq - total
        s = 0
        for i in range(3):
            d0 = (i - fx[0]) * dx
            for j in range(3):
                d1 = (j - fx[1]) * dx
                for k in range(3):
                    d2 = (k - fx[2]) * dx
                    wt = w[0, i] * w[1, j] * w[2, k]
                    wm = q[s] * mass_unit
                    gi = base[0] + i - lo[0]
                    gj = base[1] + j - lo[1]
                    gk = base[2] + k - lo[2]
                    grid_mq[gi, gj, gk] += q[s]
                    for a in range(3):
                        grid_mom[gi, gj, gk, a] += wm * v[p, a] + wt * (
                            A[p, a, 0] * d0 + A[p, a, 1] * d1 + A[p, a, 2] * d2
                        )
                    s += 1
    return -1


@njit(nogil=True, cache=True)
def _occupied(xp, occ, occ_origin, occ_h):
    nx, ny, nz = occ.shape
    i = int(np.floor((xp[0] - occ_origin[0]) / occ_h))
    j = int(np.floor((xp[1] - occ_origin[1]) / occ_h))
    k = int(np.floor((xp[2] - occ_origin[2]) / occ_h))
    if i < 0 or j < 0 or k < 0 or i >= nx or j >= ny or k >= nz:
        return False
    return occ[i, j, k]


@njit(nogil=True, cache=True)
def g2p(
    x, v, C, F, alpha, v_r, grid_vel, lo, inv_dx, dx, dt, n,
    particle_affine, occ, occ_origin, occ_h, err, p0, p1,
):
    """Gather, blend with the hand velocity, and update C, x, F in place.

    ``err`` receives (particle, code) of the first failure in the range.
    """
    base = np.empty(3, dtype=np.int64)
    fx = np.empty(3)
    w = np.empty((3, 3))
    B = np.empty((3, 3))
    m1 = np.empty(3)
    vg = np.empty(3)
    Fn = np.empty((3, 3))
    xn = np.empty(3)
    use_occ = occ.shape[0] > 0
    scale = 4.0 * inv_dx * inv_dx
    for p in range(p0, p1):
        _weights(x[p], inv_dx, base, fx, w)
        for a in range(3):
            vg[a] = 0.0
            m1[a] = 0.0
            for b in range(3):
                B[a, b] = 0.0
        for i in range(3):
            d0 = (i - fx[0]) * dx
            for j in range(3):
                d1 = (j - fx[1]) * dx
                for k in range(3):
                    d2 = (k - fx[2]) * dx
                    wt = w[0, i] * w[1, j] * w[2, k]
                    gi = base[0] + i - lo[0]
                    gj = base[1] + j - lo[1]
                    gk = base[2] + k - lo[2]
                    m1[0] += wt * d0
                    m1[1] += wt * d1
                    m1[2] += wt * d2
                    for a in range(3):
                        gv = grid_vel[gi, gj, gk, a]
                        vg[a] += wt * gv
                        B[a, 0] += wt * gv * d0
                        B[a, 1] += wt * gv * d1
                        B[a, 2] += wt * gv * d2
        ap = alpha[p]
        for a in range(3):
            v[p, a] = ap * vg[a] + (1.0 - ap) * v_r[a]
        if particle_affine:
            for a in range(3):
                for b in range(3):
                    C[p, a, b] = scale * v[p, a] * m1[b]
        else:
            for a in range(3):
                for b in range(3):
                    C[p, a, b] = scale * B[a, b]
        for a in range(3):
            xn[a] = x[p, a] + dt * v[p, a]
        if use_occ and _occupied(xn, occ, occ_origin, occ_h) and not _occupied(x[p], occ, occ_origin, occ_h):
            # stopped at the object surface; F still follows the grid velocity gradient.
            # Particles already inside an occupied voxel are left to the grid.
            for a in range(3):
                xn[a] = x[p, a]
                v[p, a] = 0.0
        for a in range(3):
            for b in range(3):
                acc = F[p, a, b]
                for c in range(3):
                    acc += dt * C[p, a, c] * F[p, c, b]
                Fn[a, b] = acc
        for a in range(3):
            x[p, a] = xn[a]
            for b in range(3):
                F[p, a, b] = Fn[a, b]
        if err[1] == ERR_NONE:
            if not _det3(Fn) > 0.0:
                err[0] = p
                err[1] = ERR_INVERSION
            elif _outside(xn, inv_dx, n):
                err[0] = p
                err[1] = ERR_ESCAPE
    return err[1]
