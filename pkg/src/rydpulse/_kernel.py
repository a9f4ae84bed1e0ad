"""Compiled propagation kernel.

Integrates every dynamics block at once in rescaled time ``s = t / T`` on
``[0, 1]`` with an adaptive Dormand-Prince 8(5,3) scheme.  Forward
sensitivities of the state with respect to the pulse parameter vector are
optionally carried along, together with one real accumulator for the
Rydberg-time integral.

The state vector layout is ``[psi, dpsi/dtheta_0, ..., dpsi/dtheta_{P-1}, acc]``
where each slab has ``n`` complex entries (all blocks concatenated).
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dop

N_STAGES = 12
_A = np.ascontiguousarray(_dop.A[:N_STAGES, :N_STAGES])
_B = np.ascontiguousarray(_dop.B)
_C = np.ascontiguousarray(_dop.C[:N_STAGES])
_E3 = np.ascontiguousarray(_dop.E3)
_E5 = np.ascontiguousarray(_dop.E5)

STATUS_OK = 0
STATUS_STEP_UNDERFLOW = 1
STATUS_TOO_MANY_STEPS = 2

TWO_PI = 2.0 * math.pi


@nb.njit(cache=True)
def _phase(s, theta, general, K, slope, offset, dxi):
    """Laser phase at rescaled time ``s`` and its parameter derivatives."""
    T = theta[0]
    u = s - 0.5
    xi = slope * T * s + offset
    for k in range(dxi.shape[0]):
        dxi[k] = 0.0
    dxi[0] = slope * s
    idx = 2
    for k in range(K):
        n = k + 1
        a_freq = theta[idx]
        amp = theta[idx + 1]
        th = math.tanh(a_freq)
        arg = TWO_PI * n * (1.0 + 0.5 * th) * u
        sn = math.sin(arg)
        cs = math.cos(arg)
        xi += amp * sn
        dxi[idx] = amp * cs * TWO_PI * n * 0.5 * (1.0 - th * th) * u
        dxi[idx + 1] = sn
        idx += 2
        if general:
            b_freq = theta[idx]
            bamp = theta[idx + 1]
            thb = math.tanh(b_freq)
            argb = TWO_PI * n * (1.0 + 0.5 * thb) * u
            snb = math.sin(argb)
            csb = math.cos(argb)
            xi += bamp * csb
            dxi[idx] = -bamp * snb * TWO_PI * n * 0.5 * (1.0 - thb * thb) * u
            dxi[idx + 1] = csb
            idx += 2
    return xi


@nb.njit(cache=True)
def _rhs(s, y, out, theta, general, K, slope, offset, gamma,
         nr, vdiag, lo, hi, accw, n_sens, dxi, hy, dy, hv):
    n = nr.shape[0]
    T = theta[0]
    d0 = theta[1]
    xi = _phase(s, theta, general, K, slope, offset, dxi)
    e = complex(math.cos(xi), math.sin(xi))
    ec = e.conjugate()
    m = lo.shape[0]

    # hy = H psi (generator in units of Omega_0, before the factor T)
    for j in range(n):
        hy[j] = complex(d0 * nr[j] + vdiag[j], -0.5 * gamma * nr[j]) * y[j]
    for q in range(m):
        a = lo[q]
        b = hi[q]
        hy[b] += 0.5 * e * y[a]
        hy[a] += 0.5 * ec * y[b]
    mT = complex(0.0, -T)
    for j in range(n):
        out[j] = mT * hy[j]

    if n_sens > 0:
        # dy = (dH/dxi) psi
        for j in range(n):
            dy[j] = 0.0
        for q in range(m):
            a = lo[q]
            b = hi[q]
            dy[b] += 0.5j * e * y[a]
            dy[a] -= 0.5j * ec * y[b]
        for k in range(n_sens):
            off = (k + 1) * n
            for j in range(n):
                hv[j] = complex(d0 * nr[j] + vdiag[j], -0.5 * gamma * nr[j]) * y[off + j]
            for q in range(m):
                a = lo[q]
                b = hi[q]
                hv[b] += 0.5 * e * y[off + a]
                hv[a] += 0.5 * ec * y[off + b]
            if k == 0:
                c = T * dxi[0]
                for j in range(n):
                    out[off + j] = -1j * (T * hv[j] + hy[j] + c * dy[j])
            elif k == 1:
                for j in range(n):
                    out[off + j] = -1j * T * (hv[j] + nr[j] * y[j])
            else:
                c = dxi[k]
                for j in range(n):
                    out[off + j] = -1j * T * (hv[j] + c * dy[j])

    acc = 0.0
    for j in range(n):
        yj = y[j]
        acc += accw[j] * nr[j] * (yj.real * yj.real + yj.imag * yj.imag)
    out[out.shape[0] - 1] = T * acc


@nb.njit(cache=True)
def propagate_all(theta, general, K, slope, offset, gamma,
                  nr, vdiag, lo, hi, accw, y0, n_sens,
                  rtol, atol, s_out, max_steps):
    """Integrate from ``s = 0`` to ``s = s_out[-1]``.

    Returns ``(status, Y, n_accepted)`` where ``Y[i]`` is the full augmented
    state at ``s_out[i]``.
    """
    n = nr.shape[0]
    L = n * (1 + n_sens) + 1
    P = theta.shape[0]
    dxi = np.zeros(P)
    hy = np.zeros(n, dtype=np.complex128)
    dy = np.zeros(n, dtype=np.complex128)
    hv = np.zeros(n, dtype=np.complex128)
    Ks = np.zeros((N_STAGES + 1, L), dtype=np.complex128)
    Y = np.zeros((s_out.shape[0], L), dtype=np.complex128)
    y = np.zeros(L, dtype=np.complex128)
    ytmp = np.zeros(L, dtype=np.complex128)
    ynew = np.zeros(L, dtype=np.complex128)
    for j in range(y0.shape[0]):
        y[j] = y0[j]

    s = 0.0
    out_idx = 0
    while out_idx < s_out.shape[0] and s_out[out_idx] <= 0.0:
        Y[out_idx, :] = y
        out_idx += 1
    if out_idx == s_out.shape[0]:
        return STATUS_OK, Y, 0

    _rhs(s, y, Ks[0], theta, general, K, slope, offset, gamma,
         nr, vdiag, lo, hi, accw, n_sens, dxi, hy, dy, hv)

    # initial step (Hairer, Norsett & Wanner II.4), order 7 estimator
    d0n = 0.0
    d1n = 0.0
    for j in range(L):
        sc = atol + abs(y[j]) * rtol
        d0n += (abs(y[j]) / sc) ** 2
        d1n += (abs(Ks[0, j]) / sc) ** 2
    d0n = math.sqrt(d0n / L)
    d1n = math.sqrt(d1n / L)
    if d0n < 1e-5 or d1n < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0n / d1n
    h0 = min(h0, s_out[-1])
    for j in range(L):
        ytmp[j] = y[j] + h0 * Ks[0, j]
    _rhs(h0, ytmp, Ks[1], theta, general, K, slope, offset, gamma,
         nr, vdiag, lo, hi, accw, n_sens, dxi, hy, dy, hv)
    d2n = 0.0
    for j in range(L):
        sc = atol + abs(y[j]) * rtol
        d2n += (abs(Ks[1, j] - Ks[0, j]) / sc) ** 2
    d2n = math.sqrt(d2n / L) / h0
    if d1n <= 1e-15 and d2n <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1n, d2n)) ** (1.0 / 8.0)
    h = min(100.0 * h0, h1, s_out[-1], 0.1)

    n_acc = 0
    n_tot = 0
    while out_idx < s_out.shape[0]:
        target = s_out[out_idx]
        if h < 1e-14 * max(1.0, abs(s)):
            return STATUS_STEP_UNDERFLOW, Y, n_acc
        n_tot += 1
        if n_tot > max_steps:
            return STATUS_TOO_MANY_STEPS, Y, n_acc
        hit = False
        h_trial = h
        if s + h >= target:
            h = target - s
            hit = True

        for st in range(1, N_STAGES):
            for j in range(L):
                acc = 0.0j
                for q in range(st):
                    acc += _A[st, q] * Ks[q, j]
                ytmp[j] = y[j] + h * acc
            _rhs(s + _C[st] * h, ytmp, Ks[st], theta, general, K, slope, offset,
                 gamma, nr, vdiag, lo, hi, accw, n_sens, dxi, hy, dy, hv)
        for j in range(L):
            acc = 0.0j
            for q in range(N_STAGES):
                acc += _B[q] * Ks[q, j]
            ynew[j] = y[j] + h * acc
        s_new = target if hit else s + h
        _rhs(s_new, ynew, Ks[N_STAGES], theta, general, K, slope, offset, gamma,
             nr, vdiag, lo, hi, accw, n_sens, dxi, hy, dy, hv)

        e5 = 0.0
        e3 = 0.0
        for j in range(L):
            sc = atol + max(abs(y[j]), abs(ynew[j])) * rtol
            a5 = 0.0j
            a3 = 0.0j
            for q in range(N_STAGES + 1):
                a5 += _E5[q] * Ks[q, j]
                a3 += _E3[q] * Ks[q, j]
            e5 += (a5.real * a5.real + a5.imag * a5.imag) / (sc * sc)
            e3 += (a3.real * a3.real + a3.imag * a3.imag) / (sc * sc)
        if e5 == 0.0 and e3 == 0.0:
            err = 0.0
        else:
            err = h * e5 / math.sqrt((e5 + 0.01 * e3) * L)

        if err < 1.0:
            if err == 0.0:
                factor = 10.0
            else:
                factor = min(10.0, 0.9 * err ** (-1.0 / 8.0))
            s = s_new
            for j in range(L):
                y[j] = ynew[j]
                Ks[0, j] = Ks[N_STAGES, j]
            n_acc += 1
            h_next = h * factor
            if hit:
                Y[out_idx, :] = y
                out_idx += 1
                h_next = max(h_next, h_trial)
            h = min(h_next, 0.1)
        else:
            h = h * max(0.2, 0.9 * err ** (-1.0 / 8.0))
    return STATUS_OK, Y, n_acc
