"""Numba-compiled integration kernel for the 16-dim master equation.

This module is an optional import: :mod:`qatm_battery.dynamics` falls back
to a pure-numpy path when numba is unavailable or disabled via the
``QATM_BATTERY_FORCE_NUMPY`` environment variable.  The kernel is
specialized to the fixed four-qubit layout (dim 16, marginals for M1M2, C
and B) and to jump operators that are 0/1 transition matrices, which is
what the model builds.

Dissipator terms are applied through precomputed index lists instead of
dense matmuls: for L = sum_s |dst_s><src_s| the sandwich L rho L^dag is a
block gather and L^dag L is diagonal.  The commutator uses one matmul,
H rho, and the exact Hermiticity of the Runge-Kutta stages:
[H, rho] = M - M^dag with M = H rho.
"""

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_TRACE_DRIFT = 1


@njit(cache=True, nogil=True)
def _rhs(t, rho, h_free, h_on, sp_rows, sp_cols, f, omega_c,
         jump_dst, jump_src, jump_rate, decay, tau, hw, m, out):
    n = rho.shape[0]
    gated = t <= tau
    h_base = h_on if gated else h_free
    use_drive = gated and f != 0.0
    if use_drive:
        for i in range(n):
            for j in range(n):
                hw[i, j] = h_base[i, j]
        z = f * (np.cos(omega_c * t) - 1j * np.sin(omega_c * t))
        zc = np.conj(z)
        for p in range(sp_rows.shape[0]):
            r = sp_rows[p]
            c = sp_cols[p]
            hw[r, c] += z
            hw[c, r] += zc
        h = hw
    else:
        h = h_base

    # m = H @ rho, row-major accumulation
    for i in range(n):
        for j in range(n):
            m[i, j] = 0.0 + 0.0j
        for l in range(n):
            hil = h[i, l]
            for j in range(n):
                m[i, j] += hil * rho[l, j]

    if gated:
        for i in range(n):
            di = decay[i]
            for j in range(n):
                out[i, j] = -1j * (m[i, j] - np.conj(m[j, i])) \
                    - 0.5 * (di + decay[j]) * rho[i, j]
        for ch in range(jump_rate.shape[0]):
            rate = jump_rate[ch]
            for a in range(jump_dst.shape[1]):
                da = jump_dst[ch, a]
                sa = jump_src[ch, a]
                for b in range(jump_dst.shape[1]):
                    out[da, jump_dst[ch, b]] += rate * rho[sa, jump_src[ch, b]]
    else:
        for i in range(n):
            for j in range(n):
                out[i, j] = -1j * (m[i, j] - np.conj(m[j, i]))


@njit(cache=True, nogil=True)
def _record_marginals(rho, idx, marg_m12, marg_c, marg_b):
    # index n = 8*m1 + 4*m2 + 2*c + b
    for i in range(4):
        for j in range(4):
            acc = 0.0 + 0.0j
            for x in range(4):
                acc += rho[4 * i + x, 4 * j + x]
            marg_m12[idx, i, j] = acc
    for i in range(2):
        for j in range(2):
            acc_c = 0.0 + 0.0j
            acc_b = 0.0 + 0.0j
            for q in range(4):
                for b in range(2):
                    acc_c += rho[4 * q + 2 * i + b, 4 * q + 2 * j + b]
            for blk in range(8):
                acc_b += rho[2 * blk + i, 2 * blk + j]
            marg_c[idx, i, j] = acc_c
            marg_b[idx, i, j] = acc_b


@njit(cache=True, nogil=True)
def rk4_run(rho0, h_free, h_on, sp_rows, sp_cols, f, omega_c,
            jump_dst, jump_src, jump_rate, decay, tau,
            dt, n_steps, stride, trace_tol):
    """Integrate n_steps of fixed-step RK4, re-hermitizing and
    trace-renormalizing after every step.

    Returns (states, marg_m12, marg_c, marg_b, renorm, status, fail_step)
    where states holds the state every ``stride`` steps and the marginal
    arrays cover every step.  ``renorm[s]`` is |Tr rho - 1| before the
    renormalization at step s.  A non-finite or drifting trace aborts with
    ``STATUS_TRACE_DRIFT``.
    """
    n = rho0.shape[0]
    n_stored = n_steps // stride + 1
    states = np.zeros((n_stored, n, n), dtype=np.complex128)
    marg_m12 = np.zeros((n_steps + 1, 4, 4), dtype=np.complex128)
    marg_c = np.zeros((n_steps + 1, 2, 2), dtype=np.complex128)
    marg_b = np.zeros((n_steps + 1, 2, 2), dtype=np.complex128)
    renorm = np.zeros(n_steps + 1, dtype=np.float64)

    rho = rho0.copy()
    hw = np.empty((n, n), dtype=np.complex128)
    m = np.empty((n, n), dtype=np.complex128)
    k1 = np.empty((n, n), dtype=np.complex128)
    k2 = np.empty((n, n), dtype=np.complex128)
    k3 = np.empty((n, n), dtype=np.complex128)
    k4 = np.empty((n, n), dtype=np.complex128)
    tmp = np.empty((n, n), dtype=np.complex128)

    states[0] = rho
    _record_marginals(rho, 0, marg_m12, marg_c, marg_b)

    status = STATUS_OK
    fail_step = -1
    half = 0.5 * dt
    sixth = dt / 6.0
    for step in range(1, n_steps + 1):
        t = (step - 1) * dt
        _rhs(t, rho, h_free, h_on, sp_rows, sp_cols, f, omega_c,
             jump_dst, jump_src, jump_rate, decay, tau, hw, m, k1)
        for i in range(n):
            for j in range(n):
                tmp[i, j] = rho[i, j] + half * k1[i, j]
        _rhs(t + half, tmp, h_free, h_on, sp_rows, sp_cols, f, omega_c,
             jump_dst, jump_src, jump_rate, decay, tau, hw, m, k2)
        for i in range(n):
            for j in range(n):
                tmp[i, j] = rho[i, j] + half * k2[i, j]
        _rhs(t + half, tmp, h_free, h_on, sp_rows, sp_cols, f, omega_c,
             jump_dst, jump_src, jump_rate, decay, tau, hw, m, k3)
        for i in range(n):
            for j in range(n):
                tmp[i, j] = rho[i, j] + dt * k3[i, j]
        _rhs(t + dt, tmp, h_free, h_on, sp_rows, sp_cols, f, omega_c,
             jump_dst, jump_src, jump_rate, decay, tau, hw, m, k4)
        for i in range(n):
            for j in range(n):
                rho[i, j] += sixth * (k1[i, j] + 2.0 * (k2[i, j] + k3[i, j]) + k4[i, j])

        # hygiene: exact re-hermitization, then trace renormalization
        tr = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                v = 0.5 * (rho[i, j] + np.conj(rho[j, i]))
                rho[i, j] = v
                rho[j, i] = np.conj(v)
            rho[i, i] = complex(rho[i, i].real, 0.0)
            tr += rho[i, i].real
        drift = abs(tr - 1.0)
        renorm[step] = drift
        if not (drift <= trace_tol):  # also catches NaN
            status = STATUS_TRACE_DRIFT
            fail_step = step
            break
        inv = 1.0 / tr
        for i in range(n):
            for j in range(n):
                rho[i, j] *= inv

        _record_marginals(rho, step, marg_m12, marg_c, marg_b)
        if step % stride == 0:
            states[step // stride] = rho

    return states, marg_m12, marg_c, marg_b, renorm, status, fail_step
