"""Compiled inner loops.

Everything here works on flat float arrays so numba can compile it once and
reuse it for every run. The public modules wrap these functions in
dataclass-based APIs; the logic is not duplicated there.

Array layouts
-------------
tire  : [kind, alpha_g, delta, alpha_M, gamma_M, alpha_F, gamma_F,
         c_F_alpha, c_M_alpha, F_z, e]      (kind 0 = piecewise, 1 = smooth)
plant : [a, e, I_z, c, k, kappa, sigma]
"""
import math

import numpy as np
from numba import njit

TK_KIND, TK_ALPHA_G, TK_DELTA, TK_ALPHA_M, TK_GAMMA_M = 0, 1, 2, 3, 4
TK_ALPHA_F, TK_GAMMA_F, TK_CF, TK_CM, TK_FZ, TK_E = 5, 6, 7, 8, 9, 10

PP_A, PP_E, PP_IZ, PP_C, PP_K, PP_KAPPA, PP_SIGMA = 0, 1, 2, 3, 4, 5, 6

CTRL_NONE, CTRL_ZAD, CTRL_MCS = 0, 1, 2

STATUS_OK, STATUS_DIVERGED, STATUS_GAIN = 0, 1, 2

GAIN_LIMIT = 1e9


@njit(cache=True)
def aligning_torque(tire, alpha):
    if tire[TK_KIND] == 0.0:
        ag = tire[TK_ALPHA_G]
        if abs(alpha) <= ag:
            return tire[TK_FZ] * tire[TK_CM] * ag / math.pi * math.sin(math.pi * alpha / ag)
        return 0.0
    am = tire[TK_ALPHA_M]
    return tire[TK_CM] * tire[TK_FZ] * tire[TK_GAMMA_M] * 2.0 * alpha * am / (alpha * alpha + am * am)


@njit(cache=True)
def side_force(tire, alpha):
    if tire[TK_KIND] == 0.0:
        d = tire[TK_DELTA]
        return 0.5 * tire[TK_CF] * tire[TK_FZ] * (abs(alpha + d) - abs(alpha - d))
    af = tire[TK_ALPHA_F]
    return tire[TK_CF] * tire[TK_FZ] * tire[TK_GAMMA_F] * 2.0 * alpha * af / (alpha * alpha + af * af)


@njit(cache=True)
def ground_moment(tire, alpha):
    return aligning_torque(tire, alpha) - tire[TK_E] * side_force(tire, alpha)


@njit(cache=True)
def ground_moment_slope(tire, alpha):
    """dM_G/dalpha; at the piecewise kinks the closed branch is used."""
    if tire[TK_KIND] == 0.0:
        ag = tire[TK_ALPHA_G]
        m1 = tire[TK_FZ] * tire[TK_CM]
        m2 = tire[TK_E] * tire[TK_CF] * tire[TK_FZ]
        a = abs(alpha)
        if a <= tire[TK_DELTA]:
            return m1 * math.cos(alpha * math.pi / ag) - m2
        if a <= ag:
            return m1 * math.cos(alpha * math.pi / ag)
        return 0.0
    am = tire[TK_ALPHA_M]
    af = tire[TK_ALPHA_F]
    a2 = alpha * alpha
    dmz = tire[TK_CM] * tire[TK_FZ] * tire[TK_GAMMA_M] * 2.0 * am * (am * am - a2) / (a2 + am * am) ** 2
    dfy = tire[TK_CF] * tire[TK_FZ] * tire[TK_GAMMA_F] * 2.0 * af * (af * af - a2) / (a2 + af * af) ** 2
    return dmz - tire[TK_E] * dfy


@njit(cache=True)
def plant_field(p, tire, V, psi, psi_dot, alpha, torque):
    """Right-hand side of the NLG model; ``torque`` is u + zeta."""
    iz = p[PP_IZ]
    dd = (p[PP_C] * psi + (p[PP_K] + p[PP_KAPPA] / V) * psi_dot
          + ground_moment(tire, alpha) + torque) / iz
    da = (V * (psi - alpha) + (p[PP_E] - p[PP_A]) * psi_dot) / p[PP_SIGMA]
    return psi_dot, dd, da


@njit(cache=True)
def zad_duty(T, S, sd1, sd2, dt):
    den = sd2 - sd1
    if abs(den) < 1e-12:
        raise ZeroDivisionError("degenerate switching: S_dot_2 == S_dot_1")
    d = (2.0 * S + T * sd2) / den
    if d < 0.0:
        d = 0.0
    elif d > T:
        d = T
    if dt > 0.0:
        # even multiple of dt so both half pulses land on step boundaries
        d = 2.0 * dt * math.floor(d / (2.0 * dt) + 0.5)
        if d > T:
            d -= 2.0 * dt
    return d


@njit(cache=True)
def zad_slopes(p, tire, V, ks, mu, psi, psi_dot, alpha):
    """(S_dot_1, S_dot_2) of S = psi + ks*psi_dot evaluated at u = +mu and u = -mu."""
    _, dd1, _ = plant_field(p, tire, V, psi, psi_dot, alpha, mu)
    _, dd2, _ = plant_field(p, tire, V, psi, psi_dot, alpha, -mu)
    return psi_dot + ks * dd1, psi_dot + ks * dd2


@njit(cache=True)
def _lin_field(p, V, x0, x1, x2):
    iz = p[PP_IZ]
    return (x1,
            (p[PP_C] * x0 + (p[PP_K] + p[PP_KAPPA] / V) * x1) / iz,
            (V * (x0 - x2) + (p[PP_E] - p[PP_A]) * x1) / p[PP_SIGMA])


@njit(cache=True)
def reference_step(p, V, xm, dt):
    """One RK4 step of the autonomous reference model x_m' = A(V) x_m."""
    a0, a1, a2 = _lin_field(p, V, xm[0], xm[1], xm[2])
    b0, b1, b2 = _lin_field(p, V, xm[0] + 0.5 * dt * a0, xm[1] + 0.5 * dt * a1, xm[2] + 0.5 * dt * a2)
    c0, c1, c2 = _lin_field(p, V, xm[0] + 0.5 * dt * b0, xm[1] + 0.5 * dt * b1, xm[2] + 0.5 * dt * b2)
    d0, d1, d2 = _lin_field(p, V, xm[0] + dt * c0, xm[1] + dt * c1, xm[2] + dt * c2)
    xm[0] += dt / 6.0 * (a0 + 2.0 * b0 + 2.0 * c0 + d0)
    xm[1] += dt / 6.0 * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
    xm[2] += dt / 6.0 * (a2 + 2.0 * b2 + 2.0 * c2 + d2)


@njit(cache=True)
def reference_step_matrix(Am, xm, dt):
    """One RK4 step of x_m' = Am x_m for a fixed matrix."""
    k1 = Am @ xm
    k2 = Am @ (xm + 0.5 * dt * k1)
    k3 = Am @ (xm + 0.5 * dt * k2)
    k4 = Am @ (xm + dt * k3)
    xm += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True)
def mcs_gain(k_p, k_i, Bm, Pm, xm, xh, k_int, wx_prev, dt, first):
    """Advance the MCS integral term in place and return (u, w).

    e_m = x_hat - x_m, w = Bm^T Pm e_m, trapezoidal accumulation of
    k_i * w * x_hat^T; K = k_p * w * x_hat^T + integral; u = -K x_hat.
    """
    w = 0.0
    for i in range(3):
        s = 0.0
        for j in range(3):
            s += Pm[i, j] * (xh[j] - xm[j])
        w += Bm[i] * s
    u = 0.0
    for j in range(3):
        wx = w * xh[j]
        if not first:
            k_int[j] += k_i * 0.5 * (wx + wx_prev[j]) * dt
        wx_prev[j] = wx
        u -= (k_p * wx + k_int[j]) * xh[j]
    return u, w


@njit(cache=True)
def _joint_field(p, ptire, otire, L, use_obs, V, u, zeta, x, xh, out):
    d0, d1, d2 = plant_field(p, ptire, V, x[0], x[1], x[2], u + zeta)
    out[0] = d0
    out[1] = d1
    out[2] = d2
    if use_obs:
        # observer sees u but never zeta
        h0, h1, h2 = plant_field(p, otire, V, xh[0], xh[1], xh[2], u)
        r0 = xh[0] - x[0]
        r1 = xh[1] - x[1]
        out[3] = h0 - (L[0, 0] * r0 + L[0, 1] * r1)
        out[4] = h1 - (L[1, 0] * r0 + L[1, 1] * r1)
        out[5] = h2 - (L[2, 0] * r0 + L[2, 1] * r1)
    else:
        out[3] = 0.0
        out[4] = 0.0
        out[5] = 0.0


@njit(cache=True)
def joint_rk4(p, ptire, otire, L, use_obs, V0, Vh, V1, z0, zh, z1, u, z, dt, k1, k2, k3, k4, tmp):
    _joint_field(p, ptire, otire, L, use_obs, V0, u, z0, z[:3], z[3:], k1)
    for i in range(6):
        tmp[i] = z[i] + 0.5 * dt * k1[i]
    _joint_field(p, ptire, otire, L, use_obs, Vh, u, zh, tmp[:3], tmp[3:], k2)
    for i in range(6):
        tmp[i] = z[i] + 0.5 * dt * k2[i]
    _joint_field(p, ptire, otire, L, use_obs, Vh, u, zh, tmp[:3], tmp[3:], k3)
    for i in range(6):
        tmp[i] = z[i] + dt * k3[i]
    _joint_field(p, ptire, otire, L, use_obs, V1, u, z1, tmp[:3], tmp[3:], k4)
    for i in range(6):
        z[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@njit(cache=True)
def _interp_half(sig, t, dt):
    """Linear interpolation of a signal sampled every dt/2."""
    x = t / (0.5 * dt)
    i = int(math.floor(x))
    if i >= sig.shape[0] - 1:
        return sig[sig.shape[0] - 1]
    if i < 0:
        return sig[0]
    w = x - i
    return sig[i] + w * (sig[i + 1] - sig[i])


@njit(cache=True)
def closed_loop(p, ptire, otire, L, use_obs, ctrl, cp, Pm, Am, Bm, am_fixed, v_half, zeta_half,
                dt, n_steps, rec_every, x0, xh0, bound):
    """Integrate plant and observer jointly under the selected controller.

    ``v_half``/``zeta_half`` hold the signals sampled every dt/2 (length
    2*n_steps + 1). ``cp`` is [T, k_s, mu] for ZAD and [k_P, k_I] for MCS.
    The MCS reference model uses ``Am`` when ``am_fixed``, otherwise the
    linear plant matrix at the current speed.
    Rows are recorded at every ``rec_every``-th step, including step
    ``n_steps``; the control stored in a row is the one applied from that
    instant on.

    ZAD switching instants generally fall inside a step; that step is split
    there so the PWM edges are integrated exactly (signals at the split
    points are interpolated linearly from the half-step samples).

    Returns (status, fail_step, X, XH, U, DC, CYC). CYC has one row per
    started PWM period, [d_k, number of control sign changes inside the
    period]; it is empty unless ZAD is active.
    """
    n_rec = n_steps // rec_every + 1
    X = np.empty((n_rec, 3))
    XH = np.empty((n_rec, 3))
    U = np.empty(n_rec)
    DC = np.empty(n_rec)
    z = np.empty(6)
    z[:3] = x0
    z[3:] = xh0
    k1 = np.empty(6)
    k2 = np.empty(6)
    k3 = np.empty(6)
    k4 = np.empty(6)
    tmp = np.empty(6)
    xm = np.zeros(3)
    k_int = np.zeros(3)
    wx_prev = np.zeros(3)
    cuts = np.empty(4)
    n_cyc = 0

    n_per = 1
    T = 0.0
    d = 0.0
    mu = 0.0
    if ctrl == CTRL_ZAD:
        T = cp[0]
        mu = cp[2]
        n_per = int(round(T / dt))
        n_cyc = n_steps // n_per + 1
    dc = math.nan
    CYC = np.zeros((n_cyc, 2))
    cyc = -1
    u_last = 0.0
    r = 0
    for i in range(n_steps + 1):
        V = v_half[2 * i]
        xh = z[3:] if use_obs else z[:3]
        if ctrl == CTRL_ZAD:
            j = i % n_per
            if j == 0:
                ks = cp[1]
                S = xh[0] + ks * xh[1]
                sd1, sd2 = zad_slopes(p, otire, V, ks, mu, xh[0], xh[1], xh[2])
                d = zad_duty(T, S, sd1, sd2, 0.0)
                dc = d / T
                cyc += 1
                CYC[cyc, 0] = d
            tau = j * dt
            u = mu if (tau < 0.5 * d or tau >= T - 0.5 * d) else -mu
            if j > 0 and u != u_last:
                CYC[cyc, 1] += 1
            u_last = u
        elif ctrl == CTRL_MCS:
            u, w = mcs_gain(cp[0], cp[1], Bm, Pm, xm, xh, k_int, wx_prev, dt, i == 0)
            for m in range(3):
                if not (abs(cp[0] * w * xh[m] + k_int[m]) < GAIN_LIMIT):
                    return STATUS_GAIN, i, X[:r], XH[:r], U[:r], DC[:r], CYC[:cyc + 1]
        else:
            u = 0.0
        if i % rec_every == 0:
            X[r, :] = z[:3]
            XH[r, :] = z[3:]
            U[r] = u
            DC[r] = dc
            r += 1
        if i == n_steps:
            break
        split = False
        if ctrl == CTRL_ZAD:
            j = i % n_per
            a = j * dt
            b = a + dt
            nc = 0
            cuts[nc] = a
            nc += 1
            for edge in (0.5 * d, T - 0.5 * d):
                if a < edge < b and not (edge - a < 1e-12 * dt or b - edge < 1e-12 * dt):
                    cuts[nc] = edge
                    nc += 1
            cuts[nc] = b
            nc += 1
            split = nc > 2
        if split:
            t_base = (i - j) * dt
            for m in range(nc - 1):
                sa = cuts[m]
                sb = cuts[m + 1]
                mid = 0.5 * (sa + sb)
                us = mu if (mid < 0.5 * d or mid > T - 0.5 * d) else -mu
                if m > 0 and us != u_last:
                    CYC[cyc, 1] += 1
                u_last = us
                ta = t_base + sa
                h = sb - sa
                joint_rk4(p, ptire, otire, L, use_obs,
                          _interp_half(v_half, ta, dt), _interp_half(v_half, ta + 0.5 * h, dt),
                          _interp_half(v_half, ta + h, dt), _interp_half(zeta_half, ta, dt),
                          _interp_half(zeta_half, ta + 0.5 * h, dt), _interp_half(zeta_half, ta + h, dt),
                          us, z, h, k1, k2, k3, k4, tmp)
        else:
            joint_rk4(p, ptire, otire, L, use_obs, V, v_half[2 * i + 1], v_half[2 * i + 2],
                      zeta_half[2 * i], zeta_half[2 * i + 1], zeta_half[2 * i + 2],
                      u, z, dt, k1, k2, k3, k4, tmp)
        if ctrl == CTRL_MCS:
            if am_fixed:
                reference_step_matrix(Am, xm, dt)
            else:
                reference_step(p, V, xm, dt)
        for m in range(6):
            if not (abs(z[m]) < bound):
                return STATUS_DIVERGED, i + 1, X[:r], XH[:r], U[:r], DC[:r], CYC[:cyc + 1]
    return STATUS_OK, n_steps, X, XH, U, DC, CYC[:cyc + 1]


@njit(cache=True)
def open_loop_window(p, tire, V, x0, dt, n_transient, n_window, sample_every, bound):
    """Open-loop run at fixed V; extrema over every step of the window.

    Returns (status, [psi_min, psi_max, alpha_min, alpha_max], psi_samples).
    """
    x = x0.copy()
    ext = np.array([np.inf, -np.inf, np.inf, -np.inf])
    n_samp = n_window // sample_every + 1
    samples = np.empty(n_samp)
    s = 0
    n_total = n_transient + n_window
    for i in range(n_total + 1):
        if i >= n_transient:
            k = i - n_transient
            if x[0] < ext[0]:
                ext[0] = x[0]
            if x[0] > ext[1]:
                ext[1] = x[0]
            if x[2] < ext[2]:
                ext[2] = x[2]
            if x[2] > ext[3]:
                ext[3] = x[2]
            if k % sample_every == 0:
                samples[s] = x[0]
                s += 1
        if i == n_total:
            break
        a0, a1, a2 = plant_field(p, tire, V, x[0], x[1], x[2], 0.0)
        b0, b1, b2 = plant_field(p, tire, V, x[0] + 0.5 * dt * a0, x[1] + 0.5 * dt * a1, x[2] + 0.5 * dt * a2, 0.0)
        c0, c1, c2 = plant_field(p, tire, V, x[0] + 0.5 * dt * b0, x[1] + 0.5 * dt * b1, x[2] + 0.5 * dt * b2, 0.0)
        d0, d1, d2 = plant_field(p, tire, V, x[0] + dt * c0, x[1] + dt * c1, x[2] + dt * c2, 0.0)
        x[0] += dt / 6.0 * (a0 + 2.0 * b0 + 2.0 * c0 + d0)
        x[1] += dt / 6.0 * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
        x[2] += dt / 6.0 * (a2 + 2.0 * b2 + 2.0 * c2 + d2)
        if not (abs(x[0]) < bound and abs(x[1]) < bound and abs(x[2]) < bound):
            return STATUS_DIVERGED, ext, samples[:s]
    return STATUS_OK, ext, samples[:s]
