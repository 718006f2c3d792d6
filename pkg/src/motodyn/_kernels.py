"""Numba-compiled dynamics kernels.

Single source of truth for the model math; the public modules (kinematics,
multibody, tire, simulator, estimator) are thin wrappers around these
functions.  Everything here takes the packed parameter vector produced by
``parameters.pack`` and plain float64 arrays, so the hot loops (fixed-step
integration, observer propagation) run without Python overhead.

Frame conventions: inertial frame z-up; vehicle frame V yawed by psi; roll
about the vehicle x axis; caster tilt is the constant middle rotation of the
front chain; steer about the caster-tilted z axis.
"""
import numpy as np
from numba import njit

from .parameters import (IP_LF, IP_LR, IP_H, IP_RF, IP_RR, IP_S, IP_E, IP_F,
                         IP_A, IP_C, IP_EPS, IP_MGF, IP_MGR, IP_MRF, IP_MRR,
                         IP_CD, IP_AV, IP_RHO, IP_KDELTA, IP_G, IP_SFX,
                         IP_SRX, IP_SFY, IP_SRY, IP_FFZ, IP_FRZ,
                         IP_LATPAPER, IP_ARMCASTER, IP_VEPS, IP_J, IP_TIRE,
                         BODY_GF, BODY_GR, BODY_RF, BODY_RR)

HALF_PI = 0.5 * np.pi


@njit(cache=True)
def rot_x(a):
    c, s = np.cos(a), np.sin(a)
    R = np.empty((3, 3))
    R[0, 0], R[0, 1], R[0, 2] = 1.0, 0.0, 0.0
    R[1, 0], R[1, 1], R[1, 2] = 0.0, c, -s
    R[2, 0], R[2, 1], R[2, 2] = 0.0, s, c
    return R


@njit(cache=True)
def rot_y(a):
    # sign layout of the caster-tilt matrix: -sin in row 1, column 3
    c, s = np.cos(a), np.sin(a)
    R = np.empty((3, 3))
    R[0, 0], R[0, 1], R[0, 2] = c, 0.0, -s
    R[1, 0], R[1, 1], R[1, 2] = 0.0, 1.0, 0.0
    R[2, 0], R[2, 1], R[2, 2] = s, 0.0, c
    return R


@njit(cache=True)
def rot_z(a):
    c, s = np.cos(a), np.sin(a)
    R = np.empty((3, 3))
    R[0, 0], R[0, 1], R[0, 2] = c, -s, 0.0
    R[1, 0], R[1, 1], R[1, 2] = s, c, 0.0
    R[2, 0], R[2, 1], R[2, 2] = 0.0, 0.0, 1.0
    return R


@njit(cache=True)
def _cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def _zcross(a):
    # e_z x a
    out = np.empty(3)
    out[0] = -a[1]
    out[1] = a[0]
    out[2] = 0.0
    return out


@njit(cache=True)
def _xcross(a):
    # e_x x a
    out = np.empty(3)
    out[0] = 0.0
    out[1] = -a[2]
    out[2] = a[1]
    return out


@njit(cache=True)
def body_chain_V(b, phi, delta, P):
    """Pose of body b in the vehicle frame: position r_V and rotation R_V."""
    Rphi = rot_x(phi)
    if b == BODY_GR:
        u = np.array([0.0, 0.0, P[IP_H]])
        return Rphi @ u, Rphi
    if b == BODY_RR:
        u = np.array([-P[IP_LR], 0.0, P[IP_RR]])
        return Rphi @ u, Rphi
    Reps = rot_y(P[IP_EPS])
    Rdel = rot_z(delta)
    if b == BODY_GF:
        u = np.array([P[IP_E], 0.0, P[IP_F]])
    else:
        u = np.array([P[IP_C], 0.0, -P[IP_S]])
    arm = np.array([P[IP_A], 0.0, 0.0])
    rV = Rphi @ (Reps @ (arm + Rdel @ u))
    RV = Rphi @ (Reps @ Rdel)
    return rV, RV


@njit(cache=True)
def body_kin(b, psi, phi, delta, v, P):
    """World kinematics of body b at x = y = 0.

    Returns (r, R, Jv, Jw, a_res, g_res): world pose, the 3x7 velocity and
    angular-velocity Jacobians w.r.t. the generalized velocity, and the
    residual accelerations defined by the exact decompositions
    a = Jv @ vdot + a_res and gamma = Jw @ vdot + g_res.
    """
    dpsi, dphi, ddelta = v[2], v[3], v[4]
    Rpsi = rot_z(psi)
    Rphi = rot_x(phi)

    front = b == BODY_GF or b == BODY_RF
    if b == BODY_GR:
        u = np.array([0.0, 0.0, P[IP_H]])
    elif b == BODY_RR:
        u = np.array([-P[IP_LR], 0.0, P[IP_RR]])
    elif b == BODY_GF:
        u = np.array([P[IP_E], 0.0, P[IP_F]])
    else:
        u = np.array([P[IP_C], 0.0, -P[IP_S]])

    if front:
        Reps = rot_y(P[IP_EPS])
        Rdel = rot_z(delta)
        RphiReps = Rphi @ Reps
        w = RphiReps @ (Rdel @ u)         # steer-dependent offset, V frame
        rV = RphiReps @ np.array([P[IP_A], 0.0, 0.0]) + w
        RV = RphiReps @ Rdel
        zs = RphiReps[:, 2].copy()        # steer axis in V frame (= Rphi Reps e_z)
        drV_dd = _cross(zs, w)
    else:
        rV = Rphi @ u
        RV = Rphi
        zs = np.zeros(3)
        w = np.zeros(3)
        drV_dd = np.zeros(3)
    drV_dphi = _xcross(rV)                # phi is the outermost chain rotation

    r = Rpsi @ rV
    R = Rpsi @ RV

    Jv = np.zeros((3, 7))
    Jv[0, 0] = 1.0
    Jv[1, 1] = 1.0
    Jv[:, 2] = _zcross(r)
    Jv[:, 3] = Rpsi @ drV_dphi
    if front:
        Jv[:, 4] = Rpsi @ drV_dd

    xhat = Rpsi[:, 0].copy()              # roll axis in world frame
    Jw = np.zeros((3, 7))
    Jw[2, 2] = 1.0
    Jw[:, 3] = xhat
    spin_col = -1
    if front:
        zsw = Rpsi @ zs                   # steer axis in world frame
        Jw[:, 4] = zsw
        if b == BODY_RF:
            spin_col = 5
    else:
        zsw = np.zeros(3)
        if b == BODY_RR:
            spin_col = 6
    yw = R[:, 1].copy()                   # wheel spin axis in world frame
    if spin_col >= 0:
        Jw[:, spin_col] = yw

    # residual linear acceleration (total derivative of Jv v at vdot = 0)
    drV_dt = dphi * drV_dphi + ddelta * drV_dd
    if front:
        dzs = dphi * _xcross(zs)
        dw = dphi * _xcross(w) + ddelta * _cross(zs, w)
        d2rV = dphi * _xcross(drV_dt) + ddelta * (_cross(dzs, w) + _cross(zs, dw))
    else:
        d2rV = dphi * _xcross(drV_dt)
    a_res = (dpsi * dpsi) * _zcross(_zcross(r)) \
        + (2.0 * dpsi) * _zcross(Rpsi @ drV_dt) \
        + Rpsi @ d2rV

    # residual angular acceleration
    g_res = (dphi * dpsi) * _zcross(xhat)
    if front:
        g_res = g_res + ddelta * (dpsi * _zcross(zsw) + dphi * _cross(xhat, zsw))
    if spin_col >= 0:
        dth = v[spin_col]
        omega_c = np.array([0.0, 0.0, dpsi]) + dphi * xhat
        if front:
            omega_c = omega_c + ddelta * zsw
        g_res = g_res + dth * _cross(omega_c, yw)
    return r, R, Jv, Jw, a_res, g_res


@njit(cache=True)
def body_wrench(b, psi, phi, delta, ddelta, vxV, Ffx, Frx, Ffy, Fry, u, P):
    """Applied force and moment on body b, inertial frame.

    Gravity on every body, drag on the rear body, tire forces on the wheels
    with the contact-arm moment correction, input torques per body.  Tire
    force vectors are vehicle-frame quantities rotated to the world.
    """
    Rpsi = rot_z(psi)
    mb = (P[IP_MGF], P[IP_MGR], P[IP_MRF], P[IP_MRR])[b]
    Fv = np.zeros(3)       # V-frame force to rotate
    Mv = np.zeros(3)       # V-frame moment to rotate
    Fw = np.array([0.0, 0.0, -mb * P[IP_G]])   # gravity is yaw-invariant
    if b == BODY_GR:
        Fv[0] = -0.5 * P[IP_RHO] * P[IP_CD] * P[IP_AV] * vxV * vxV
    elif b == BODY_RR:
        FT = np.array([Frx, Fry, P[IP_FRZ]])
        Fv += FT
        arm = rot_x(phi) @ np.array([0.0, 0.0, -P[IP_RR]])
        Mv[1] += u[1] + u[3]               # drive + rear brake torque
        Mv += _cross(arm, FT)
    elif b == BODY_GF:
        Mv[2] += u[0] - P[IP_KDELTA] * ddelta   # steer torque, damped
    else:
        FT = np.array([Ffx, Ffy, P[IP_FFZ]])
        Fv += FT
        if P[IP_ARMCASTER] != 0.0:
            arm = rot_x(phi) @ (rot_y(P[IP_EPS]) @ (rot_z(delta) @ np.array([0.0, 0.0, -P[IP_RF]])))
        else:
            arm = rot_x(phi) @ (rot_z(delta) @ np.array([0.0, 0.0, -P[IP_RF]]))
        Mv[1] += u[2]                      # front brake torque
        Mv += _cross(arm, FT)
    F = Fw + Rpsi @ Fv
    M = Rpsi @ Mv
    return F, M


@njit(cache=True)
def assemble(psi, phi, delta, v, Ffx, Frx, Ffy, Fry, u, P):
    """Generalized mass matrix and effort vectors of the 7-DOF system.

    M = sum_i m_i Jv_i^T Jv_i + Jw_i^T Jt_i Jw_i        (symmetrized)
    Qa = sum_i Jv_i^T F_i + Jw_i^T M_i
    Qr = sum_i m_i Jv_i^T a_res_i + Jw_i^T (Jt_i g_res_i + w_i x Jt_i w_i)
    """
    cpsi, spsi = np.cos(psi), np.sin(psi)
    vxV = cpsi * v[0] + spsi * v[1]

    M = np.zeros((7, 7))
    Qa = np.zeros(7)
    Qr = np.zeros(7)
    masses = (P[IP_MGF], P[IP_MGR], P[IP_MRF], P[IP_MRR])
    for b in range(4):
        r, R, Jv, Jw, a_res, g_res = body_kin(b, psi, phi, delta, v, P)
        # world inertia Jt = R J R^T, symmetrized
        J = np.empty((3, 3))
        for i in range(3):
            for j in range(3):
                J[i, j] = P[IP_J + 9 * b + 3 * i + j]
        Jt = R @ J @ R.T
        for i in range(3):
            for j in range(i + 1, 3):
                m_ = 0.5 * (Jt[i, j] + Jt[j, i])
                Jt[i, j] = m_
                Jt[j, i] = m_
        mb = masses[b]
        JtJw = Jt @ Jw
        M += mb * (Jv.T @ Jv) + Jw.T @ JtJw
        F, Mo = body_wrench(b, psi, phi, delta, v[4], vxV, Ffx, Frx, Ffy, Fry, u, P)
        Qa += Jv.T @ F + Jw.T @ Mo
        wv = Jw @ v
        Qr += (mb * (Jv.T @ a_res)) + Jw.T @ (Jt @ g_res + _cross(wv, Jt @ wv))
    # exact symmetrization
    for i in range(7):
        for j in range(i + 1, 7):
            m_ = 0.5 * (M[i, j] + M[j, i])
            M[i, j] = m_
            M[j, i] = m_
    return M, Qa, Qr


@njit(cache=True)
def slip_quantities(psi, phi, delta, vx, vy, dpsi, dthf, dthr, P):
    """Slips (kf, kr, af, ar, gf, gr), vehicle-frame speeds, low-speed flag."""
    cpsi, spsi = np.cos(psi), np.sin(psi)
    vxV = cpsi * vx + spsi * vy
    vyV = -spsi * vx + cpsi * vy
    veps = P[IP_VEPS]
    low = np.abs(vxV) < veps
    den = max(np.abs(vxV), veps)
    if vxV >= 0.0:
        dsg = max(vxV, veps)
    else:
        dsg = min(vxV, -veps)
    kf = (P[IP_RF] * dthf - vxV) / den
    kr = (P[IP_RR] * dthr - vxV) / den
    eps = P[IP_EPS]
    af = delta * np.cos(eps) - np.arctan((vyV + P[IP_LF] * dpsi) / dsg)
    ar = -np.arctan((vyV - P[IP_LR] * dpsi) / dsg)
    gf = phi + delta * np.sin(eps)
    gr = phi
    return kf, kr, af, ar, gf, gr, vxV, vyV, low


@njit(cache=True)
def magic_formula(B, C, D, E, mu):
    Bm = B * mu
    return D * np.sin(C * np.arctan(Bm - E * (Bm - np.arctan(Bm))))


@njit(cache=True)
def _wheel_steady(wheel, kappa, alpha, gamma, Fz, P):
    base = IP_TIRE + 12 * wheel
    Fx0 = magic_formula(P[base], P[base + 1], P[base + 2] * Fz, P[base + 3], kappa)
    Fy0 = magic_formula(P[base + 4], P[base + 5], P[base + 6] * Fz, P[base + 7], alpha)
    # camber thrust points toward the lean side: positive roll leans toward
    # -y in these frames, so the camber channel is evaluated at -gamma
    Fy0 += magic_formula(P[base + 8], P[base + 9], P[base + 10] * Fz, P[base + 11], -gamma)
    return Fx0, Fy0


@njit(cache=True)
def steady_forces(kf, kr, af, ar, gf, gr, Ffz, Frz, P):
    Ffx0, Ffy0 = _wheel_steady(0, kf, af, gf, Ffz, P)
    Frx0, Fry0 = _wheel_steady(1, kr, ar, gr, Frz, P)
    return Ffx0, Frx0, Ffy0, Fry0


@njit(cache=True)
def rhs_ext(X, u, P):
    """Extended-model state derivative h(X, u); 14-vector.

    Identity block copies the attitude rates, the middle seven solve the
    Jourdain system, the last four are first-order tire-force relaxation.
    """
    psi, phi, delta = X[0], X[1], X[2]
    v = X[3:10].copy()
    M, Qa, Qr = assemble(psi, phi, delta, v, X[10], X[11], X[12], X[13], u, P)
    rhsv = Qa - Qr
    vdot = np.linalg.solve(M, rhsv.copy())
    kf, kr, af, ar, gf, gr, vxV, vyV, _ = slip_quantities(
        psi, phi, delta, v[0], v[1], v[2], v[5], v[6], P)
    Ffx0, Frx0, Ffy0, Fry0 = steady_forces(kf, kr, af, ar, gf, gr,
                                           P[IP_FFZ], P[IP_FRZ], P)
    if P[IP_LATPAPER] != 0.0:
        lat_speed = vyV
    else:
        lat_speed = np.abs(vxV)
    Xd = np.empty(14)
    Xd[0] = v[2]
    Xd[1] = v[3]
    Xd[2] = v[4]
    Xd[3:10] = vdot
    Xd[10] = np.abs(vxV) / P[IP_SFX] * (Ffx0 - X[10])
    Xd[11] = np.abs(vxV) / P[IP_SRX] * (Frx0 - X[11])
    Xd[12] = lat_speed / P[IP_SFY] * (Ffy0 - X[12])
    Xd[13] = lat_speed / P[IP_SRY] * (Fry0 - X[13])
    return Xd


@njit(cache=True)
def rk4_step(X, u, dt, P):
    k1 = rhs_ext(X, u, P)
    k2 = rhs_ext(X + (0.5 * dt) * k1, u, P)
    k3 = rhs_ext(X + (0.5 * dt) * k2, u, P)
    k4 = rhs_ext(X + dt * k3, u, P)
    return X + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True)
def simulate_loop(X0, U, dt, P):
    """Fixed-step integration over n = U.shape[0] steps with ZOH inputs.

    Returns (states (n+1,14), accel (n+1,2), low_speed (n+1,), fail_step);
    fail_step is -1 on success, else the index of the step whose result went
    non-finite or out of the roll domain (arrays are valid up to and
    including that index).
    """
    n = U.shape[0]
    out = np.empty((n + 1, 14))
    acc = np.empty((n + 1, 2))
    low = np.zeros(n + 1, np.bool_)
    out[0] = X0
    fail = -1
    for k in range(n):
        X = out[k]
        u = U[k]
        k1 = rhs_ext(X, u, P)
        acc[k, 0] = k1[3]
        acc[k, 1] = k1[4]
        _, _, _, _, _, _, vxV, _, lowk = slip_quantities(
            X[0], X[1], X[2], X[3], X[4], X[5], X[8], X[9], P)
        low[k] = lowk
        k2 = rhs_ext(X + (0.5 * dt) * k1, u, P)
        k3 = rhs_ext(X + (0.5 * dt) * k2, u, P)
        k4 = rhs_ext(X + dt * k3, u, P)
        Xn = X + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        ok = True
        for i in range(14):
            if not np.isfinite(Xn[i]):
                ok = False
        if ok and np.abs(Xn[1]) >= HALF_PI:
            ok = False
        if not ok:
            fail = k
            for kk in range(k + 1, n + 1):
                out[kk] = np.nan
                acc[kk, 0] = np.nan
                acc[kk, 1] = np.nan
            return out, acc, low, fail
        out[k + 1] = Xn
    # derived outputs at the final grid point, last input held
    hN = rhs_ext(out[n], U[n - 1], P)
    acc[n, 0] = hN[3]
    acc[n, 1] = hN[4]
    _, _, _, _, _, _, _, _, lowN = slip_quantities(
        out[n, 0], out[n, 1], out[n, 2], out[n, 3], out[n, 4],
        out[n, 5], out[n, 8], out[n, 9], P)
    low[n] = lowN
    return out, acc, low, fail


@njit(cache=True)
def observer_loop(xh0, S, Udev, Acl, G, Bcl, dt):
    """Propagate the deviation-coordinate observer over n steps (ZOH forcing).

    dxh/dt = Acl xh + G s + Bcl u, integrated with the same fixed-step
    scheme as the plant.  Returns (states (n+1,14), fail_step).
    """
    n = S.shape[0]
    out = np.empty((n + 1, xh0.shape[0]))
    out[0] = xh0
    fail = -1
    for k in range(n):
        x = out[k]
        const = G @ S[k] + Bcl @ Udev[k]
        k1 = Acl @ x + const
        k2 = Acl @ (x + (0.5 * dt) * k1) + const
        k3 = Acl @ (x + (0.5 * dt) * k2) + const
        k4 = Acl @ (x + dt * k3) + const
        xn = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        ok = True
        for i in range(xn.shape[0]):
            if not np.isfinite(xn[i]):
                ok = False
        if not ok:
            fail = k
            for kk in range(k + 1, n + 1):
                out[kk] = np.nan
            return out, fail
        out[k + 1] = xn
    return out, fail


def warmup():
    """Trigger JIT compilation of the hot path (cached across processes)."""
    P = np.ones(IP_TIRE + 24)
    P[IP_EPS] = 0.4
    P[IP_VEPS] = 0.5
    P[IP_LATPAPER] = 0.0
    P[IP_ARMCASTER] = 0.0
    X = np.zeros(14)
    X[3] = 10.0
    X[8] = 10.0
    X[9] = 10.0
    u = np.zeros(4)
    U = np.zeros((2, 4))
    simulate_loop(X, U, 1e-3, P)
    observer_loop(np.zeros(14), np.zeros((2, 4)), U, np.eye(14) * -1.0,
                  np.zeros((14, 4)), np.zeros((14, 4)), 1e-3)
