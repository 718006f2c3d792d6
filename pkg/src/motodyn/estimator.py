"""Rectilinear trims, linearization, LQR-based gain synthesis and the
Luenberger observer.

The observer runs in deviation coordinates x = X - X* around a rectilinear
trim and uses IMU measurements s = (vdot_x, vdot_y, dpsi, dphi):

    dxhat/dt = (A - G C) xhat + G s + (B - G D) u

with C = [H A; F], D = [H B; 0], H selecting the velocity rows and F the
yaw/roll rates.  The gain comes from the filter algebraic Riccati equation.

One structural subtlety is handled explicitly: the model is exactly
yaw-equivariant, so the direction g = e_psi + vx* e_vy satisfies A g = 0 and
C g = 0 — an absolute-heading gauge that no output injection can move ((A -
G C) g = A g for every G).  The design therefore deflates that direction,
synthesizes the gain on the detectable complement and lifts it back; the
closed loop keeps the gauge mode as a marginal pure integrator (its estimate
is anchored by the initial condition, as an IMU-only observer must be).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla

from . import _kernels
from .parameters import ParameterSet, pack, total_mass
from .simulator import Trajectory, DT_MAX
from .state import (N_EXT, N_U, IX_PSI, IX_VX, IX_VY, IX_DPSI, IX_DPHI,
                    IX_DDELTA, IX_DTHF, IX_DTHR, IX_FFX, IX_FRX,
                    validate_extended)

TRIM_SPEED_RANGE = (5.0, 60.0)   # validity window for trim speeds [m/s]
_TRIM_ROWS = np.array([IX_VX, IX_DTHF, IX_DTHR, IX_FFX, IX_FRX])

# measurement selectors: H picks (vx, vy), F picks (dpsi, dphi)
H_SEL = np.zeros((2, N_EXT))
H_SEL[0, IX_VX] = H_SEL[1, IX_VY] = 1.0
F_SEL = np.zeros((2, N_EXT))
F_SEL[0, IX_DPSI] = F_SEL[1, IX_DPHI] = 1.0

RICCATI_RTOL = 1e-6
GAUGE_EIG_TOL = 1e-8


class TrimError(RuntimeError):
    """Trim iteration failed to converge (carries the residual history)."""

    def __init__(self, message, history=None):
        self.history = list(history or [])
        if self.history:
            log = '\n  '.join(f'iter {i}: residual {r:.3e}'
                              for i, r in enumerate(self.history))
            message = f'{message}\n  {log}'
        super().__init__(message)


class LinearizationError(RuntimeError):
    """Finite-difference columns failed the half-step consistency check."""


class DetectabilityError(RuntimeError):
    """An unobservable mode is not strictly stable."""


class RiccatiError(RuntimeError):
    """Riccati solve failed its residual / definiteness postconditions."""


@dataclass(frozen=True)
class TrimPoint:
    """Rectilinear equilibrium (X*, u*) with the achieved residual norm."""

    X_star: np.ndarray
    u_star: np.ndarray
    residual_norm: float

    def __post_init__(self):
        self.X_star.setflags(write=False)
        self.u_star.setflags(write=False)

    @property
    def speed(self) -> float:
        return float(self.X_star[IX_VX])


@dataclass(frozen=True)
class LinearObserverDesign:
    """Linearized model, measurement matrices, gain and diagnostics."""

    A: np.ndarray                      # 14x14 state matrix at the trim
    B: np.ndarray                      # 14x4 input matrix
    C: np.ndarray                      # 4x14 measurement matrix [H A; F]
    D: np.ndarray                      # 4x4 feedthrough [H B; 0]
    G: np.ndarray                      # 14x4 observer gain
    H: np.ndarray                      # velocity-row selector
    F: np.ndarray                      # rate-state selector
    closed_loop_spectrum: np.ndarray   # eig(A - G C), 14 values
    Q_w: np.ndarray                    # process weight (normalized coords)
    R_w: np.ndarray                    # measurement weight
    trim: TrimPoint
    gauge: np.ndarray                  # deflated marginal direction
    state_scales: np.ndarray           # normalization used for the ARE solve
    wheel_radii: tuple                 # (R_f, R_r), for the no-slip init rule
    riccati_residual: float
    stability_margin: float            # max Re over non-gauge modes (< 0)


def find_trim(v_target: float, p: ParameterSet, tol: float = 1e-9,
              max_iter: int = 50) -> TrimPoint:
    """Newton solve for the rectilinear equilibrium at forward speed v_target.

    Unknowns are the wheel speeds, longitudinal tire forces and drive torque;
    every lateral, roll and steer entry is pinned to exactly zero.  The
    converged point satisfies ||h(X*, u*)||_inf < 1e-8.
    """
    if not TRIM_SPEED_RANGE[0] <= v_target <= TRIM_SPEED_RANGE[1]:
        raise TrimError(f'trim speed {v_target} m/s outside validity range '
                        f'{TRIM_SPEED_RANGE}')
    P = pack(p)
    drag = 0.5 * p.rho_air * p.C_d * p.A_v * v_target ** 2

    def build(z):
        X = np.zeros(N_EXT)
        X[IX_VX] = v_target
        X[IX_DTHF], X[IX_DTHR] = z[0], z[1]
        X[IX_FFX], X[IX_FRX] = z[2], z[3]
        u = np.zeros(N_U)
        u[1] = z[4]
        return X, u

    def residual(z):
        X, u = build(z)
        return _kernels.rhs_ext(X, u, P)[_TRIM_ROWS]

    # no-slippage seed, forces balancing drag, torque balancing the rear wheel
    z = np.array([v_target / p.R_f, v_target / p.R_r, 0.0, drag, drag * p.R_r])
    history = []
    converged = False
    for _ in range(max_iter):
        r0 = residual(z)
        history.append(float(np.max(np.abs(r0))))
        if history[-1] < tol:
            converged = True
            break
        J = np.empty((5, 5))
        for j in range(5):
            hj = 1e-6 * max(1.0, abs(z[j]))
            zp, zm = z.copy(), z.copy()
            zp[j] += hj
            zm[j] -= hj
            J[:, j] = (residual(zp) - residual(zm)) / (2.0 * hj)
        try:
            dz = np.linalg.solve(J, r0)
        except np.linalg.LinAlgError as exc:
            raise TrimError(f'singular trim Jacobian: {exc}', history) from exc
        z = z - dz
    X, u = build(z)
    full = float(np.max(np.abs(_kernels.rhs_ext(X, u, P))))
    if not converged and full >= 1e-8:
        raise TrimError(f'trim did not converge in {max_iter} iterations '
                        f'(residual {full:.3e})', history)
    if full >= 1e-8:
        raise TrimError(f'trim residual {full:.3e} exceeds 1e-8', history)
    return TrimPoint(X_star=X, u_star=u, residual_norm=full)


def linearize(tp: TrimPoint, p: ParameterSet):
    """Central-difference linearization (A, B) at the trim.

    Per-coordinate steps 1e-6 * max(1, |entry|); every column is recomputed
    at half step and must agree to 1e-4 relative.  The attitude-rate copy
    rows are set to their exact identity structure.
    """
    P = pack(p)
    Xs, us = np.array(tp.X_star), np.array(tp.u_star)

    def columns(step_scale):
        A = np.empty((N_EXT, N_EXT))
        B = np.empty((N_EXT, N_U))
        for j in range(N_EXT):
            hj = step_scale * max(1.0, abs(Xs[j]))
            Xp, Xm = Xs.copy(), Xs.copy()
            Xp[j] += hj
            Xm[j] -= hj
            A[:, j] = (_kernels.rhs_ext(Xp, us, P)
                       - _kernels.rhs_ext(Xm, us, P)) / (2.0 * hj)
        for j in range(N_U):
            hj = step_scale * max(1.0, abs(us[j]))
            up, um = us.copy(), us.copy()
            up[j] += hj
            um[j] -= hj
            B[:, j] = (_kernels.rhs_ext(Xs, up, P)
                       - _kernels.rhs_ext(Xs, um, P)) / (2.0 * hj)
        return A, B

    A, B = columns(1e-6)
    A2, B2 = columns(5e-7)
    for M1, M2, name in ((A, A2, 'A'), (B, B2, 'B')):
        scale = max(np.max(np.abs(M2)), 1.0)
        dev = np.max(np.abs(M1 - M2), axis=0) / scale
        if np.any(dev >= 1e-4):
            j = int(np.argmax(dev))
            raise LinearizationError(
                f'{name} column {j} half-step deviation {dev[j]:.3e} >= 1e-4')
    # exact identity structure of the attitude copy rows
    A[0:3, :] = 0.0
    A[0, IX_DPSI] = 1.0
    A[1, IX_DPHI] = 1.0
    A[2, IX_DDELTA] = 1.0
    B[0:3, :] = 0.0
    return A, B


def measurement_model(A, B):
    """Measurement matrices (C, D) for s = (vdot_x, vdot_y, dpsi, dphi).

    C = [H A; F] and D = [H B; 0]: the acceleration rows reproduce the
    velocity rows of the linear dynamics, the rate rows read states directly.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != (N_EXT, N_EXT) or B.shape != (N_EXT, N_U):
        raise ValueError(f'expected A (14,14) and B (14,4), got {A.shape}, {B.shape}')
    C = np.vstack([H_SEL @ A, F_SEL])
    D = np.vstack([H_SEL @ B, np.zeros((2, N_U))])
    return C, D


def gauge_direction(tp: TrimPoint) -> np.ndarray:
    """Unit vector of the yaw-gauge symmetry mode at the trim."""
    g = np.zeros(N_EXT)
    g[IX_PSI] = 1.0
    g[IX_VY] = tp.speed
    return g / np.linalg.norm(g)


def unobservable_modes(A, C, tol: float = 1e-8):
    """Eigenvalues whose modes fail the PBH observability rank test."""
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    n = A.shape[0]
    thresh = tol * max(1.0, np.linalg.norm(A, 2))
    bad = []
    for lam in np.linalg.eigvals(A):
        sv = np.linalg.svd(np.vstack([A - lam * np.eye(n), C]),
                           compute_uv=False)
        if sv[-1] < thresh:
            bad.append(complex(lam))
    return bad


def design_gain(A, C, Q_w, R_w, marginal_directions=None):
    """Observer gain from the filter algebraic Riccati equation.

    Solves A P + P A^T - P C^T R_w^{-1} C P + Q_w = 0 for the stabilizing
    P >= 0 and returns (G, spectrum) with G = P C^T R_w^{-1} and spectrum =
    eig(A - G C).  (A, C) must be detectable: unobservable modes found by
    the PBH test must be strictly stable.

    marginal_directions, when given, lists known symmetry directions g with
    A g = 0 and C g = 0 that no gain can stabilize; these are deflated, the
    equation is solved on the orthogonal complement and the gain lifted
    back, leaving the marginal modes at zero.
    """
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    Q_w = np.asarray(Q_w, dtype=float)
    R_w = np.asarray(R_w, dtype=float)
    n = A.shape[0]

    if marginal_directions is None or len(marginal_directions) == 0:
        W = np.eye(n)
        n_marg = 0
    else:
        Gm = np.column_stack([np.asarray(g, dtype=float) for g in marginal_directions])
        n_marg = Gm.shape[1]
        for k in range(n_marg):
            g = Gm[:, k] / np.linalg.norm(Gm[:, k])
            if np.linalg.norm(A @ g) > 1e-6 * max(1.0, np.linalg.norm(A, 2)) \
                    or np.linalg.norm(C @ g) > 1e-6 * max(1.0, np.linalg.norm(C, 2)):
                raise DetectabilityError(
                    'declared marginal direction is not an exact null '
                    f'direction (||A g|| = {np.linalg.norm(A @ g):.3e}, '
                    f'||C g|| = {np.linalg.norm(C @ g):.3e})')
        W = sla.null_space(Gm.T)

    Ad = W.T @ A @ W
    Cd = C @ W
    Qd = W.T @ Q_w @ W
    bad = [lam for lam in unobservable_modes(Ad, Cd) if lam.real >= 0.0]
    if bad:
        raise DetectabilityError(
            f'not detectable: unobservable modes with Re >= 0: {bad}')
    try:
        P = sla.solve_continuous_are(Ad.T, Cd.T, Qd, R_w)
    except Exception as exc:
        raise RiccatiError(f'Riccati solve failed: {exc}') from exc
    P = 0.5 * (P + P.T)
    resid = np.max(np.abs(Ad @ P + P @ Ad.T
                          - P @ Cd.T @ np.linalg.solve(R_w, Cd @ P) + Qd))
    bound = RICCATI_RTOL * max(np.max(np.abs(Q_w)), np.finfo(float).tiny)
    if resid >= bound:
        raise RiccatiError(f'Riccati residual {resid:.3e} exceeds {bound:.3e}')
    if np.min(np.linalg.eigvalsh(P)) < -1e-9 * max(1.0, np.max(np.abs(P))):
        raise RiccatiError('Riccati solution is not positive semidefinite')
    G = W @ (P @ Cd.T @ np.linalg.inv(R_w))
    spectrum = np.linalg.eigvals(A - G @ C)
    # marginal (gauge) modes sit at zero by construction; exclude the n_marg
    # smallest-magnitude eigenvalues from the strict Hurwitz requirement
    order = np.argsort(np.abs(spectrum))
    gauge_eigs = spectrum[order[:n_marg]]
    rest = spectrum[order[n_marg:]]
    if n_marg and np.max(np.abs(gauge_eigs)) >= GAUGE_EIG_TOL:
        raise RiccatiError(
            f'marginal modes moved away from zero: {gauge_eigs}')
    if rest.size and np.max(rest.real) >= 0.0:
        raise RiccatiError(
            f'closed loop not Hurwitz: max Re = {np.max(rest.real):.3e}')
    return G, spectrum


def default_weights(p: ParameterSet):
    """Default LQR weights in normalized coordinates.

    Identity process weight; measurement weight 1e-2 I, reflecting the
    idealized (noise-free) IMU of the acceptance protocol.  A neutral
    R_w = I makes the speed/wheel-speed estimates converge on a ~20 s time
    constant, far slower than the 5 s target, so the default trusts the
    measurements more.  Override per design as needed.
    """
    return np.eye(N_EXT), 1e-2 * np.eye(N_U)


def state_scales(p: ParameterSet) -> np.ndarray:
    """Characteristic state magnitudes used to normalize the ARE solve.

    Tire-force states are O(1e2..1e3) N while angles are O(1) rad; solving
    the Riccati equation in raw units puts its residual floor above the
    contract bound, so forces are scaled by the mean static wheel load.
    """
    d = np.ones(N_EXT)
    d[IX_FFX:] = 0.5 * total_mass(p) * p.g
    return d


def design_observer(p: ParameterSet, v_target: float, Q_w=None, R_w=None,
                    tp: Optional[TrimPoint] = None) -> LinearObserverDesign:
    """Full design pipeline: trim, linearize, deflate the yaw gauge,
    synthesize the gain in normalized coordinates.

    Q_w and R_w apply in the normalized coordinates (see state_scales);
    defaults per default_weights.
    """
    if tp is None:
        tp = find_trim(v_target, p)
    A, B = linearize(tp, p)
    g = gauge_direction(tp)
    # the model is exactly yaw-equivariant; remove finite-difference noise
    # from the known null direction before building C = [H A; F]
    A = A - np.outer(A @ g, g)
    C, D = measurement_model(A, B)

    Qd, Rd = default_weights(p)
    if Q_w is not None:
        Q_w = np.asarray(Q_w, dtype=float)
        Qd = np.diag(Q_w) if Q_w.ndim == 1 else Q_w
    else:
        Q_w = Qd
    if R_w is not None:
        R_w = np.asarray(R_w, dtype=float)
        Rd = np.diag(R_w) if R_w.ndim == 1 else R_w
    else:
        R_w = Rd

    d = state_scales(p)
    Dm = np.diag(d)
    Dmi = np.diag(1.0 / d)
    An = Dmi @ A @ Dm
    Cn = C @ Dm
    gn = Dmi @ g
    gn = gn / np.linalg.norm(gn)
    Gn, _ = design_gain(An, Cn, Qd, Rd, marginal_directions=[gn])
    G = Dm @ Gn
    spectrum = np.linalg.eigvals(A - G @ C)
    order = np.argsort(np.abs(spectrum))
    margin = float(np.max(spectrum[order[1:]].real))
    # recompute the residual of the solved (normalized, deflated) equation
    W = sla.null_space(gn[None, :])
    Ad, Cd = W.T @ An @ W, Cn @ W
    Qr_ = W.T @ Qd @ W
    P = sla.solve_continuous_are(Ad.T, Cd.T, Qr_, Rd)
    resid = float(np.max(np.abs(Ad @ P + P @ Ad.T
                                - P @ Cd.T @ np.linalg.solve(Rd, Cd @ P) + Qr_)))
    return LinearObserverDesign(
        A=A, B=B, C=C, D=D, G=G, H=H_SEL.copy(), F=F_SEL.copy(),
        closed_loop_spectrum=spectrum, Q_w=np.asarray(Qd), R_w=np.asarray(Rd),
        trim=tp, gauge=g, state_scales=d, wheel_radii=(p.R_f, p.R_r),
        riccati_residual=resid, stability_margin=margin)


# --------------------------------------------------------------------------
# observer propagation

def no_slippage_init(design: LinearObserverDesign,
                     v_nominal: Optional[float] = None) -> np.ndarray:
    """Initial absolute estimate: wheels rolling slip-free at v_nominal
    (theta_dot = v / R), every other state including tire forces at zero."""
    v0 = design.trim.speed if v_nominal is None else float(v_nominal)
    R_f, R_r = design.wheel_radii
    Xh = np.zeros(N_EXT)
    Xh[IX_VX] = v0
    Xh[IX_DTHF] = v0 / R_f
    Xh[IX_DTHR] = v0 / R_r
    return Xh


def observer_step(x_hat, s, u_dev, design: LinearObserverDesign,
                  dt: float) -> np.ndarray:
    """One fixed-step update of the deviation-coordinate observer."""
    x_hat = np.asarray(x_hat, dtype=float)
    s = np.asarray(s, dtype=float)
    u_dev = np.asarray(u_dev, dtype=float)
    if x_hat.shape != (N_EXT,) or s.shape != (N_U,) or u_dev.shape != (N_U,):
        raise ValueError('bad shapes for observer step')
    if not 0.0 < dt <= DT_MAX:
        raise ValueError(f'dt must be in (0, {DT_MAX}], got {dt}')
    Acl = design.A - design.G @ design.C
    Bcl = design.B - design.G @ design.D
    out, fail = _kernels.observer_loop(x_hat, s[None, :], u_dev[None, :],
                                       Acl, design.G, Bcl, dt)
    if fail >= 0:
        raise RuntimeError('observer step produced a non-finite state')
    return out[1]


def run_observer(measurements, inputs, design: LinearObserverDesign,
                 x_hat0=None, dt: float = 1e-3):
    """Propagate the observer over aligned measurement and input traces.

    measurements: (n, 4) absolute IMU samples in internal order
    (vdot_x, vdot_y, dpsi, dphi); inputs: (n, 4) absolute input samples;
    both zero-order held over each step.  x_hat0 is the absolute initial
    estimate (default: no-slippage rule at the design speed).  Returns
    (t, X_hat) with X_hat[k] the absolute estimate at t[k] = k dt.
    """
    S = np.array(measurements, dtype=float)   # fresh writable copies (numba
    U = np.array(inputs, dtype=float)         # specializes on mutability)
    if S.ndim != 2 or S.shape[1] != N_U:
        raise ValueError(f'measurements must be (n, 4), got {S.shape}')
    if U.shape != S.shape:
        raise ValueError(f'input trace shape {U.shape} does not match '
                         f'measurement trace shape {S.shape}')
    if not 0.0 < dt <= DT_MAX:
        raise ValueError(f'dt must be in (0, {DT_MAX}], got {dt}')
    if x_hat0 is None:
        x_hat0 = no_slippage_init(design)
    x_hat0 = validate_extended(x_hat0)
    xh0 = x_hat0 - design.trim.X_star
    Udev = U - design.trim.u_star[None, :]
    Acl = design.A - design.G @ design.C
    Bcl = design.B - design.G @ design.D
    out, fail = _kernels.observer_loop(np.ascontiguousarray(xh0), S, Udev,
                                       Acl, design.G, Bcl, dt)
    if fail >= 0:
        raise RuntimeError(f'observer diverged at step {fail}')
    t = np.arange(S.shape[0] + 1) * dt
    return t, out + design.trim.X_star[None, :]


def synthesize_measurements(traj: Trajectory, noise_std=None, seed=0):
    """Idealized IMU samples from a plant trajectory.

    Returns (n, 4) array (vdot_x, vdot_y, dpsi, dphi) at the trajectory grid
    points excluding the final one (each sample drives one observer step).
    Optional per-channel additive Gaussian noise.
    """
    n = len(traj.t) - 1
    if n < 1:
        raise ValueError('trajectory too short to synthesize measurements')
    S = np.column_stack([traj.accel[:n, 0], traj.accel[:n, 1],
                         traj.states[:n, IX_DPSI], traj.states[:n, IX_DPHI]])
    if noise_std is not None:
        noise_std = np.asarray(noise_std, dtype=float)
        if noise_std.shape != (4,):
            raise ValueError('noise_std must have 4 entries (ax, ay, dpsi, dphi)')
        if np.any(noise_std > 0):
            rng = np.random.default_rng(seed)
            S = S + rng.standard_normal(S.shape) * noise_std[None, :]
    return S
