"""Generalized mass matrix, applied efforts and residual efforts.

Projects the Newton-Euler equations of the four bodies onto the partial
velocities, giving M(q) vdot = Qa - Qr without a Lagrangian.  Applied efforts
cover gravity, aerodynamic drag on the rear body, tire forces at the wheels
with the contact-arm moment corrections, drive/brake torques on the wheels
and the damped steering torque on the front body.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .parameters import ParameterSet, pack, _body_id
from .state import IQ_PSI, IQ_PHI, IQ_DELTA, IV_DDELTA, validate_q, validate_v, validate_input
from .kinematics import BODY_NAMES

COND_LIMIT = 1e12


class DegenerateConfigurationError(RuntimeError):
    """Mass matrix numerically singular at the requested configuration."""


@dataclass(frozen=True)
class Wrench:
    """Force and moment on one body, inertial frame."""

    force: np.ndarray    # [N]
    moment: np.ndarray   # [N m]


@dataclass(frozen=True)
class TireForceState:
    """Instantaneous tire forces plus the static vertical loads [N]."""

    F_fx: float
    F_rx: float
    F_fy: float
    F_ry: float
    F_fz: float
    F_rz: float

    def __post_init__(self):
        if not (self.F_fz > 0 and self.F_rz > 0):
            raise ValueError('vertical loads must be positive, got '
                             f'F_fz={self.F_fz}, F_rz={self.F_rz}')


def world_inertia(body, q, p: ParameterSet) -> np.ndarray:
    """Body inertia tensor rotated to the inertial frame, Jt = R J R^T."""
    q = validate_q(q)
    from .kinematics import body_pose_world
    _, R = body_pose_world(body, q, p)
    J = p.body_inertia(body)
    Jt = R @ J @ R.T
    return 0.5 * (Jt + Jt.T)


def _assemble(q, v, tires: TireForceState, u, p: ParameterSet):
    q = validate_q(q)
    v = validate_v(v)
    u = validate_input(u)
    P = pack(p)
    # vertical loads enter through the packed vector so the tire argument
    # fully controls them (tests drive non-static loads through here)
    from .parameters import IP_FFZ, IP_FRZ
    P[IP_FFZ] = tires.F_fz
    P[IP_FRZ] = tires.F_rz
    return _kernels.assemble(q[IQ_PSI], q[IQ_PHI], q[IQ_DELTA], v,
                             tires.F_fx, tires.F_rx, tires.F_fy, tires.F_ry,
                             u, P)


def applied_wrenches(q, v, tires: TireForceState, u, p: ParameterSet) -> dict:
    """Per-body applied force/moment, inertial frame."""
    q = validate_q(q)
    v = validate_v(v)
    u = validate_input(u)
    P = pack(p)
    from .parameters import IP_FFZ, IP_FRZ
    P[IP_FFZ] = tires.F_fz
    P[IP_FRZ] = tires.F_rz
    cpsi, spsi = np.cos(q[IQ_PSI]), np.sin(q[IQ_PSI])
    vxV = cpsi * v[0] + spsi * v[1]
    out = {}
    for name in BODY_NAMES:
        F, M = _kernels.body_wrench(_body_id(name), q[IQ_PSI], q[IQ_PHI],
                                    q[IQ_DELTA], v[IV_DDELTA], vxV,
                                    tires.F_fx, tires.F_rx, tires.F_fy,
                                    tires.F_ry, u, P)
        out[name] = Wrench(force=F, moment=M)
    return out


def mass_matrix(q, p: ParameterSet) -> np.ndarray:
    """Symmetric positive-definite 7x7 generalized mass matrix."""
    zero_t = TireForceState(0.0, 0.0, 0.0, 0.0, 1.0, 1.0)
    M, _, _ = _assemble(q, np.zeros(7), zero_t, np.zeros(4), p)
    if np.linalg.cond(M) > COND_LIMIT:
        raise DegenerateConfigurationError(
            f'mass matrix condition number {np.linalg.cond(M):.3e} exceeds {COND_LIMIT:.0e}')
    return M


def applied_efforts(q, v, tires: TireForceState, u, p: ParameterSet) -> np.ndarray:
    """Generalized applied effort vector Qa (7,)."""
    _, Qa, _ = _assemble(q, v, tires, u, p)
    return Qa


def residual_efforts(q, v, p: ParameterSet) -> np.ndarray:
    """Generalized residual effort vector Qr (7,); velocity-product terms."""
    zero_t = TireForceState(0.0, 0.0, 0.0, 0.0, 1.0, 1.0)
    _, _, Qr = _assemble(q, v, zero_t, np.zeros(4), p)
    return Qr


def generalized_accel(q, v, tires: TireForceState, u, p: ParameterSet) -> np.ndarray:
    """Solve M(q) vdot = Qa - Qr for the generalized acceleration."""
    M, Qa, _ = _assemble(q, v, tires, u, p)
    _, _, Qr = _assemble(q, v, TireForceState(0.0, 0.0, 0.0, 0.0, 1.0, 1.0),
                         np.zeros(4), p)
    if np.linalg.cond(M) > COND_LIMIT:
        raise DegenerateConfigurationError(
            f'mass matrix condition number {np.linalg.cond(M):.3e} exceeds {COND_LIMIT:.0e}')
    rhs = Qa - Qr
    vdot = np.linalg.solve(M, rhs)
    resid = np.max(np.abs(M @ vdot - rhs))
    if resid >= 1e-8 * max(np.max(np.abs(rhs)), 1e-4):
        raise DegenerateConfigurationError(
            f'linear solve residual {resid:.3e} too large')
    return vdot
