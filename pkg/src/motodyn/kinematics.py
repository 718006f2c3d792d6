"""Body poses, velocities, velocity Jacobians and residual accelerations.

The mechanism is a fixed four-body chain: rear body and rear wheel roll with
the main frame; the front body and front wheel additionally rotate about the
caster-tilted steering axis.  Velocities are linear in the generalized
velocity v, so each body carries exact 3x7 Jacobians Jv, Jw and residual
accelerations defined by

    a_world     = Jv @ vdot + a_res
    gamma_world = Jw @ vdot + g_res

for every vdot.  All derivatives are hand-derived closed forms, validated in
the test suite against a symbolic differentiation oracle and finite
differences.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .parameters import ParameterSet, pack, _body_id
from .state import IQ_X, IQ_Y, IQ_PSI, IQ_PHI, IQ_DELTA, validate_q, validate_v

BODY_NAMES = ('G_f', 'G_r', 'R_f', 'R_r')


def rot_x(angle: float) -> np.ndarray:
    """Rotation about the x axis (roll)."""
    return _kernels.rot_x(float(angle))


def rot_y(angle: float) -> np.ndarray:
    """Caster-tilt rotation; sign layout puts -sin(angle) at row 1, col 3."""
    return _kernels.rot_y(float(angle))


def rot_z(angle: float) -> np.ndarray:
    """Rotation about the z axis (yaw, steer)."""
    return _kernels.rot_z(float(angle))


def skew_to_vector(W) -> np.ndarray:
    """Axial vector of a skew-symmetric matrix: (W32, W13, W21)."""
    W = np.asarray(W, dtype=float)
    if W.shape != (3, 3):
        raise ValueError(f'expected a 3x3 matrix, got shape {W.shape}')
    if np.max(np.abs(W + W.T)) >= 1e-9:
        raise ValueError('matrix is not skew-symmetric within 1e-9: '
                         f'max |W + W^T| = {np.max(np.abs(W + W.T)):.3e}')
    return np.array([W[2, 1], W[0, 2], W[1, 0]])


@dataclass(frozen=True)
class BodyKinematics:
    """World-frame kinematic state of one rigid body."""

    body: str
    r_world: np.ndarray     # COM position [m]
    R_world: np.ndarray     # body orientation
    v_world: np.ndarray     # COM linear velocity [m/s]
    w_world: np.ndarray     # angular velocity [rad/s]
    Jv: np.ndarray          # 3x7, d v_world / d v
    Jw: np.ndarray          # 3x7, d w_world / d v
    a_res: np.ndarray       # residual linear acceleration [m/s^2]
    g_res: np.ndarray       # residual angular acceleration [rad/s^2]


def body_pose_V(body, q, p: ParameterSet):
    """Pose of a body in the vehicle frame: (r_V, R_V).

    Pure function of roll and steer; the frame chains are
       G_r:  Rphi [0, 0, h],                      R = Rphi
       R_r:  Rphi [-l_r, 0, R_r],                 R = Rphi
       G_f:  Rphi Reps ([a,0,0] + Rdel [e,0,f]),  R = Rphi Reps Rdel
       R_f:  Rphi Reps ([a,0,0] + Rdel [c,0,-s]), R = Rphi Reps Rdel
    """
    q = validate_q(q)
    r, R = _kernels.body_chain_V(_body_id(body), q[IQ_PHI], q[IQ_DELTA], pack(p))
    return r, R


def body_pose_world(body, q, p: ParameterSet):
    """World pose (r_O, R_O): planar translation plus yaw on the V-frame pose.

    The ground-contact constraint keeps the vehicle origin at z = 0.
    """
    q = validate_q(q)
    rV, RV = body_pose_V(body, q, p)
    Rpsi = rot_z(q[IQ_PSI])
    r = np.array([q[IQ_X], q[IQ_Y], 0.0]) + Rpsi @ rV
    return r, Rpsi @ RV


def body_kinematics(body, q, v, p: ParameterSet) -> BodyKinematics:
    """Full kinematic evaluation of one body at (q, v)."""
    q = validate_q(q)
    v = validate_v(v)
    b = _body_id(body)
    r, R, Jv, Jw, a_res, g_res = _kernels.body_kin(
        b, q[IQ_PSI], q[IQ_PHI], q[IQ_DELTA], v, pack(p))
    r = r + np.array([q[IQ_X], q[IQ_Y], 0.0])
    return BodyKinematics(body=BODY_NAMES[b], r_world=r, R_world=R,
                          v_world=Jv @ v, w_world=Jw @ v,
                          Jv=Jv, Jw=Jw, a_res=a_res, g_res=g_res)
