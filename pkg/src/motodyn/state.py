"""State containers and index conventions.

The generalized coordinates are q = [x, y, psi, phi, delta, theta_f, theta_r]
(planar position, yaw, roll, steer, wheel spin angles) and the generalized
velocities are their time derivatives, v = dq/dt.  The extended state stacks
the attitude angles, the velocity block and the four instantaneous tire
forces; the measurement selectors in the estimator depend on this exact
layout, so it is fixed here once.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# generalized coordinates q
IQ_X, IQ_Y, IQ_PSI, IQ_PHI, IQ_DELTA, IQ_THF, IQ_THR = range(7)
# generalized velocities v
IV_VX, IV_VY, IV_DPSI, IV_DPHI, IV_DDELTA, IV_DTHF, IV_DTHR = range(7)
# extended state X = [psi, phi, delta, v (7), Ffx, Frx, Ffy, Fry]
(IX_PSI, IX_PHI, IX_DELTA, IX_VX, IX_VY, IX_DPSI, IX_DPHI, IX_DDELTA,
 IX_DTHF, IX_DTHR, IX_FFX, IX_FRX, IX_FFY, IX_FRY) = range(14)
# input u = [tau, tau_D, tau_Bf, tau_Br]
IU_TAU, IU_TAUD, IU_TAUBF, IU_TAUBR = range(4)

N_Q = 7
N_EXT = 14
N_U = 4

EXT_LABELS = ('psi', 'phi', 'delta', 'vx', 'vy', 'dpsi', 'dphi', 'ddelta',
              'dthf', 'dthr', 'Ffx', 'Frx', 'Ffy', 'Fry')
INPUT_LABELS = ('tau', 'tauD', 'tauBf', 'tauBr')

# index groups used by the trim solver and the linearization structure checks
LATERAL_IDX = (IX_PSI, IX_PHI, IX_DELTA, IX_VY, IX_DPSI, IX_DPHI, IX_DDELTA,
               IX_FFY, IX_FRY)
LONGITUDINAL_IDX = (IX_VX, IX_DTHF, IX_DTHR, IX_FFX, IX_FRX)


class StateError(ValueError):
    """Raised for state vectors that violate the model's domain."""


def _as_vector(x, n, name):
    # fresh writable copy: numba kernels specialize on array mutability,
    # so read-only views would trigger spurious recompilation
    arr = np.array(x, dtype=float)
    if arr.shape != (n,):
        raise StateError(f'{name} must have shape ({n},), got {arr.shape}')
    if not np.all(np.isfinite(arr)):
        raise StateError(f'{name} has non-finite entries: {arr}')
    return arr


def validate_q(q) -> np.ndarray:
    q = _as_vector(q, N_Q, 'q')
    if abs(q[IQ_PHI]) >= np.pi / 2:
        raise StateError(f'|phi| must be < pi/2, got {q[IQ_PHI]}')
    return q


def validate_v(v) -> np.ndarray:
    return _as_vector(v, N_Q, 'v')


def validate_extended(X) -> np.ndarray:
    X = _as_vector(X, N_EXT, 'X')
    if abs(X[IX_PHI]) >= np.pi / 2:
        raise StateError(f'|phi| must be < pi/2, got {X[IX_PHI]}')
    return X


def validate_input(u) -> np.ndarray:
    return _as_vector(u, N_U, 'u')


@dataclass(frozen=True)
class GeneralizedState:
    """Generalized coordinates and velocities of the 7-DOF mechanism."""

    q: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'q', validate_q(self.q))
        object.__setattr__(self, 'v', validate_v(self.v))
        self.q.setflags(write=False)
        self.v.setflags(write=False)


def generalized_from_extended(X) -> GeneralizedState:
    """Split an extended state into (q, v); x, y and wheel angles are zero.

    Mechanism poses do not depend on x, y, theta_f, theta_r (property-tested),
    so the simulator evaluates kinematics with those coordinates at zero.
    """
    X = validate_extended(X)
    q = np.zeros(N_Q)
    q[IQ_PSI], q[IQ_PHI], q[IQ_DELTA] = X[IX_PSI], X[IX_PHI], X[IX_DELTA]
    return GeneralizedState(q=q, v=X[IX_VX:IX_FFX].copy())


def extended_state(psi=0.0, phi=0.0, delta=0.0, vx=0.0, vy=0.0, dpsi=0.0,
                   dphi=0.0, ddelta=0.0, dthf=0.0, dthr=0.0,
                   Ffx=0.0, Frx=0.0, Ffy=0.0, Fry=0.0) -> np.ndarray:
    """Build an extended state vector by named entries."""
    return validate_extended(np.array(
        [psi, phi, delta, vx, vy, dpsi, dphi, ddelta, dthf, dthr,
         Ffx, Frx, Ffy, Fry], dtype=float))
