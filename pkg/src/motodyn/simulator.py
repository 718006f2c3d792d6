"""Extended nonlinear model and fixed-step simulation.

The extended state stacks [psi, phi, delta], the seven generalized
velocities and the four tire forces.  Its derivative copies the attitude
rates, solves the Jourdain system for the velocity block and applies the
tire relaxation law for the force block.  Integration is classical
fixed-step 4th order with zero-order-hold inputs: deterministic, same grid
as the observer update.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import _kernels
from .parameters import ParameterSet, pack
from .state import (N_EXT, N_U, EXT_LABELS, validate_extended, validate_input,
                    IX_PHI)

DT_MAX = 0.01
TRAJ_HEADER = ('t,psi,phi,delta,vx,vy,dpsi,dphi,ddelta,dthf,dthr,'
               'Ffx,Frx,Ffy,Fry,ax,ay')


class SimulationError(RuntimeError):
    """Integration produced a non-finite or out-of-domain state."""

    def __init__(self, message, t=None, X=None, u=None):
        self.t = t
        self.X = None if X is None else np.array(X)
        self.u = None if u is None else np.array(u)
        detail = message
        if t is not None:
            detail += f'\n  at t = {t}'
        if X is not None:
            detail += '\n  state: ' + ', '.join(
                f'{n}={x:.6g}' for n, x in zip(EXT_LABELS, X))
        if u is not None:
            detail += f'\n  input: {np.array(u)}'
        super().__init__(detail)


@dataclass(frozen=True)
class SimFailure:
    """Record of a mid-run integration failure."""

    step: int
    t: float
    reason: str


@dataclass(frozen=True)
class Trajectory:
    """Uniform-grid simulation output.

    states[k] is the extended state at t[k]; inputs[k] the ZOH input applied
    from t[k]; accel[k] the derived (vdot_x, vdot_y) at t[k]; low_speed[k]
    flags slip clamping.  failure is None for a complete run, else the
    trajectory is truncated at the failing step.
    """

    t: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    accel: np.ndarray
    low_speed: np.ndarray
    failure: Optional[SimFailure] = None

    def __post_init__(self):
        n = len(self.t)
        if not (self.states.shape == (n, N_EXT) and self.inputs.shape == (n, N_U)
                and self.accel.shape == (n, 2) and len(self.low_speed) == n):
            raise ValueError('inconsistent trajectory array lengths')
        dt = np.diff(self.t)
        if n > 1 and not (np.all(dt > 0)
                          and np.max(np.abs(dt - dt[0])) < 1e-9 * max(1.0, self.t[-1])):
            raise ValueError('time grid must be strictly increasing and uniform')

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 0.0


class InputTrace:
    """Piecewise-constant (zero-order hold) input signal u(t)."""

    def __init__(self, times, values):
        self.times = np.asarray(times, dtype=float).ravel()
        self.values = np.asarray(values, dtype=float).reshape(-1, N_U)
        if len(self.times) != len(self.values):
            raise ValueError('times and values lengths differ')
        if len(self.times) == 0:
            raise ValueError('empty input trace')
        if np.any(np.diff(self.times) <= 0):
            raise ValueError('input trace times must be strictly increasing')
        if not np.all(np.isfinite(self.values)):
            raise ValueError('input trace has non-finite values')

    @classmethod
    def constant(cls, u):
        return cls([0.0], [validate_input(u)])

    def covers(self, T: float) -> bool:
        return self.times[0] <= 0.0

    def sample_grid(self, dt: float, n_steps: int) -> np.ndarray:
        """ZOH values at t_k = k dt for k = 0..n_steps-1."""
        tk = np.arange(n_steps) * dt
        idx = np.searchsorted(self.times, tk, side='right') - 1
        idx = np.clip(idx, 0, len(self.times) - 1)
        return self.values[idx]


def as_input_trace(inputs) -> InputTrace:
    """Coerce a constant 4-vector, (times, values) pair or InputTrace."""
    if isinstance(inputs, InputTrace):
        return inputs
    arr = np.asarray(inputs, dtype=float)
    if arr.shape == (N_U,):
        return InputTrace.constant(arr)
    if isinstance(inputs, tuple) and len(inputs) == 2:
        return InputTrace(inputs[0], inputs[1])
    raise ValueError('inputs must be a 4-vector, (times, values) or InputTrace')


def extended_rhs(X, u, p: ParameterSet) -> np.ndarray:
    """State derivative h(X, u) of the extended nonlinear model."""
    X = validate_extended(X)
    u = validate_input(u)
    Xd = _kernels.rhs_ext(X, u, pack(p))
    if not np.all(np.isfinite(Xd)):
        raise SimulationError('non-finite state derivative', X=X, u=u)
    return Xd


def step(X, u, dt: float, p: ParameterSet) -> np.ndarray:
    """One fixed-step 4th-order advance; dt in (0, 0.01] s."""
    X = validate_extended(X)
    u = validate_input(u)
    if not 0.0 < dt <= DT_MAX:
        raise ValueError(f'dt must be in (0, {DT_MAX}], got {dt}')
    Xn = _kernels.rk4_step(X, u, dt, pack(p))
    if not np.all(np.isfinite(Xn)):
        raise SimulationError('integration step produced non-finite state',
                              X=X, u=u)
    if abs(Xn[IX_PHI]) >= np.pi / 2:
        raise SimulationError('roll angle left the validity domain (|phi| >= pi/2)',
                              X=Xn, u=u)
    return Xn


def simulate(X0, inputs, dt: float, T: float, p: ParameterSet) -> Trajectory:
    """Integrate the extended model over [0, T] on a uniform grid.

    inputs may be a constant 4-vector, a (times, values) pair or an
    InputTrace; values are zero-order held.  A mid-run failure returns a
    truncated trajectory carrying a failure record instead of raising.
    """
    X0 = validate_extended(X0)
    if not 0.0 < dt <= DT_MAX:
        raise ValueError(f'dt must be in (0, {DT_MAX}], got {dt}')
    if T < 0:
        raise ValueError(f'duration must be >= 0, got {T}')
    trace = as_input_trace(inputs)
    if not trace.covers(T):
        raise ValueError('input trace must cover t = 0 (first sample time > 0)')
    n = int(np.ceil(round(T / dt, 9)))
    P = pack(p)
    if n == 0:
        h = _kernels.rhs_ext(X0, trace.values[0], P)
        return Trajectory(t=np.zeros(1), states=X0[None, :].copy(),
                          inputs=trace.values[:1].copy(),
                          accel=np.array([[h[3], h[4]]]),
                          low_speed=np.zeros(1, bool))
    U = trace.sample_grid(dt, n)
    states, accel, low, fail = _kernels.simulate_loop(X0, U, dt, P)
    t = np.arange(n + 1) * dt
    inputs_grid = np.vstack([U, U[-1]])
    failure = None
    if fail >= 0:
        last = fail + 1
        failure = SimFailure(step=int(fail), t=float(fail * dt),
                             reason='non-finite state or |phi| >= pi/2')
        t = t[:last]
        states = states[:last]
        inputs_grid = inputs_grid[:last]
        accel = accel[:last]
        low = low[:last]
    return Trajectory(t=t, states=states, inputs=inputs_grid, accel=accel,
                      low_speed=low, failure=failure)


# --------------------------------------------------------------------------
# CSV export / import (17 columns, %.9g)

def trajectory_to_csv(traj: Trajectory, path=None) -> Optional[str]:
    """Write the trajectory in the documented 17-column CSV format."""
    data = np.column_stack([traj.t, traj.states, traj.accel])
    buf = io.StringIO()
    buf.write(TRAJ_HEADER + '\n')
    for row in data:
        buf.write(','.join(f'{x:.9g}' for x in row) + '\n')
    text = buf.getvalue()
    if path is None:
        return text
    Path(path).write_text(text, encoding='utf-8')
    return None


def trajectory_from_csv(path) -> Trajectory:
    """Load a trajectory CSV (inputs are not stored; zeros substituted)."""
    raw = np.genfromtxt(path, delimiter=',', names=True)
    cols = TRAJ_HEADER.split(',')
    missing = [c for c in cols if c not in (raw.dtype.names or ())]
    if missing:
        raise ValueError(f'trajectory CSV missing columns: {missing}')
    raw = np.atleast_1d(raw)
    t = raw['t']
    states = np.column_stack([raw[c] for c in cols[1:15]])
    accel = np.column_stack([raw['ax'], raw['ay']])
    return Trajectory(t=t, states=states,
                      inputs=np.zeros((len(t), N_U)), accel=accel,
                      low_speed=np.zeros(len(t), bool))
