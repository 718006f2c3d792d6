"""Static vertical loads, slip quantities, magic-formula steady forces and
first-order relaxation dynamics.

Vertical loads are static only.  Steady-state forces follow the
magic-formula curve per slip channel; the lateral force is the sum of the
side-slip contribution and the camber contribution, each through its own
channel, with the peak factor D scaled linearly by the wheel's vertical
load.  Instantaneous forces relax toward the steady values with rate
|v_x^V| / sigma (a config option restores the printed lateral v_y^V form).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .parameters import (ParameterSet, MagicFormulaChannel, total_mass, pack,
                         V_EPS)
from .state import IQ_PSI, IQ_PHI, IQ_DELTA, IV_VX, IV_VY, IV_DPSI, validate_q, validate_v


@dataclass(frozen=True)
class SlipState:
    """Slip quantities of both wheels; low_speed marks clamped validity."""

    kappa_f: float   # longitudinal slip [-]
    kappa_r: float
    alpha_f: float   # side-slip angle [rad]
    alpha_r: float
    gamma_f: float   # camber angle [rad]
    gamma_r: float
    low_speed: bool = False

    def __post_init__(self):
        vals = (self.kappa_f, self.kappa_r, self.alpha_f, self.alpha_r,
                self.gamma_f, self.gamma_r)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f'non-finite slip state: {vals}')
        if max(abs(self.alpha_f), abs(self.alpha_r)) >= np.pi / 2:
            raise ValueError('side-slip angle out of range (+-pi/2)')


def static_loads(p: ParameterSet):
    """Static vertical loads (F_fz, F_rz) [N]; they sum to m g exactly."""
    m = total_mass(p)
    denom = p.l_r + p.l_f
    F_fz = m * p.g * (p.l_r + p.l_m) / denom
    F_rz = m * p.g * (p.l_f - p.l_m) / denom
    if not (F_fz > 0 and F_rz > 0):
        raise ValueError(f'degenerate geometry: non-positive static load '
                         f'(F_fz={F_fz}, F_rz={F_rz}); need -l_r < l_m < l_f')
    return F_fz, F_rz


def slip_state(q, v, wheel_speeds, p: ParameterSet) -> SlipState:
    """Slip quantities from the generalized state.

    wheel_speeds = (dtheta_f, dtheta_r) [rad/s].  Forward speed below
    V_EPS = 0.5 m/s is clamped in the denominators and flagged rather than
    raised, so trims at normal speeds are unaffected.
    """
    q = validate_q(q)
    v = validate_v(v)
    dthf, dthr = float(wheel_speeds[0]), float(wheel_speeds[1])
    kf, kr, af, ar, gf, gr, _, _, low = _kernels.slip_quantities(
        q[IQ_PSI], q[IQ_PHI], q[IQ_DELTA], v[IV_VX], v[IV_VY], v[IV_DPSI],
        dthf, dthr, pack(p))
    return SlipState(kappa_f=kf, kappa_r=kr, alpha_f=af, alpha_r=ar,
                     gamma_f=gf, gamma_r=gr, low_speed=bool(low))


def magic_formula(c: MagicFormulaChannel, mu: float) -> float:
    """y(mu) = D sin(C arctan(B mu - E (B mu - arctan(B mu)))).

    Odd in mu and bounded by |D|; slope at the origin is B*C*D.  Here D is
    used as given (callers scale it by the normal load).
    """
    if not np.isfinite(mu):
        raise ValueError(f'slip quantity must be finite, got {mu}')
    return _kernels.magic_formula(c.B, c.C, c.D, c.E, float(mu))


def steady_state_forces(slips: SlipState, loads, p: ParameterSet):
    """Steady tire forces (F_fx0, F_rx0, F_fy0, F_ry0) [N].

    Longitudinal from the kappa channel; lateral as side-slip plus camber
    contributions, the camber channel oriented so thrust points toward the
    lean side (positive roll leans toward -y in these frames).
    """
    F_fz, F_rz = float(loads[0]), float(loads[1])
    return _kernels.steady_forces(slips.kappa_f, slips.kappa_r,
                                  slips.alpha_f, slips.alpha_r,
                                  slips.gamma_f, slips.gamma_r,
                                  F_fz, F_rz, pack(p))


def relaxation_rhs(F, F0, vxV, vyV, p: ParameterSet) -> np.ndarray:
    """Tire-force derivatives, first-order lag toward the steady values.

    F and F0 are (Ffx, Frx, Ffy, Fry).  Longitudinal rates are |vxV|/sigma;
    lateral rates likewise by default, or vyV/sigma when the parameter set
    selects the 'paper' lateral relaxation form.
    """
    F = np.asarray(F, dtype=float)
    F0 = np.asarray(F0, dtype=float)
    if F.shape != (4,) or F0.shape != (4,):
        raise ValueError('F and F0 must be length-4 (Ffx, Frx, Ffy, Fry)')
    lat = vyV if p.lateral_relaxation_speed == 'paper' else abs(vxV)
    rates = np.array([abs(vxV) / p.sigma_fx, abs(vxV) / p.sigma_rx,
                      lat / p.sigma_fy, lat / p.sigma_ry])
    return rates * (F0 - F)


__all__ = ['SlipState', 'static_loads', 'slip_state', 'magic_formula',
           'steady_state_forces', 'relaxation_rhs', 'V_EPS']
