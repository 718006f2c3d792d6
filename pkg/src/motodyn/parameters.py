"""Physical parameters: containers, file ingestion, validation, packing.

Parameter files are UTF-8 INI-style text, one scalar per key, keys named after
the usual single-track symbols (`l_f`, `eps_deg`, `K_delta`, ...).  Inertia
tensors are 9 whitespace-separated row-major numbers; tire magic-formula
coefficients live in nested sections, one per wheel per slip channel
(``[tire.front.kappa]`` etc.).  See ``motodyn/data/gsxr1000.cfg`` for the
shipped default set.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

DEFAULT_PARAMS_RESOURCE = 'gsxr1000.cfg'

_BODY_ORDER = ('G_f', 'G_r', 'R_f', 'R_r')   # packing order, see kernels
# body ids (index into the packed inertia block)
BODY_GF, BODY_GR, BODY_RF, BODY_RR = range(4)
BODY_IDS = {'G_f': BODY_GF, 'G_r': BODY_GR, 'R_f': BODY_RF, 'R_r': BODY_RR}

# low-speed clamp for slip denominators [m/s]
V_EPS = 0.5

# --- packed parameter vector layout (shared with the numba kernels) ---------
(IP_LF, IP_LR, IP_H, IP_RF, IP_RR, IP_S, IP_E, IP_F, IP_A, IP_C, IP_EPS,
 IP_MGF, IP_MGR, IP_MRF, IP_MRR, IP_CD, IP_AV, IP_RHO, IP_KDELTA, IP_G,
 IP_SFX, IP_SRX, IP_SFY, IP_SRY, IP_FFZ, IP_FRZ, IP_LM,
 IP_LATPAPER, IP_ARMCASTER, IP_VEPS) = range(30)
IP_J = 30          # 4 bodies x 9 entries, row-major, order G_f, G_r, R_f, R_r
IP_TIRE = IP_J + 36   # 2 wheels x 3 channels x (B, C, D, E); front first
NP_PACK = IP_TIRE + 24


class ParameterError(ValueError):
    """Raised when a parameter file is missing keys or violates invariants."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__('invalid parameters:\n  ' + '\n  '.join(self.problems))


@dataclass(frozen=True)
class MagicFormulaChannel:
    """One magic-formula slip channel.

    D is stored as a friction-coefficient-like scale; the wheel's static
    vertical load multiplies it when forces are evaluated (linear load
    scaling of the peak factor).
    """

    B: float   # stiffness factor
    C: float   # shape factor
    D: float   # peak factor per newton of normal load
    E: float   # curvature factor

    def as_tuple(self):
        return (self.B, self.C, self.D, self.E)


@dataclass(frozen=True)
class TireCoefficients:
    """Per-channel magic-formula coefficients for one wheel."""

    kappa: MagicFormulaChannel   # longitudinal slip channel
    alpha: MagicFormulaChannel   # side-slip channel
    gamma: MagicFormulaChannel   # camber channel

    def channels(self):
        return (self.kappa, self.alpha, self.gamma)


@dataclass(frozen=True)
class ParameterSet:
    """All geometric, inertial, aerodynamic and tire constants.

    Lengths in m, masses in kg, inertias in kg m^2, angles stored as the
    file's degree value (radians exposed via :attr:`eps`).  Instances are
    immutable after construction and safe to share between threads.
    """

    l_f: float          # front contact to reference point V, longitudinal [m]
    l_r: float          # rear contact to V [m]
    h: float            # rear-body COM height [m]
    R_f: float          # front wheel radius [m]
    R_r: float          # rear wheel radius [m]
    s: float            # front-wheel offset along the steer axis [m]
    e: float            # front-body COM offset along the steer x axis [m]
    f: float            # front-body COM offset along the steer z axis [m]
    a: float            # steer-assembly reach from V along the caster frame [m]
    c: float            # front-wheel offset along the steer x axis [m]
    eps_deg: float      # caster angle [deg]
    m_Gr: float         # rear body incl. rider [kg]
    m_Gf: float         # front body / steering assembly [kg]
    m_Rf: float         # front wheel [kg]
    m_Rr: float         # rear wheel [kg]
    J_Gr: np.ndarray    # 3x3 inertia tensors, body frames [kg m^2]
    J_Gf: np.ndarray
    J_Rf: np.ndarray
    J_Rr: np.ndarray
    sigma_fx: float     # relaxation lengths [m]
    sigma_rx: float
    sigma_fy: float
    sigma_ry: float
    C_d: float          # drag coefficient [-]
    A_v: float          # frontal area [m^2]
    rho_air: float      # air density [kg/m^3]
    K_delta: float      # steering damping [N m s/rad]
    tire_front: TireCoefficients
    tire_rear: TireCoefficients
    g: float = 9.81     # gravity [m/s^2]
    l_m: float = None   # whole-vehicle COM offset from V [m]; derived if absent
    lateral_relaxation_speed: str = 'vx'       # 'vx' or 'paper'
    front_arm_includes_caster: bool = False    # insert caster rotation in the
                                               # front contact arm (off: verbatim)

    def __post_init__(self):
        for name in ('J_Gr', 'J_Gf', 'J_Rf', 'J_Rr'):
            arr = np.array(getattr(self, name), dtype=float).reshape(3, 3)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.l_m is None:
            object.__setattr__(self, 'l_m', float(derived_com_offset(self)))
        problems = validate(self)
        if problems:
            raise ParameterError(problems)

    @property
    def eps(self) -> float:
        """Caster angle in radians."""
        return np.deg2rad(self.eps_deg)

    @property
    def total_mass(self) -> float:
        return total_mass(self)

    def body_mass(self, body) -> float:
        return (self.m_Gf, self.m_Gr, self.m_Rf, self.m_Rr)[_body_id(body)]

    def body_inertia(self, body) -> np.ndarray:
        return (self.J_Gf, self.J_Gr, self.J_Rf, self.J_Rr)[_body_id(body)]

    def with_rider_mass_scale(self, scale: float) -> 'ParameterSet':
        """Scaled rear-body (rider-carrying) mass; l_m is re-derived."""
        if scale <= 0:
            raise ParameterError([f'rider mass scale must be > 0, got {scale}'])
        return replace(self, m_Gr=self.m_Gr * scale, l_m=None)


def _body_id(body):
    if isinstance(body, str):
        return BODY_IDS[body]
    return int(body)


def total_mass(p: ParameterSet) -> float:
    """Sum of the four body masses [kg]."""
    return p.m_Gr + p.m_Gf + p.m_Rf + p.m_Rr


def derived_com_offset(p: ParameterSet) -> float:
    """Mass-weighted longitudinal COM position at the upright configuration.

    Positions of the four body COMs follow the frame chain evaluated at
    q = 0, measured from the reference point V, positive toward the front.
    This is the only self-consistent source for l_m, which the parameter
    tables do not list; an explicit `l_m` key overrides it.
    """
    ce, se = np.cos(p.eps), np.sin(p.eps)
    x_gf = (p.a + p.e) * ce - p.f * se
    x_rf = (p.a + p.c) * ce + p.s * se
    m = total_mass(p)
    return (p.m_Gf * x_gf + p.m_Rf * x_rf + p.m_Rr * (-p.l_r)) / m


def validate(p: ParameterSet) -> list:
    """Collect every violated invariant (empty list when valid)."""
    problems = []
    for name in ('m_Gr', 'm_Gf', 'm_Rf', 'm_Rr', 'R_f', 'R_r',
                 'sigma_fx', 'sigma_rx', 'sigma_fy', 'sigma_ry',
                 'rho_air', 'A_v', 'g'):
        if not np.isfinite(getattr(p, name)) or getattr(p, name) <= 0:
            problems.append(f'{name} must be strictly positive, got {getattr(p, name)}')
    for name in ('l_f', 'l_r', 'h', 's', 'e', 'f', 'a', 'c', 'eps_deg',
                 'C_d', 'K_delta', 'l_m'):
        if not np.isfinite(getattr(p, name)):
            problems.append(f'{name} must be finite')
    for name in ('J_Gr', 'J_Gf', 'J_Rf', 'J_Rr'):
        J = getattr(p, name)
        if not np.all(np.isfinite(J)):
            problems.append(f'{name} has non-finite entries')
            continue
        if np.max(np.abs(J - J.T)) >= 1e-12:
            problems.append(f'{name} is not symmetric '
                            f'(max |J - J^T| = {np.max(np.abs(J - J.T)):.3e})')
        if np.any(np.diag(J) < 0):
            problems.append(f'{name} has a negative diagonal entry')
    if p.l_f + p.l_r <= 0:
        problems.append(f'l_f + l_r must be > 0, got {p.l_f + p.l_r}')
    if abs(p.l_m) >= p.l_f:
        problems.append(f'|l_m| must be < l_f for a positive front load '
                        f'(l_m = {p.l_m}, l_f = {p.l_f})')
    if p.l_m <= -p.l_r:
        problems.append(f'l_m must be > -l_r for a positive rear load '
                        f'(l_m = {p.l_m}, l_r = {p.l_r})')
    for wheel, tc in (('front', p.tire_front), ('rear', p.tire_rear)):
        for chan_name, ch in zip(('kappa', 'alpha', 'gamma'), tc.channels()):
            where = f'tire.{wheel}.{chan_name}'
            if not all(np.isfinite(x) for x in ch.as_tuple()):
                problems.append(f'{where}: non-finite coefficient')
                continue
            for coef in ('B', 'C', 'D'):
                if getattr(ch, coef) <= 0:
                    problems.append(f'{where}: {coef} must be > 0, got {getattr(ch, coef)}')
            if not 0 < ch.C <= 3:
                problems.append(f'{where}: C must be in (0, 3], got {ch.C}')
            if ch.E > 1:
                problems.append(f'{where}: E must be <= 1, got {ch.E}')
    if p.lateral_relaxation_speed not in ('vx', 'paper'):
        problems.append("lateral_relaxation_speed must be 'vx' or 'paper', "
                        f'got {p.lateral_relaxation_speed!r}')
    return problems


# --------------------------------------------------------------------------
# file ingestion / serialization

_SCALAR_KEYS = {
    'geometry': ('l_f', 'l_r', 'h', 'R_f', 'R_r', 's', 'e', 'f', 'a', 'c',
                 'eps_deg'),
    'mass': ('m_Gr', 'm_Gf', 'm_Rf', 'm_Rr'),
    'aero': ('C_d', 'A_v', 'rho_air'),
    'steering': ('K_delta',),
    'tire.relaxation': ('sigma_fx', 'sigma_rx', 'sigma_fy', 'sigma_ry'),
}
_INERTIA_KEYS = ('J_Gr', 'J_Gf', 'J_Rf', 'J_Rr')
_TIRE_SECTIONS = {'front': 'tire_front', 'rear': 'tire_rear'}
_CHANNELS = ('kappa', 'alpha', 'gamma')


def _read_ini(text: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=('#', ';'),
                                   interpolation=None)
    cp.optionxform = str   # keys are case sensitive symbols
    cp.read_string(text)
    return cp


def loads_parameters(text: str) -> ParameterSet:
    """Parse a parameter file from a string. See load_parameters."""
    try:
        cp = _read_ini(text)
    except configparser.Error as exc:
        raise ParameterError([f'cannot parse parameter file: {exc}']) from exc

    problems = []
    kwargs = {}

    def grab(section, key, conv=float):
        if not cp.has_option(section, key):
            problems.append(f'missing key [{section}] {key}')
            return None
        raw = cp.get(section, key)
        try:
            return conv(raw)
        except ValueError:
            problems.append(f'[{section}] {key}: cannot parse {raw!r}')
            return None

    for section, keys in _SCALAR_KEYS.items():
        for key in keys:
            val = grab(section, key)
            if val is not None:
                kwargs[key] = val
    for key in _INERTIA_KEYS:
        if not cp.has_option('inertia', key):
            problems.append(f'missing key [inertia] {key}')
            continue
        parts = cp.get('inertia', key).split()
        if len(parts) != 9:
            problems.append(f'[inertia] {key}: expected 9 row-major numbers, '
                            f'got {len(parts)}')
            continue
        try:
            kwargs[key] = np.array([float(x) for x in parts]).reshape(3, 3)
        except ValueError:
            problems.append(f'[inertia] {key}: cannot parse entries')
    for wheel, attr in _TIRE_SECTIONS.items():
        chans = {}
        for chan in _CHANNELS:
            section = f'tire.{wheel}.{chan}'
            vals = {}
            for coef in ('B', 'C', 'D', 'E'):
                v = grab(section, coef)
                if v is not None:
                    vals[coef] = v
            if len(vals) == 4:
                chans[chan] = MagicFormulaChannel(**vals)
        if len(chans) == 3:
            kwargs[attr] = TireCoefficients(**chans)

    if cp.has_section('options'):
        if cp.has_option('options', 'g'):
            kwargs['g'] = grab('options', 'g')
        if cp.has_option('options', 'l_m'):
            kwargs['l_m'] = grab('options', 'l_m')
        if cp.has_option('options', 'lateral_relaxation_speed'):
            kwargs['lateral_relaxation_speed'] = cp.get(
                'options', 'lateral_relaxation_speed').strip()
        if cp.has_option('options', 'front_arm_includes_caster'):
            try:
                kwargs['front_arm_includes_caster'] = cp.getboolean(
                    'options', 'front_arm_includes_caster')
            except ValueError:
                problems.append('[options] front_arm_includes_caster: expected a boolean')

    if problems:
        raise ParameterError(problems)
    return ParameterSet(**kwargs)   # raises ParameterError on invariant violations


def load_parameters(path) -> ParameterSet:
    """Load and validate a parameter file.

    Raises ParameterError listing every missing key and violated invariant.
    """
    path = Path(path)
    if not path.is_file():
        raise ParameterError([f'parameter file not found: {path}'])
    return loads_parameters(path.read_text(encoding='utf-8'))


def default_parameters() -> ParameterSet:
    """The shipped sport-motorcycle parameter set."""
    text = resources.files('motodyn.data').joinpath(
        DEFAULT_PARAMS_RESOURCE).read_text(encoding='utf-8')
    return loads_parameters(text)


def dumps_parameters(p: ParameterSet) -> str:
    """Serialize to the parameter-file dialect, full float precision.

    Round trip is exact: loads_parameters(dumps_parameters(p)) compares
    field-wise equal to p (l_m is written explicitly, so a derived value is
    reloaded as an override with the identical float).
    """
    out = io.StringIO()
    for section, keys in _SCALAR_KEYS.items():
        out.write(f'[{section}]\n')
        for key in keys:
            out.write(f'{key} = {float(getattr(p, key))!r}\n')
        out.write('\n')
    out.write('[inertia]\n')
    for key in _INERTIA_KEYS:
        flat = ' '.join(repr(float(x)) for x in getattr(p, key).ravel())
        out.write(f'{key} = {flat}\n')
    out.write('\n')
    for wheel, attr in _TIRE_SECTIONS.items():
        tc = getattr(p, attr)
        for chan in _CHANNELS:
            out.write(f'[tire.{wheel}.{chan}]\n')
            ch = getattr(tc, chan)
            for coef in ('B', 'C', 'D', 'E'):
                out.write(f'{coef} = {float(getattr(ch, coef))!r}\n')
            out.write('\n')
    out.write('[options]\n')
    out.write(f'g = {float(p.g)!r}\n')
    out.write(f'l_m = {float(p.l_m)!r}\n')
    out.write(f'lateral_relaxation_speed = {p.lateral_relaxation_speed}\n')
    out.write(f'front_arm_includes_caster = {str(p.front_arm_includes_caster).lower()}\n')
    return out.getvalue()


def save_parameters(p: ParameterSet, path) -> None:
    Path(path).write_text(dumps_parameters(p), encoding='utf-8')


def parameters_equal(p1: ParameterSet, p2: ParameterSet) -> bool:
    """Field-wise exact equality (arrays compared element-wise)."""
    for f_ in fields(ParameterSet):
        a, b = getattr(p1, f_.name), getattr(p2, f_.name)
        if isinstance(a, np.ndarray):
            if not np.array_equal(a, b):
                return False
        elif a != b:
            return False
    return True


# --------------------------------------------------------------------------
# packing for the numba kernels

def pack(p: ParameterSet) -> np.ndarray:
    """Flatten a ParameterSet into the kernel parameter vector."""
    P = np.zeros(NP_PACK)
    P[IP_LF], P[IP_LR], P[IP_H] = p.l_f, p.l_r, p.h
    P[IP_RF], P[IP_RR] = p.R_f, p.R_r
    P[IP_S], P[IP_E], P[IP_F], P[IP_A], P[IP_C] = p.s, p.e, p.f, p.a, p.c
    P[IP_EPS] = p.eps
    P[IP_MGF], P[IP_MGR], P[IP_MRF], P[IP_MRR] = p.m_Gf, p.m_Gr, p.m_Rf, p.m_Rr
    P[IP_CD], P[IP_AV], P[IP_RHO] = p.C_d, p.A_v, p.rho_air
    P[IP_KDELTA], P[IP_G] = p.K_delta, p.g
    P[IP_SFX], P[IP_SRX] = p.sigma_fx, p.sigma_rx
    P[IP_SFY], P[IP_SRY] = p.sigma_fy, p.sigma_ry
    m = total_mass(p)
    P[IP_FFZ] = m * p.g * (p.l_r + p.l_m) / (p.l_r + p.l_f)
    P[IP_FRZ] = m * p.g * (p.l_f - p.l_m) / (p.l_r + p.l_f)
    P[IP_LM] = p.l_m
    P[IP_LATPAPER] = 1.0 if p.lateral_relaxation_speed == 'paper' else 0.0
    P[IP_ARMCASTER] = 1.0 if p.front_arm_includes_caster else 0.0
    P[IP_VEPS] = V_EPS
    for b, J in enumerate((p.J_Gf, p.J_Gr, p.J_Rf, p.J_Rr)):
        P[IP_J + 9 * b: IP_J + 9 * (b + 1)] = J.ravel()
    for w, tc in enumerate((p.tire_front, p.tire_rear)):
        for ci, ch in enumerate(tc.channels()):
            base = IP_TIRE + 12 * w + 4 * ci
            P[base:base + 4] = ch.as_tuple()
    return P
