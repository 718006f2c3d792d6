"""Scenario files: the co-simulation experiment protocol.

A scenario describes one plant+observer run: nominal speed, duration, step,
input source, plant parameter overrides (e.g. rider mass scale), the
observer design speed, the initial-condition rule and an optional
measurement noise spec.  Files use the same INI dialect as parameter files;
paths inside a scenario resolve relative to the scenario file's directory.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .simulator import DT_MAX
from .state import N_U


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario file."""


@dataclass(frozen=True)
class NoiseSpec:
    """Per-channel measurement noise standard deviations."""

    ax: float = 0.0      # [m/s^2]
    ay: float = 0.0      # [m/s^2]
    dpsi: float = 0.0    # [rad/s]
    dphi: float = 0.0    # [rad/s]
    seed: int = 0

    def stds(self) -> np.ndarray:
        return np.array([self.ax, self.ay, self.dpsi, self.dphi])

    @property
    def enabled(self) -> bool:
        return bool(np.any(self.stds() > 0))


@dataclass(frozen=True)
class Scenario:
    name: str
    speed_kph: float                  # plant nominal speed
    duration_s: float
    dt: float = 1e-3
    input_source: str = 'trim-hold'   # trim-hold | constant | doublet | csv
    constant_torques: tuple = (0.0, 0.0, 0.0, 0.0)
    input_csv: Optional[Path] = None
    doublet_amplitude_nm: float = 20.0
    doublet_start_s: float = 1.0
    doublet_period_s: float = 2.0
    observer_speed_kph: Optional[float] = None   # default: plant speed
    init_rule: str = 'trim'           # trim | no-slippage | explicit
    init_state: Optional[tuple] = None
    rider_mass_scale: float = 1.0
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    qw_scale: float = 1.0
    rw_scale: float = 1.0

    def __post_init__(self):
        problems = []
        if self.duration_s <= 0:
            problems.append(f'duration_s must be > 0, got {self.duration_s}')
        if not 0.0 < self.dt <= DT_MAX:
            problems.append(f'dt must be in (0, {DT_MAX}], got {self.dt}')
        if self.speed_kph <= 0:
            problems.append(f'speed_kph must be > 0, got {self.speed_kph}')
        if self.rider_mass_scale <= 0:
            problems.append(f'rider_mass_scale must be > 0, got {self.rider_mass_scale}')
        if self.qw_scale <= 0 or self.rw_scale <= 0:
            problems.append('qw_scale and rw_scale must be > 0')
        if self.input_source not in ('trim-hold', 'constant', 'doublet', 'csv'):
            problems.append(f'unknown input source {self.input_source!r}')
        if self.input_source == 'csv' and self.input_csv is None:
            problems.append('input_source = csv requires an input_csv path')
        if self.init_rule not in ('trim', 'no-slippage', 'explicit'):
            problems.append(f'unknown init rule {self.init_rule!r}')
        if self.init_rule == 'explicit' and (self.init_state is None
                                             or len(self.init_state) != 14):
            problems.append('explicit init requires a 14-entry init_state')
        if problems:
            raise ScenarioError('invalid scenario:\n  ' + '\n  '.join(problems))

    @property
    def design_speed_kph(self) -> float:
        return self.speed_kph if self.observer_speed_kph is None \
            else self.observer_speed_kph

    def steer_doublet(self, t: np.ndarray) -> np.ndarray:
        """Smooth lane-change steering-torque doublet at the grid times."""
        tau = np.zeros_like(t)
        t0, T = self.doublet_start_s, self.doublet_period_s
        ph = (t - t0) / T
        active = (ph >= 0) & (ph <= 1)
        # one full sine period, smoothly windowed: push one way then back
        tau[active] = self.doublet_amplitude_nm * np.sin(
            2 * np.pi * ph[active]) * np.sin(np.pi * ph[active]) ** 2
        return tau


def load_scenario(path) -> Scenario:
    """Parse a scenario file; relative paths resolve against its directory."""
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f'scenario file not found: {path}')
    cp = configparser.ConfigParser(inline_comment_prefixes=('#', ';'),
                                   interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(path.read_text(encoding='utf-8'))
    except configparser.Error as exc:
        raise ScenarioError(f'cannot parse scenario file: {exc}') from exc
    if not cp.has_section('scenario'):
        raise ScenarioError('missing [scenario] section')
    sec = cp['scenario']

    def getf(key, default=None):
        if key not in sec:
            if default is None:
                raise ScenarioError(f'missing key [scenario] {key}')
            return default
        try:
            return float(sec[key])
        except ValueError:
            raise ScenarioError(f'[scenario] {key}: cannot parse {sec[key]!r}')

    kwargs = dict(
        name=sec.get('name', path.stem),
        speed_kph=getf('speed_kph'),
        duration_s=getf('duration_s'),
        dt=getf('dt', 1e-3),
        input_source=sec.get('input', 'trim-hold').strip(),
        doublet_amplitude_nm=getf('doublet_amplitude_nm', 20.0),
        doublet_start_s=getf('doublet_start_s', 1.0),
        doublet_period_s=getf('doublet_period_s', 2.0),
        init_rule=sec.get('init', 'trim').strip(),
    )
    if 'observer_speed_kph' in sec:
        kwargs['observer_speed_kph'] = getf('observer_speed_kph')
    if 'input_csv' in sec:
        kwargs['input_csv'] = (path.parent / sec['input_csv'].strip()).resolve()
    if 'init_state' in sec:
        parts = sec['init_state'].split()
        try:
            kwargs['init_state'] = tuple(float(x) for x in parts)
        except ValueError:
            raise ScenarioError('[scenario] init_state: cannot parse entries')
    if 'constant_torques' in sec:
        parts = sec['constant_torques'].split()
        if len(parts) != N_U:
            raise ScenarioError('[scenario] constant_torques needs 4 values '
                                '(tau, tauD, tauBf, tauBr)')
        kwargs['constant_torques'] = tuple(float(x) for x in parts)

    if cp.has_section('overrides'):
        ov = cp['overrides']
        if 'rider_mass_scale' in ov:
            kwargs['rider_mass_scale'] = float(ov['rider_mass_scale'])
    if cp.has_section('weights'):
        wt = cp['weights']
        if 'qw_scale' in wt:
            kwargs['qw_scale'] = float(wt['qw_scale'])
        if 'rw_scale' in wt:
            kwargs['rw_scale'] = float(wt['rw_scale'])
    if cp.has_section('noise'):
        nz = cp['noise']
        kwargs['noise'] = NoiseSpec(
            ax=float(nz.get('ax_std', 0.0)),
            ay=float(nz.get('ay_std', 0.0)),
            dpsi=float(nz.get('dpsi_std', 0.0)),
            dphi=float(nz.get('dphi_std', 0.0)),
            seed=int(nz.get('seed', 0)))
    return Scenario(**kwargs)
