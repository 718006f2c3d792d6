"""CSV formats: measurement traces, design bundles, metric tables.

Measurement CSV columns follow the IMU sensor order `t,ax,ay,dphi,dpsi`;
internally the package orders measurements as (ax, ay, dpsi, dphi) to match
the measurement-matrix rows, so the loader and writer swap the rate columns.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

MEAS_HEADER = 't,ax,ay,dphi,dpsi'


def _write_csv(path, header, rows):
    with open(path, 'w', encoding='utf-8', newline='\n') as fh:
        fh.write(header + '\n')
        for row in rows:
            fh.write(','.join(f'{x:.9g}' for x in row) + '\n')


def save_measurements(path, t, S_internal) -> None:
    """Write measurement samples; S_internal columns are (ax, ay, dpsi, dphi)."""
    t = np.asarray(t, dtype=float)
    S = np.asarray(S_internal, dtype=float)
    if S.ndim != 2 or S.shape[1] != 4 or len(t) != len(S):
        raise ValueError('expected t (n,) and S (n, 4)')
    file_cols = np.column_stack([t, S[:, 0], S[:, 1], S[:, 3], S[:, 2]])
    _write_csv(path, MEAS_HEADER, file_cols)


def load_measurements(path):
    """Read a measurement CSV; returns (t, S) with S in internal order
    (ax, ay, dpsi, dphi)."""
    raw = np.genfromtxt(path, delimiter=',', names=True)
    names = raw.dtype.names or ()
    expected = MEAS_HEADER.split(',')
    missing = [c for c in expected if c not in names]
    if missing:
        raise ValueError(f'measurement CSV missing columns: {missing}')
    raw = np.atleast_1d(raw)
    t = raw['t']
    S = np.column_stack([raw['ax'], raw['ay'], raw['dpsi'], raw['dphi']])
    return t, S


def save_matrix(path, M) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, 'w', encoding='utf-8', newline='\n') as fh:
        for row in M:
            fh.write(','.join(f'{x!r}' for x in row) + '\n')


def load_matrix(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=','))


def save_design_bundle(design, out_dir) -> Path:
    """Write A, B, C, D, G as CSV blocks plus a manifest and the spectrum."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = {}
    for name in ('A', 'B', 'C', 'D', 'G'):
        fname = f'{name}.csv'
        save_matrix(out / fname, getattr(design, name))
        names[name] = fname
    spec = design.closed_loop_spectrum
    _write_csv(out / 'spectrum.csv', 're,im',
               np.column_stack([spec.real, spec.imag]))
    manifest = {
        'format': 'motodyn-observer-design',
        'matrices': names,
        'spectrum': 'spectrum.csv',
        'trim_speed_mps': design.trim.speed,
        'trim_residual': design.trim.residual_norm,
        'riccati_residual': design.riccati_residual,
        'stability_margin': design.stability_margin,
        'measurement_order': ['ax', 'ay', 'dpsi', 'dphi'],
        'state_order': ['psi', 'phi', 'delta', 'vx', 'vy', 'dpsi', 'dphi',
                        'ddelta', 'dthf', 'dthr', 'Ffx', 'Frx', 'Ffy', 'Fry'],
    }
    (out / 'manifest.json').write_text(json.dumps(manifest, indent=2) + '\n',
                                       encoding='utf-8')
    return out / 'manifest.json'


def save_table(path, header_cols, rows) -> None:
    """Write a simple metrics table; cells formatted %.9g, NaN allowed."""
    with open(path, 'w', encoding='utf-8', newline='\n') as fh:
        fh.write(','.join(header_cols) + '\n')
        for row in rows:
            cells = []
            for x in row:
                if isinstance(x, str):
                    cells.append(x)
                else:
                    cells.append(f'{x:.9g}')
            fh.write(','.join(cells) + '\n')
