"""Command-line harness: trim, design, run (co-simulation), compare.

Exit codes: 0 success, 1 IO/config error, 2 trim failure, 3 design failure,
4 runtime numeric failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io as mio
from .estimator import (DetectabilityError, LinearizationError, RiccatiError,
                        TrimError, design_observer, find_trim, no_slippage_init,
                        run_observer, synthesize_measurements)
from .parameters import ParameterError, ParameterSet, load_parameters, default_parameters
from .scenario import Scenario, ScenarioError, load_scenario
from .simulator import (InputTrace, SimulationError, Trajectory, simulate,
                        trajectory_from_csv, trajectory_to_csv)
from .state import EXT_LABELS, INPUT_LABELS, N_U, IX_VX

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_TRIM = 2
EXIT_DESIGN = 3
EXIT_NUMERIC = 4

KPH = 1.0 / 3.6


def _load_params(path) -> ParameterSet:
    if path is None:
        return default_parameters()
    return load_parameters(path)


def cmd_trim(args) -> int:
    try:
        p = _load_params(args.params)
    except ParameterError as exc:
        print(f'error: {exc}', file=sys.stderr)
        return EXIT_CONFIG
    v = args.speed_kph * KPH
    try:
        tp = find_trim(v, p)
    except TrimError as exc:
        print(f'trim failed: {exc}', file=sys.stderr)
        return EXIT_TRIM
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [(name, val) for name, val in zip(EXT_LABELS, tp.X_star)]
    rows += [(name, val) for name, val in zip(INPUT_LABELS, tp.u_star)]
    rows.append(('residual_inf_norm', tp.residual_norm))
    mio.save_table(out / 'trim.csv', ('quantity', 'value'), rows)
    report = [
        f'rectilinear trim at {args.speed_kph:g} kph ({v:.6g} m/s)',
        f'  vx*      = {tp.X_star[IX_VX]:.9g} m/s',
        f'  dthf*    = {tp.X_star[8]:.9g} rad/s',
        f'  dthr*    = {tp.X_star[9]:.9g} rad/s',
        f'  Ffx*     = {tp.X_star[10]:.9g} N',
        f'  Frx*     = {tp.X_star[11]:.9g} N',
        f'  tauD*    = {tp.u_star[1]:.9g} N m',
        f'  residual = {tp.residual_norm:.3e} (tolerance 1e-8)',
    ]
    (out / 'report.txt').write_text('\n'.join(report) + '\n', encoding='utf-8')
    print('\n'.join(report))
    return EXIT_OK


def cmd_design(args) -> int:
    try:
        p = _load_params(args.params)
    except ParameterError as exc:
        print(f'error: {exc}', file=sys.stderr)
        return EXIT_CONFIG
    v = args.speed_kph * KPH
    try:
        tp = find_trim(v, p)
    except TrimError as exc:
        print(f'trim failed: {exc}', file=sys.stderr)
        return EXIT_TRIM
    try:
        design = design_observer(p, v, tp=tp,
                                 Q_w=args.qw * np.ones(14),
                                 R_w=args.rw * np.ones(4))
    except (DetectabilityError, RiccatiError, LinearizationError) as exc:
        print(f'design failed: {exc}', file=sys.stderr)
        return EXIT_DESIGN
    manifest = mio.save_design_bundle(design, args.out)
    spec = design.closed_loop_spectrum
    print(f'observer design at {args.speed_kph:g} kph written to {manifest.parent}')
    print(f'  riccati residual   = {design.riccati_residual:.3e}')
    print(f'  stability margin   = {design.stability_margin:.6g} '
          '(max Re over non-gauge closed-loop modes)')
    print(f'  gauge mode |eig|   = {np.min(np.abs(spec)):.3e} '
          '(heading integrator, structurally marginal)')
    return EXIT_OK


def _plant_initial_state(scn: Scenario, plant_trim, p: ParameterSet):
    if scn.init_rule == 'trim':
        return plant_trim.X_star.copy()
    if scn.init_rule == 'no-slippage':
        v0 = scn.speed_kph * KPH
        X0 = np.zeros(14)
        X0[3] = v0
        X0[8] = v0 / p.R_f
        X0[9] = v0 / p.R_r
        return X0
    return np.array(scn.init_state, dtype=float)


def _plant_inputs(scn: Scenario, plant_trim, n_steps: int):
    t = np.arange(n_steps) * scn.dt
    if scn.input_source == 'trim-hold':
        return InputTrace.constant(plant_trim.u_star)
    if scn.input_source == 'constant':
        return InputTrace.constant(np.array(scn.constant_torques))
    if scn.input_source == 'doublet':
        U = np.tile(plant_trim.u_star, (n_steps, 1))
        U[:, 0] += scn.steer_doublet(t)
        return InputTrace(t, U)
    raw = np.genfromtxt(scn.input_csv, delimiter=',', names=True)
    names = raw.dtype.names or ()
    need = ('t', 'tau', 'tauD', 'tauBf', 'tauBr')
    missing = [c for c in need if c not in names]
    if missing:
        raise ScenarioError(f'input CSV missing columns: {missing}')
    raw = np.atleast_1d(raw)
    return InputTrace(raw['t'], np.column_stack(
        [raw['tau'], raw['tauD'], raw['tauBf'], raw['tauBr']]))


def _estimate_accel(design, X_hat, U_abs):
    xdev = X_hat - design.trim.X_star[None, :]
    udev = U_abs - design.trim.u_star[None, :]
    dx = xdev @ design.A.T + udev @ design.B.T
    return dx[:, 3:5]


def _final_window_metrics(t, ref, est, labels):
    """Static error over the final 20% of the run, absolute and percent."""
    k0 = int(np.floor(0.8 * (len(t) - 1)))
    rows = []
    for j, name in enumerate(labels):
        rmean = float(np.mean(ref[k0:, j]))
        emean = float(np.mean(est[k0:, j]))
        abserr = emean - rmean
        pct = abs(abserr) / abs(rmean) * 100.0 if abs(rmean) > 1e-12 else np.nan
        rows.append((name, rmean, emean, abserr, pct))
    return rows


def cmd_run(args) -> int:
    try:
        scn = load_scenario(args.scenario)
        params_path = getattr(args, 'params', None)
        p_nom = _load_params(params_path)
    except (ScenarioError, ParameterError) as exc:
        print(f'error: {exc}', file=sys.stderr)
        return EXIT_CONFIG
    p_plant = p_nom.with_rider_mass_scale(scn.rider_mass_scale) \
        if scn.rider_mass_scale != 1.0 else p_nom

    try:
        plant_trim = find_trim(scn.speed_kph * KPH, p_plant)
    except TrimError as exc:
        print(f'trim failed (plant): {exc}', file=sys.stderr)
        return EXIT_TRIM
    try:
        design = design_observer(
            p_nom, scn.design_speed_kph * KPH,
            Q_w=scn.qw_scale * np.ones(14),
            R_w=scn.rw_scale * np.ones(4))
    except TrimError as exc:
        print(f'trim failed (observer design): {exc}', file=sys.stderr)
        return EXIT_TRIM
    except (DetectabilityError, RiccatiError, LinearizationError) as exc:
        print(f'design failed: {exc}', file=sys.stderr)
        return EXIT_DESIGN

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n_steps = int(np.ceil(round(scn.duration_s / scn.dt, 9)))
    try:
        X0 = _plant_initial_state(scn, plant_trim, p_plant)
        inputs = _plant_inputs(scn, plant_trim, n_steps)
        traj = simulate(X0, inputs, scn.dt, scn.duration_s, p_plant)
    except (SimulationError, ScenarioError, ValueError) as exc:
        print(f'simulation failed: {exc}', file=sys.stderr)
        return EXIT_NUMERIC if isinstance(exc, SimulationError) else EXIT_CONFIG
    trajectory_to_csv(traj, out / 'plant.csv')
    if traj.failure is not None:
        print(f'simulation aborted at t = {traj.failure.t:.3f} s: '
              f'{traj.failure.reason} (truncated trajectory written)',
              file=sys.stderr)
        return EXIT_NUMERIC

    noise = scn.noise
    S = synthesize_measurements(
        traj, noise_std=noise.stds() if noise.enabled else None,
        seed=noise.seed)
    mio.save_measurements(out / 'measurements.csv', traj.t[:-1], S)

    try:
        x_hat0 = no_slippage_init(design, v_nominal=scn.speed_kph * KPH)
        t_est, X_hat = run_observer(S, traj.inputs[:-1], design,
                                    x_hat0=x_hat0, dt=scn.dt)
    except RuntimeError as exc:
        print(f'observer failed: {exc}', file=sys.stderr)
        return EXIT_NUMERIC
    est_acc = _estimate_accel(design, X_hat, traj.inputs)
    est_traj = Trajectory(t=t_est, states=X_hat, inputs=traj.inputs,
                          accel=est_acc,
                          low_speed=np.zeros(len(t_est), bool))
    trajectory_to_csv(est_traj, out / 'estimate.csv')

    rows = _final_window_metrics(traj.t, traj.states, X_hat, EXT_LABELS)
    mio.save_table(out / 'metrics.csv',
                   ('state', 'plant_mean', 'estimate_mean', 'static_error',
                    'static_error_pct'), rows)
    print(f'scenario {scn.name!r}: wrote plant.csv, measurements.csv, '
          f'estimate.csv, metrics.csv to {out}')
    for name, rmean, emean, abserr, pct in rows:
        pct_s = f'{pct:.4g}%' if np.isfinite(pct) else 'n/a'
        print(f'  {name:7s} plant {rmean:+.6g}  est {emean:+.6g}  '
              f'err {abserr:+.4g} ({pct_s})')
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        ref = trajectory_from_csv(args.ref)
        est = trajectory_from_csv(args.est)
    except (OSError, ValueError) as exc:
        print(f'error: {exc}', file=sys.stderr)
        return EXIT_CONFIG
    tr, te = ref.t, est.t
    Er = np.column_stack([ref.states, ref.accel])
    Ee = np.column_stack([est.states, est.accel])
    if len(tr) != len(te) or (len(tr) > 1 and abs(tr[1] - tr[0] - (te[1] - te[0])) > 1e-12):
        print('warning: time grids differ; zero-order-hold resampling the '
              'estimate onto the reference grid', file=sys.stderr)
        idx = np.clip(np.searchsorted(te, tr, side='right') - 1, 0, len(te) - 1)
        Ee = Ee[idx]
    labels = list(EXT_LABELS) + ['ax', 'ay']
    k0 = int(np.floor(0.8 * (len(tr) - 1)))
    rows = []
    for j, name in enumerate(labels):
        err = Ee[:, j] - Er[:, j]
        rms = float(np.sqrt(np.mean(err ** 2)))
        fmean = float(np.mean(err[k0:]))
        rmean = float(np.mean(Er[k0:, j]))
        pct = abs(fmean) / abs(rmean) * 100.0 if abs(rmean) > 1e-12 else np.nan
        rows.append((name, rms, fmean, pct))
    mio.save_table(args.out, ('channel', 'rms', 'final_window_mean_error',
                              'static_error_pct'), rows)
    print(f'comparison metrics written to {args.out}')
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog='motodyn',
        description='Four-body motorcycle dynamics: trim, linearize, design '
                    'an IMU-driven observer, co-simulate and compare traces.')
    sub = ap.add_subparsers(dest='command', required=True)

    tp = sub.add_parser('trim', help='solve a rectilinear trim and report it')
    tp.add_argument('--params', help='parameter file (default: packaged set)')
    tp.add_argument('--speed-kph', type=float, required=True,
                    help='forward speed in kph; must map into [5, 60] m/s')
    tp.add_argument('--out', required=True, help='output directory')
    tp.set_defaults(func=cmd_trim)

    dp = sub.add_parser('design', help='linearize at trim and synthesize the '
                                       'observer gain bundle')
    dp.add_argument('--params')
    dp.add_argument('--speed-kph', type=float, required=True)
    dp.add_argument('--qw', type=float, default=1.0,
                    help='scale on the identity process weight (normalized '
                         'coordinates, default 1)')
    dp.add_argument('--rw', type=float, default=1e-2,
                    help='scale on the identity measurement weight (default '
                         '1e-2, idealized IMU)')
    dp.add_argument('--out', required=True, help='output directory')
    dp.set_defaults(func=cmd_design)

    rp = sub.add_parser('run', help='co-simulate a scenario: plant, '
                                    'measurements, observer, error metrics')
    rp.add_argument('--scenario', required=True, help='scenario file')
    rp.add_argument('--params', help='parameter file (default: packaged set)')
    rp.add_argument('--out', required=True, help='output directory')
    rp.set_defaults(func=cmd_run)

    cp = sub.add_parser('compare', help='metric table between two trajectory '
                                        'CSVs (reference vs estimate)')
    cp.add_argument('--ref', required=True)
    cp.add_argument('--est', required=True)
    cp.add_argument('--out', required=True, help='output CSV file')
    cp.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f'error: {exc}', file=sys.stderr)
        return EXIT_CONFIG


if __name__ == '__main__':
    sys.exit(main())
