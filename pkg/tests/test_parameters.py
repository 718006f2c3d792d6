import numpy as np
import pytest

import motodyn as md
from motodyn.parameters import (IP_FFZ, IP_FRZ, IP_TIRE, pack,
                                derived_com_offset)

# frozen reference values for the shipped parameter set
TOTAL_MASS = 303.0                      # 257.06 + 24.24 + 7.0 + 14.7
DERIVED_LM = 0.04573408856427599        # mass-weighted COM offset at upright
RIDER_130_MASS = 380.118                # 303.0 + 0.3 * 257.06


def test_default_file_values(params):
    assert params.l_f == 0.727
    assert params.R_r == 0.297
    assert params.K_delta == 12.6738
    assert params.eps_deg == 24.0
    assert params.J_Gr[0, 2] == -3.659
    assert params.tire_front.kappa.B > 0


def test_total_mass(params):
    assert md.total_mass(params) == pytest.approx(TOTAL_MASS, abs=1e-12)


def test_total_mass_unit_masses(params):
    from dataclasses import replace
    p = replace(params, m_Gr=1.0, m_Gf=1.0, m_Rf=1.0, m_Rr=1.0, l_m=None)
    assert md.total_mass(p) == 4.0


def test_rider_mass_override(params):
    p = params.with_rider_mass_scale(1.3)
    assert md.total_mass(p) == pytest.approx(RIDER_130_MASS, abs=1e-9)
    # COM moves rearward with the heavier rear body and l_m is re-derived
    assert p.l_m < params.l_m


def test_derived_lm_value(params):
    assert params.l_m == pytest.approx(DERIVED_LM, abs=1e-15)


def test_derived_lm_matches_pose_chain(params):
    # independent oracle: mass-weighted COM x position from the full pose
    # chain evaluated per body at the upright configuration
    q0 = np.zeros(7)
    num = 0.0
    for body in ('G_f', 'G_r', 'R_f', 'R_r'):
        r, _ = md.body_pose_V(body, q0, params)
        num += params.body_mass(body) * r[0]
    assert derived_com_offset(params) == pytest.approx(
        num / md.total_mass(params), abs=1e-14)


def test_negative_mass_rejected(params):
    text = md.dumps_parameters(params).replace('m_Gf = 24.24', 'm_Gf = -1')
    with pytest.raises(md.ParameterError) as exc:
        md.loads_parameters(text)
    assert 'm_Gf' in str(exc.value)


def test_missing_key_rejected(params):
    text = md.dumps_parameters(params).replace('K_delta = 12.6738\n', '')
    with pytest.raises(md.ParameterError) as exc:
        md.loads_parameters(text)
    assert 'K_delta' in str(exc.value)


def test_asymmetric_inertia_rejected(params):
    from dataclasses import replace
    J = np.array(params.J_Gr)
    J[0, 1] = 0.5
    with pytest.raises(md.ParameterError) as exc:
        replace(params, J_Gr=J)
    assert 'J_Gr' in str(exc.value)


def test_every_violation_listed(params):
    text = md.dumps_parameters(params)
    text = text.replace('m_Gf = 24.24', 'm_Gf = -1')
    text = text.replace('R_r = 0.297', 'R_r = 0')
    with pytest.raises(md.ParameterError) as exc:
        md.loads_parameters(text)
    msg = str(exc.value)
    assert 'm_Gf' in msg and 'R_r' in msg


def test_round_trip_exact(params):
    text = md.dumps_parameters(params)
    p2 = md.loads_parameters(text)
    assert md.parameters_equal(params, p2)
    # second generation is byte-identical
    assert md.dumps_parameters(p2) == text


def test_round_trip_exact_after_perturbation(params):
    from dataclasses import replace
    rng = np.random.default_rng(7)
    p = replace(params, m_Gr=params.m_Gr * (1 + rng.random()),
                l_m=None, eps_deg=23.734501, sigma_fy=0.1931)
    p2 = md.loads_parameters(md.dumps_parameters(p))
    assert md.parameters_equal(p, p2)


def test_file_and_loader_errors(tmp_path):
    with pytest.raises(md.ParameterError):
        md.load_parameters(tmp_path / 'nope.cfg')
    bad = tmp_path / 'bad.cfg'
    bad.write_text('[geometry]\nl_f = not-a-number\n')
    with pytest.raises(md.ParameterError):
        md.load_parameters(bad)


def test_lm_override_honored(params):
    text = md.dumps_parameters(params).replace(
        f'l_m = {float(params.l_m)!r}', 'l_m = 0.01')
    p = md.loads_parameters(text)
    assert p.l_m == 0.01


def test_load_consistency_identity(params):
    # the vertical loads always rebuild m g exactly, by construction
    F_fz, F_rz = md.static_loads(params)
    m = md.total_mass(params)
    assert (F_fz + F_rz) == pytest.approx(m * params.g, rel=1e-9)


def test_pack_layout(params):
    P = pack(params)
    F_fz, F_rz = md.static_loads(params)
    assert P[IP_FFZ] == pytest.approx(F_fz, rel=1e-15)
    assert P[IP_FRZ] == pytest.approx(F_rz, rel=1e-15)
    # tire block: front kappa channel leads
    ch = params.tire_front.kappa
    assert tuple(P[IP_TIRE:IP_TIRE + 4]) == ch.as_tuple()


def test_tire_invariant_checks(params):
    text = md.dumps_parameters(params)
    bad = text.replace('[tire.front.alpha]\nB = 8.0\nC = 1.35',
                       '[tire.front.alpha]\nB = 8.0\nC = 3.5')
    with pytest.raises(md.ParameterError) as exc:
        md.loads_parameters(bad)
    assert 'tire.front.alpha' in str(exc.value)


def test_immutability(params):
    with pytest.raises(Exception):
        params.J_Gr[0, 0] = 5.0
    import dataclasses
    with pytest.raises(dataclasses.FrozenInstanceError):
        params.l_f = 1.0
