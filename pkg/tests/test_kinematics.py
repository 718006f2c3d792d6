import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import motodyn as md
from symbolic_oracle import evaluate as oracle

BODIES = ('G_f', 'G_r', 'R_f', 'R_r')
ANGLES = st.floats(-10.0, 10.0, allow_nan=False)


def _rand_state(rng, qscale=1.2, vscale=3.0):
    q = rng.uniform(-qscale, qscale, 7)
    v = rng.uniform(-vscale, vscale, 7)
    return q, v


# ---------------------------------------------------------------- rotations

def test_rot_z_zero_is_identity():
    np.testing.assert_allclose(md.rot_z(0.0), np.eye(3), atol=0)


def test_rot_x_maps_y_to_z():
    v = md.rot_x(np.pi / 2) @ np.array([0.0, 1.0, 0.0])
    np.testing.assert_allclose(v, [0.0, 0.0, 1.0], atol=1e-15)


def test_rot_y_inverse():
    eps = np.deg2rad(24.0)
    np.testing.assert_allclose(md.rot_y(eps) @ md.rot_y(-eps), np.eye(3),
                               atol=1e-15)


def test_rot_y_sign_layout():
    # caster tilt matrix carries -sin at row 1, column 3
    eps = 0.3
    R = md.rot_y(eps)
    assert R[0, 2] == -np.sin(eps)
    assert R[2, 0] == np.sin(eps)


@given(ANGLES)
@settings(max_examples=200, deadline=None)
def test_rotations_orthonormal(a):
    for rot in (md.rot_x, md.rot_y, md.rot_z):
        R = rot(a)
        assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-12
        assert abs(np.linalg.det(R) - 1.0) < 1e-12


# ------------------------------------------------------------ skew mapping

def test_skew_zero():
    np.testing.assert_array_equal(md.skew_to_vector(np.zeros((3, 3))),
                                  np.zeros(3))


def test_skew_round_trip():
    w = np.array([1.0, 2.0, 3.0])
    W = np.array([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]])
    np.testing.assert_array_equal(md.skew_to_vector(W), w)


def test_skew_rejects_non_skew():
    with pytest.raises(ValueError):
        md.skew_to_vector(np.eye(3))


def test_skew_of_rotation_rate():
    # d/dt rot_x(phi(t)) rot_x(phi)^T at dphi = 2 has axial vector (2, 0, 0);
    # derivative computed by central difference, independent of the package
    phi, dphi, h = 0.7, 2.0, 1e-7
    Rdot = (md.rot_x(phi + dphi * h) - md.rot_x(phi - dphi * h)) / (2 * h)
    W = Rdot @ md.rot_x(phi).T
    np.testing.assert_allclose(md.skew_to_vector(W), [2.0, 0.0, 0.0],
                               atol=1e-6)


# ----------------------------------------------------------------- poses

def test_rear_body_pose_upright(params):
    r, R = md.body_pose_V('G_r', np.zeros(7), params)
    np.testing.assert_allclose(r, [0.0, 0.0, 0.5712], atol=1e-15)
    np.testing.assert_allclose(R, np.eye(3), atol=0)


def test_rear_wheel_pose_upright(params):
    r, _ = md.body_pose_V('R_r', np.zeros(7), params)
    np.testing.assert_allclose(r, [-0.643, 0.0, 0.297], atol=1e-15)


def test_front_wheel_pose_upright_matrix_oracle(params):
    # independent evaluation of the chain by explicit matrix products
    eps = params.eps
    Reps = np.array([[np.cos(eps), 0, -np.sin(eps)],
                     [0, 1, 0],
                     [np.sin(eps), 0, np.cos(eps)]])
    expected = Reps @ (np.array([params.a, 0, 0])
                       + np.array([params.c, 0, -params.s]))
    r, _ = md.body_pose_V('R_f', np.zeros(7), params)
    np.testing.assert_allclose(r, expected, atol=1e-15)
    # geometric consistency: the front wheel center sits above the front
    # contact at one wheel radius
    np.testing.assert_allclose(r, [params.l_f, 0.0, params.R_f], atol=5e-5)


def test_world_pose_translation(params):
    q = np.zeros(7)
    q[0], q[1] = 1.0, 2.0
    r, _ = md.body_pose_world('G_r', q, params)
    np.testing.assert_allclose(r, [1.0, 2.0, 0.5712], atol=1e-15)


def test_world_pose_yawed_matrix_oracle(params):
    q = np.zeros(7)
    q[2] = np.pi / 2
    cz, sz = np.cos(q[2]), np.sin(q[2])
    Rpsi = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    expected = Rpsi @ np.array([-params.l_r, 0.0, params.R_r])
    r, _ = md.body_pose_world('R_r', q, params)
    np.testing.assert_allclose(r, expected, atol=1e-15)


def test_world_rotation_orthonormal_random(params):
    rng = np.random.default_rng(3)
    for _ in range(1000):
        q, _ = _rand_state(rng)
        body = BODIES[rng.integers(4)]
        _, R = md.body_pose_world(body, q, params)
        assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-12


def test_upright_poses_in_symmetry_plane(params):
    for body in BODIES:
        r, _ = md.body_pose_V(body, np.zeros(7), params)
        assert r[1] == 0.0


def test_pose_independent_of_translation_and_spin(params):
    rng = np.random.default_rng(11)
    q, _ = _rand_state(rng)
    q2 = q.copy()
    q2[[0, 1, 5, 6]] = rng.uniform(-5, 5, 4)
    for body in BODIES:
        rV1, R1 = md.body_pose_V(body, q, params)
        rV2, R2 = md.body_pose_V(body, q2, params)
        np.testing.assert_array_equal(rV1, rV2)
        np.testing.assert_array_equal(R1, R2)


# ----------------------------------------------------- velocity kinematics

def test_uniform_translation(params):
    q = np.zeros(7)
    v = np.array([10.0, 0, 0, 0, 0, 0, 0])
    k = md.body_kinematics('G_r', q, v, params)
    np.testing.assert_allclose(k.v_world, [10.0, 0, 0], atol=0)
    np.testing.assert_allclose(k.w_world, np.zeros(3), atol=0)
    np.testing.assert_allclose(k.a_res, np.zeros(3), atol=0)


def test_pure_roll_rate(params):
    q = np.zeros(7)
    v = np.zeros(7)
    v[3] = 1.0
    k = md.body_kinematics('G_r', q, v, params)
    np.testing.assert_allclose(k.w_world, [1.0, 0, 0], atol=1e-15)
    # height-h COM swings toward -y under positive roll
    np.testing.assert_allclose(k.v_world, [0.0, -0.5712, 0.0], atol=1e-15)


def test_pure_wheel_spin(params):
    q = np.zeros(7)
    v = np.zeros(7)
    v[6] = 5.0
    k = md.body_kinematics('R_r', q, v, params)
    np.testing.assert_allclose(k.w_world, [0.0, 5.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(k.v_world, np.zeros(3), atol=0)


def test_velocity_linearity_in_v(params):
    rng = np.random.default_rng(5)
    q, _ = _rand_state(rng)
    v1 = rng.uniform(-2, 2, 7)
    v2 = rng.uniform(-2, 2, 7)
    a, b = 1.7, -0.6
    for body in BODIES:
        k1 = md.body_kinematics(body, q, v1, params)
        k2 = md.body_kinematics(body, q, v2, params)
        kc = md.body_kinematics(body, q, a * v1 + b * v2, params)
        np.testing.assert_allclose(kc.v_world, a * k1.v_world + b * k2.v_world,
                                   atol=1e-12)
        np.testing.assert_allclose(kc.w_world, a * k1.w_world + b * k2.w_world,
                                   atol=1e-12)


def test_jacobians_match_finite_differences(params):
    rng = np.random.default_rng(17)
    h = 1e-6
    for _ in range(200):
        q = rng.uniform(-1.2, 1.2, 7)
        v = rng.uniform(-20, 20, 7)
        body = BODIES[rng.integers(4)]
        k = md.body_kinematics(body, q, v, params)
        for j in range(7):
            vp, vm = v.copy(), v.copy()
            vp[j] += h
            vm[j] -= h
            kp = md.body_kinematics(body, q, vp, params)
            km = md.body_kinematics(body, q, vm, params)
            dv = (kp.v_world - km.v_world) / (2 * h)
            dw = (kp.w_world - km.w_world) / (2 * h)
            scale = max(1.0, np.max(np.abs(k.Jv[:, j])), np.max(np.abs(k.Jw[:, j])))
            assert np.max(np.abs(dv - k.Jv[:, j])) < 1e-6 * scale
            assert np.max(np.abs(dw - k.Jw[:, j])) < 1e-6 * scale


def test_residuals_match_trajectory_differencing(params):
    # advance (q, v) by (v, vdot) dt and difference the world velocity:
    # the result must match Jv vdot + a_res to first order
    rng = np.random.default_rng(23)
    dt = 1e-6
    for _ in range(25):
        q = rng.uniform(-1.0, 1.0, 7)
        v = rng.uniform(-3, 3, 7)
        vdot = rng.uniform(-3, 3, 7)
        for body in BODIES:
            k0 = md.body_kinematics(body, q, v, params)
            k1 = md.body_kinematics(body, q + v * dt, v + vdot * dt, params)
            a_fd = (k1.v_world - k0.v_world) / dt
            a_exact = k0.Jv @ vdot + k0.a_res
            assert np.max(np.abs(a_fd - a_exact)) < 1e-4
            g_fd = (k1.w_world - k0.w_world) / dt
            g_exact = k0.Jw @ vdot + k0.g_res
            assert np.max(np.abs(g_fd - g_exact)) < 1e-4


def test_closed_forms_match_symbolic_oracle(params):
    rng = np.random.default_rng(42)
    for _ in range(25):
        q = rng.uniform(-1.2, 1.2, 7)
        v = rng.uniform(-3, 3, 7)
        for body in BODIES:
            k = md.body_kinematics(body, q, v, params)
            r_o, R_o, Jv_o, Jw_o, ar_o, gr_o = oracle(body, params, q, v)
            np.testing.assert_allclose(k.r_world, r_o, atol=1e-11)
            np.testing.assert_allclose(k.R_world, R_o, atol=1e-12)
            np.testing.assert_allclose(k.Jv, Jv_o, atol=1e-11)
            np.testing.assert_allclose(k.Jw, Jw_o, atol=1e-11)
            np.testing.assert_allclose(k.a_res, ar_o, atol=1e-10)
            np.testing.assert_allclose(k.g_res, gr_o, atol=1e-10)


def test_velocity_consistency_with_jacobian(params):
    rng = np.random.default_rng(9)
    q, v = _rand_state(rng)
    for body in BODIES:
        k = md.body_kinematics(body, q, v, params)
        np.testing.assert_array_equal(k.v_world, k.Jv @ v)
        np.testing.assert_array_equal(k.w_world, k.Jw @ v)


def test_state_validation(params):
    with pytest.raises(md.StateError):
        md.body_kinematics('G_r', np.array([0, 0, 0, 1.8, 0, 0, 0.0]),
                           np.zeros(7), params)   # roll out of domain
    with pytest.raises(md.StateError):
        md.body_kinematics('G_r', np.zeros(6), np.zeros(7), params)
