import numpy as np

import pytest

from scipy.linalg import solve_discrete_are

from ebsesim.errors import ConvergenceError, DimensionError, UnstableObserverError
from ebsesim.model import LtiModel, measure, step_process
from ebsesim.observer import (
    CentralEstimate,
    ControllerGain,
    ObserverGain,
    central_predict,
    central_update,
    certify_decay,
    design_kalman_gain,
    design_lqr_gain,
    observer_matrix,
    stability_constants,
)
from ebsesim.scenario import BENCHMARK_A, BENCHMARK_B
from ebsesim.utils import spectral_radius


def test_gain_blocks(two_channel_model, two_channel_gain):
    blocks = two_channel_gain.blocks

    np.testing.assert_array_equal(blocks[0], [[0.5], [0.0]])
    np.testing.assert_array_equal(two_channel_gain.block(1), [[0.05], [0.4]])
    rebuilt = ObserverGain.from_blocks(blocks, two_channel_model)
    np.testing.assert_array_equal(rebuilt.L, two_channel_gain.L)


def test_gain_shape_is_checked(two_channel_model):
    with pytest.raises(DimensionError):
        ObserverGain([[0.5, 0.0]], two_channel_model)
    with pytest.raises(DimensionError):
        ControllerGain([[1.0]], two_channel_model)


def test_central_predict_and_update(two_channel_model, two_channel_gain):
    previous = CentralEstimate(np.zeros(2), np.array([1.0, 1.0]))
    x_pred = central_predict(two_channel_model, two_channel_gain, previous, [1.0])
    np.testing.assert_allclose(x_pred, [1.0, 1.8])

    y = np.array([2.0, 1.8])
    x_filt = central_update(two_channel_model, two_channel_gain, x_pred, y)
    np.testing.assert_allclose(x_filt, x_pred + two_channel_gain.L @ (y - x_pred))


def test_observer_matrix(two_channel_model, two_channel_gain):
    expected = (np.eye(2) - two_channel_gain.L) @ two_channel_model.A

    np.testing.assert_allclose(observer_matrix(two_channel_model, two_channel_gain), expected)


def test_decay_certificate_bounds_every_power():
    M = np.array([[0.5, 10.0], [0.0, 0.5]])
    m_c, rho_c = certify_decay(M)

    assert rho_c == pytest.approx(0.75)
    assert m_c > 1.0
    power = np.eye(2)
    for k in range(200):
        assert np.linalg.norm(power, 2) <= m_c * rho_c ** k * (1 + 1e-12)
        power = power @ M


def test_decay_certificate_with_explicit_rate():
    m_c, rho_c = certify_decay(np.array([[0.5]]), rho=0.6)

    assert (m_c, rho_c) == (1.0, 0.6)
    with pytest.raises(UnstableObserverError):
        certify_decay(np.array([[0.5]]), rho=0.4)


def test_unstable_reference_observer():
    model = LtiModel([[2.0]], [[1.0]], [[1.0]])

    with pytest.raises(UnstableObserverError):
        stability_constants(model, ObserverGain([[0.0]], model))


def test_kalman_gain_matches_scipy():
    model = LtiModel([[0.9, 0.2], [0.0, 0.7]], [[0.0], [1.0]], np.eye(2))
    Q, R = 0.01 * np.eye(2), 0.04 * np.eye(2)
    gain = design_kalman_gain(model, Q, R)

    P = solve_discrete_are(model.A.T, model.C.T, Q, R)
    expected = P @ model.C.T @ np.linalg.inv(model.C @ P @ model.C.T + R)
    np.testing.assert_allclose(gain.L, expected, atol=1e-7)
    assert spectral_radius(observer_matrix(model, gain)) < 1.0


def test_lqr_gain_matches_scipy():
    model = LtiModel(BENCHMARK_A, BENCHMARK_B, np.eye(4), input_partition=[(0, 2), (2, 4)])
    Qx, Ru = np.diag([10.0, 1.0, 10.0, 1.0]), np.eye(4)
    gain = design_lqr_gain(model, Qx, Ru)

    X = solve_discrete_are(model.A, model.B, Qx, Ru)
    expected = -np.linalg.solve(model.B.T @ X @ model.B + Ru, model.B.T @ X @ model.A)
    np.testing.assert_allclose(gain.F, expected, rtol=1e-6, atol=1e-8)
    assert spectral_radius(model.A + model.B @ gain.F) < 1.0
    np.testing.assert_array_equal(gain.block(1), gain.F[2:4])


def test_kalman_design_needs_detectability():
    model = LtiModel([[1.5, 0.0], [0.0, 0.5]], [[1.0], [1.0]], [[0.0, 1.0]])

    with pytest.raises(ConvergenceError):
        design_kalman_gain(model, np.eye(2), [[1.0]])


def test_riccati_weights_are_checked(scalar_model):
    with pytest.raises(ConvergenceError, match='positive definite'):
        design_kalman_gain(scalar_model, [[1.0]], [[0.0]])
    with pytest.raises(ConvergenceError, match='symmetric'):
        design_lqr_gain(LtiModel(np.eye(2) * 0.5, np.eye(2), np.eye(2)), [[1.0, 1.0], [0.0, 1.0]], np.eye(2))


def test_central_error_recursion(two_channel_model, two_channel_gain):
    model, gain = two_channel_model, two_channel_gain
    rng = np.random.default_rng(11)
    I_LC_A = observer_matrix(model, gain)
    I_LC = np.eye(2) - gain.L @ model.C
    x, estimate = np.array([1.0, -1.0]), CentralEstimate(np.zeros(2), np.zeros(2))
    error = x - estimate.x_filt

    for _ in range(100):
        u, v, w = rng.normal(size=1), rng.normal(scale=0.1, size=2), rng.normal(scale=0.1, size=2)
        x = step_process(model, x, u, v)
        x_pred = central_predict(model, gain, estimate, u)
        estimate = CentralEstimate(x_pred, central_update(model, gain, x_pred, measure(model, x, w)))
        expected = I_LC_A @ error + I_LC @ v - gain.L @ w
        error = x - estimate.x_filt

        np.testing.assert_allclose(error, expected, rtol=1e-10, atol=1e-12)


def test_lqr_design_needs_stabilizable_inputs():
    with pytest.raises(ConvergenceError):
        design_lqr_gain(LtiModel([[1.5]], [[0.0]], [[1.0]]), [[1.0]], [[1.0]])


def test_lqr_design_needs_inputs():
    model = LtiModel([[0.5]], [], [[1.0]])

    with pytest.raises(ConvergenceError, match='at least one input'):
        design_lqr_gain(model, [[1.0]], np.zeros((0, 0)))
