import numpy as np

import pytest

from ebsesim.agent import (
    AgentRole,
    AgentSpec,
    AgentState,
    DisturbanceInjection,
    agent_predict,
    agent_update,
    compute_control,
    is_reset_step,
    synchronous_reset,
    update_input_estimate,
)
from ebsesim.bus import BusFrame, FrameKind
from ebsesim.errors import DimensionError, RoleError, ScenarioError
from ebsesim.model import LtiModel
from ebsesim.observer import ControllerGain, central_update
from ebsesim.scenario import InputExchange


@pytest.fixture
def two_input_model():
    return LtiModel(np.eye(2) * 0.9, np.eye(2), np.eye(2), sensor_partition=[(0, 1), (1, 2)],
                    input_partition=[(0, 1), (1, 2)])


def test_agent_state_roles(two_input_model):
    sensor = AgentState(0, AgentSpec(AgentRole.SENSOR, (0,)), two_input_model, np.zeros(2))
    combined = AgentState(1, AgentSpec(AgentRole.COMBINED, (1,), 1), two_input_model, np.ones(2))

    assert sensor.senses and not sensor.estimates
    assert combined.senses and combined.estimates
    assert sensor.u is None
    np.testing.assert_array_equal(combined.u_last, [0.0])
    np.testing.assert_array_equal(combined.x_filt, [1.0, 1.0])
    assert 'agent 1 (combined)' in str(combined)


def test_predict_uses_the_input_estimate(two_channel_model):
    np.testing.assert_allclose(agent_predict(two_channel_model, [1.0, 1.0], [2.0]), [1.0, 2.8])


def test_update_without_measurements_keeps_the_prediction(two_channel_model, two_channel_gain):
    x_pred = np.array([0.3, -0.2])

    np.testing.assert_array_equal(agent_update(two_channel_model, two_channel_gain, x_pred, []), x_pred)
    np.testing.assert_allclose(agent_update(two_channel_model, two_channel_gain, x_pred, [], [0.1, 0.1]),
                               [0.4, -0.1])


def test_full_update_matches_the_central_observer(two_channel_model, two_channel_gain):
    x_pred = np.array([0.3, -0.2])
    y = np.array([0.5, 0.1])
    delivered = [(1, y[1:]), (0, y[:1])]

    np.testing.assert_allclose(agent_update(two_channel_model, two_channel_gain, x_pred, delivered),
                               central_update(two_channel_model, two_channel_gain, x_pred, y), atol=1e-15)


def test_update_rejects_duplicate_channels(two_channel_model, two_channel_gain):
    with pytest.raises(DimensionError):
        agent_update(two_channel_model, two_channel_gain, np.zeros(2), [(0, [1.0]), (0, [1.0])])


def test_update_checks_measurement_size(two_channel_model, two_channel_gain):
    with pytest.raises(DimensionError):
        agent_update(two_channel_model, two_channel_gain, np.zeros(2), [(0, [1.0, 2.0])])


@pytest.mark.parametrize('k, K, expected', [
    (0, 10, False), (10, 10, True), (15, 10, False), (20, 10, True), (10, 0, False),
])
def test_reset_steps(k, K, expected):
    assert is_reset_step(k, K) is expected


def test_synchronous_reset_averages_every_estimate():
    estimates = [np.array([1.0, 2.0]), np.array([3.0, 4.0]), np.array([5.0, 0.0])]
    reset = synchronous_reset(estimates, 20, 10)

    assert len(reset) == 3
    for estimate in reset:
        np.testing.assert_array_equal(estimate, [3.0, 2.0])
    reset[0][0] = 99.0
    assert reset[1][0] == 3.0


def test_synchronous_reset_outside_reset_steps():
    with pytest.raises(ValueError):
        synchronous_reset([np.zeros(2)], 5, 10)


def test_compute_control(two_input_model):
    gain = ControllerGain([[-0.5, 0.0], [0.0, -0.2]], two_input_model)
    state = AgentState(0, AgentSpec(AgentRole.COMBINED, (0,), 1), two_input_model, np.array([1.0, 2.0]))

    np.testing.assert_allclose(compute_control(gain, state), [-0.4])
    np.testing.assert_allclose(compute_control(gain, state, 0), [-0.5])


def test_sensor_agents_do_not_control(two_input_model):
    gain = ControllerGain(np.zeros((2, 2)), two_input_model)
    state = AgentState(0, AgentSpec(AgentRole.SENSOR, (0,)), two_input_model, np.zeros(2))

    with pytest.raises(RoleError):
        compute_control(gain, state, 0)


def test_input_estimate_takes_delivered_blocks_and_own_input(two_input_model):
    state = AgentState(0, AgentSpec(AgentRole.COMBINED, (0,), 0), two_input_model, np.zeros(2))
    state.u = np.array([0.7])
    frames = [BusFrame(FrameKind.INPUT, 1, 1, np.array([-0.3]), 4),
              BusFrame(FrameKind.INPUT, 0, 0, np.array([5.0]), 4),
              BusFrame(FrameKind.MEASUREMENT, 1, 1, np.array([9.0]), 4)]

    np.testing.assert_array_equal(update_input_estimate(two_input_model, state, frames), [0.7, -0.3])


def test_input_estimate_holds_the_last_value(two_input_model):
    state = AgentState(1, AgentSpec(AgentRole.ESTIMATOR), two_input_model, np.zeros(2))
    state.u_hat = np.array([0.1, 0.2])

    np.testing.assert_array_equal(update_input_estimate(two_input_model, state, []), [0.1, 0.2])


def test_scheduled_disturbances():
    injection = DisturbanceInjection(2, [(0, 1, [1.0, 0.0]), (5, 1, [0.0, 2.0]), (5, 1, [0.0, 1.0])])

    np.testing.assert_array_equal(injection.sample(5, 1), [0.0, 3.0])
    np.testing.assert_array_equal(injection.sample(5, 0), [0.0, 0.0])
    assert injection.bound(1) == 3.0
    assert injection.bound(1, from_step=6) == 0.0
    assert injection.active


def test_bounded_disturbances_respect_their_bound():
    injection = DisturbanceInjection(3, bounds=[0.0, 0.5], seed=9)

    for k in range(200):
        assert np.linalg.norm(injection.sample(k, 1)) <= 0.5
        np.testing.assert_array_equal(injection.sample(k, 0), np.zeros(3))
    np.testing.assert_array_equal(injection.sample(3, 1), injection.sample(3, 1))
    assert injection.bound(1) == 0.5
    assert not DisturbanceInjection(3).active


def test_disturbance_bounds_are_nonnegative():
    with pytest.raises(ScenarioError):
        DisturbanceInjection(2, bounds=[-1.0])


def test_input_estimates_stay_within_the_input_threshold(benchmark_run):
    scenario, trace = benchmark_run.scenario, benchmark_run.trace
    assert scenario.control_enabled and scenario.exchange == InputExchange.EVENT

    for block in range(scenario.model.n_inputs):
        columns = scenario.model.input_columns(block)
        silent = ~trace.input_triggers[1:, block]
        gaps = np.linalg.norm(trace.u[1:, None, columns] - trace.u_hat[1:, :, columns], axis=2)

        assert silent.any()
        assert np.all(gaps[silent] < scenario.input_trigger.delta_ctrl[block])
