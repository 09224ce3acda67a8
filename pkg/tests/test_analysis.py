import math

import numpy as np

import pytest

from ebsesim import api
from ebsesim.agent import AgentRole, AgentSpec, DisturbanceInjection
from ebsesim.analysis import (
    BoundKind,
    BoundReport,
    BoundViolation,
    bound_report,
    check_lemma1,
    check_positive_definite,
    check_run,
    closed_loop_check,
    constructive_e_max,
    corollary_bounds,
    effective_thresholds,
    epsilon_c_bound,
    inter_agent_growth,
    m_bar,
    replay_bounds,
    reset_e_max,
    subset_gain_bound,
    subset_matrix,
    theorem1_bound,
    theorem2_bound,
    trigger_violations,
)
from ebsesim.bus import DropModel
from ebsesim.errors import CertificateError, DimensionError, RecursionMismatchError
from ebsesim.model import LtiModel
from ebsesim.observer import ObserverGain, observer_matrix
from ebsesim.scenario import GainDesign, GainSpec, Scenario, single_link
from ebsesim.trigger import MeasurementTriggerConfig
from ebsesim.utils import Norm


@pytest.fixture
def unstable_scalar():
    model = LtiModel([[2.0]], [], [[1.0]])
    return model, ObserverGain([[0.9]], model)


def test_subset_matrices(two_channel_model, two_channel_gain):
    np.testing.assert_array_equal(subset_matrix(two_channel_model, two_channel_gain, ()), two_channel_model.A)
    np.testing.assert_allclose(subset_matrix(two_channel_model, two_channel_gain, (0, 1)),
                               observer_matrix(two_channel_model, two_channel_gain))
    expected = (np.eye(2) - two_channel_gain.block(1) @ two_channel_model.C_block(1)) @ two_channel_model.A
    np.testing.assert_allclose(subset_matrix(two_channel_model, two_channel_gain, [1]), expected)


@pytest.mark.parametrize('J', [[0, 0], [2], [-1]])
def test_subset_matrix_rejects_bad_subsets(two_channel_model, two_channel_gain, J):
    with pytest.raises(DimensionError):
        subset_matrix(two_channel_model, two_channel_gain, J)


def test_weights_must_be_positive_definite():
    with pytest.raises(CertificateError, match='symmetric'):
        check_positive_definite([[1.0, 0.5], [0.0, 1.0]], 2)
    with pytest.raises(CertificateError, match='positive definite'):
        check_positive_definite([[1.0, 0.0], [0.0, -1.0]], 2)
    with pytest.raises(DimensionError):
        check_positive_definite(np.eye(3), 2)


def test_benchmark_certificate(benchmark):
    certificate = check_lemma1(benchmark.model, benchmark.observer_gain, benchmark.P)

    assert certificate.passed
    assert certificate.checked_subsets == 16
    assert certificate.max_eigenvalue_over_subsets < 0
    assert 0 < certificate.contraction < 1
    assert certificate.to_json()['pass'] is True


def test_unstable_plant_fails_without_measurements(unstable_scalar):
    certificate = check_lemma1(*unstable_scalar, P=[[1.0]])

    assert not certificate.passed
    assert certificate.worst_subset == ()
    assert certificate.max_eigenvalue_over_subsets == pytest.approx(3.0)
    with pytest.raises(CertificateError):
        constructive_e_max(certificate, 0.0, 1.0)


def test_too_many_channels_for_enumeration():
    model = LtiModel(0.5 * np.eye(21), [], np.eye(21), sensor_partition=[(i, i + 1) for i in range(21)])

    with pytest.raises(CertificateError, match='group channels'):
        check_lemma1(model, ObserverGain(np.zeros((21, 21)), model), np.eye(21))


def test_constructive_inter_agent_bound(benchmark):
    certificate = check_lemma1(benchmark.model, benchmark.observer_gain, benchmark.P)
    e_max = constructive_e_max(certificate, 0.1, 0.01)

    assert e_max == pytest.approx(math.sqrt(500.0) * (0.1 + 0.02 / (1 - certificate.contraction)))
    assert constructive_e_max(certificate, 0.0, 0.0) == 0.0


def test_m_bar(two_channel_model, two_channel_gain):
    expected = max(np.linalg.norm(two_channel_gain.block(c) @ two_channel_model.C_block(c) @ two_channel_model.A, 2)
                   for c in range(2))

    assert m_bar(two_channel_model, two_channel_gain) == pytest.approx(expected)


def test_closed_form_bounds():
    assert theorem1_bound(2.0, 0.5, 0.5, 0.1, 1.0) == pytest.approx(2.2)
    assert theorem2_bound(2.0, 0.5, 0.5, [0.3, 0.4], 0.1, 0.2, 2, 1.0, 0.0) == pytest.approx(3.0)
    assert epsilon_c_bound(1.0, 0.5, 1.0, 0.5, 0.1, 0.2, 0.0) == pytest.approx(0.4)
    with pytest.raises(CertificateError):
        theorem1_bound(1.0, 1.0, 0.5, 0.1, 0.0)
    with pytest.raises(CertificateError):
        theorem2_bound(1.0, 0.5, 0.5, [0.1], -0.1, 0.2, 1, 1.0, 0.0)


def test_corollary_bounds():
    deterministic = corollary_bounds(BoundKind.DETERMINISTIC, 1.0, 1.0, 0.5, 0.5, 1.0, 0.1, 0.2)
    assert deterministic == pytest.approx(1.4)
    assert corollary_bounds(BoundKind.STOCHASTIC, 1.0, 2.0, 0.5, eps_c0_norm=0.5, zero_mean=True) == 2.0

    with pytest.raises(CertificateError, match='bounded'):
        corollary_bounds(BoundKind.DETERMINISTIC, 1.0, 1.0, 0.5)
    with pytest.raises(CertificateError, match='zero-mean'):
        corollary_bounds(BoundKind.STOCHASTIC, 1.0, 1.0, 0.5)


def test_infinity_norm_thresholds_are_widened(link):
    scenario = link.replace(measurement_trigger=MeasurementTriggerConfig([0.1], Norm.INF))

    np.testing.assert_allclose(effective_thresholds(scenario), [0.1 * math.sqrt(2.0)])
    np.testing.assert_allclose(effective_thresholds(link), [0.1])


def test_single_link_bounds(link):
    report = bound_report(link)

    assert report.form == 'direct'
    assert report.guaranteed
    assert report.e_i_max[0] == report.e_i_max[1] > 0
    assert report.epsilon_c_max is None
    assert report.mean_error_max == report.e_i_max
    assert report.inputs['e_max'] == 0.0
    assert report.to_json()['schema'] == 1


def test_benchmark_bounds_are_not_guaranteed(benchmark):
    report = bound_report(benchmark)

    assert report.form == 'direct'
    assert not report.guaranteed
    assert any('packet loss' in note for note in report.notes)
    assert any('event-triggered' in note for note in report.notes)
    assert report.certificate.passed
    assert report.epsilon_c_max is not None
    assert report.mean_error_max == [None, None]


def test_injected_disturbances_use_the_inter_agent_bound(benchmark):
    scenario = benchmark.replace(control_enabled=False, drop_model=DropModel(),
                                 injection=DisturbanceInjection(4, bounds=[0.01, 0.01], seed=8))
    report = bound_report(scenario)

    assert report.form == 'inter-agent'
    assert report.guaranteed
    assert report.inputs['e_max'] > 0
    assert all(bound is not None and bound > 0 for bound in report.e_i_max)
    assert report.inputs['d_max'] == [0.01, 0.01]


def test_reset_takes_the_largest_agent_bound(benchmark):
    injection = DisturbanceInjection(4, [(0, 1, [0.1, 0.0, 0.0, 0.0])])
    report = bound_report(benchmark.replace(injection=injection, reset_period=20))

    assert report.form == 'inter-agent'
    assert report.e_i_max[0] == report.e_i_max[1]


def test_uncertified_inter_agent_error(unstable_scalar):
    model, _ = unstable_scalar
    scenario = Scenario(model, GainSpec(GainDesign.GIVEN, matrix=[[0.9]]),
                        agents=[AgentSpec(AgentRole.SENSOR, (0,)), AgentSpec(AgentRole.ESTIMATOR)],
                        injection=DisturbanceInjection(1, bounds=[0.1, 0.1]))
    report = bound_report(scenario)

    assert report.form == 'inter-agent'
    assert report.e_i_max == [None, None]
    assert report.epsilon_i_max == [None, None]
    assert report.epsilon_c_max == 0.0
    assert any('not certified' in note for note in report.notes)


def test_replay_bounds():
    report = BoundReport(1.0, 0.5, 'direct', [1.0, None], None, [None, None], [None, None], True, {})
    columns = {'step': np.array([1.0, 2.0, 3.0]),
               'e0_norm': np.array([0.5, 1.5, 1.0]),
               'e1_norm': np.array([9.0, 9.0, 9.0])}

    assert replay_bounds(columns, report) == [BoundViolation(0, 2, 1.5, 1.0)]
    del columns['e1_norm']
    with pytest.raises(DimensionError):
        replay_bounds(columns, report)


def test_run_checks_pass(link_run):
    checks = link_run.checks

    assert checks.ok
    assert checks.trigger_violations == 0
    assert checks.closed_loop_residual is None
    assert checks.reset_residual is None
    assert checks.to_json()['ok'] is True


def test_tampered_runs_fail_their_checks():
    scenario = single_link().replace(horizon=50)
    trace = api.run(scenario).trace
    trace.x_hat_pre[10, 1] += 1.0
    trace.sensor_triggers[20, 0] = ~trace.sensor_triggers[20, 0]

    assert trigger_violations(trace) == 1
    assert not check_run(scenario, trace).ok
    with pytest.raises(RecursionMismatchError):
        check_run(scenario, trace, strict=True)


def test_closed_loop_check_needs_control(link_run):
    with pytest.raises(CertificateError):
        closed_loop_check(link_run.scenario.model, link_run.scenario.controller_gain, link_run.trace)


def test_inter_agent_growth(benchmark_run):
    growth = inter_agent_growth(benchmark_run.trace)

    assert [g.pair for g in growth] == [(0, 1)]
    assert math.isfinite(growth[0].ratio)
    assert growth[0].first_half > 0


@pytest.fixture
def unstable_pair():
    model = LtiModel([[1.2]], [], [[1.0], [1.0]], sensor_partition=[(0, 1), (1, 2)])
    return Scenario(model, GainSpec(GainDesign.GIVEN, matrix=[[0.4, 0.4]]),
                    agents=[AgentSpec(AgentRole.COMBINED, (0,)), AgentSpec(AgentRole.COMBINED, (1,))],
                    injection=DisturbanceInjection(1, bounds=[0.01, 0.01], seed=5), reset_period=5, horizon=500)


def test_reset_period_bound(unstable_pair):
    model, gain = unstable_pair.model, unstable_pair.observer_gain

    assert subset_gain_bound(model, gain) == pytest.approx(1.2)
    assert reset_e_max(model, gain, 1, 0.0, 0.1) == pytest.approx(0.2)
    assert reset_e_max(model, gain, 2, 1.0, 0.0) == pytest.approx(1.44)
    with pytest.raises(CertificateError):
        reset_e_max(model, gain, 0, 0.0, 0.1)


def test_resets_bound_uncertified_inter_agent_error(unstable_pair):
    report = bound_report(unstable_pair)
    injection = unstable_pair.injection
    e_ij0 = float(np.linalg.norm(injection.sample(0, 0) - injection.sample(0, 1)))
    expected = max(1.2 ** r * e_ij0 + 0.02 * sum(1.2 ** s for s in range(r)) for r in range(6))

    assert not report.certificate.passed
    assert report.form == 'inter-agent'
    assert report.guaranteed
    assert report.inputs['e_max'] == pytest.approx(expected)
    assert all(bound is not None and math.isfinite(bound) for bound in report.e_i_max)

    trace = api.run(unstable_pair).trace
    assert np.all(trace.pair_norms() <= report.inputs['e_max'] + 1e-12)
    assert np.all(trace.e_norms() <= np.array(report.e_i_max) + 1e-12)
    assert bound_report(unstable_pair.replace(reset_period=0)).e_i_max == [None, None]
