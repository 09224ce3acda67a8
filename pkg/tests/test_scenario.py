import math

import numpy as np

import pytest

from ebsesim.agent import AgentRole, AgentSpec
from ebsesim.errors import ScenarioError
from ebsesim.scenario import (
    BUILTINS,
    GainDesign,
    GainSpec,
    InputExchange,
    Scenario,
    load_scenario,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
)
from ebsesim.trigger import MeasurementTriggerConfig


def minimal(**sections):
    return {'model': {'A': [[0.5, 0.1], [0.0, 0.6]], 'C': [[1.0, 0.0], [0.0, 1.0]],
                      'sensors': [[0, 1], [1, 2]], 'B': [[0.0], [1.0]]}, **sections}


def test_benchmark_ownership(benchmark):
    assert benchmark.n_agents == 2
    assert benchmark.sensor_owners == [0, 0, 1, 1]
    assert benchmark.input_owners == {0: 0, 1: 1}
    assert not benchmark.lossless
    assert benchmark.exchange == InputExchange.EVENT
    assert benchmark.controller_gain is benchmark.controller_gain


def test_disabled_control_owns_no_inputs(benchmark):
    assert benchmark.replace(control_enabled=False).input_owners == {}


@pytest.mark.parametrize('name', sorted(BUILTINS))
def test_builtin_scenarios_survive_yaml(name, tmp_path):
    scenario = BUILTINS[name](seed=3)
    path = tmp_path / f'{name}.yaml'
    save_scenario(scenario, str(path))

    loaded = load_scenario(str(path))
    assert loaded == scenario
    assert scenario_to_dict(loaded) == scenario_to_dict(scenario)


def test_minimal_scenario_defaults():
    scenario = scenario_from_dict({'model': {'A': [[0.5]], 'C': [[1.0]]}})

    assert scenario.model.q == 0
    assert scenario.horizon == 1000
    assert scenario.agents == [AgentSpec(AgentRole.COMBINED, (0,), None)]
    assert scenario.observer.design == GainDesign.KALMAN
    assert scenario.controller is None
    assert scenario.lossless
    assert scenario.pairs == []


def test_missing_model():
    with pytest.raises(ScenarioError) as excinfo:
        scenario_from_dict({'name': 'empty'})

    assert excinfo.value.path == 'model'


def test_unsupported_schema():
    with pytest.raises(ScenarioError) as excinfo:
        scenario_from_dict(minimal(schema=2))

    assert excinfo.value.path == 'schema'


def test_bad_matrix_is_located():
    with pytest.raises(ScenarioError) as excinfo:
        scenario_from_dict({'model': {'A': [[0.5, 0.1]], 'C': [[1.0]]}})

    assert excinfo.value.path == 'model'


def test_unknown_enum_value_is_located():
    with pytest.raises(ScenarioError) as excinfo:
        scenario_from_dict(minimal(triggers={'measurement': {'delta': [0.1, 0.1], 'norm': 'three'}}))

    assert excinfo.value.path == 'triggers.measurement.norm'


@pytest.mark.parametrize('sections, path', [
    ({'noise': 5}, 'noise'),
    ({'noise': {'process': [0.1]}}, 'noise.process'),
    ({'triggers': [1]}, 'triggers'),
    ({'triggers': {'measurement': 0.1}}, 'triggers.measurement'),
    ({'initial': 3}, 'initial'),
    ({'bus': 7}, 'bus'),
    ({'bus': {'drop': 'iid'}}, 'bus.drop'),
    ({'gains': [1]}, 'gains'),
    ({'gains': {'observer': [[0.5]]}}, 'gains.observer'),
    ({'control': True}, 'control'),
    ({'disturbances': {'bounded': 0.1}}, 'disturbances.bounded'),
    ({'analysis': 'P'}, 'analysis'),
    ({'agents': {'role': 'sensor'}}, 'agents'),
])
def test_sections_must_be_mappings(sections, path):
    with pytest.raises(ScenarioError) as excinfo:
        scenario_from_dict(minimal(**sections))

    assert excinfo.value.path == path


def test_threshold_count_must_match_channels():
    with pytest.raises(ScenarioError) as excinfo:
        scenario_from_dict(minimal(triggers={'measurement': {'delta': [0.1]}}))

    assert excinfo.value.path == 'triggers.measurement.delta'


def test_channels_have_exactly_one_owner():
    with pytest.raises(ScenarioError) as excinfo:
        scenario_from_dict(minimal(agents=[{'role': 'sensor', 'sensors': [0, 1]},
                                           {'role': 'combined', 'sensors': [1]}]))
    assert excinfo.value.path == 'agents[1].sensors'

    with pytest.raises(ScenarioError, match='no owning agent'):
        scenario_from_dict(minimal(agents=[{'role': 'sensor', 'sensors': [0]}, {'role': 'estimator'}]))


def test_estimators_own_no_channels():
    with pytest.raises(ScenarioError) as excinfo:
        scenario_from_dict(minimal(agents=[{'role': 'estimator', 'sensors': [0, 1]}]))

    assert excinfo.value.path == 'agents[0].sensors'


def test_sensor_agents_own_no_inputs():
    with pytest.raises(ScenarioError) as excinfo:
        scenario_from_dict(minimal(agents=[{'role': 'sensor', 'sensors': [0, 1], 'input': 0}]))

    assert excinfo.value.path == 'agents[0].input'


def test_control_needs_every_block_owned():
    with pytest.raises(ScenarioError, match='no controlling agent'):
        scenario_from_dict(minimal(control={'enabled': True},
                                   agents=[{'role': 'combined', 'sensors': [0, 1]}]))


def test_enabled_control_defaults_to_lqr():
    scenario = scenario_from_dict(minimal(control={'enabled': True, 'exchange': 'event'},
                                          agents=[{'role': 'combined', 'sensors': [0, 1], 'input': 0}]))

    assert scenario.controller.design == GainDesign.LQR
    assert scenario.input_owners == {0: 0}
    assert scenario.controller_gain.F.shape == (1, 2)


def test_given_gains():
    scenario = scenario_from_dict(minimal(gains={'observer': {'L': [[0.5, 0.0], [0.0, 0.5]]}}))

    assert scenario.observer.design == GainDesign.GIVEN
    np.testing.assert_array_equal(scenario.observer_gain.L, np.eye(2) * 0.5)


def test_wrong_design_for_a_gain():
    with pytest.raises(ScenarioError) as excinfo:
        scenario_from_dict(minimal(gains={'observer': {'design': 'lqr', 'Q': [[1.0]], 'R': [[1.0]]}}))

    assert excinfo.value.path == 'gains.observer.design'


def test_gain_specs_need_their_parameters():
    with pytest.raises(ScenarioError):
        GainSpec(GainDesign.GIVEN)
    with pytest.raises(ScenarioError):
        GainSpec(GainDesign.KALMAN, Q=np.eye(2))


def test_invalid_yaml(tmp_path):
    path = tmp_path / 'broken.yaml'
    path.write_text('model: [unclosed\n', encoding='utf8')

    with pytest.raises(ScenarioError, match='invalid YAML'):
        load_scenario(str(path))


def test_schedule_and_pairs_are_checked(link):
    with pytest.raises(ScenarioError) as excinfo:
        link.replace(pairs=[(0, 0)])
    assert excinfo.value.path == 'analysis.pairs'

    with pytest.raises(ScenarioError):
        scenario_from_dict(minimal(disturbances={'schedule': [{'step': 3, 'agent': 4, 'vector': [1.0, 0.0]}]}))


def test_reseeded_scenarios(benchmark):
    reseeded = benchmark.reseeded(10)

    assert reseeded.seed == 10
    assert reseeded.measurement_noise.seed == 12
    assert reseeded.drop_model.seed == 13
    assert reseeded.injection.seed == 14
    assert reseeded.drop_model.exempt_kinds == benchmark.drop_model.exempt_kinds
    assert reseeded != benchmark
    assert benchmark.reseeded(0) == benchmark


def test_scaled_thresholds_keep_disabled_channels(two_agent_scenario):
    scenario = two_agent_scenario.replace(measurement_trigger=MeasurementTriggerConfig([0.1, math.inf]))
    scaled = scenario.with_thresholds_scaled(3.0)

    np.testing.assert_allclose(scaled.measurement_trigger.delta_est, [0.3, math.inf])
    assert isinstance(scaled, Scenario)
