import numpy as np

import pytest

from ebsesim import api
from ebsesim.agent import AgentRole, AgentSpec
from ebsesim.model import LtiModel
from ebsesim.observer import ObserverGain
from ebsesim.scenario import GainDesign, GainSpec, Scenario, builtin_benchmark, single_link


@pytest.fixture
def scalar_model():
    return LtiModel([[0.5]], [[1.0]], [[1.0]])


@pytest.fixture
def two_channel_model():
    return LtiModel([[0.9, 0.1], [0.0, 0.8]], [[0.0], [1.0]], np.eye(2), sensor_partition=[(0, 1), (1, 2)])


@pytest.fixture
def two_channel_gain(two_channel_model):
    return ObserverGain([[0.5, 0.05], [0.0, 0.4]], two_channel_model)


@pytest.fixture
def two_agent_scenario(two_channel_model):
    """Two combined agents sharing one input block; agent 0 controls it."""
    return Scenario(two_channel_model,
                    GainSpec(GainDesign.GIVEN, matrix=[[0.5, 0.05], [0.0, 0.4]]),
                    name='two-agent',
                    horizon=200,
                    agents=[AgentSpec(AgentRole.COMBINED, (0,)), AgentSpec(AgentRole.COMBINED, (1,))])


@pytest.fixture
def benchmark():
    return builtin_benchmark()


@pytest.fixture
def link():
    return single_link()


@pytest.fixture(scope='session')
def benchmark_run():
    return api.run(builtin_benchmark())


@pytest.fixture(scope='session')
def link_run():
    return api.run(single_link().replace(horizon=300))
