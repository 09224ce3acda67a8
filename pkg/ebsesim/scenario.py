import enum
import logging
import typing

import numpy as np
from numpy import ndarray

import yaml

from ebsesim.agent import AgentRole, AgentSpec, DisturbanceInjection
from ebsesim.bus import DropKind, DropModel, DropScope, FrameKind
from ebsesim.errors import DimensionError, ScenarioError
from ebsesim.model import LtiModel, NoiseKind, NoiseSpec
from ebsesim.observer import ControllerGain, ObserverGain, design_kalman_gain, design_lqr_gain
from ebsesim.trigger import InputTriggerConfig, MeasurementTriggerConfig
from ebsesim.utils import Norm, as_matrix, as_vector

logger = logging.getLogger(__name__)

SCENARIO_SCHEMA = 1

PROCESS_SEED_OFFSET = 1
MEASUREMENT_SEED_OFFSET = 2
DROP_SEED_OFFSET = 3
INJECTION_SEED_OFFSET = 4


@enum.unique
class InputExchange(enum.Enum):
    PERIODIC = 'periodic'
    EVENT = 'event'


@enum.unique
class GainDesign(enum.Enum):
    GIVEN = 'given'
    KALMAN = 'kalman'
    LQR = 'lqr'


class GainSpec:
    """A gain supplied verbatim or designed from Riccati weights."""

    def __init__(self,
                 design: GainDesign,
                 matrix: typing.Optional[typing.Any] = None,
                 Q: typing.Optional[typing.Any] = None,
                 R: typing.Optional[typing.Any] = None):
        self.design = design
        self.matrix = as_matrix('gain', matrix) if matrix is not None else None
        self.Q = as_matrix('Q', Q) if Q is not None else None
        self.R = as_matrix('R', R) if R is not None else None
        if design == GainDesign.GIVEN and self.matrix is None:
            raise ScenarioError('a given gain needs its matrix')
        if design != GainDesign.GIVEN and (self.Q is None or self.R is None):
            raise ScenarioError(f'{design.value} design needs Q and R')

    def to_dict(self, key: str) -> typing.Dict[str, typing.Any]:
        if self.design == GainDesign.GIVEN:
            return {key: self.matrix.tolist()}

        return {'design': self.design.value, 'Q': self.Q.tolist(), 'R': self.R.tolist()}

    def __eq__(self, other):
        if not isinstance(other, GainSpec):
            return NotImplemented

        def same(a, b):
            return (a is None and b is None) or (a is not None and b is not None and np.array_equal(a, b))

        return (self.design == other.design and same(self.matrix, other.matrix)
                and same(self.Q, other.Q) and same(self.R, other.R))

    def __repr__(self):
        return f'<{self.__class__.__name__} [{self.design.value}]>'


class Scenario:
    """Everything a run needs: plant, noise, gains, triggers, bus, agents and analysis inputs."""

    def __init__(self,
                 model: LtiModel,
                 observer: GainSpec,
                 name: str = 'scenario',
                 seed: int = 0,
                 horizon: int = 1000,
                 process_noise: typing.Optional[NoiseSpec] = None,
                 measurement_noise: typing.Optional[NoiseSpec] = None,
                 controller: typing.Optional[GainSpec] = None,
                 measurement_trigger: typing.Optional[MeasurementTriggerConfig] = None,
                 input_trigger: typing.Optional[InputTriggerConfig] = None,
                 drop_model: typing.Optional[DropModel] = None,
                 capacity: typing.Optional[int] = None,
                 agents: typing.Optional[typing.Sequence[AgentSpec]] = None,
                 reset_period: int = 0,
                 control_enabled: bool = False,
                 exchange: InputExchange = InputExchange.PERIODIC,
                 initial_state: typing.Optional[typing.Any] = None,
                 initial_estimate: typing.Optional[typing.Any] = None,
                 injection: typing.Optional[DisturbanceInjection] = None,
                 P: typing.Optional[typing.Any] = None,
                 pairs: typing.Optional[typing.Sequence[typing.Sequence[int]]] = None):
        self.model = model
        self.observer = observer
        self.name = name
        self.seed = int(seed)
        self.horizon = int(horizon)
        self.process_noise = process_noise or NoiseSpec(NoiseKind.ZERO, model.n, seed=seed + PROCESS_SEED_OFFSET)
        self.measurement_noise = measurement_noise or NoiseSpec(NoiseKind.ZERO, model.p,
                                                                seed=seed + MEASUREMENT_SEED_OFFSET)
        self.controller = controller
        self.measurement_trigger = measurement_trigger or MeasurementTriggerConfig(np.zeros(model.n_sensors))
        self.input_trigger = input_trigger or InputTriggerConfig(np.zeros(model.n_inputs))
        self.drop_model = drop_model or DropModel(seed=seed + DROP_SEED_OFFSET)
        self.capacity = capacity
        self.agents = list(agents) if agents is not None else [default_agent(model)]
        self.reset_period = int(reset_period)
        self.control_enabled = bool(control_enabled)
        self.exchange = exchange
        self.initial_state = as_vector('initial.state', initial_state if initial_state is not None
                                       else np.zeros(model.n), model.n)
        self.initial_estimate = as_vector('initial.estimate', initial_estimate if initial_estimate is not None
                                          else np.zeros(model.n), model.n)
        self.injection = injection or DisturbanceInjection(model.n, seed=seed + INJECTION_SEED_OFFSET)
        self.P = as_matrix('analysis.P', P, (model.n, model.n)) if P is not None else None
        self.pairs = [(int(i), int(j)) for i, j in pairs] if pairs is not None else [
            (i, j) for i in range(len(self.agents)) for j in range(i + 1, len(self.agents))]
        self._observer_gain: typing.Optional[ObserverGain] = None
        self._controller_gain: typing.Optional[ControllerGain] = None
        self.validate()

    def validate(self):
        model = self.model
        if self.horizon < 1:
            raise ScenarioError(f'horizon must be >= 1, got {self.horizon}', 'horizon')
        if self.reset_period < 0:
            raise ScenarioError(f'reset period must be >= 0, got {self.reset_period}', 'reset_period')
        if self.capacity is not None and self.capacity < 1:
            raise ScenarioError(f'capacity must be >= 1, got {self.capacity}', 'bus.capacity')
        if self.process_noise.dim != model.n:
            raise ScenarioError(f'process noise must have dimension {model.n}', 'noise.process')
        if self.measurement_noise.dim != model.p:
            raise ScenarioError(f'measurement noise must have dimension {model.p}', 'noise.measurement')
        if len(self.measurement_trigger.delta_est) != model.n_sensors:
            raise ScenarioError(f'expected {model.n_sensors} thresholds, got '
                                f'{len(self.measurement_trigger.delta_est)}', 'triggers.measurement.delta')
        if len(self.input_trigger.delta_ctrl) != model.n_inputs:
            raise ScenarioError(f'expected {model.n_inputs} thresholds, got '
                                f'{len(self.input_trigger.delta_ctrl)}', 'triggers.input.delta')
        if not self.agents:
            raise ScenarioError('at least one agent is needed', 'agents')

        owners: typing.Dict[int, int] = {}
        blocks: typing.Dict[int, int] = {}
        for a, spec in enumerate(self.agents):
            path = f'agents[{a}]'
            if spec.sensors and spec.role == AgentRole.ESTIMATOR:
                raise ScenarioError('estimator agents own no sensor channels', f'{path}.sensors')
            for channel in spec.sensors:
                if not 0 <= channel < model.n_sensors:
                    raise ScenarioError(f'sensor channel {channel} does not exist', f'{path}.sensors')
                if channel in owners:
                    raise ScenarioError(f'sensor channel {channel} owned by both agent {owners[channel]} '
                                        f'and agent {a}', f'{path}.sensors')
                owners[channel] = a
            if spec.input_block is not None:
                if spec.role == AgentRole.SENSOR:
                    raise ScenarioError('sensor agents own no input block', f'{path}.input')
                if not 0 <= spec.input_block < model.n_inputs:
                    raise ScenarioError(f'input block {spec.input_block} does not exist', f'{path}.input')
                if spec.input_block in blocks:
                    raise ScenarioError(f'input block {spec.input_block} owned by both agent '
                                        f'{blocks[spec.input_block]} and agent {a}', f'{path}.input')
                blocks[spec.input_block] = a

        missing = [channel for channel in range(model.n_sensors) if channel not in owners]
        if missing:
            raise ScenarioError(f'sensor channels {missing} have no owning agent', 'agents')
        if self.control_enabled:
            if self.controller is None:
                raise ScenarioError('control is enabled but no controller gain is given', 'gains.controller')
            unowned = [block for block in range(model.n_inputs) if block not in blocks]
            if unowned:
                raise ScenarioError(f'input blocks {unowned} have no controlling agent', 'agents')

        for step, agent, _ in self.injection.schedule:
            if not 0 <= agent < len(self.agents) or step < 0:
                raise ScenarioError(f'disturbance for agent {agent} at step {step} is out of range',
                                    'disturbances.schedule')
        if self.injection.bounds is not None and len(self.injection.bounds) != len(self.agents):
            raise ScenarioError(f'expected {len(self.agents)} bounds', 'disturbances.bounded.bounds')
        for i, j in self.pairs:
            if i == j or not (0 <= i < len(self.agents) and 0 <= j < len(self.agents)):
                raise ScenarioError(f'invalid agent pair ({i}, {j})', 'analysis.pairs')

    @property
    def n_agents(self):
        return len(self.agents)

    @property
    def sensor_owners(self) -> typing.List[int]:
        owners = {channel: a for a, spec in enumerate(self.agents) for channel in spec.sensors}
        return [owners[channel] for channel in range(self.model.n_sensors)]

    @property
    def input_owners(self) -> typing.Dict[int, int]:
        if not self.control_enabled:
            return {}
        return {spec.input_block: a for a, spec in enumerate(self.agents) if spec.input_block is not None}

    @property
    def observer_gain(self) -> ObserverGain:
        if self._observer_gain is None:
            if self.observer.design == GainDesign.KALMAN:
                self._observer_gain = design_kalman_gain(self.model, self.observer.Q, self.observer.R)
            else:
                self._observer_gain = ObserverGain(self.observer.matrix, self.model)
        return self._observer_gain

    @property
    def controller_gain(self) -> typing.Optional[ControllerGain]:
        if self.controller is None:
            return None
        if self._controller_gain is None:
            if self.controller.design == GainDesign.LQR:
                self._controller_gain = design_lqr_gain(self.model, self.controller.Q, self.controller.R)
            else:
                self._controller_gain = ControllerGain(self.controller.matrix, self.model)
        return self._controller_gain

    @property
    def lossless(self):
        return self.drop_model.kind == DropKind.NONE or self.drop_model.drop_prob == 0.0

    def fields(self) -> typing.Dict[str, typing.Any]:
        return {
            'model': self.model, 'observer': self.observer, 'name': self.name, 'seed': self.seed,
            'horizon': self.horizon, 'process_noise': self.process_noise,
            'measurement_noise': self.measurement_noise, 'controller': self.controller,
            'measurement_trigger': self.measurement_trigger, 'input_trigger': self.input_trigger,
            'drop_model': self.drop_model, 'capacity': self.capacity, 'agents': self.agents,
            'reset_period': self.reset_period, 'control_enabled': self.control_enabled,
            'exchange': self.exchange, 'initial_state': self.initial_state,
            'initial_estimate': self.initial_estimate, 'injection': self.injection, 'P': self.P,
            'pairs': self.pairs,
        }

    def replace(self, **changes) -> 'Scenario':
        return Scenario(**{**self.fields(), **changes})

    def reseeded(self, seed: int) -> 'Scenario':
        """Same scenario with every component seed derived from ``seed``."""
        drop = self.drop_model
        injection = self.injection
        return self.replace(
            seed=seed,
            process_noise=self.process_noise.reseeded(seed + PROCESS_SEED_OFFSET),
            measurement_noise=self.measurement_noise.reseeded(seed + MEASUREMENT_SEED_OFFSET),
            drop_model=DropModel(drop.kind, drop.drop_prob, drop.scope, seed + DROP_SEED_OFFSET, drop.exempt_kinds),
            injection=DisturbanceInjection(injection.n, injection.schedule, injection.bounds,
                                           seed + INJECTION_SEED_OFFSET))

    def with_thresholds_scaled(self, scale: float) -> 'Scenario':
        delta = self.measurement_trigger.delta_est
        scaled = np.where(np.isinf(delta), np.inf, delta * scale)
        return self.replace(measurement_trigger=MeasurementTriggerConfig(scaled, self.measurement_trigger.norm))

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        mine, theirs = self.fields(), other.fields()
        for key, value in mine.items():
            if isinstance(value, ndarray) or isinstance(theirs[key], ndarray):
                if value is None or theirs[key] is None:
                    if value is not theirs[key]:
                        return False
                elif not np.array_equal(value, theirs[key]):
                    return False
            elif value != theirs[key]:
                return False
        return True

    def __repr__(self):
        return f'<{self.__class__.__name__} [{self}]>'

    def __str__(self):
        return (f'{self.name}, agents:{self.n_agents}, horizon:{self.horizon}, seed:{self.seed}, '
                f'control:{self.control_enabled}')


def default_agent(model: LtiModel) -> AgentSpec:
    return AgentSpec(AgentRole.COMBINED, tuple(range(model.n_sensors)), 0 if model.n_inputs == 1 else None)


def _get(data: typing.Dict[str, typing.Any], key: str, path: str, default: typing.Any = None) -> typing.Any:
    if not isinstance(data, dict):
        raise ScenarioError('expected a mapping', path)
    return data.get(key, default)


def _section(data: typing.Dict[str, typing.Any], key: str, path: str) -> typing.Dict[str, typing.Any]:
    value = data.get(key)
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ScenarioError('expected a mapping', f'{path}.{key}' if path else key)
    return value


def _located(path: str, parse: typing.Callable[[], typing.Any]) -> typing.Any:
    try:
        return parse()
    except ScenarioError as e:
        if e.path is None:
            raise ScenarioError(str(e), path) from e
        raise
    except (DimensionError, TypeError, ValueError, KeyError) as e:
        raise ScenarioError(str(e), path) from e


def _enum(kind: typing.Type[enum.Enum], value: typing.Any, path: str) -> typing.Any:
    try:
        return kind(value)
    except ValueError:
        raise ScenarioError(f'{value!r} is not one of {[e.value for e in kind]}', path) from None


def _noise(data: typing.Optional[typing.Dict[str, typing.Any]], dim: int, seed: int, path: str) -> NoiseSpec:
    if data is None:
        return NoiseSpec(NoiseKind.ZERO, dim, seed=seed)

    kind = _enum(NoiseKind, _get(data, 'kind', path, 'zero'), f'{path}.kind')
    return _located(path, lambda: NoiseSpec(kind, dim,
                                            bounds=data.get('bounds'),
                                            covariance=data.get('covariance'),
                                            windows=[(s, e, v) for s, e, v in data.get('windows') or []],
                                            seed=int(data.get('seed', seed))))


def _gain(data: typing.Optional[typing.Dict[str, typing.Any]], key: str, design: GainDesign,
          default: typing.Optional[GainSpec], path: str) -> typing.Optional[GainSpec]:
    if data is None:
        return default
    if key in data:
        return _located(f'{path}.{key}', lambda: GainSpec(GainDesign.GIVEN, matrix=data[key]))

    chosen = _enum(GainDesign, _get(data, 'design', path, design.value), f'{path}.design')
    if chosen != design:
        raise ScenarioError(f'design must be {design.value}', f'{path}.design')
    return _located(path, lambda: GainSpec(design, Q=data.get('Q'), R=data.get('R')))


def scenario_from_dict(data: typing.Dict[str, typing.Any]) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError('a scenario must be a mapping')
    schema = data.get('schema', SCENARIO_SCHEMA)
    if schema != SCENARIO_SCHEMA:
        raise ScenarioError(f'unsupported schema {schema}', 'schema')
    if 'model' not in data:
        raise ScenarioError('missing model section', 'model')

    seed = _located('seed', lambda: int(data.get('seed', 0)))
    if seed < 0:
        raise ScenarioError(f'seed must be unsigned, got {seed}', 'seed')
    m = data['model']
    model = _located('model', lambda: LtiModel(_get(m, 'A', 'model'), _get(m, 'B', 'model', []),
                                               _get(m, 'C', 'model'), m.get('sensors'), m.get('inputs'),
                                               m.get('Ts', 1.0)))

    noise = _section(data, 'noise', '')
    process_noise = _noise(_section(noise, 'process', 'noise') or None, model.n, seed + PROCESS_SEED_OFFSET,
                           'noise.process')
    measurement_noise = _noise(_section(noise, 'measurement', 'noise') or None, model.p,
                               seed + MEASUREMENT_SEED_OFFSET,
                               'noise.measurement')

    gains = _section(data, 'gains', '')
    control = _section(data, 'control', '')
    control_enabled = bool(_get(control, 'enabled', 'control', False))
    observer = _gain(_section(gains, 'observer', 'gains') or None, 'L', GainDesign.KALMAN,
                     GainSpec(GainDesign.KALMAN, Q=np.eye(model.n), R=np.eye(model.p)), 'gains.observer')
    default_controller = GainSpec(GainDesign.LQR, Q=np.eye(model.n), R=np.eye(model.q)) \
        if control_enabled and model.q else None
    controller = _gain(_section(gains, 'controller', 'gains') or None, 'F', GainDesign.LQR, default_controller,
                       'gains.controller')

    triggers = _section(data, 'triggers', '')
    measurement = _section(triggers, 'measurement', 'triggers')
    inputs = _section(triggers, 'input', 'triggers')
    measurement_trigger = _located('triggers.measurement', lambda: MeasurementTriggerConfig(
        measurement.get('delta', np.zeros(model.n_sensors)),
        _enum(Norm, measurement.get('norm', 'two'), 'triggers.measurement.norm')))
    input_trigger = _located('triggers.input', lambda: InputTriggerConfig(
        inputs.get('delta', np.zeros(model.n_inputs)) if model.n_inputs else np.zeros(0),
        _enum(Norm, inputs.get('norm', 'two'), 'triggers.input.norm')))

    bus = _section(data, 'bus', '')
    drop = _section(bus, 'drop', 'bus')
    drop_model = _located('bus.drop', lambda: DropModel(
        _enum(DropKind, drop.get('kind', 'none'), 'bus.drop.kind'),
        float(drop.get('probability', 0.0)),
        _enum(DropScope, drop.get('scope', 'per_receiver'), 'bus.drop.scope'),
        int(drop.get('seed', seed + DROP_SEED_OFFSET)),
        [_enum(FrameKind, kind, 'bus.drop.exempt') for kind in drop.get('exempt') or []]))
    capacity = bus.get('capacity')

    agents = None
    if data.get('agents') is not None:
        if not isinstance(data['agents'], list):
            raise ScenarioError('expected a list', 'agents')
        agents = []
        for a, spec in enumerate(data['agents']):
            path = f'agents[{a}]'
            role = _enum(AgentRole, _get(spec, 'role', path, 'combined'), f'{path}.role')
            block = spec.get('input')
            agents.append(AgentSpec(role, tuple(int(s) for s in spec.get('sensors') or []),
                                    int(block) if block is not None else None))

    initial = _section(data, 'initial', '')
    disturbances = _section(data, 'disturbances', '')
    bounded = _section(disturbances, 'bounded', 'disturbances')
    injection = _located('disturbances', lambda: DisturbanceInjection(
        model.n,
        [(entry['step'], entry['agent'], entry['vector']) for entry in disturbances.get('schedule') or []],
        bounded.get('bounds'),
        int(bounded.get('seed', seed + INJECTION_SEED_OFFSET))))
    analysis = _section(data, 'analysis', '')

    return _located('scenario', lambda: Scenario(
        model, observer,
        name=str(data.get('name', 'scenario')),
        seed=seed,
        horizon=int(data.get('horizon', 1000)),
        process_noise=process_noise,
        measurement_noise=measurement_noise,
        controller=controller,
        measurement_trigger=measurement_trigger,
        input_trigger=input_trigger,
        drop_model=drop_model,
        capacity=int(capacity) if capacity is not None else None,
        agents=agents,
        reset_period=int(data.get('reset_period', 0)),
        control_enabled=control_enabled,
        exchange=_enum(InputExchange, control.get('exchange', 'periodic'), 'control.exchange'),
        initial_state=initial.get('state'),
        initial_estimate=initial.get('estimate'),
        injection=injection,
        P=analysis.get('P'),
        pairs=analysis.get('pairs')))


def _noise_to_dict(spec: NoiseSpec) -> typing.Dict[str, typing.Any]:
    data: typing.Dict[str, typing.Any] = {'kind': spec.kind.value}
    if spec.bounds is not None:
        data['bounds'] = spec.bounds.tolist()
    if spec.covariance is not None:
        data['covariance'] = spec.covariance.tolist()
    if spec.windows:
        data['windows'] = [[w.start, w.end, w.value.tolist()] for w in spec.windows]
    data['seed'] = spec.seed

    return data


def scenario_to_dict(scenario: Scenario) -> typing.Dict[str, typing.Any]:
    model = scenario.model
    gains = {'observer': scenario.observer.to_dict('L')}
    if scenario.controller is not None:
        gains['controller'] = scenario.controller.to_dict('F')

    injection = scenario.injection
    disturbances: typing.Dict[str, typing.Any] = {
        'schedule': [{'step': step, 'agent': agent, 'vector': vector.tolist()}
                     for step, agent, vector in injection.schedule]}
    if injection.bounds is not None:
        disturbances['bounded'] = {'bounds': injection.bounds.tolist(), 'seed': injection.seed}
    else:
        disturbances['bounded'] = {'seed': injection.seed}

    analysis: typing.Dict[str, typing.Any] = {'pairs': [list(pair) for pair in scenario.pairs]}
    if scenario.P is not None:
        analysis['P'] = scenario.P.tolist()

    drop = scenario.drop_model
    return {
        'schema': SCENARIO_SCHEMA,
        'name': scenario.name,
        'seed': scenario.seed,
        'horizon': scenario.horizon,
        'model': {
            'A': model.A.tolist(),
            'B': model.B.tolist(),
            'C': model.C.tolist(),
            'sensors': [list(block) for block in model.sensor_partition],
            'inputs': [list(block) for block in model.input_partition],
            'Ts': model.Ts,
        },
        'noise': {
            'process': _noise_to_dict(scenario.process_noise),
            'measurement': _noise_to_dict(scenario.measurement_noise),
        },
        'gains': gains,
        'triggers': {
            'measurement': {'delta': scenario.measurement_trigger.delta_est.tolist(),
                            'norm': scenario.measurement_trigger.norm.value},
            'input': {'delta': scenario.input_trigger.delta_ctrl.tolist(),
                      'norm': scenario.input_trigger.norm.value},
        },
        'bus': {
            'drop': {'kind': drop.kind.value, 'probability': drop.drop_prob, 'scope': drop.scope.value,
                     'seed': drop.seed, 'exempt': sorted(kind.value for kind in drop.exempt_kinds)},
            'capacity': scenario.capacity,
        },
        'agents': [{'role': spec.role.value, 'sensors': list(spec.sensors), 'input': spec.input_block}
                   for spec in scenario.agents],
        'reset_period': scenario.reset_period,
        'control': {'enabled': scenario.control_enabled, 'exchange': scenario.exchange.value},
        'initial': {'state': scenario.initial_state.tolist(), 'estimate': scenario.initial_estimate.tolist()},
        'disturbances': disturbances,
        'analysis': analysis,
    }


def load_scenario(path: str) -> Scenario:
    with open(path, mode='r', encoding='utf8') as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ScenarioError(f'invalid YAML: {e}') from e

    scenario = scenario_from_dict(data)
    logger.info('Scenario %s loaded from %s', scenario.name, path)
    return scenario


def save_scenario(scenario: Scenario, path: str):
    with open(path, mode='w', encoding='utf8') as f:
        yaml.safe_dump(scenario_to_dict(scenario), f, sort_keys=False, allow_unicode=True)


# Surrogate two-tank thermo-fluid plant, x = (level 1, temperature 1, level 2, temperature 2).
# Each tank couples weakly into the other; inputs are (inflow, heating) per tank.
BENCHMARK_A = [[0.98, 0.0, 0.005, 0.0],
               [0.05, 0.97, 0.0, 0.005],
               [0.005, 0.0, 0.98, 0.0],
               [0.0, 0.005, 0.05, 0.97]]
BENCHMARK_B = [[0.01, 0.0, 0.0, 0.0],
               [0.01, -0.05, 0.0, 0.0],
               [0.0, 0.0, 0.01, 0.0],
               [0.0, 0.0, 0.01, 0.05]]
BENCHMARK_L = np.diag([0.1, 0.05, 0.1, 0.05])
BENCHMARK_P = np.diag([500.0, 1.0, 500.0, 1.0])
BENCHMARK_WINDOWS = [(1000, 2000, [0.005, 0.05, 0.0, 0.0]),
                     (3500, 4500, [0.0, 0.0, -0.005, -0.05]),
                     (6000, 7000, [0.004, -0.04, 0.004, 0.04])]


def builtin_benchmark(seed: int = 0) -> Scenario:
    """Two combined agents, each measuring level and temperature of one tank and driving its inputs."""
    model = LtiModel(BENCHMARK_A, BENCHMARK_B, np.eye(4),
                     sensor_partition=[(0, 1), (1, 2), (2, 3), (3, 4)],
                     input_partition=[(0, 2), (2, 4)],
                     Ts=0.2)
    return Scenario(
        model,
        GainSpec(GainDesign.GIVEN, matrix=BENCHMARK_L),
        name='thermo-fluid',
        seed=seed,
        horizon=10_000,
        process_noise=NoiseSpec(NoiseKind.STEP_SEQUENCE, 4, windows=BENCHMARK_WINDOWS,
                                seed=seed + PROCESS_SEED_OFFSET),
        measurement_noise=NoiseSpec(NoiseKind.UNIFORM, 4, bounds=[0.002, 0.04, 0.002, 0.04],
                                    seed=seed + MEASUREMENT_SEED_OFFSET),
        controller=GainSpec(GainDesign.LQR, Q=np.diag([10.0, 1.0, 10.0, 1.0]), R=np.eye(4)),
        measurement_trigger=MeasurementTriggerConfig([0.01, 0.2, 0.01, 0.2]),
        input_trigger=InputTriggerConfig([0.02, 0.02]),
        drop_model=DropModel(DropKind.IID, 0.05, DropScope.PER_RECEIVER, seed + DROP_SEED_OFFSET,
                             [FrameKind.INPUT, FrameKind.RESET_ESTIMATE]),
        capacity=6,
        agents=[AgentSpec(AgentRole.COMBINED, (0, 1), 0), AgentSpec(AgentRole.COMBINED, (2, 3), 1)],
        reset_period=0,
        control_enabled=True,
        exchange=InputExchange.EVENT,
        P=BENCHMARK_P,
        pairs=[(0, 1)])


def single_link(seed: int = 0, delta: float = 0.1) -> Scenario:
    """One sensor agent streaming a stable 2-state plant to one remote estimator."""
    model = LtiModel([[0.9, 0.2], [0.0, 0.7]], [[0.0], [1.0]], np.eye(2), sensor_partition=[(0, 2)])
    return Scenario(
        model,
        GainSpec(GainDesign.KALMAN, Q=0.01 * np.eye(2), R=0.04 * np.eye(2)),
        name='single-link',
        seed=seed,
        horizon=5000,
        process_noise=NoiseSpec(NoiseKind.GAUSSIAN, 2, covariance=[0.01, 0.01], seed=seed + PROCESS_SEED_OFFSET),
        measurement_noise=NoiseSpec(NoiseKind.GAUSSIAN, 2, covariance=[0.04, 0.04],
                                    seed=seed + MEASUREMENT_SEED_OFFSET),
        measurement_trigger=MeasurementTriggerConfig([delta]),
        agents=[AgentSpec(AgentRole.SENSOR, (0,)), AgentSpec(AgentRole.ESTIMATOR)],
        pairs=[(0, 1)])


BUILTINS: typing.Dict[str, typing.Callable[..., Scenario]] = {
    'thermo-fluid': builtin_benchmark,
    'single-link': single_link,
}