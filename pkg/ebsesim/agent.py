import enum
import logging
import typing

import numpy as np
from numpy import ndarray

from ebsesim.bus import BusFrame, FrameKind
from ebsesim.errors import DimensionError, RoleError, ScenarioError
from ebsesim.model import LtiModel
from ebsesim.observer import ControllerGain, ObserverGain
from ebsesim.utils import as_vector, philox

logger = logging.getLogger(__name__)

INJECTION_STREAM = 7


@enum.unique
class AgentRole(enum.Enum):
    SENSOR = 'sensor'
    ESTIMATOR = 'estimator'
    COMBINED = 'combined'


class AgentSpec(typing.NamedTuple):
    role: AgentRole
    sensors: typing.Tuple[int, ...] = ()
    input_block: typing.Optional[int] = None


class AgentState:
    """One agent's replicated estimator: x̂_i(k|k-1), x̂_i(k|k), û^i and its own input block."""

    def __init__(self, id: int, spec: AgentSpec, model: LtiModel, x0: ndarray):
        self.id = id
        self.role = spec.role
        self.sensors = tuple(spec.sensors)
        self.input_block = spec.input_block
        self.x_pred = as_vector('x0', x0, model.n).copy()
        self.x_filt = self.x_pred.copy()
        self.u_hat = np.zeros(model.q)
        self.u: typing.Optional[ndarray] = None
        self.u_last: typing.Optional[ndarray] = None
        if self.input_block is not None:
            width = model.input_columns(self.input_block)
            self.u = np.zeros(width.stop - width.start)
            self.u_last = np.zeros(width.stop - width.start)

    @property
    def senses(self):
        return self.role in (AgentRole.SENSOR, AgentRole.COMBINED)

    @property
    def estimates(self):
        return self.role in (AgentRole.ESTIMATOR, AgentRole.COMBINED)

    def __repr__(self):
        return f'<{self.__class__.__name__} [{self}]>'

    def __str__(self):
        return f'agent {self.id} ({self.role.value}) sensors:{list(self.sensors)} input:{self.input_block}'


class DisturbanceInjection:
    """Scheduled estimator disturbances plus optional iid bounded ones (||d_i|| <= bound_i)."""

    def __init__(self,
                 n: int,
                 schedule: typing.Optional[typing.Iterable[typing.Tuple[int, int, typing.Any]]] = None,
                 bounds: typing.Optional[typing.Any] = None,
                 seed: int = 0):
        self.n = n
        self.schedule = [(int(step), int(agent), as_vector('disturbance', vector, n))
                         for step, agent, vector in schedule or []]
        self.bounds = as_vector('disturbance bounds', bounds) if bounds is not None else None
        if self.bounds is not None and np.any(self.bounds < 0):
            raise ScenarioError('disturbance bounds must be >= 0', 'disturbances.bounded.bounds')
        self.seed = int(seed)
        self._by_step: typing.Dict[typing.Tuple[int, int], ndarray] = {}
        for step, agent, vector in self.schedule:
            self._by_step[(step, agent)] = self._by_step.get((step, agent), np.zeros(n)) + vector

    @property
    def active(self):
        return bool(self.schedule) or (self.bounds is not None and bool(np.any(self.bounds > 0)))

    def sample(self, step: int, agent: int) -> ndarray:
        d = self._by_step.get((step, agent), np.zeros(self.n)).copy()
        if self.bounds is not None and self.bounds[agent] > 0:
            z = philox(self.seed, step, INJECTION_STREAM, agent).uniform(-1.0, 1.0, self.n)
            d += self.bounds[agent] * z / np.sqrt(self.n)

        return d

    def bound(self, agent: int, from_step: int = 1) -> float:
        """Bound on ||d_i(k)|| for k >= from_step."""
        scheduled = [float(np.linalg.norm(v)) for (step, a), v in self._by_step.items()
                     if a == agent and step >= from_step]
        random_part = float(self.bounds[agent]) if self.bounds is not None else 0.0

        return max(scheduled or [0.0]) + random_part

    def __eq__(self, other):
        if not isinstance(other, DisturbanceInjection):
            return NotImplemented
        same_bounds = (self.bounds is None and other.bounds is None) or (
            self.bounds is not None and other.bounds is not None and np.array_equal(self.bounds, other.bounds))
        return (self.n == other.n and self.seed == other.seed and same_bounds
                and len(self.schedule) == len(other.schedule)
                and all(a[0] == b[0] and a[1] == b[1] and np.array_equal(a[2], b[2])
                        for a, b in zip(self.schedule, other.schedule)))

    def __repr__(self):
        return f'<{self.__class__.__name__} [schedule:{len(self.schedule)}, bounds:{self.bounds}]>'


def agent_predict(model: LtiModel, x_filt_prev: typing.Any, u_source: typing.Any) -> ndarray:
    x_filt_prev = as_vector('x_filt', x_filt_prev, model.n)
    u_source = as_vector('u_source', u_source, model.q) if model.q else np.zeros(0)

    return model.A @ x_filt_prev + model.B @ u_source


def agent_update(model: LtiModel,
                 gain: ObserverGain,
                 x_pred: typing.Any,
                 delivered: typing.Sequence[typing.Tuple[int, typing.Any]],
                 d_i: typing.Optional[typing.Any] = None) -> ndarray:
    """Subset fusion x̂(k|k) = x̂(k|k-1) + sum over delivered l of L_l (y_l - C_l x̂(k|k-1)) + d_i."""
    x_pred = as_vector('x_pred', x_pred, model.n)
    x_filt = x_pred.copy()
    seen: typing.Set[int] = set()
    for sensor, y in delivered:
        if sensor in seen:
            raise DimensionError('delivered', 'distinct sensor channels', f'duplicate channel {sensor}')
        seen.add(sensor)
        rows = model.sensor_rows(sensor)
        y = as_vector(f'y_{sensor}', y, rows.stop - rows.start)
        x_filt = x_filt + gain.block(sensor) @ (y - model.C_block(sensor) @ x_pred)

    if d_i is not None:
        x_filt = x_filt + as_vector('d_i', d_i, model.n)

    return x_filt


def is_reset_step(k: int, K: int) -> bool:
    return K > 0 and k > 0 and k % K == 0


def synchronous_reset(estimates: typing.Sequence[ndarray], k: int, K: int) -> typing.List[ndarray]:
    """Every agent takes the joint average of all estimates."""
    if not is_reset_step(k, K):
        raise ValueError(f'step {k} is not a reset step for period {K}')

    mean = np.mean(np.vstack(estimates), axis=0)
    logger.debug('Synchronous reset at step %d over %d agents', k, len(estimates))
    return [mean.copy() for _ in estimates]


def compute_control(controller_gain: ControllerGain,
                    state: AgentState,
                    block: typing.Optional[int] = None) -> ndarray:
    block = state.input_block if block is None else block
    if not state.estimates or block is None:
        raise RoleError(f'{state} does not compute a control input')

    return controller_gain.block(block) @ state.x_filt


def update_input_estimate(model: LtiModel, state: AgentState, frames: typing.Iterable[BusFrame]) -> ndarray:
    """Replace block j of û^i when j's input frame arrived; the own block is always exact."""
    u_hat = state.u_hat.copy()
    for frame in frames:
        if frame.kind != FrameKind.INPUT or frame.sender == state.id:
            continue
        columns = model.input_columns(frame.channel)
        u_hat[columns] = as_vector(f'u_{frame.channel}', frame.payload, columns.stop - columns.start)

    if state.input_block is not None and state.u is not None:
        u_hat[model.input_columns(state.input_block)] = state.u

    return u_hat
