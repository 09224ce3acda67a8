import enum
import logging
import typing

import numpy as np
from numpy import ndarray

from ebsesim.errors import DimensionError, ScenarioError
from ebsesim.utils import as_matrix, as_vector, philox

logger = logging.getLogger(__name__)


Partition = typing.List[typing.Tuple[int, int]]


def check_partition(partition: typing.Iterable[typing.Sequence[int]], size: int, what: str, path: str) -> Partition:
    blocks = [(int(start), int(stop)) for start, stop in partition]
    for start, stop in blocks:
        if start < 0 or stop > size or start >= stop:
            raise ScenarioError(f'invalid {what} range [{start}, {stop}) for {size} {what}s', path)

    covered: typing.Dict[int, int] = {}
    for i, (start, stop) in enumerate(blocks):
        for index in range(start, stop):
            if index in covered:
                raise ScenarioError(f'{what} {index} assigned to both block {covered[index]} and block {i}', path)
            covered[index] = i

    missing = [index for index in range(size) if index not in covered]
    if missing:
        raise ScenarioError(f'{what}s {missing} not covered by any block', path)

    return blocks


class LtiModel:
    """Discrete-time process x(k) = A x(k-1) + B u(k-1) + v(k-1), y(k) = C x(k) + w(k).

    ``sensor_partition`` splits the rows of C into sensor channels and ``input_partition``
    splits the columns of B into input blocks, both as half-open ``(start, stop)`` ranges.
    """

    def __init__(self,
                 A: typing.Any,
                 B: typing.Any,
                 C: typing.Any,
                 sensor_partition: typing.Optional[typing.Iterable[typing.Sequence[int]]] = None,
                 input_partition: typing.Optional[typing.Iterable[typing.Sequence[int]]] = None,
                 Ts: float = 1.0):
        self.A = as_matrix('A', A)
        n = self.A.shape[0]
        if n < 1 or self.A.shape != (n, n):
            raise DimensionError('A', '(n, n) with n >= 1', self.A.shape)

        B = np.asarray(B, dtype=np.float64)
        self.B = B.reshape(n, 0) if B.size == 0 else as_matrix('B', B)
        if self.B.shape[0] != n:
            raise DimensionError('B', (n, 'q'), self.B.shape)

        self.C = as_matrix('C', C)
        if self.C.shape[0] < 1 or self.C.shape[1] != n:
            raise DimensionError('C', ('p', n), self.C.shape)

        p, q = self.C.shape[0], self.B.shape[1]
        self.sensor_partition = check_partition(
            sensor_partition if sensor_partition is not None else [(0, p)], p, 'row', 'model.sensors')
        self.input_partition = check_partition(
            input_partition if input_partition is not None else ([(0, q)] if q else []), q, 'column', 'model.inputs')
        self.Ts = float(Ts)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def p(self):
        return self.C.shape[0]

    @property
    def q(self):
        return self.B.shape[1]

    @property
    def n_sensors(self):
        return len(self.sensor_partition)

    @property
    def n_inputs(self):
        return len(self.input_partition)

    def sensor_rows(self, i: int) -> slice:
        start, stop = self.sensor_partition[i]
        return slice(start, stop)

    def input_columns(self, i: int) -> slice:
        start, stop = self.input_partition[i]
        return slice(start, stop)

    def C_block(self, i: int) -> ndarray:
        return self.C[self.sensor_rows(i), :]

    def B_block(self, i: int) -> ndarray:
        return self.B[:, self.input_columns(i)]

    def measurement_of_sensor(self, y: ndarray, i: int) -> ndarray:
        return as_vector('y', y, self.p)[self.sensor_rows(i)]

    def __eq__(self, other):
        if not isinstance(other, LtiModel):
            return NotImplemented

        return (np.array_equal(self.A, other.A) and np.array_equal(self.B, other.B)
                and np.array_equal(self.C, other.C) and self.sensor_partition == other.sensor_partition
                and self.input_partition == other.input_partition and self.Ts == other.Ts)

    def __repr__(self):
        return f'<{self.__class__.__name__} [{self}]>'

    def __str__(self):
        return (f'n:{self.n}, p:{self.p}, q:{self.q}, '
                f'sensors:{self.sensor_partition}, inputs:{self.input_partition}, Ts:{self.Ts}')


def step_process(model: LtiModel, x_prev: typing.Any, u_prev: typing.Any, v_prev: typing.Any) -> ndarray:
    x_prev = as_vector('x_prev', x_prev, model.n)
    u_prev = as_vector('u_prev', u_prev, model.q) if model.q else np.zeros(0)
    v_prev = as_vector('v_prev', v_prev, model.n)

    return model.A @ x_prev + model.B @ u_prev + v_prev


def measure(model: LtiModel, x: typing.Any, w: typing.Any) -> ndarray:
    x = as_vector('x', x, model.n)
    w = as_vector('w', w, model.p)

    return model.C @ x + w


@enum.unique
class NoiseKind(enum.Enum):
    ZERO = 'zero'
    UNIFORM = 'uniform'
    GAUSSIAN = 'gaussian'
    STEP_SEQUENCE = 'step_sequence'


class NoiseWindow(typing.NamedTuple):
    start: int
    end: int
    value: ndarray

    def active(self, step: int):
        return self.start <= step < self.end


class NoiseSpec:
    """Disturbance source of dimension ``dim``.

    uniform: independent entries in ``[-bounds, bounds]``; gaussian: zero mean with
    diagonal ``covariance``; step_sequence: ``windows`` of constant vectors on ``[start, end)``.
    """

    def __init__(self,
                 kind: NoiseKind,
                 dim: int,
                 bounds: typing.Optional[typing.Any] = None,
                 covariance: typing.Optional[typing.Any] = None,
                 windows: typing.Optional[typing.Iterable[typing.Tuple[int, int, typing.Any]]] = None,
                 seed: int = 0):
        self.kind = kind
        self.dim = int(dim)
        self.seed = int(seed)
        if self.seed < 0:
            raise ScenarioError(f'seed must be unsigned, got {seed}')
        self.bounds = as_vector('bounds', bounds, self.dim) if bounds is not None else None
        self.covariance = as_vector('covariance', covariance, self.dim) if covariance is not None else None
        self.windows = [NoiseWindow(int(s), int(e), as_vector('window', v, self.dim)) for s, e, v in windows or []]

        if kind == NoiseKind.UNIFORM:
            if self.bounds is None or not np.all(np.isfinite(self.bounds)) or np.any(self.bounds < 0):
                raise ScenarioError('uniform noise needs finite nonnegative bounds')
        elif kind == NoiseKind.GAUSSIAN:
            if self.covariance is None or np.any(self.covariance < 0):
                raise ScenarioError('gaussian noise needs a nonnegative covariance diagonal')
        elif kind == NoiseKind.STEP_SEQUENCE:
            self.check_windows()

    @classmethod
    def zero(cls, dim: int):
        return cls(NoiseKind.ZERO, dim)

    def check_windows(self):
        for a, first in enumerate(self.windows):
            if first.start >= first.end:
                raise ScenarioError(f'empty step window [{first.start}, {first.end})')
            for second in self.windows[a + 1:]:
                overlap = first.start < second.end and second.start < first.end
                shared = np.flatnonzero((first.value != 0) & (second.value != 0))
                if overlap and shared.size:
                    raise ScenarioError(f'step windows [{first.start}, {first.end}) and [{second.start}, '
                                        f'{second.end}) overlap on channels {shared.tolist()}')

    @property
    def bound(self) -> typing.Optional[float]:
        """Euclidean bound on every sample, None when unbounded."""
        if self.kind == NoiseKind.ZERO:
            return 0.0
        if self.kind == NoiseKind.UNIFORM:
            return float(np.linalg.norm(self.bounds))
        if self.kind == NoiseKind.STEP_SEQUENCE:
            return max([float(np.linalg.norm(w.value)) for w in self.windows] or [0.0])

        return None

    @property
    def zero_mean(self):
        return self.kind in (NoiseKind.ZERO, NoiseKind.UNIFORM, NoiseKind.GAUSSIAN)

    def reseeded(self, seed: int):
        return NoiseSpec(self.kind, self.dim, bounds=self.bounds, covariance=self.covariance,
                         windows=[(w.start, w.end, w.value) for w in self.windows], seed=seed)

    def __eq__(self, other):
        if not isinstance(other, NoiseSpec):
            return NotImplemented

        def same(a, b):
            return (a is None and b is None) or (a is not None and b is not None and np.array_equal(a, b))

        return (self.kind == other.kind and self.dim == other.dim and self.seed == other.seed
                and same(self.bounds, other.bounds) and same(self.covariance, other.covariance)
                and len(self.windows) == len(other.windows)
                and all(a.start == b.start and a.end == b.end and np.array_equal(a.value, b.value)
                        for a, b in zip(self.windows, other.windows)))

    def __repr__(self):
        return f'<{self.__class__.__name__} [{self}]>'

    def __str__(self):
        return f'kind:{self.kind.value}, dim:{self.dim}, seed:{self.seed}'


def sample_noise(spec: NoiseSpec, step: int, channel: int = 0) -> ndarray:
    if spec.kind == NoiseKind.ZERO:
        return np.zeros(spec.dim)

    if spec.kind == NoiseKind.STEP_SEQUENCE:
        value = np.zeros(spec.dim)
        for window in spec.windows:
            if window.active(step):
                value = value + window.value
        return value

    rng = philox(spec.seed, step, channel)
    if spec.kind == NoiseKind.UNIFORM:
        return rng.uniform(-1.0, 1.0, spec.dim) * spec.bounds

    return rng.standard_normal(spec.dim) * np.sqrt(spec.covariance)


class ProcessTrajectory:

    def __init__(self, x: ndarray, y: ndarray, v: ndarray, w: ndarray):
        if not (x.shape[0] == y.shape[0] == v.shape[0] == w.shape[0]):
            raise DimensionError('trajectory', 'equal lengths', (x.shape[0], y.shape[0], v.shape[0], w.shape[0]))
        self.x = x
        self.y = y
        self.v = v
        self.w = w

    @property
    def length(self):
        return self.x.shape[0]

    def __repr__(self):
        return f'<{self.__class__.__name__} [length:{self.length}]>'


def simulate_process(model: LtiModel,
                     x0: typing.Any,
                     length: int,
                     process_noise: typing.Optional[NoiseSpec] = None,
                     measurement_noise: typing.Optional[NoiseSpec] = None,
                     inputs: typing.Optional[typing.Any] = None) -> ProcessTrajectory:
    """Open-loop trajectory of ``length`` samples; v[k] drives x[k + 1], w[k] corrupts y[k]."""
    process_noise = process_noise or NoiseSpec.zero(model.n)
    measurement_noise = measurement_noise or NoiseSpec.zero(model.p)
    u = np.zeros((length, model.q)) if inputs is None else np.asarray(inputs, dtype=np.float64)
    if u.shape != (length, model.q):
        raise DimensionError('inputs', (length, model.q), u.shape)

    x = np.zeros((length, model.n))
    y = np.zeros((length, model.p))
    v = np.zeros((length, model.n))
    w = np.zeros((length, model.p))
    x[0] = as_vector('x0', x0, model.n)
    for k in range(length):
        v[k] = sample_noise(process_noise, k)
        w[k] = sample_noise(measurement_noise, k)
        y[k] = measure(model, x[k], w[k])
        if k + 1 < length:
            x[k + 1] = step_process(model, x[k], u[k], v[k])

    logger.debug('Simulated %d open-loop steps of %s', length, model)
    return ProcessTrajectory(x, y, v, w)
