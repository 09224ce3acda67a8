import csv
import json
import logging
import typing

import numpy as np
from numpy import ndarray

from ebsesim.bus import BusLog, FrameKind
from ebsesim.errors import DimensionError
from ebsesim.utils import moving_average

logger = logging.getLogger(__name__)

TRACE_SCHEMA = 1
REPORT_SCHEMA = 1
DEFAULT_WINDOW = 100


class RunTrace:
    """Time-indexed record of one run.

    Row ``k`` of every array holds step ``k``; row 0 is the initialization. Agent arrays are
    indexed ``[k, agent]``. ``x_hat`` holds the estimates after any synchronous reset and
    ``x_hat_pre`` the estimates right after the measurement update. ``v[k]`` is the process
    disturbance driving ``x[k + 1]``, ``u[k]`` the input applied at step ``k``.
    """

    def __init__(self,
                 horizon: int,
                 n: int,
                 p: int,
                 q: int,
                 n_agents: int,
                 sensor_owners: typing.Sequence[int],
                 input_owners: typing.Dict[int, int],
                 pairs: typing.Sequence[typing.Tuple[int, int]],
                 thresholds: ndarray,
                 input_thresholds: ndarray):
        rows = horizon + 1
        self.horizon = horizon
        self.sensor_owners = list(sensor_owners)
        self.input_owners = dict(input_owners)
        self.pairs = [tuple(pair) for pair in pairs]
        self.thresholds = thresholds
        self.input_thresholds = input_thresholds
        self.control = bool(self.input_owners)
        self.reset_steps: typing.List[int] = []
        self.bus_log = BusLog()

        self.x = np.zeros((rows, n))
        self.y = np.zeros((rows, p))
        self.v = np.zeros((rows, n))
        self.w = np.zeros((rows, p))
        self.u = np.zeros((rows, q))
        self.x_c = np.zeros((rows, n))
        self.x_c_pred = np.zeros((rows, n))
        self.x_pred = np.zeros((rows, n_agents, n))
        self.x_hat_pre = np.zeros((rows, n_agents, n))
        self.x_hat = np.zeros((rows, n_agents, n))
        self.u_hat = np.zeros((rows, n_agents, q))
        self.d = np.zeros((rows, n_agents, n))
        self.d_injected = np.zeros((rows, n_agents, n))
        self.innovations = np.zeros((rows, len(self.sensor_owners)))
        self.sensor_triggers = np.zeros((rows, len(self.sensor_owners)), dtype=bool)
        self.missed = np.zeros((rows, n_agents, len(self.sensor_owners)), dtype=bool)
        self.input_triggers = np.zeros((rows, len(input_thresholds)), dtype=bool)

    @property
    def n_agents(self):
        return self.x_hat.shape[1]

    @property
    def n_sensors(self):
        return self.sensor_triggers.shape[1]

    @property
    def n_inputs(self):
        return self.input_triggers.shape[1]

    @property
    def steps(self) -> ndarray:
        return np.arange(1, self.horizon + 1)

    @property
    def e(self) -> ndarray:
        """e_i(k) = x̂_i(k) - x̂_c(k)."""
        return self.x_hat - self.x_c[:, None, :]

    @property
    def e_pre(self) -> ndarray:
        return self.x_hat_pre - self.x_c[:, None, :]

    @property
    def eps(self) -> ndarray:
        """ε_i(k) = x(k) - x̂_i(k)."""
        return self.x[:, None, :] - self.x_hat

    @property
    def eps_c(self) -> ndarray:
        return self.x - self.x_c

    def e_pair(self, i: int, j: int) -> ndarray:
        return self.x_hat[:, i, :] - self.x_hat[:, j, :]

    def e_norms(self) -> ndarray:
        return np.linalg.norm(self.e, axis=2)

    def pair_norms(self) -> ndarray:
        if not self.pairs:
            return np.zeros((self.horizon + 1, 0))
        return np.stack([np.linalg.norm(self.e_pair(i, j), axis=1) for i, j in self.pairs], axis=1)

    def drop_counts(self) -> ndarray:
        counts = np.zeros(self.horizon + 1, dtype=int)
        for fate in self.bus_log.fates:
            if fate.kind == FrameKind.MEASUREMENT and not fate.delivered:
                counts[fate.step] += 1
        return counts

    def __repr__(self):
        return f'<{self.__class__.__name__} [horizon:{self.horizon}, agents:{self.n_agents}]>'


class CommRateReport:
    """Per-channel transmission rates over a trailing window of ``window`` steps."""

    def __init__(self, trace: RunTrace, window: int = DEFAULT_WINDOW):
        if window < 1:
            raise ValueError(f'window must be >= 1, got {window}')
        self.window = window
        self.steps = trace.steps
        self.sensor_channels = [f'y{i}' for i in range(trace.n_sensors)]
        self.input_channels = [f'u{i}' for i in range(trace.n_inputs)] if trace.control else []
        sensor = trace.sensor_triggers[1:].astype(np.float64)
        inputs = trace.input_triggers[1:].astype(np.float64) if trace.control else np.zeros((trace.horizon, 0))
        self.transmissions = np.hstack([sensor, inputs])
        self.rates = np.stack([moving_average(column, window) for column in self.transmissions.T], axis=1) \
            if self.transmissions.shape[1] else np.zeros((trace.horizon, 0))
        self.sensor_count = len(self.sensor_channels)

    @property
    def channels(self):
        return self.sensor_channels + self.input_channels

    @property
    def average(self) -> float:
        """Total transmissions over channels x steps."""
        if not self.transmissions.size:
            return 0.0
        return float(self.transmissions.sum() / self.transmissions.size)

    @property
    def sensor_average(self) -> float:
        sensor = self.transmissions[:, :self.sensor_count]
        return float(sensor.sum() / sensor.size) if sensor.size else 0.0

    @property
    def input_average(self) -> typing.Optional[float]:
        inputs = self.transmissions[:, self.sensor_count:]
        return float(inputs.sum() / inputs.size) if inputs.size else None

    @property
    def reduction(self) -> float:
        return 1.0 - self.average

    def channel_average(self, channel: str) -> float:
        return float(self.transmissions[:, self.channels.index(channel)].mean())

    def to_json(self):
        return {
            'window': self.window,
            'channels': {c: self.channel_average(c) for c in self.channels},
            'average': self.average,
            'sensor_average': self.sensor_average,
            'input_average': self.input_average,
            'reduction': self.reduction,
        }

    def __repr__(self):
        return f'<{self.__class__.__name__} [{self}]>'

    def __str__(self):
        return f'window:{self.window}, channels:{self.channels}, average:{self.average:.4f}'


def trace_header(trace: RunTrace) -> typing.List[str]:
    n, q = trace.x.shape[1], trace.u.shape[1]
    header = ['step']
    header += [f'x_{c}' for c in range(n)]
    header += [f'xc_{c}' for c in range(n)]
    for a in range(trace.n_agents):
        header += [f'xhat{a}_{c}' for c in range(n)]
    header += [f'trig_y{s}' for s in range(trace.n_sensors)]
    header += [f'trig_u{b}' for b in range(trace.n_inputs)]
    header += ['drops']
    header += [f'e{a}_norm' for a in range(trace.n_agents)]
    header += [f'e{i}{j}_norm' for i, j in trace.pairs]
    header += [f'u_{c}' for c in range(q)]

    return header


def write_trace_csv(trace: RunTrace, path: str):
    """One row per step k = 1..horizon; floats are written with round-trip precision."""
    e_norms = trace.e_norms()
    pair_norms = trace.pair_norms()
    drops = trace.drop_counts()
    with open(path, mode='w', encoding='utf8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(trace_header(trace))
        for k in trace.steps:
            row: typing.List[typing.Any] = [int(k)]
            row += trace.x[k].tolist()
            row += trace.x_c[k].tolist()
            row += trace.x_hat[k].ravel().tolist()
            row += trace.sensor_triggers[k].astype(int).tolist()
            row += trace.input_triggers[k].astype(int).tolist()
            row += [int(drops[k])]
            row += e_norms[k].tolist()
            row += pair_norms[k].tolist()
            row += trace.u[k].tolist()
            writer.writerow(row)

    logger.debug('Trace written to %s', path)


def write_rates_csv(report: CommRateReport, path: str):
    with open(path, mode='w', encoding='utf8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['step'] + [f'rate_{c}' for c in report.channels])
        for index, step in enumerate(report.steps):
            writer.writerow([int(step)] + report.rates[index].tolist())


def read_trace_csv(path: str) -> typing.Dict[str, ndarray]:
    """Columns of a trace CSV keyed by header name."""
    with open(path, mode='r', encoding='utf8', newline='') as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header or header[0] != 'step':
            raise DimensionError(path, 'a trace header starting with step', header)
        rows = [[float(value) for value in row] for row in reader if row]

    data = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(header))
    return {name: data[:, c] for c, name in enumerate(header)}


def trace_to_json(trace: RunTrace, report: CommRateReport) -> typing.Dict[str, typing.Any]:
    steps = trace.steps
    return {
        'schema': TRACE_SCHEMA,
        'horizon': trace.horizon,
        'steps': steps.tolist(),
        'x': trace.x[steps].tolist(),
        'x_c': trace.x_c[steps].tolist(),
        'x_hat': trace.x_hat[steps].tolist(),
        'u': trace.u[steps].tolist(),
        'sensor_triggers': trace.sensor_triggers[steps].astype(int).tolist(),
        'input_triggers': trace.input_triggers[steps].astype(int).tolist(),
        'drops': trace.drop_counts()[steps].tolist(),
        'e_norms': trace.e_norms()[steps].tolist(),
        'pairs': [list(pair) for pair in trace.pairs],
        'pair_norms': trace.pair_norms()[steps].tolist(),
        'reset_steps': trace.reset_steps,
        'rates': report.to_json(),
    }


def write_json(data: typing.Any, path: str):
    with open(path, mode='w', encoding='utf8') as f:
        json.dump(data, f, indent=2, ensure_ascii=False)
        f.write('\n')

    logger.debug('Report written to %s', path)
