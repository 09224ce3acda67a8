import math
import typing

import numpy as np
from numpy import ndarray

from ebsesim.errors import ScenarioError
from ebsesim.utils import Norm, as_vector, vector_norm


class MeasurementTriggerConfig:
    """One threshold per sensor channel; ``inf`` disables a channel."""

    def __init__(self, delta_est: typing.Any, norm: Norm = Norm.TWO):
        self.delta_est = as_vector('delta_est', delta_est)
        if np.any(np.isnan(self.delta_est)) or np.any(self.delta_est < 0):
            raise ScenarioError(f'measurement thresholds must be >= 0, got {self.delta_est.tolist()}',
                                'triggers.measurement.delta')
        self.norm = norm

    def __eq__(self, other):
        if not isinstance(other, MeasurementTriggerConfig):
            return NotImplemented
        return np.array_equal(self.delta_est, other.delta_est) and self.norm == other.norm

    def __repr__(self):
        return f'<{self.__class__.__name__} [delta:{self.delta_est.tolist()}, norm:{self.norm.value}]>'


class InputTriggerConfig:
    """One send-on-delta threshold per input block."""

    def __init__(self, delta_ctrl: typing.Any, norm: Norm = Norm.TWO):
        self.delta_ctrl = as_vector('delta_ctrl', delta_ctrl)
        if np.any(np.isnan(self.delta_ctrl)) or np.any(self.delta_ctrl < 0):
            raise ScenarioError(f'input thresholds must be >= 0, got {self.delta_ctrl.tolist()}',
                                'triggers.input.delta')
        self.norm = norm

    def __eq__(self, other):
        if not isinstance(other, InputTriggerConfig):
            return NotImplemented
        return np.array_equal(self.delta_ctrl, other.delta_ctrl) and self.norm == other.norm

    def __repr__(self):
        return f'<{self.__class__.__name__} [delta:{self.delta_ctrl.tolist()}, norm:{self.norm.value}]>'


def measurement_trigger(y_i: ndarray, y_pred_i: ndarray, delta_i: float, norm: Norm = Norm.TWO) -> bool:
    """Transmit y_i iff the local innovation reaches the threshold (closed comparison)."""
    if math.isinf(delta_i):
        return False

    return vector_norm(as_vector('y_i', y_i) - as_vector('y_pred_i', y_pred_i, len(y_i)), norm) >= delta_i


def input_trigger(u_i: ndarray, u_last_i: ndarray, delta_ctrl_i: float, norm: Norm = Norm.TWO) -> bool:
    """Send-on-delta on the computed input; the caller sets u_last <- u_i when this fires."""
    if math.isinf(delta_ctrl_i):
        return False

    return vector_norm(as_vector('u_i', u_i) - as_vector('u_last_i', u_last_i, len(u_i)), norm) >= delta_ctrl_i


def triggered_set(decisions: typing.Sequence[bool]) -> typing.Tuple[typing.Tuple[int, ...], typing.Tuple[int, ...]]:
    transmitting = tuple(i for i, decision in enumerate(decisions) if decision)
    silent = tuple(i for i, decision in enumerate(decisions) if not decision)

    return transmitting, silent
