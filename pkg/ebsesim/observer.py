import logging
import typing

import numpy as np
from numpy import ndarray

from ebsesim.errors import ConvergenceError, DimensionError, UnstableObserverError
from ebsesim.model import LtiModel
from ebsesim.utils import as_matrix, as_vector, induced_norm, spectral_radius

logger = logging.getLogger(__name__)

RICCATI_TOLERANCE = 1e-10
RICCATI_MAX_ITERATIONS = 100_000
RICCATI_DIVERGENCE = 1e12
CERTIFICATE_MAX_POWERS = 100_000


class ObserverGain:
    """Centralized observer gain L with its per-sensor column blocks L = [L_1, ..., L_N]."""

    def __init__(self, L: typing.Any, model: LtiModel):
        self.L = as_matrix('L', L, (model.n, model.p))
        self.partition = list(model.sensor_partition)

    @classmethod
    def from_blocks(cls, blocks: typing.Sequence[typing.Any], model: LtiModel):
        matrices = [as_matrix(f'L_{i}', b, (model.n, stop - start))
                    for i, (b, (start, stop)) in enumerate(zip(blocks, model.sensor_partition))]
        if len(matrices) != model.n_sensors:
            raise DimensionError('blocks', model.n_sensors, len(matrices))

        return cls(np.hstack(matrices), model)

    @property
    def blocks(self) -> typing.List[ndarray]:
        return [self.L[:, start:stop] for start, stop in self.partition]

    def block(self, i: int) -> ndarray:
        start, stop = self.partition[i]
        return self.L[:, start:stop]

    def __repr__(self):
        return f'<{self.__class__.__name__} [{self.L.shape}]>'


class ControllerGain:
    """State feedback u = F x with the per-agent row blocks F_i of the input partition."""

    def __init__(self, F: typing.Any, model: LtiModel):
        self.F = as_matrix('F', F, (model.q, model.n))
        self.partition = list(model.input_partition)

    @property
    def blocks(self) -> typing.List[ndarray]:
        return [self.F[start:stop, :] for start, stop in self.partition]

    def block(self, i: int) -> ndarray:
        start, stop = self.partition[i]
        return self.F[start:stop, :]

    def __repr__(self):
        return f'<{self.__class__.__name__} [{self.F.shape}]>'


class CentralEstimate(typing.NamedTuple):
    x_pred: ndarray
    x_filt: ndarray


def central_predict(model: LtiModel, gain: ObserverGain, est_prev: CentralEstimate, u_prev: typing.Any) -> ndarray:
    x_filt = as_vector('x_filt', est_prev.x_filt, model.n)
    u_prev = as_vector('u_prev', u_prev, model.q) if model.q else np.zeros(0)

    return model.A @ x_filt + model.B @ u_prev


def central_update(model: LtiModel, gain: ObserverGain, x_pred: typing.Any, y: typing.Any) -> ndarray:
    x_pred = as_vector('x_pred', x_pred, model.n)
    y = as_vector('y', y, model.p)

    return x_pred + gain.L @ (y - model.C @ x_pred)


def observer_matrix(model: LtiModel, gain: ObserverGain) -> ndarray:
    """(I - LC) A, the error dynamics of the centralized observer."""
    return (np.eye(model.n) - gain.L @ model.C) @ model.A


def stability_constants(model: LtiModel,
                        gain: ObserverGain,
                        rho: typing.Optional[float] = None) -> typing.Tuple[float, float]:
    """Certified (m_c, rho_c) with ||((I - LC) A)^k|| <= m_c rho_c^k for every k >= 0."""
    return certify_decay(observer_matrix(model, gain), rho)


def certify_decay(M: ndarray, rho: typing.Optional[float] = None) -> typing.Tuple[float, float]:
    radius = spectral_radius(M)
    if radius >= 1.0:
        raise UnstableObserverError(f'reference observer unstable: spectral radius {radius:.6g} >= 1')

    rho_c = (radius + 1.0) / 2.0 if rho is None else float(rho)
    if not radius < rho_c < 1.0:
        raise UnstableObserverError(f'rho_c={rho_c} must lie in ({radius:.6g}, 1)')

    # once ||(M/rho)^K|| <= 1, submultiplicativity bounds every later power by the first K
    scaled = M / rho_c
    power = np.eye(M.shape[0])
    m_c = 1.0
    for k in range(1, CERTIFICATE_MAX_POWERS + 1):
        power = power @ scaled
        current = induced_norm(power)
        if current <= 1.0:
            logger.debug('Decay certificate closed at power %d: m_c=%s rho_c=%s', k, m_c, rho_c)
            return m_c, rho_c
        m_c = max(m_c, current)

    raise ConvergenceError(f'decay certificate not closed within {CERTIFICATE_MAX_POWERS} powers')


def check_weights(name: str, matrix: ndarray, definite: bool):
    if not np.allclose(matrix, matrix.T):
        raise ConvergenceError(f'{name} must be symmetric')
    smallest = float(np.min(np.linalg.eigvalsh((matrix + matrix.T) / 2)))
    if (definite and smallest <= 0) or (not definite and smallest < -1e-12):
        raise ConvergenceError(f'{name} must be positive {"definite" if definite else "semidefinite"}, '
                               f'smallest eigenvalue {smallest:.6g}')


def riccati_fixed_point(A: ndarray, B: ndarray, Q: ndarray, R: ndarray, what: str) -> ndarray:
    """Iterates X <- A'XA - A'XB (B'XB + R)^-1 B'XA + Q until successive iterates agree."""
    X = np.eye(A.shape[0])
    for iteration in range(1, RICCATI_MAX_ITERATIONS + 1):
        gain = np.linalg.solve(B.T @ X @ B + R, B.T @ X @ A)
        following = A.T @ X @ A - A.T @ X @ B @ gain + Q
        following = (following + following.T) / 2
        if not np.all(np.isfinite(following)) or np.max(np.abs(following)) > RICCATI_DIVERGENCE:
            raise ConvergenceError(f'{what} Riccati iteration diverged after {iteration} iterations')
        if np.max(np.abs(following - X)) < RICCATI_TOLERANCE:
            logger.debug('%s Riccati iteration converged after %d iterations', what, iteration)
            return following
        X = following

    raise ConvergenceError(f'{what} Riccati iteration did not converge in {RICCATI_MAX_ITERATIONS} iterations')


def design_kalman_gain(model: LtiModel, Q: typing.Any, R: typing.Any) -> ObserverGain:
    """Steady-state Kalman gain L = P C' (C P C' + R)^-1 for the prior covariance P."""
    Q = as_matrix('Q', Q, (model.n, model.n))
    R = as_matrix('R', R, (model.p, model.p))
    check_weights('Q', Q, definite=False)
    check_weights('R', R, definite=True)

    P = riccati_fixed_point(model.A.T, model.C.T, Q, R, 'Kalman')
    L = np.linalg.solve(model.C @ P @ model.C.T + R, model.C @ P).T
    gain = ObserverGain(L, model)
    radius = spectral_radius(observer_matrix(model, gain))
    if radius >= 1.0:
        raise ConvergenceError(f'Kalman design left (I - LC)A unstable ({radius:.6g}); is (A, C) detectable?')

    return gain


def design_lqr_gain(model: LtiModel, Qx: typing.Any, Ru: typing.Any) -> ControllerGain:
    """LQR gain with the u = F x sign convention, so A + BF is the closed loop."""
    if model.q == 0:
        raise ConvergenceError('LQR design needs a model with at least one input')
    Qx = as_matrix('Qx', Qx, (model.n, model.n))
    Ru = as_matrix('Ru', Ru, (model.q, model.q))
    check_weights('Qx', Qx, definite=False)
    check_weights('Ru', Ru, definite=True)

    X = riccati_fixed_point(model.A, model.B, Qx, Ru, 'LQR')
    F = -np.linalg.solve(model.B.T @ X @ model.B + Ru, model.B.T @ X @ model.A)
    radius = spectral_radius(model.A + model.B @ F)
    if radius >= 1.0:
        raise ConvergenceError(f'LQR design left A + BF unstable ({radius:.6g}); is (A, B) stabilizable?')

    return ControllerGain(F, model)
