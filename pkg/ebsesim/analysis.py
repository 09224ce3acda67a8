import enum
import logging
import math
import typing

import numpy as np
from numpy import ndarray

from ebsesim.errors import CertificateError, DimensionError, RecursionMismatchError
from ebsesim.model import LtiModel
from ebsesim.observer import ControllerGain, ObserverGain, observer_matrix, stability_constants
from ebsesim.scenario import InputExchange, Scenario
from ebsesim.trace import REPORT_SCHEMA, RunTrace
from ebsesim.utils import Norm, as_matrix, induced_norm, spectral_radius, subsets

logger = logging.getLogger(__name__)

LMI_TOLERANCE = 1e-9
MAX_SUBSET_CHANNELS = 20
RESET_TOLERANCE = 1e-12


def subset_matrix(model: LtiModel, gain: ObserverGain, J: typing.Iterable[int]) -> ndarray:
    """Ã_J = (I - sum over l in J of L_l C_l) A."""
    channels = list(J)
    for channel in channels:
        if not 0 <= channel < model.n_sensors:
            raise DimensionError('J', f'channels in [0, {model.n_sensors})', channels)
    if len(set(channels)) != len(channels):
        raise DimensionError('J', 'distinct channels', channels)

    fused = np.eye(model.n)
    for channel in channels:
        fused = fused - gain.block(channel) @ model.C_block(channel)

    return fused @ model.A


def check_positive_definite(P: typing.Any, n: int) -> ndarray:
    P = as_matrix('P', P, (n, n))
    if not np.allclose(P, P.T, rtol=0.0, atol=1e-12):
        raise CertificateError('P must be symmetric')
    smallest = float(np.min(np.linalg.eigvalsh(P)))
    if smallest <= 0:
        raise CertificateError(f'P must be positive definite, smallest eigenvalue {smallest:.6g}')

    return P


class SubsetLmiCertificate:
    """Common quadratic Lyapunov certificate over every sensor subset."""

    def __init__(self,
                 P: ndarray,
                 checked_subsets: int,
                 max_eigenvalue_over_subsets: float,
                 worst_subset: typing.Tuple[int, ...],
                 contraction: float,
                 tol: float):
        self.P = P
        self.checked_subsets = checked_subsets
        self.max_eigenvalue_over_subsets = max_eigenvalue_over_subsets
        self.worst_subset = worst_subset
        self.contraction = contraction
        self.tol = tol

    @property
    def passed(self):
        return self.max_eigenvalue_over_subsets < -self.tol

    def to_json(self):
        return {
            'P': self.P.tolist(),
            'checked_subsets': self.checked_subsets,
            'max_eigenvalue_over_subsets': self.max_eigenvalue_over_subsets,
            'worst_subset': list(self.worst_subset),
            'contraction': self.contraction,
            'tol': self.tol,
            'pass': self.passed,
        }

    def __repr__(self):
        return f'<{self.__class__.__name__} [{self}]>'

    def __str__(self):
        return (f'pass:{self.passed}, subsets:{self.checked_subsets}, '
                f'max_eigenvalue:{self.max_eigenvalue_over_subsets:.6g}, worst:{list(self.worst_subset)}')


def check_lemma1(model: LtiModel,
                 gain: ObserverGain,
                 P: typing.Any,
                 tol: float = LMI_TOLERANCE) -> SubsetLmiCertificate:
    """Checks Ã_J' P Ã_J - P < 0 for every subset J of sensor channels."""
    if model.n_sensors > MAX_SUBSET_CHANNELS:
        raise CertificateError(f'{model.n_sensors} sensor channels mean 2^{model.n_sensors} subsets; '
                               f'group channels into at most {MAX_SUBSET_CHANNELS} blocks')
    P = check_positive_definite(P, model.n)
    values, vectors = np.linalg.eigh(P)
    inverse_root = vectors @ np.diag(1.0 / np.sqrt(values)) @ vectors.T

    worst = -math.inf
    worst_subset: typing.Tuple[int, ...] = ()
    contraction = 0.0
    count = 0
    for J in subsets(model.n_sensors):
        A_J = subset_matrix(model, gain, J)
        lyapunov = A_J.T @ P @ A_J - P
        largest = float(np.max(np.linalg.eigvalsh((lyapunov + lyapunov.T) / 2)))
        scaled = inverse_root @ A_J.T @ P @ A_J @ inverse_root
        contraction = max(contraction, float(np.max(np.linalg.eigvalsh((scaled + scaled.T) / 2))))
        if largest > worst:
            worst, worst_subset = largest, J
        count += 1

    certificate = SubsetLmiCertificate(P, count, worst, worst_subset, math.sqrt(max(contraction, 0.0)), tol)
    logger.debug('Subset certificate: %s', certificate)
    return certificate


def constructive_e_max(certificate: SubsetLmiCertificate, e_ij0_max: float, d_max: float) -> float:
    """Bound on every ||e_ij(k)|| from the P-weighted contraction of the certificate."""
    if not certificate.passed:
        raise CertificateError('no inter-agent bound without a passing subset certificate')
    values = np.linalg.eigvalsh(certificate.P)
    condition = float(values[-1] / values[0])

    return math.sqrt(condition) * (e_ij0_max + 2.0 * d_max / (1.0 - certificate.contraction))


def subset_gain_bound(model: LtiModel, gain: ObserverGain) -> float:
    """max over subsets J of ||Ã_J||, or a triangle-inequality cap above the enumeration limit."""
    if model.n_sensors > MAX_SUBSET_CHANNELS:
        fused = sum(induced_norm(gain.block(c) @ model.C_block(c)) for c in range(model.n_sensors))
        return (1.0 + fused) * induced_norm(model.A)

    return max(induced_norm(subset_matrix(model, gain, J)) for J in subsets(model.n_sensors))


def reset_e_max(model: LtiModel, gain: ObserverGain, reset_period: int, e_ij0_max: float, d_max: float) -> float:
    """Bound on every ||e_ij(k)|| when all estimates are averaged every ``reset_period`` steps.

    Between two resets e_ij grows by at most ||Ã_J|| per step plus 2 d_max, and every reset sets it to zero,
    so the bound holds without a subset certificate.
    """
    if reset_period < 1:
        raise CertificateError('reset bounds need a positive reset period')
    growth = subset_gain_bound(model, gain)
    powers = growth ** np.arange(reset_period + 1)
    accumulated = np.concatenate(([0.0], np.cumsum(powers[:-1])))

    return float(np.max(powers * e_ij0_max + accumulated * 2.0 * d_max))


def m_bar(model: LtiModel, gain: ObserverGain) -> float:
    """max over channels of ||L_j C_j A||."""
    return max(induced_norm(gain.block(c) @ model.C_block(c) @ model.A) for c in range(model.n_sensors))


def _check_rho(rho_c: float):
    if not 0.0 <= rho_c < 1.0:
        raise CertificateError(f'rho_c must lie in [0, 1), got {rho_c}')


def theorem1_bound(m_c: float, rho_c: float, norm_L: float, delta_est: float, e_i0_norm: float) -> float:
    """Single-link bound m_c ||e_i(0)|| + m_c / (1 - rho_c) ||L|| delta."""
    _check_rho(rho_c)
    return m_c * e_i0_norm + m_c / (1.0 - rho_c) * norm_L * delta_est


def theorem2_bound(m_c: float,
                   rho_c: float,
                   norm_L: float,
                   delta_est_vec: typing.Any,
                   d_i_max: float,
                   m_bar: float,
                   N_sen: int,
                   e_max: float,
                   e_i0_norm: float) -> float:
    _check_rho(rho_c)
    delta_norm = float(np.linalg.norm(np.asarray(delta_est_vec, dtype=np.float64)))
    if min(norm_L, d_i_max, m_bar, e_max, e_i0_norm) < 0:
        raise CertificateError('bound inputs must be nonnegative')

    return m_c * e_i0_norm + m_c / (1.0 - rho_c) * (norm_L * delta_norm + d_i_max + m_bar * N_sen * e_max)


@enum.unique
class BoundKind(enum.Enum):
    DETERMINISTIC = 'deterministic'
    STOCHASTIC = 'stochastic'


def epsilon_c_bound(m_c: float, rho_c: float, norm_I_LC: float, norm_L: float,
                    v_max: float, w_max: float, eps_c0_norm: float) -> float:
    _check_rho(rho_c)
    return m_c * eps_c0_norm + m_c / (1.0 - rho_c) * (norm_I_LC * v_max + norm_L * w_max)


def corollary_bounds(kind: BoundKind,
                     e_i_max: float,
                     m_c: float,
                     rho_c: float,
                     norm_L: float = 0.0,
                     norm_I_LC: float = 0.0,
                     v_max: typing.Optional[float] = None,
                     w_max: typing.Optional[float] = None,
                     eps_c0_norm: float = 0.0,
                     zero_mean: bool = False) -> float:
    """Bound on ||ε_i(k)|| (deterministic) or on ||E[ε_i(k)]|| (stochastic)."""
    if kind == BoundKind.DETERMINISTIC:
        if v_max is None or w_max is None:
            raise CertificateError('deterministic bounds need bounded process and measurement noise')
        return epsilon_c_bound(m_c, rho_c, norm_I_LC, norm_L, v_max, w_max, eps_c0_norm) + e_i_max

    if not zero_mean:
        raise CertificateError('mean-error bounds need zero-mean noise')
    _check_rho(rho_c)
    return e_i_max + m_c * eps_c0_norm


def effective_thresholds(scenario: Scenario) -> ndarray:
    """Per-channel thresholds expressed in the 2-norm of the channel innovation."""
    delta = scenario.measurement_trigger.delta_est
    if scenario.measurement_trigger.norm == Norm.INF:
        widths = np.array([stop - start for start, stop in scenario.model.sensor_partition], dtype=np.float64)
        return delta * np.sqrt(widths)

    return delta.copy()


class BoundReport:

    def __init__(self,
                 m_c: float,
                 rho_c: float,
                 form: str,
                 e_i_max: typing.List[typing.Optional[float]],
                 epsilon_c_max: typing.Optional[float],
                 epsilon_i_max: typing.List[typing.Optional[float]],
                 mean_error_max: typing.List[typing.Optional[float]],
                 guaranteed: bool,
                 inputs: typing.Dict[str, typing.Any],
                 certificate: typing.Optional[SubsetLmiCertificate] = None,
                 notes: typing.Optional[typing.List[str]] = None):
        self.m_c = m_c
        self.rho_c = rho_c
        self.form = form
        self.e_i_max = e_i_max
        self.epsilon_c_max = epsilon_c_max
        self.epsilon_i_max = epsilon_i_max
        self.mean_error_max = mean_error_max
        self.guaranteed = guaranteed
        self.inputs = inputs
        self.certificate = certificate
        self.notes = notes or []

    def to_json(self):
        return {
            'schema': REPORT_SCHEMA,
            'stability': {'m_c': self.m_c, 'rho_c': self.rho_c},
            'form': self.form,
            'e_i_max': self.e_i_max,
            'epsilon_c_max': self.epsilon_c_max,
            'epsilon_i_max': self.epsilon_i_max,
            'mean_error_max': self.mean_error_max,
            'guaranteed': self.guaranteed,
            'inputs': self.inputs,
            'certificate': self.certificate.to_json() if self.certificate is not None else None,
            'notes': self.notes,
        }

    def __repr__(self):
        return f'<{self.__class__.__name__} [form:{self.form}, e_i_max:{self.e_i_max}, guaranteed:{self.guaranteed}]>'


def bound_report(scenario: Scenario, P: typing.Optional[typing.Any] = None) -> BoundReport:
    """Stability constants, subset certificate and every error bound for ``scenario``."""
    model, gain = scenario.model, scenario.observer_gain
    m_c, rho_c = stability_constants(model, gain)
    norm_L = induced_norm(gain.L)
    delta = effective_thresholds(scenario)
    N = scenario.n_agents
    notes: typing.List[str] = []

    d0 = [scenario.injection.sample(0, a) for a in range(N)]
    e_i0 = [float(np.linalg.norm(d)) for d in d0]
    e_ij0 = max([float(np.linalg.norm(d0[i] - d0[j])) for i in range(N) for j in range(N)] or [0.0])
    d_max = [scenario.injection.bound(a, from_step=1) for a in range(N)]
    mbar = m_bar(model, gain)

    certificate: typing.Optional[SubsetLmiCertificate] = None
    try:
        certificate = check_lemma1(model, gain, P if P is not None else (
            scenario.P if scenario.P is not None else np.eye(model.n)))
    except CertificateError as e:
        notes.append(f'subset certificate unavailable: {e}')

    e_max: typing.Optional[float] = None
    e_i_max: typing.List[typing.Optional[float]]
    if e_ij0 == 0.0 and max(d_max) == 0.0:
        form = 'direct'
        e_max = 0.0
        e_i_max = [theorem1_bound(m_c, rho_c, norm_L, float(np.linalg.norm(delta)), e0) for e0 in e_i0]
    else:
        form = 'inter-agent'
        candidates = []
        if certificate is not None and certificate.passed:
            candidates.append(constructive_e_max(certificate, e_ij0, max(d_max)))
        if scenario.reset_period > 0:
            candidates.append(reset_e_max(model, gain, scenario.reset_period, e_ij0, max(d_max)))
        if candidates:
            e_max = min(candidates)
            # a reset moves e_i by the mean of e_ji, at most e_max
            jump = e_max if scenario.reset_period > 0 else 0.0
            e_i_max = [theorem2_bound(m_c, rho_c, norm_L, delta, d_max[a] + jump, mbar, model.n_sensors, e_max,
                                      e_i0[a])
                       for a in range(N)]
        else:
            notes.append('inter-agent error not certified: no bound on e_i')
            e_i_max = [None] * N

    if scenario.reset_period > 0 and all(bound is not None for bound in e_i_max):
        e_i_max = [max(typing.cast(typing.List[float], e_i_max))] * N

    guaranteed = scenario.lossless and (not scenario.control_enabled or scenario.exchange == InputExchange.PERIODIC)
    if not scenario.lossless:
        notes.append('packet loss adds disturbances the bounds do not cover')
    if scenario.control_enabled and scenario.exchange == InputExchange.EVENT:
        notes.append('event-triggered inputs add disturbances the bounds do not cover')

    norm_I_LC = induced_norm(np.eye(model.n) - gain.L @ model.C)
    eps_c0 = float(np.linalg.norm(scenario.initial_state - scenario.initial_estimate))
    v_max, w_max = scenario.process_noise.bound, scenario.measurement_noise.bound
    epsilon_c_max: typing.Optional[float] = None
    epsilon_i_max: typing.List[typing.Optional[float]] = [None] * N
    if v_max is not None and w_max is not None:
        epsilon_c_max = epsilon_c_bound(m_c, rho_c, norm_I_LC, norm_L, v_max, w_max, eps_c0)
        epsilon_i_max = [corollary_bounds(BoundKind.DETERMINISTIC, bound, m_c, rho_c, norm_L, norm_I_LC,
                                          v_max, w_max, eps_c0) if bound is not None else None
                         for bound in e_i_max]
    mean_error_max: typing.List[typing.Optional[float]] = [None] * N
    if scenario.process_noise.zero_mean and scenario.measurement_noise.zero_mean:
        mean_error_max = [corollary_bounds(BoundKind.STOCHASTIC, bound, m_c, rho_c, eps_c0_norm=eps_c0,
                                           zero_mean=True) if bound is not None else None
                          for bound in e_i_max]

    inputs = {
        'delta_est': delta.tolist(),
        'd_max': d_max,
        'e_max': e_max,
        'e_i0': e_i0,
        'v_max': v_max,
        'w_max': w_max,
        'norm_L': norm_L,
        'norm_I_LC': norm_I_LC,
        'm_bar': mbar,
        'N_sen': model.n_sensors,
        'spectral_radius': spectral_radius(observer_matrix(model, gain)),
    }
    report = BoundReport(m_c, rho_c, form, e_i_max, epsilon_c_max, epsilon_i_max, mean_error_max,
                         guaranteed, inputs, certificate, notes)
    logger.debug('Bounds for %s: %r', scenario.name, report)
    return report


class ClosedLoopReport(typing.NamedTuple):
    max_residual: float
    max_state_norm: float
    spectral_radius: float
    tolerance: float

    @property
    def ok(self):
        return self.max_residual <= self.tolerance


def closed_loop_check(model: LtiModel,
                      controller_gain: ControllerGain,
                      trace: RunTrace,
                      tolerance: float = 1e-10) -> ClosedLoopReport:
    """Replays x(k) = (A + BF) x(k-1) - sum of B_i F_i ε_i(k-1) + v(k-1)."""
    if not trace.control:
        raise CertificateError('closed-loop check needs a run with control enabled')

    closed = model.A + model.B @ controller_gain.F
    eps = trace.eps
    worst = 0.0
    for k in trace.steps:
        expected = closed @ trace.x[k - 1] + trace.v[k - 1]
        for block, owner in trace.input_owners.items():
            expected = expected - model.B_block(block) @ controller_gain.block(block) @ eps[k - 1, owner]
        scale = max(1.0, float(np.linalg.norm(trace.x[k])))
        worst = max(worst, float(np.linalg.norm(trace.x[k] - expected)) / scale)

    return ClosedLoopReport(worst, float(np.max(np.linalg.norm(trace.x, axis=1))), spectral_radius(closed), tolerance)


class RunCheckReport(typing.NamedTuple):
    trigger_violations: int
    inter_agent_residual: float
    central_residual: float
    closed_loop_residual: typing.Optional[float]
    reset_residual: typing.Optional[float]
    tolerance: float

    @property
    def ok(self):
        return (self.trigger_violations == 0
                and self.inter_agent_residual <= self.tolerance
                and self.central_residual <= self.tolerance
                and (self.closed_loop_residual is None or self.closed_loop_residual <= self.tolerance)
                and (self.reset_residual is None or self.reset_residual <= RESET_TOLERANCE))

    def to_json(self):
        return {**self._asdict(), 'ok': self.ok}


def trigger_violations(trace: RunTrace) -> int:
    """Steps where a channel's decision disagrees with its recorded innovation."""
    innovations = trace.innovations[1:]
    reached = innovations >= trace.thresholds[None, :]
    return int(np.count_nonzero(reached != trace.sensor_triggers[1:]))


def inter_agent_residual(model: LtiModel, gain: ObserverGain, trace: RunTrace) -> float:
    """Worst relative mismatch of e_ij(k) = Ã_I(k) e_ij(k-1) + d_i(k) - d_j(k)."""
    worst = 0.0
    N = trace.n_agents
    for k in trace.steps:
        A_I = subset_matrix(model, gain, np.flatnonzero(trace.sensor_triggers[k]).tolist())
        for i in range(N):
            for j in range(i + 1, N):
                actual = trace.x_hat_pre[k, i] - trace.x_hat_pre[k, j]
                expected = A_I @ (trace.x_hat[k - 1, i] - trace.x_hat[k - 1, j]) + trace.d[k, i] - trace.d[k, j]
                scale = max(1.0, float(np.linalg.norm(trace.x_hat_pre[k, i])),
                            float(np.linalg.norm(trace.x_hat_pre[k, j])))
                worst = max(worst, float(np.linalg.norm(actual - expected)) / scale)

    return worst


def central_residual(model: LtiModel, gain: ObserverGain, trace: RunTrace) -> float:
    """Worst relative mismatch of the decomposed recursion of e_i(k) = x̂_i(k) - x̂_c(k).

    e_i(k) = (I - LC) A e_i(k-1) - sum over silent l of L_l (η_l + C_l (x̂_owner(k|k-1) - p_i)) + d_i(k)
    with η_l the owner's innovation and p_i = A x̂_i(k-1) + B u(k-1).
    """
    M = observer_matrix(model, gain)
    worst = 0.0
    for k in trace.steps:
        silent = np.flatnonzero(~trace.sensor_triggers[k]).tolist()
        for i in range(trace.n_agents):
            p_i = model.A @ trace.x_hat[k - 1, i] + model.B @ trace.u[k - 1]
            expected = M @ (trace.x_hat[k - 1, i] - trace.x_c[k - 1]) + trace.d[k, i]
            for channel in silent:
                owner_pred = trace.x_pred[k, trace.sensor_owners[channel]]
                C_l = model.C_block(channel)
                innovation = trace.y[k, model.sensor_rows(channel)] - C_l @ owner_pred
                expected = expected - gain.block(channel) @ (innovation + C_l @ (owner_pred - p_i))
            actual = trace.x_hat_pre[k, i] - trace.x_c[k]
            scale = max(1.0, float(np.linalg.norm(trace.x_hat_pre[k, i])), float(np.linalg.norm(trace.x_c[k])))
            worst = max(worst, float(np.linalg.norm(actual - expected)) / scale)

    return worst


def reset_residual(trace: RunTrace) -> typing.Optional[float]:
    """Worst spread of post-reset estimates and drift of their mean at reset steps."""
    if not trace.reset_steps:
        return None

    worst = 0.0
    for k in trace.reset_steps:
        after, before = trace.x_hat[k], trace.x_hat_pre[k]
        scale = max(1.0, float(np.max(np.abs(before))))
        spread = float(np.max(np.abs(after - after[0])))
        drift = float(np.max(np.abs(after.mean(axis=0) - before.mean(axis=0))))
        worst = max(worst, spread / scale, drift / scale)

    return worst


def check_run(scenario: Scenario, trace: RunTrace, tolerance: float = 1e-10, strict: bool = False) -> RunCheckReport:
    """Per-step consistency of a run against the recursions it must satisfy."""
    model, gain = scenario.model, scenario.observer_gain
    closed_loop = None
    if trace.control and scenario.controller_gain is not None:
        closed_loop = closed_loop_check(model, scenario.controller_gain, trace, tolerance).max_residual

    report = RunCheckReport(trigger_violations(trace),
                            inter_agent_residual(model, gain, trace),
                            central_residual(model, gain, trace),
                            closed_loop,
                            reset_residual(trace),
                            tolerance)
    if not report.ok:
        logger.warning('Run %s failed its consistency checks: %s', scenario.name, report)
        if strict:
            raise RecursionMismatchError(f'run {scenario.name} failed its consistency checks: {report}')

    return report


class PairGrowth(typing.NamedTuple):
    pair: typing.Tuple[int, int]
    first_half: float
    second_half: float

    @property
    def ratio(self) -> float:
        if self.first_half > 0:
            return self.second_half / self.first_half
        return 0.0 if self.second_half == 0 else math.inf


Pairs = typing.Sequence[typing.Tuple[int, int]]


def inter_agent_growth(trace: RunTrace, pairs: typing.Optional[Pairs] = None) -> typing.List[PairGrowth]:
    """Max ||e_ij|| over the first and the second half of a run."""
    half = trace.horizon // 2
    growth = []
    for i, j in pairs if pairs is not None else trace.pairs:
        norms = np.linalg.norm(trace.e_pair(i, j)[1:], axis=1)
        first = float(norms[:half].max()) if half else 0.0
        second = float(norms[half:].max())
        growth.append(PairGrowth((i, j), first, second))

    return growth


class BoundViolation(typing.NamedTuple):
    agent: int
    step: int
    value: float
    bound: float


def replay_bounds(columns: typing.Dict[str, ndarray], report: BoundReport) -> typing.List[BoundViolation]:
    """Compares the e<agent>_norm columns of a trace against e_i_max."""
    violations = []
    for agent, bound in enumerate(report.e_i_max):
        name = f'e{agent}_norm'
        if name not in columns:
            raise DimensionError('trace', f'a {name} column', sorted(columns))
        if bound is None:
            continue
        for step, value in zip(columns['step'], columns[name]):
            if value > bound:
                violations.append(BoundViolation(agent, int(step), float(value), bound))

    return violations
