import logging
import os
import typing

import numpy as np

from ebsesim import analysis, core
from ebsesim.analysis import BoundReport, BoundViolation, RunCheckReport
from ebsesim.options import Options, OutputFormat
from ebsesim.scenario import Scenario
from ebsesim.trace import (
    CommRateReport,
    RunTrace,
    read_trace_csv,
    trace_to_json,
    write_json,
    write_rates_csv,
    write_trace_csv,
)

logger = logging.getLogger(__name__)


class RunResult(typing.NamedTuple):
    scenario: Scenario
    trace: RunTrace
    rates: CommRateReport
    checks: RunCheckReport

    def summary(self) -> typing.Dict[str, typing.Any]:
        e_norms = self.trace.e_norms()[1:]
        return {
            'scenario': self.scenario.name,
            'seed': self.scenario.seed,
            'horizon': self.trace.horizon,
            'rates': self.rates.to_json(),
            'max_e_norm': e_norms.max(axis=0).tolist(),
            'max_pair_norm': self.trace.pair_norms()[1:].max(axis=0).tolist() if self.trace.pairs else [],
            'max_state_norm': float(np.max(np.linalg.norm(self.trace.x, axis=1))),
            'capacity_violations': [v.step for v in self.trace.bus_log.violations],
            'reset_steps': len(self.trace.reset_steps),
            'checks': self.checks.to_json(),
        }


class SweepRow(typing.NamedTuple):
    scale: float
    sensor_rate: float
    rms_error: float
    max_error: float


def run(scenario: Scenario,
        options: typing.Optional[Options] = None,
        progress: typing.Optional[typing.Callable[[int], None]] = None) -> RunResult:
    options = options or Options()
    prepared = core.prepare(scenario, options)
    trace = core.Simulation(prepared).run(progress)
    rates = CommRateReport(trace, options.window)
    checks = analysis.check_run(prepared, trace, options.tolerance)
    logger.info('Run %s: sensor rate %.4f, checks %s', prepared.name, rates.sensor_average,
                'passed' if checks.ok else 'failed')

    return RunResult(prepared, trace, rates, checks)


def report(result: RunResult, options: typing.Optional[Options] = None) -> typing.List[str]:
    """Writes the run outputs into ``options.out_dir`` and returns their paths."""
    options = options or Options()
    os.makedirs(options.out_dir, exist_ok=True)
    paths = []
    if options.fmt == OutputFormat.CSV:
        paths.append(os.path.join(options.out_dir, 'trace.csv'))
        write_trace_csv(result.trace, paths[-1])
        paths.append(os.path.join(options.out_dir, 'rates.csv'))
        write_rates_csv(result.rates, paths[-1])
        paths.append(os.path.join(options.out_dir, 'bus.csv'))
        result.trace.bus_log.write_csv(paths[-1])
    else:
        paths.append(os.path.join(options.out_dir, 'run.json'))
        write_json(trace_to_json(result.trace, result.rates), paths[-1])

    paths.append(os.path.join(options.out_dir, 'summary.json'))
    write_json(result.summary(), paths[-1])

    return paths


def analyze(scenario: Scenario, options: typing.Optional[Options] = None) -> BoundReport:
    return analysis.bound_report(core.prepare(scenario, options or Options()))


def verify(trace_path: str,
           scenario: Scenario,
           options: typing.Optional[Options] = None) -> typing.Tuple[BoundReport, typing.List[BoundViolation]]:
    bounds = analyze(scenario, options)
    violations = analysis.replay_bounds(read_trace_csv(trace_path), bounds)
    if violations:
        logger.warning('%d bound violations in %s', len(violations), trace_path)

    return bounds, violations


def sweep(scenario: Scenario,
          scales: typing.Iterable[float],
          options: typing.Optional[Options] = None) -> typing.List[SweepRow]:
    """Sensor rate against estimation error for every threshold scale."""
    options = options or Options()
    rows = []
    for scale in scales:
        result = run(scenario.with_thresholds_scaled(scale), options)
        errors = np.linalg.norm(result.trace.eps[1:], axis=2)
        rows.append(SweepRow(float(scale),
                             result.rates.sensor_average,
                             float(np.sqrt(np.mean(errors ** 2))),
                             float(result.trace.e_norms()[1:].max())))
        logger.debug('Sweep scale %s: %s', scale, rows[-1])

    return rows
