import logging
import os
import sys
import typing
from types import TracebackType

import click

from ebsesim import __version__, api
from ebsesim.errors import EbseError
from ebsesim.options import Options, OutputFormat
from ebsesim.scenario import BUILTINS, SCENARIO_SCHEMA, Scenario, load_scenario
from ebsesim.trace import REPORT_SCHEMA, TRACE_SCHEMA, write_json

logger = logging.getLogger('ebsesim')

EXIT_CHECKS_FAILED = 1
EXIT_USAGE = 2

T = typing.TypeVar('T')


class DebugProgressBar(typing.Generic[T]):

    def __init__(self, debug: bool, iterable: typing.Iterable[T], **kwargs):
        self.debug = debug
        self.iterable = iterable
        self.progressbar = click.progressbar(iterable, **kwargs)

    def __iter__(self):
        if not self.debug:
            return self.progressbar.__iter__()

        yield from self.iterable

    def __enter__(self):
        if not self.debug:
            return self.progressbar.__enter__()

        return self

    def __exit__(self,
                 exc_type: typing.Optional[typing.Type[BaseException]],
                 exc: typing.Optional[BaseException],
                 traceback: typing.Optional[TracebackType]):
        if not self.debug:
            return self.progressbar.__exit__(exc_type, exc, traceback)

    def update(self, n_steps: int, current_item: typing.Optional[T] = None) -> None:
        if not self.debug:
            return self.progressbar.update(n_steps, current_item)


def fail(error: EbseError) -> typing.NoReturn:
    click.echo(f"{click.style('Error', fg='red', bold=True)}: {error}", err=True)
    sys.exit(EXIT_USAGE)


def load_source(scenario: typing.Optional[str], benchmark: typing.Optional[str]) -> Scenario:
    if bool(scenario) == bool(benchmark):
        raise click.UsageError('give exactly one of --scenario or --benchmark')
    if benchmark:
        return BUILTINS[benchmark]()
    if not os.path.isfile(typing.cast(str, scenario)):
        raise click.BadParameter(f'{scenario} is not a file', param_hint='--scenario')

    return load_scenario(typing.cast(str, scenario))


def scenario_options(func):
    func = click.option('-b', '--benchmark', type=click.Choice(sorted(BUILTINS)),
                        help='Use a built-in scenario instead of a scenario file.')(func)
    return click.option('-s', '--scenario', type=click.Path(dir_okay=False),
                        help='Scenario file (YAML).')(func)


def run_options(func):
    func = click.option('--window', type=click.IntRange(1), default=100, show_default=True,
                        help='Moving-average window of the communication rates, in steps.')(func)
    func = click.option('-f', '--format', 'fmt', type=click.Choice([f.value for f in OutputFormat]),
                        default=OutputFormat.CSV.value, show_default=True, help='Output format.')(func)
    func = click.option('-o', '--out-dir', type=click.Path(file_okay=False), default='.', show_default=True,
                        help='Directory receiving the outputs.')(func)
    func = click.option('-H', '--horizon', type=click.IntRange(1), help='Override the scenario horizon.')(func)
    return click.option('--seed', type=click.IntRange(0), help='Override the scenario seed.')(func)


def execute(source: Scenario, options: Options, debug: bool) -> api.RunResult:
    horizon = options.horizon or source.horizon
    with DebugProgressBar(debug, range(horizon), label=f'Simulating {source.name}', length=horizon) as bar:
        result = api.run(source, options, progress=lambda k: bar.update(1))

    paths = api.report(result, options)
    rates = result.rates
    click.echo(f"{click.style(source.name, bold=True)}: sensor rate "
               f"{click.style(f'{rates.sensor_average:.4f}', bold=True, fg='green')}"
               + (f", input rate {click.style(f'{rates.input_average:.4f}', bold=True, fg='green')}"
                  if rates.input_average is not None else '')
               + f", reduction {click.style(f'{rates.reduction:.1%}', bold=True, fg='blue')}")
    for path in paths:
        click.echo(f'  {path}')
    if not result.checks.ok:
        click.echo(f"{click.style('Consistency checks failed', fg='red', bold=True)}: {result.checks}")

    return result


@click.group()
@click.option('--debug', is_flag=True, help='Print useful information for debugging and for reporting bugs.')
@click.option('-v', '--verbose', count=True, help='Display more details.')
@click.version_option(__version__, message=f'%(prog)s %(version)s (scenario schema {SCENARIO_SCHEMA}, '
                                           f'trace schema {TRACE_SCHEMA}, report schema {REPORT_SCHEMA})')
@click.pass_context
def ebsesim(ctx: click.Context, debug: bool, verbose: int):
    """Distributed event-based state estimation over a shared bus."""
    if debug:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(logging.BASIC_FORMAT))
        logger.addHandler(handler)
        logger.setLevel(logging.DEBUG)

    ctx.obj = {'debug': debug, 'verbose': verbose}


@ebsesim.command()
@scenario_options
@run_options
@click.pass_context
def run(ctx: click.Context, scenario: typing.Optional[str], benchmark: typing.Optional[str],
        seed: typing.Optional[int], horizon: typing.Optional[int], out_dir: str, fmt: str, window: int):
    """Simulate a scenario and write its trace, rates and summary."""
    debug = ctx.obj['debug']
    options = Options(out_dir=out_dir, fmt=OutputFormat(fmt), seed=seed, horizon=horizon, window=window,
                      debug=debug)
    try:
        result = execute(load_source(scenario, benchmark), options, debug)
    except EbseError as e:
        fail(e)

    if not result.checks.ok:
        sys.exit(EXIT_CHECKS_FAILED)


def write_certificate(source: Scenario, options: Options, verbose: int):
    bounds = api.analyze(source, options)
    os.makedirs(options.out_dir, exist_ok=True)
    path = os.path.join(options.out_dir, 'certificate.json')
    write_json(bounds.to_json(), path)

    certificate = bounds.certificate
    if certificate is not None:
        status = click.style('passed', fg='green', bold=True) if certificate.passed else \
            click.style('failed', fg='red', bold=True)
        click.echo(f'Subset certificate {status} over {certificate.checked_subsets} subsets')
    click.echo(f'm_c={bounds.m_c:.6g} rho_c={bounds.rho_c:.6g}, {bounds.form} bounds: '
               + ', '.join(f'e{a}<={bound:.6g}' if bound is not None else f'e{a}: none'
                           for a, bound in enumerate(bounds.e_i_max)))
    if verbose:
        for note in bounds.notes:
            click.echo(click.style(f'  {note}', fg='yellow'))
    click.echo(f'  {path}')


@ebsesim.command()
@scenario_options
@click.option('-o', '--out-dir', type=click.Path(file_okay=False), default='.', show_default=True,
              help='Directory receiving certificate.json.')
@click.pass_context
def analyze(ctx: click.Context, scenario: typing.Optional[str], benchmark: typing.Optional[str], out_dir: str):
    """Certify the subset condition and compute the error bounds."""
    try:
        write_certificate(load_source(scenario, benchmark), Options(out_dir=out_dir), ctx.obj['verbose'])
    except EbseError as e:
        fail(e)


@ebsesim.command()
@click.argument('trace', type=click.Path(exists=True, dir_okay=False))
@scenario_options
@click.pass_context
def verify(ctx: click.Context, trace: str, scenario: typing.Optional[str], benchmark: typing.Optional[str]):
    """Replay the error norms of a trace CSV against the scenario bounds."""
    try:
        bounds, violations = api.verify(trace, load_source(scenario, benchmark))
    except EbseError as e:
        fail(e)

    if not violations:
        click.echo(f"{click.style('No bound violations', fg='green', bold=True)} in {trace}")
        return

    click.echo(f"{click.style(str(len(violations)), fg='red', bold=True)} "
               f"bound violation{'s' if len(violations) > 1 else ''} in {trace}")
    if ctx.obj['verbose']:
        for violation in violations[:20]:
            click.echo(f'  step {violation.step} agent {violation.agent}: '
                       f'{violation.value:.6g} > {violation.bound:.6g}')
    if not bounds.guaranteed:
        click.echo(click.style('Bounds do not cover packet loss or event-triggered inputs for this scenario',
                               fg='yellow'))
    sys.exit(EXIT_CHECKS_FAILED)


@ebsesim.command()
@run_options
@click.pass_context
def benchmark(ctx: click.Context, seed: typing.Optional[int], horizon: typing.Optional[int], out_dir: str,
              fmt: str, window: int):
    """Run the built-in thermo-fluid benchmark and certify it."""
    debug = ctx.obj['debug']
    options = Options(out_dir=out_dir, fmt=OutputFormat(fmt), seed=seed, horizon=horizon, window=window,
                      debug=debug)
    try:
        source = BUILTINS['thermo-fluid']()
        result = execute(source, options, debug)
        write_certificate(source, options, ctx.obj['verbose'])
    except EbseError as e:
        fail(e)

    if not result.checks.ok:
        sys.exit(EXIT_CHECKS_FAILED)


@ebsesim.command()
@scenario_options
@click.option('--scale', type=click.FloatRange(0, min_open=True), multiple=True, required=True,
              help='Threshold scale (can be used multiple times).')
@click.option('--seed', type=click.IntRange(0), help='Override the scenario seed.')
@click.option('-H', '--horizon', type=click.IntRange(1), help='Override the scenario horizon.')
def sweep(scenario: typing.Optional[str], benchmark: typing.Optional[str], scale: typing.Tuple[float, ...],
          seed: typing.Optional[int], horizon: typing.Optional[int]):
    """Trade communication against estimation error by scaling every measurement threshold."""
    try:
        rows = api.sweep(load_source(scenario, benchmark), scale, Options(seed=seed, horizon=horizon))
    except EbseError as e:
        fail(e)

    click.echo(f"{'scale':>8} {'rate':>8} {'rms error':>12} {'max |e|':>12}")
    for row in rows:
        click.echo(f'{row.scale:>8.4g} {row.sensor_rate:>8.4f} {row.rms_error:>12.6g} {row.max_error:>12.6g}')
