#!/usr/bin/env python3
import json
import logging
import os
import sys
import time
from pathlib import Path

import click

from . import __version__
from .config import quadrature_defaults, resolve_workers
from .errors import SpinKeldyshError, error_record
from .experiment import FORMATS, load_experiment
from .lattice import spec_hash
from .reporter import (
    print_step_result,
    print_step_start,
    print_summary_table,
    write_csv,
    write_json,
)
from .snapshots import read_header
from .tasks import run_task

# Module level logger; library modules log to children of it.
logger = logging.getLogger("spinkeldysh")


@click.group()
@click.version_option(version=__version__, prog_name='spinkeldysh')
def cli():
    """Real-time spin correlators from the discretized Schwinger-Keldysh path integral."""
    pass


def _configure_logging(log_level: str, log_file: str | None) -> None:
    level_value = getattr(logging, log_level.upper(), logging.INFO)
    logger.setLevel(level_value)
    logger.handlers.clear()
    stream_handler = logging.StreamHandler(sys.stdout)
    stream_handler.setFormatter(logging.Formatter('%(message)s'))
    logger.addHandler(stream_handler)
    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(logging.Formatter('%(message)s'))
        logger.addHandler(file_handler)
    logger.propagate = False


def _fail(ctx, exc: BaseException, code: int | None = None) -> None:
    record = error_record(exc)
    if code is not None:
        record["exit_code"] = code
    click.echo(click.style(f"Error: {exc}", fg="red"), err=True)
    click.echo(json.dumps(record, sort_keys=True), err=True)
    ctx.exit(record["exit_code"])


def _output_target(config, config_path: Path, output: str | None, fmt: str | None) -> tuple[Path, str]:
    path = output or config.output_path
    if fmt is None:
        suffix = Path(path).suffix.lstrip('.') if path else ""
        fmt = suffix if output and suffix in FORMATS else config.output_format
    if path is None:
        path = f"{config_path.stem}.{fmt}"
    return Path(path), fmt


@cli.command()
@click.pass_context
@click.argument('config_path', type=click.Path(dir_okay=False, path_type=Path))
@click.option('--output', '-o', type=click.Path(dir_okay=False), default=None,
              help='Result file. Defaults to the config\'s output.path, else <config-stem>.<format>.')
@click.option('--format', '-f', 'fmt', type=click.Choice(FORMATS), default=None,
              help='Result format. Defaults to the config\'s output.format.')
@click.option('--workers', '-w', type=int, default=None,
              help='Concurrent workers (N values, observables, MC chains). '
                   'Falls back to $SPINKELDYSH_WORKERS, then the user config, then 1.')
@click.option('--no-color', is_flag=True, help='Disable colored output.')
@click.option('--verbose', '-v', count=True, help='Print per-step progress. -vv also sets DEBUG logging.')
@click.option('--log-level', default='INFO', show_default=True, help='Logging level.')
@click.option('--log-file', type=click.Path(dir_okay=False, writable=True), default=None,
              help='Write logs to the specified file.')
def run(ctx, config_path, output, fmt, workers, no_color, verbose, log_level, log_file):
    """Run the experiment described by CONFIG_PATH and write its results."""
    if os.getenv('CI', '').lower() == 'true' or not sys.stdout.isatty():
        no_color = True
    color_enabled = not no_color
    _configure_logging('DEBUG' if verbose > 1 else log_level, log_file)

    try:
        config = load_experiment(config_path, quadrature_defaults())
        target, fmt = _output_target(config, config_path, output, fmt)
        n_workers = resolve_workers(workers)
        logger.info("Task %s from %s (%d worker(s))", config.task, config_path, n_workers)

        on_start = (lambda step: print_step_start(step, color_enabled=color_enabled)) if verbose else None
        on_done = (
            lambda rec: print_step_result(rec['id'], rec['status'], rec.get('duration'), color_enabled=color_enabled)
        ) if verbose else None

        started = time.perf_counter()
        result = run_task(config, n_workers, on_start, on_done)
        overall = time.perf_counter() - started

        resolved = config.resolved()
        digest = spec_hash(config.hamiltonian)
        if fmt == 'json':
            write_json(target, result.columns, result.rows, resolved, digest, result.diagnostics)
        else:
            write_csv(target, result.columns, result.rows, resolved, digest)

        print_summary_table(result.steps, overall, title=f"{config.task} summary", color_enabled=color_enabled)
        click.echo(click.style(f"Results written to {target}", fg='green'))
        if result.diagnostics.get('sign_collapse'):
            click.echo(click.style(
                "Warning: average sign indistinguishable from zero; MC estimates are flagged unreliable.",
                fg='yellow',
            ), err=True)
        ctx.exit(0)
    except click.exceptions.Exit:
        raise
    except SpinKeldyshError as e:
        _fail(ctx, e)
    except Exception as e:
        logger.debug("Unexpected error", exc_info=True)
        _fail(ctx, e, code=1)


@cli.command()
@click.pass_context
@click.argument('config_path', type=click.Path(dir_okay=False, path_type=Path))
def validate(ctx, config_path):
    """Check CONFIG_PATH without running it."""
    try:
        config = load_experiment(config_path, quadrature_defaults())
    except SpinKeldyshError as e:
        _fail(ctx, e)
        return
    click.echo(click.style(f"{config_path}: OK", fg='green'))
    click.echo(f"  Task: {config.task}")
    click.echo(f"  Sites: {config.hamiltonian.n_sites}, 2s = {config.hamiltonian.rep.two_s}, "
               f"terms: {len(config.hamiltonian.terms)}")
    click.echo(f"  Contour: beta={config.beta}, t_max={config.t_max}, N={config.ns}")
    click.echo(f"  Observables: {len(config.observables)}")
    click.echo(f"  Spec hash: {spec_hash(config.hamiltonian)}")


@cli.command()
def version():
    """Print the package version."""
    click.echo(f"spinkeldysh {__version__}")


@cli.command('show-snapshot')
@click.pass_context
@click.argument('snapshot_path', type=click.Path(dir_okay=False, path_type=Path))
def show_snapshot(ctx, snapshot_path):
    """Show the header of a persisted MC ensemble."""
    try:
        header, offset = read_header(snapshot_path)
    except SpinKeldyshError as e:
        _fail(ctx, e)
        return
    click.echo(click.style("Snapshot Contents:", bold=True))
    click.echo(f"  Spec hash: {header.spec_hash}")
    click.echo(f"  Contour: {json.dumps(header.contour, sort_keys=True)}")
    click.echo(f"  Seed: {header.seed}")
    click.echo(f"  Chains: {header.n_chains}, samples per chain: {header.n_samples}")
    click.echo(f"  Records: {header.n_records} (data starts at byte {offset})")


if __name__ == '__main__':
    try:
        cli()
    except KeyboardInterrupt:
        click.echo("\nProcess interrupted by user.")
        sys.exit(130)
