#!/usr/bin/env python3
# tasks.py - Task runners behind `spinkeldysh run`.
"""
Each runner takes a validated ExperimentConfig and returns a TaskResult: a
table (columns + rows) for the output file, a diagnostics mapping for the JSON
output, and per-step records for the console summary. Nothing here depends on
wall-clock time except the step durations, which never reach the output files.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .continuum import error_table, loglog_slope
from .errors import SpinKeldyshError
from .evaluator import LatticeEvaluator
from .coherent import build_grid
from .experiment import ExperimentConfig, ObservableRequest
from .oracle import exact_correlator_series, fd_correlator, thermal_trace, ztilde_trace
from .sampler import correlator_observable, metropolis_run

logger = logging.getLogger("spinkeldysh.tasks")

StepCallback = Callable[[str], None]
DoneCallback = Callable[[dict], None]


@dataclass
class TaskResult:
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    steps: list[dict] = field(default_factory=list)


class _Steps:
    """Collects per-step status records and forwards them to console callbacks."""

    def __init__(self, on_start: StepCallback | None, on_done: DoneCallback | None):
        self.records: list[dict] = []
        self._on_start = on_start
        self._on_done = on_done

    def run(self, step_id: str, fn: Callable, *args, **kwargs):
        if self._on_start:
            self._on_start(step_id)
        started = time.perf_counter()
        record = {"id": step_id, "status": "passed"}
        try:
            value = fn(*args, **kwargs)
        except SpinKeldyshError:
            record["status"] = "failed"
            raise
        finally:
            record["duration"] = time.perf_counter() - started
            self.records.append(record)
            if self._on_done:
                self._on_done(record)
        return value

    def flag(self, status: str) -> None:
        self.records[-1]["status"] = status


def _exact_values(config: ExperimentConfig, obs: ObservableRequest) -> np.ndarray:
    return exact_correlator_series(
        config.hamiltonian, config.beta, obs.x, obs.i, obs.x_prime, obs.i_prime, obs.times, obs.t_prime
    )


def run_exact(config: ExperimentConfig, workers: int, steps: _Steps) -> TaskResult:
    result = TaskResult(["observable", "t", "t_prime", "re_exact", "im_exact"])
    for obs in config.observables:
        values = steps.run(obs.name, _exact_values, config, obs)
        for t, v in zip(obs.times, values):
            result.rows.append([obs.name, t, obs.t_prime, v.real, v.imag])
    return result


def run_lattice_correlator(config: ExperimentConfig, workers: int, steps: _Steps) -> TaskResult:
    result = TaskResult(["observable", "t", "re_lattice", "im_lattice", "re_exact", "im_exact"])
    grid = build_grid(config.hamiltonian.rep, config.hamiltonian.n_sites, config.n_theta, config.n_phi)
    evaluator = steps.run(
        f"propagators N={config.ns[0]}", LatticeEvaluator, config.hamiltonian, config.contour(), grid, config.check
    )
    result.diagnostics["propagators"] = dict(evaluator.props.grid_meta)
    z = evaluator.z
    result.diagnostics["partition_trace"] = [z.real, z.imag]

    def curve(obs: ObservableRequest):
        return evaluator.series(obs.ordering, obs.times, obs.t_prime, obs.x, obs.i, obs.x_prime, obs.i_prime)

    deviations = {}
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        futures = [executor.submit(curve, obs) for obs in config.observables]
        for obs, fut in zip(config.observables, futures):
            series = steps.run(obs.name, fut.result)
            exact = _exact_values(config, obs)
            deviations[obs.name] = float(np.max(np.abs(series.values - exact)))
            for t, lat, ex in zip(series.times, series.values, exact):
                result.rows.append([obs.name, float(t), lat.real, lat.imag, ex.real, ex.imag])
    result.diagnostics["max_abs_deviation"] = deviations
    return result


def run_continuum_table(config: ExperimentConfig, workers: int, steps: _Steps) -> TaskResult:
    observables = [obs.at(obs.times[0]) for obs in config.observables]
    contour = config.contour(min(n for w in config.windows for n in w))
    table = steps.run(
        "continuum sweep", error_table, config.hamiltonian, contour, config.windows, observables,
        config.n_theta, config.n_phi, workers, config.check,
    )
    result = TaskResult(table.columns(), table.rows())
    result.diagnostics["exact"] = {o.name: [v.real, v.imag] for o, v in zip(observables, table.exact)}
    result.diagnostics["lattice"] = {
        str(n): [[v.real, v.imag] for v in values] for n, values in sorted(table.lattice.items())
    }
    ratios = table.reference_ratios()
    if ratios:
        result.diagnostics["reference_ratios"] = ratios
    return result


def run_mc(config: ExperimentConfig, workers: int, steps: _Steps) -> TaskResult:
    result = TaskResult([
        "observable", "t", "re_mc", "im_mc", "re_stderr", "im_stderr", "re_lattice", "im_lattice",
        "abs_avg_sign", "sign_collapse",
    ])
    contour = config.contour()
    spec = config.hamiltonian
    grid = build_grid(spec.rep, spec.n_sites, config.n_theta, config.n_phi)
    evaluator = steps.run(f"propagators N={contour.n}", LatticeEvaluator, spec, contour, grid, config.check)
    estimates = {}
    for obs in config.observables:
        for t in obs.times:
            t_index, t_index_prime = contour.time_index(t), contour.time_index(obs.t_prime)
            observable = correlator_observable(
                obs.ordering, t_index, t_index_prime, obs.x, obs.i, obs.x_prime, obs.i_prime, contour.n, spec.rep.s
            )
            snapshot = config.mc.snapshot if len(config.observables) == 1 and len(obs.times) == 1 else None
            est = steps.run(
                f"{obs.name} t={t:g}", metropolis_run, spec, contour, config.mc.proposal_width,
                config.mc.n_samples, config.mc.n_therm, config.seed, observable,
                config.mc.chains, workers, snapshot,
            )
            if est.sign_collapse:
                steps.flag("flagged")
            lattice = evaluator.correlator(
                obs.ordering, t_index, t_index_prime, obs.x, obs.i, obs.x_prime, obs.i_prime
            )
            estimates[f"{obs.name}@{t:g}"] = est.as_dict()
            result.rows.append([
                obs.name, t, est.mean.real, est.mean.imag, est.stderr.real, est.stderr.imag,
                lattice.real, lattice.imag, abs(est.avg_sign), est.sign_collapse,
            ])
    result.diagnostics["mc"] = estimates
    result.diagnostics["sign_collapse"] = any(e["sign_collapse"] for e in estimates.values())
    return result


def run_ztilde_check(config: ExperimentConfig, workers: int, steps: _Steps) -> TaskResult:
    result = TaskResult(["n", "quantity", "re", "im", "re_exact", "im_exact"])
    spec = config.hamiltonian
    trace = thermal_trace(spec, config.beta)
    ratio_deviation = []
    fd_deviation: dict[str, list[float]] = {}
    for n in config.ns:
        contour = config.contour(n)
        ratio = steps.run(f"Z~ N={n}", ztilde_trace, spec, contour) / trace
        ratio_deviation.append(abs(ratio - 1.0))
        result.rows.append([n, "ztilde/trace", ratio.real, ratio.imag, 1.0, 0.0])
        for obs in config.observables:
            t = obs.times[0]
            value = steps.run(
                f"fd {obs.name} N={n}", fd_correlator, spec, contour, obs.ordering,
                contour.time_index(t), contour.time_index(obs.t_prime),
                obs.x, obs.i, obs.x_prime, obs.i_prime, config.fd_step,
            )
            exact = _exact_values(config, obs)[0]
            fd_deviation.setdefault(obs.name, []).append(abs(value - exact))
            result.rows.append([n, obs.name, value.real, value.imag, exact.real, exact.imag])
    result.diagnostics["ztilde_deviation"] = ratio_deviation
    result.diagnostics["fd_deviation"] = fd_deviation
    if len(config.ns) >= 2:
        result.diagnostics["ztilde_loglog_slope"] = loglog_slope(config.ns, ratio_deviation)
        result.diagnostics["fd_loglog_slope"] = {
            name: loglog_slope(config.ns, devs) for name, devs in fd_deviation.items()
        }
    return result


TASK_RUNNERS: dict[str, Callable[[ExperimentConfig, int, _Steps], TaskResult]] = {
    "exact": run_exact,
    "lattice-correlator": run_lattice_correlator,
    "continuum-table": run_continuum_table,
    "mc": run_mc,
    "ztilde-check": run_ztilde_check,
}


def run_task(
    config: ExperimentConfig,
    workers: int = 1,
    on_step_start: StepCallback | None = None,
    on_step_done: DoneCallback | None = None,
) -> TaskResult:
    """Dispatch ``config.task`` and return its table, diagnostics and step records."""
    steps = _Steps(on_step_start, on_step_done)
    logger.debug("Running task %s with %d worker(s)", config.task, workers)
    result = TASK_RUNNERS[config.task](config, workers, steps)
    result.steps = steps.records
    return result
