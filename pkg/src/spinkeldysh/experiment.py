#!/usr/bin/env python3
# experiment.py - Load and validate experiment config files.
"""
One experiment file describes one task. Files are YAML (``.yml``/``.yaml``)
or JSON (``.json``); see ``configs/`` for the bundled examples.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from .continuum import ObservableSpec
from .contour import ContourParams, Ordering
from .errors import ConfigParseError, ConfigValidationError, SpinKeldyshError
from .evaluator import DEFAULT_N_PHI, DEFAULT_N_THETA
from .lattice import HamiltonianSpec, spec_from_mapping, spec_to_mapping
from .oracle import DEFAULT_FD_STEP

TASKS = ("exact", "lattice-correlator", "continuum-table", "mc", "ztilde-check")
FORMATS = ("csv", "json")


@dataclass(frozen=True)
class ObservableRequest:
    """A two-point correlator evaluated at one or more times t (t' fixed)."""

    ordering: Ordering
    x: int
    i: int
    x_prime: int
    i_prime: int
    times: tuple[float, ...]
    t_prime: float = 0.0
    label: str = ""

    def at(self, t: float) -> ObservableSpec:
        return ObservableSpec(self.ordering, self.x, self.i, self.x_prime, self.i_prime, t, self.t_prime, self.label)

    @property
    def name(self) -> str:
        return self.at(self.times[0]).name


@dataclass(frozen=True)
class McSettings:
    n_samples: int = 20000
    n_therm: int = 2000
    proposal_width: float = 0.8
    chains: int = 1
    snapshot: str | None = None


@dataclass
class ExperimentConfig:
    task: str
    hamiltonian: HamiltonianSpec
    beta: float
    t_max: float
    ns: list[int]
    n_euclid: int | None = None
    n_theta: int = DEFAULT_N_THETA
    n_phi: int = DEFAULT_N_PHI
    check: bool = True
    observables: list[ObservableRequest] = field(default_factory=list)
    windows: list[tuple[int, ...]] = field(default_factory=list)
    mc: McSettings = field(default_factory=McSettings)
    fd_step: float = DEFAULT_FD_STEP
    output_path: str | None = None
    output_format: str = "csv"
    seed: int | None = None
    source: str = ""

    def contour(self, n: int | None = None) -> ContourParams:
        return ContourParams(self.beta, self.t_max, self.ns[0] if n is None else n, self.n_euclid)

    def resolved(self) -> dict:
        """Fully resolved config, embedded in every output file."""
        return {
            "task": self.task,
            "hamiltonian": spec_to_mapping(self.hamiltonian),
            "contour": {"beta": self.beta, "t_max": self.t_max, "n": list(self.ns), "n_euclid": self.n_euclid},
            "quadrature": {"n_theta": self.n_theta, "n_phi": self.n_phi, "check": self.check},
            "observables": [
                {
                    "ordering": o.ordering.value,
                    "x": o.x,
                    "i": o.i,
                    "x_prime": o.x_prime,
                    "i_prime": o.i_prime,
                    "t": list(o.times),
                    "t_prime": o.t_prime,
                    "label": o.label,
                }
                for o in self.observables
            ],
            "windows": [list(w) for w in self.windows],
            "mc": {
                "n_samples": self.mc.n_samples,
                "n_therm": self.mc.n_therm,
                "proposal_width": self.mc.proposal_width,
                "chains": self.mc.chains,
                "snapshot": self.mc.snapshot,
            },
            "fd_step": self.fd_step,
            "seed": self.seed,
        }


def read_config_file(path: Path) -> dict:
    """Parse a YAML or JSON experiment file into a mapping.

    Raises:
        ConfigParseError: The file is unreadable, malformed or not a mapping.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigParseError(f"Cannot read config {path}: {e}") from e
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigParseError(f"Cannot parse config {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigParseError(f"Config {path} must contain a mapping at the top level.")
    return data


def _require(data: Mapping, key: str, where: str) -> Any:
    if key not in data or data[key] is None:
        raise ConfigValidationError(f"Missing required field '{where}{key}'.")
    return data[key]


def _as_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigValidationError(f"'{name}' must be an integer, got {value!r}.")
    return int(value)


def _as_float(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigValidationError(f"'{name}' must be a number, got {value!r}.")
    return float(value)


def _times(entry: Mapping, k: int) -> tuple[float, ...]:
    if "t_grid" in entry:
        grid = entry["t_grid"]
        if not isinstance(grid, Mapping):
            raise ConfigValidationError(f"observables[{k}].t_grid must be a mapping.")
        start = _as_float(_require(grid, "start", f"observables[{k}].t_grid."), "start")
        stop = _as_float(_require(grid, "stop", f"observables[{k}].t_grid."), "stop")
        count = _as_int(_require(grid, "count", f"observables[{k}].t_grid."), "count")
        if count < 1 or stop < start:
            raise ConfigValidationError(f"observables[{k}].t_grid needs count >= 1 and stop >= start.")
        return tuple(float(t) for t in np.round(np.linspace(start, stop, count), 12))
    t = _require(entry, "t", f"observables[{k}].")
    values = t if isinstance(t, list) else [t]
    return tuple(_as_float(v, f"observables[{k}].t") for v in values)


def _observable(entry, k: int) -> ObservableRequest:
    if not isinstance(entry, Mapping):
        raise ConfigValidationError(f"observables[{k}] must be a mapping.")
    try:
        ordering = Ordering(entry.get("ordering", Ordering.UNORDERED.value))
    except ValueError as e:
        raise ConfigValidationError(
            f"observables[{k}].ordering must be one of {[o.value for o in Ordering]}."
        ) from e
    times = _times(entry, k)
    if len(times) > 1 and not all(b > a for a, b in zip(times, times[1:])):
        raise ConfigValidationError(f"observables[{k}] times must be strictly increasing.")
    return ObservableRequest(
        ordering,
        _as_int(entry.get("x", 0), "x"),
        _as_int(entry.get("i", 1), "i"),
        _as_int(entry.get("x_prime", 0), "x_prime"),
        _as_int(entry.get("i_prime", 1), "i_prime"),
        times,
        _as_float(entry.get("t_prime", 0.0), "t_prime"),
        str(entry.get("label", "")),
    )


def parse_experiment(data: Mapping, source: str = "") -> ExperimentConfig:
    """Validate a raw config mapping.

    Raises:
        ConfigValidationError: Missing or ill-typed fields, or task-specific requirements unmet.
        HamiltonianError: The Hamiltonian block is invalid.
    """
    task = _require(data, "task", "")
    if task not in TASKS:
        raise ConfigValidationError(f"Unknown task {task!r}; expected one of {list(TASKS)}.")

    hamiltonian = spec_from_mapping(_require(data, "hamiltonian", ""))

    contour = data.get("contour") or {}
    if not isinstance(contour, Mapping):
        raise ConfigValidationError("'contour' must be a mapping.")
    beta = _as_float(_require(contour, "beta", "contour."), "contour.beta")
    t_max = _as_float(contour.get("t_max", 1.0), "contour.t_max")
    raw_n = contour.get("n", 1)
    ns = [_as_int(n, "contour.n") for n in (raw_n if isinstance(raw_n, list) else [raw_n])]
    n_euclid = contour.get("n_euclid")
    n_euclid = None if n_euclid is None else _as_int(n_euclid, "contour.n_euclid")

    quadrature = data.get("quadrature") or {}
    observables = [_observable(o, k) for k, o in enumerate(data.get("observables") or [])]
    windows = [tuple(_as_int(n, "windows") for n in w) for w in data.get("windows") or []]

    mc_raw = data.get("mc") or {}
    mc = McSettings(
        n_samples=_as_int(mc_raw.get("n_samples", McSettings.n_samples), "mc.n_samples"),
        n_therm=_as_int(mc_raw.get("n_therm", McSettings.n_therm), "mc.n_therm"),
        proposal_width=_as_float(mc_raw.get("proposal_width", McSettings.proposal_width), "mc.proposal_width"),
        chains=_as_int(mc_raw.get("chains", McSettings.chains), "mc.chains"),
        snapshot=mc_raw.get("snapshot"),
    )

    output = data.get("output") or {}
    output_path = output.get("path")
    output_format = output.get("format") or (Path(output_path).suffix.lstrip(".") if output_path else "csv")
    if output_format not in FORMATS:
        raise ConfigValidationError(f"Output format must be one of {list(FORMATS)}, got {output_format!r}.")
    seed = data.get("seed")

    config = ExperimentConfig(
        task=task,
        hamiltonian=hamiltonian,
        beta=beta,
        t_max=t_max,
        ns=ns,
        n_euclid=n_euclid,
        n_theta=_as_int(quadrature.get("n_theta", DEFAULT_N_THETA), "quadrature.n_theta"),
        n_phi=_as_int(quadrature.get("n_phi", DEFAULT_N_PHI), "quadrature.n_phi"),
        check=bool(quadrature.get("check", True)),
        observables=observables,
        windows=windows,
        mc=mc,
        fd_step=_as_float(data.get("fd_step", DEFAULT_FD_STEP), "fd_step"),
        output_path=output_path,
        output_format=output_format,
        seed=None if seed is None else _as_int(seed, "seed"),
        source=source,
    )
    _check_task(config)
    return config


def _check_task(config: ExperimentConfig) -> None:
    for n in config.ns:
        config.contour(n)
    if config.task in ("exact", "lattice-correlator", "continuum-table", "mc") and not config.observables:
        raise ConfigValidationError(f"Task '{config.task}' needs at least one observable.")
    if config.task == "continuum-table":
        if not config.windows:
            raise ConfigValidationError("Task 'continuum-table' needs 'windows'.")
        if any(len(o.times) != 1 for o in config.observables):
            raise ConfigValidationError("continuum-table observables take a single fixed t.")
        for window in config.windows:
            if len(window) < 3 or any(b <= a for a, b in zip(window, window[1:])):
                raise ConfigValidationError(
                    f"Window {list(window)} needs at least three strictly increasing slice counts."
                )
    if config.task in ("lattice-correlator", "mc") and len(config.ns) != 1:
        raise ConfigValidationError(f"Task '{config.task}' takes a single contour.n.")
    if config.task == "mc" and config.mc.n_samples < 2:
        raise ConfigValidationError("mc.n_samples must be at least 2.")


def load_experiment(path, quadrature_defaults: Mapping | None = None) -> ExperimentConfig:
    """Read, parse and validate an experiment file.

    ``quadrature_defaults`` fills quadrature keys the file leaves out.

    Raises:
        ConfigParseError: The file cannot be read or parsed.
        ConfigValidationError: Any field is missing, ill-typed or out of range.
    """
    path = Path(path)
    data = read_config_file(path)
    try:
        if quadrature_defaults:
            data["quadrature"] = {**quadrature_defaults, **(data.get("quadrature") or {})}
        return parse_experiment(data, source=str(path))
    except SpinKeldyshError:
        raise
    except (TypeError, ValueError, AttributeError) as e:
        raise ConfigValidationError(f"Invalid config {path}: {e}") from e
