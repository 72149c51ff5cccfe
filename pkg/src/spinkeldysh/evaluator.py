#!/usr/bin/env python3
# evaluator.py - Coherent-state propagators and lattice correlators by matrix trace products.
"""
Each timeslice of the discretized contour contributes one quadrature matrix

    P+ = int dOmega e^{+i dt h(Omega)} |Omega><Omega|
    P- = int dOmega e^{-i dt h(Omega)} |Omega><Omega|
    PE = int dOmega e^{-dtau h(Omega)} |Omega><Omega|

and a spin insertion at a slice replaces that slice's factor by the same
integral with an extra Omega_{x,i}. Traces of the ordered products give the
lattice partition function and two-point correlators without sampling.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .coherent import QuadratureGrid, build_grid, quad_operator
from .contour import ContourParams, Leg, Ordering, contour_trace, insertion_slices
from .errors import BadComponent, BadSiteIndex, DimensionMismatch, QuadratureConvergenceError
from .lattice import COMPONENTS, HamiltonianSpec, SpinRep, h_eval_batch, validate

logger = logging.getLogger("spinkeldysh.evaluator")

DEFAULT_N_THETA = 12
DEFAULT_N_PHI = 24
DOUBLING_TOLERANCE = 1e-10


@dataclass(frozen=True)
class PropagatorSet:
    p_plus: np.ndarray
    p_minus: np.ndarray
    p_euclid: np.ndarray
    contour: ContourParams
    rep: SpinRep
    grid_meta: dict = field(default_factory=dict)

    def factors(self) -> dict[Leg, np.ndarray]:
        return {Leg.PLUS: self.p_plus, Leg.MINUS: self.p_minus, Leg.EUCLID: self.p_euclid}


@dataclass(frozen=True)
class InsertionMatrix:
    leg: Leg
    site: int
    component: int
    matrix: np.ndarray


@dataclass(frozen=True)
class CorrelatorSeries:
    """Complex correlator values on a real-time grid.

    ``provenance`` records where the numbers came from, e.g.
    ``{"source": "lattice", "n": 5000, "n_theta": 12, "n_phi": 24}``,
    ``{"source": "exact"}`` or ``{"source": "mc", "stderr": [...]}``.
    """

    ordering: Ordering
    times: np.ndarray
    values: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=complex)
        if times.shape != values.shape or times.ndim != 1:
            raise DimensionMismatch(f"{times.shape[0] if times.ndim else 0} times for {values.size} values.")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise DimensionMismatch("Correlator times must be strictly increasing.")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ordering", Ordering(self.ordering))


def _leg_symbol(spec: HamiltonianSpec, leg: Leg, contour: ContourParams):
    leg = Leg(leg)
    if leg is Leg.PLUS:
        return lambda omega: np.exp(1j * contour.dt * h_eval_batch(spec, omega))
    if leg is Leg.MINUS:
        return lambda omega: np.exp(-1j * contour.dt * h_eval_batch(spec, omega))
    return lambda omega: np.exp(-contour.dtau * h_eval_batch(spec, omega))


def _check_grid(spec: HamiltonianSpec, grid: QuadratureGrid) -> None:
    if grid.rep != spec.rep or grid.n_sites != spec.n_sites:
        raise DimensionMismatch(
            f"Grid built for 2s={grid.rep.two_s}, V={grid.n_sites}; "
            f"Hamiltonian has 2s={spec.rep.two_s}, V={spec.n_sites}."
        )


def _propagator_matrices(spec, contour, grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return tuple(quad_operator(grid, _leg_symbol(spec, leg, contour)) for leg in Leg)


def build_propagators(
    spec: HamiltonianSpec,
    contour: ContourParams,
    grid: QuadratureGrid,
    check: bool = True,
    tolerance: float = DOUBLING_TOLERANCE,
) -> PropagatorSet:
    """Quadrature propagators for the three legs.

    With ``check`` the build is repeated on a grid with doubled node counts
    and the largest entrywise change is compared against ``tolerance``.

    Raises:
        QuadratureConvergenceError: The doubled grid moved some entry by more
            than ``tolerance``.
    """
    validate(spec)
    _check_grid(spec, grid)
    p_plus, p_minus, p_euclid = _propagator_matrices(spec, contour, grid)
    meta = {"n_theta": grid.n_theta, "n_phi": grid.n_phi}
    if check:
        fine = build_grid(spec.rep, spec.n_sites, 2 * grid.n_theta, 2 * grid.n_phi)
        deviation = max(
            float(np.max(np.abs(a - b)))
            for a, b in zip((p_plus, p_minus, p_euclid), _propagator_matrices(spec, contour, fine))
        )
        meta["doubling_deviation"] = deviation
        logger.debug("Quadrature doubling deviation %.3e at N=%d", deviation, contour.n)
        if deviation > tolerance:
            raise QuadratureConvergenceError(
                f"Doubling the ({grid.n_theta}, {grid.n_phi}) grid changed the propagators by "
                f"{deviation:.3e} > {tolerance:.1e}; use more nodes or a finer contour."
            )
    return PropagatorSet(p_plus, p_minus, p_euclid, contour, spec.rep, meta)


def build_insertion(
    spec: HamiltonianSpec, contour: ContourParams, grid: QuadratureGrid, leg: Leg, x: int, i: int
) -> InsertionMatrix:
    """Slice factor for ``leg`` with Omega_{x,i} inserted (no (s+1) factor)."""
    validate(spec)
    _check_grid(spec, grid)
    if not 0 <= x < spec.n_sites:
        raise BadSiteIndex(f"Site {x} outside [0, {spec.n_sites}).")
    if i not in COMPONENTS:
        raise BadComponent(f"Component {i} is not 1, 2 or 3.")
    symbol = _leg_symbol(spec, leg, contour)
    matrix = quad_operator(grid, lambda omega: symbol(omega) * omega[:, x, i - 1])
    return InsertionMatrix(Leg(leg), x, i, matrix)


def partition_trace(props: PropagatorSet) -> complex:
    """tr(P+^N P-^N PE^N)."""
    return contour_trace(props.factors(), props.contour)


def _insertion_lookup(insertions) -> dict[tuple[Leg, int, int], InsertionMatrix]:
    if isinstance(insertions, Mapping):
        insertions = insertions.values()
    return {(ins.leg, ins.site, ins.component): ins for ins in insertions}


def lattice_correlator(
    props: PropagatorSet,
    insertions: Iterable[InsertionMatrix] | Mapping,
    ordering: Ordering,
    t_index: int,
    t_index_prime: int,
    x: int,
    i: int,
    x_prime: int,
    i_prime: int,
    z: complex | None = None,
) -> complex:
    """(s+1)^2 tr(contour product with two slices replaced) / partition_trace.

    The spin s is the one the propagators were built for; ``z`` may carry a
    precomputed partition trace.

    Raises:
        InvalidOrderingDomain: The index pair is outside the ordering's domain.
        KeyError: No insertion matrix was supplied for a required (leg, site, component).
    """
    lookup = _insertion_lookup(insertions)
    contour = props.contour
    (leg_a, slice_a), (leg_b, slice_b) = insertion_slices(ordering, t_index, t_index_prime, contour.n)
    try:
        ins_a = lookup[(leg_a, x, i)]
        ins_b = lookup[(leg_b, x_prime, i_prime)]
    except KeyError as e:
        raise KeyError(f"No insertion matrix for (leg, site, component) = {e.args[0]}.") from e
    overrides: dict[Leg, dict[int, np.ndarray]] = {leg_a: {slice_a: ins_a.matrix}}
    overrides.setdefault(leg_b, {})[slice_b] = ins_b.matrix
    scale = props.rep.s + 1
    if z is None:
        z = partition_trace(props)
    return scale * scale * contour_trace(props.factors(), contour, overrides) / z


class LatticeEvaluator:
    """Propagators for one (Hamiltonian, contour, grid) plus lazily built insertions."""

    def __init__(
        self,
        spec: HamiltonianSpec,
        contour: ContourParams,
        grid: QuadratureGrid | None = None,
        check: bool = True,
    ):
        self.spec = spec
        self.contour = contour
        self.grid = grid or build_grid(spec.rep, spec.n_sites, DEFAULT_N_THETA, DEFAULT_N_PHI)
        self.props = build_propagators(spec, contour, self.grid, check=check)
        self._insertions: dict[tuple[Leg, int, int], InsertionMatrix] = {}
        self._z: complex | None = None

    @property
    def z(self) -> complex:
        if self._z is None:
            self._z = partition_trace(self.props)
        return self._z

    def insertion(self, leg: Leg, x: int, i: int) -> InsertionMatrix:
        key = (Leg(leg), x, i)
        if key not in self._insertions:
            self._insertions[key] = build_insertion(self.spec, self.contour, self.grid, key[0], x, i)
        return self._insertions[key]

    def correlator(
        self, ordering: Ordering, t_index: int, t_index_prime: int, x: int, i: int, x_prime: int, i_prime: int
    ) -> complex:
        (leg_a, _), (leg_b, _) = insertion_slices(ordering, t_index, t_index_prime, self.contour.n)
        insertions = [self.insertion(leg_a, x, i), self.insertion(leg_b, x_prime, i_prime)]
        return lattice_correlator(
            self.props, insertions, ordering, t_index, t_index_prime, x, i, x_prime, i_prime,
            z=self.z,
        )

    def correlator_at(self, ordering: Ordering, t: float, t_prime: float, x, i, x_prime, i_prime) -> complex:
        """Correlator at physical times; both must sit on the slice grid."""
        return self.correlator(
            ordering, self.contour.time_index(t), self.contour.time_index(t_prime), x, i, x_prime, i_prime
        )

    def series(
        self, ordering: Ordering, times: Sequence[float], t_prime: float, x: int, i: int, x_prime: int, i_prime: int
    ) -> CorrelatorSeries:
        values = [self.correlator_at(ordering, t, t_prime, x, i, x_prime, i_prime) for t in times]
        provenance = {"source": "lattice", "n": self.contour.n, **self.props.grid_meta}
        return CorrelatorSeries(Ordering(ordering), np.asarray(times, dtype=float), np.asarray(values), provenance)


def lattice_correlator_series(
    spec: HamiltonianSpec,
    contour: ContourParams,
    ordering: Ordering,
    times: Sequence[float],
    t_prime: float,
    x: int,
    i: int,
    x_prime: int,
    i_prime: int,
    grid: QuadratureGrid | None = None,
    check: bool = True,
) -> CorrelatorSeries:
    return LatticeEvaluator(spec, contour, grid, check).series(ordering, times, t_prime, x, i, x_prime, i_prime)
