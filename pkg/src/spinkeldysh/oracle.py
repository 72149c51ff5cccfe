#!/usr/bin/env python3
# oracle.py - Exact Hilbert-space reference: spin operators, thermal correlators, Trotterized Z~.
"""
Ground truth for everything else in the package.

``exact_correlator`` evaluates tr(s_i(x,t) s_i'(x',t') e^{-beta H}) / tr(e^{-beta H})
with s(x,t) = e^{iHt} s(x) e^{-iHt} from one eigendecomposition of H.

``ztilde_trace`` builds the first-order contour product

    Z~(j) = tr( prod_t P~+(j+_t) prod_t P~-(j-_t) prod_t P~E(jE_t) )
    P~+ = 1 + i dt (H - sum j.s),  P~- = 1 - i dt (H - sum j.s),  P~E = 1 - dtau (H - sum j.s)

and ``fd_correlator`` differentiates it in two source values by a mixed
central difference.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import eigh

from .coherent import spin_rep_matrices
from .contour import ContourParams, Leg, Ordering, contour_trace, insertion_slices
from .errors import BadComponent, BadSiteIndex, DimensionMismatch, InvalidContour
from .lattice import COMPONENTS, HamiltonianSpec, SpinRep, validate

logger = logging.getLogger("spinkeldysh.oracle")

DEFAULT_FD_STEP = 0.5


@dataclass(frozen=True)
class SourceField:
    leg: Leg
    timeslice: int
    site: int
    component: int
    value: float


def spin_matrix(rep: SpinRep, n_sites: int, x: int, i: int) -> np.ndarray:
    """1 (x) ... (x) s_i (x) ... (x) 1 with s_i in slot x (site 0 leftmost)."""
    if not 0 <= x < n_sites:
        raise BadSiteIndex(f"Site {x} outside [0, {n_sites}).")
    if i not in COMPONENTS:
        raise BadComponent(f"Component {i} is not 1, 2 or 3.")
    single = spin_rep_matrices(rep)[i - 1]
    left = np.eye(rep.dim ** x, dtype=complex)
    right = np.eye(rep.dim ** (n_sites - x - 1), dtype=complex)
    return np.kron(np.kron(left, single), right)


def hamiltonian_matrix(spec: HamiltonianSpec) -> np.ndarray:
    """Dense H from the term list."""
    validate(spec)
    dim = spec.hilbert_dim
    h = np.zeros((dim, dim), dtype=complex)
    for term in spec.terms:
        op = np.eye(dim, dtype=complex) * term.coupling
        for site, comp in term.factors:
            op = op @ spin_matrix(spec.rep, spec.n_sites, site, comp)
        h += op
    return h


@lru_cache(maxsize=32)
def _eigensystem(spec: HamiltonianSpec) -> tuple[np.ndarray, np.ndarray]:
    energies, vectors = eigh(hamiltonian_matrix(spec))
    return energies, vectors


def thermal_trace(spec: HamiltonianSpec, beta: float) -> float:
    """tr(e^{-beta H})."""
    energies, _ = _eigensystem(spec)
    return float(np.sum(np.exp(-beta * energies)))


def exact_correlator_series(
    spec: HamiltonianSpec,
    beta: float,
    x: int,
    i: int,
    x_prime: int,
    i_prime: int,
    times: Sequence[float] | np.ndarray,
    t_prime: float | Sequence[float] | np.ndarray = 0.0,
) -> np.ndarray:
    """<s_i(x,t) s_i'(x',t')> for arrays of t (and t', broadcast)."""
    if not beta > 0:
        raise InvalidContour(f"beta must be positive, got {beta!r}.")
    energies, vectors = _eigensystem(spec)
    a = vectors.conj().T @ spin_matrix(spec.rep, spec.n_sites, x, i) @ vectors
    b = vectors.conj().T @ spin_matrix(spec.rep, spec.n_sites, x_prime, i_prime) @ vectors
    boltzmann = np.exp(-beta * (energies - energies.min()))
    weight = a * b.T
    tau = np.atleast_1d(np.asarray(times, dtype=float) - np.asarray(t_prime, dtype=float))
    phases = np.exp(1j * np.outer(tau, energies))
    values = np.einsum("km,mn,kn->k", boltzmann * phases, weight, phases.conj())
    return values / boltzmann.sum()


def exact_correlator(
    spec: HamiltonianSpec, beta: float, x: int, i: int, t: float, x_prime: int, i_prime: int, t_prime: float
) -> complex:
    """tr(s_i(x,t) s_i'(x',t') e^{-beta H}) / tr(e^{-beta H})."""
    return complex(exact_correlator_series(spec, beta, x, i, x_prime, i_prime, [t], t_prime)[0])


def _first_order_factor(h: np.ndarray, source: np.ndarray, leg: Leg, contour: ContourParams) -> np.ndarray:
    identity = np.eye(h.shape[0], dtype=complex)
    if leg is Leg.PLUS:
        return identity + 1j * contour.dt * (h - source)
    if leg is Leg.MINUS:
        return identity - 1j * contour.dt * (h - source)
    return identity - contour.dtau * (h - source)


def source_coefficient(leg: Leg, contour: ContourParams) -> complex:
    """d P~_leg / d j = coefficient * s."""
    if leg is Leg.PLUS:
        return -1j * contour.dt
    if leg is Leg.MINUS:
        return 1j * contour.dt
    return contour.dtau


def ztilde_trace(spec: HamiltonianSpec, contour: ContourParams, sources: Iterable[SourceField] = ()) -> complex:
    """Trace of the ordered product of 3N first-order slice matrices with sources inserted."""
    h = hamiltonian_matrix(spec)
    zero = np.zeros_like(h)
    grouped: dict[Leg, dict[int, np.ndarray]] = defaultdict(dict)
    for src in sources:
        leg = Leg(src.leg)
        if not 1 <= src.timeslice <= contour.slices(leg):
            raise DimensionMismatch(
                f"Source timeslice {src.timeslice} outside 1..{contour.slices(leg)} on leg {leg.value}."
            )
        op = src.value * spin_matrix(spec.rep, spec.n_sites, src.site, src.component)
        grouped[leg][src.timeslice] = grouped[leg].get(src.timeslice, zero) + op
    factors = {leg: _first_order_factor(h, zero, leg, contour) for leg in Leg}
    overrides = {
        leg: {k: _first_order_factor(h, j, leg, contour) for k, j in slices.items()}
        for leg, slices in grouped.items()
    }
    return contour_trace(factors, contour, overrides)


def fd_correlator(
    spec: HamiltonianSpec,
    contour: ContourParams,
    ordering: Ordering,
    t_index: int,
    t_index_prime: int,
    x: int,
    i: int,
    x_prime: int,
    i_prime: int,
    step: float = DEFAULT_FD_STEP,
) -> complex:
    """Second source derivative of Z~ by a mixed central difference, normalized to a correlator.

    Each slice factor is affine in its own source, so the difference quotient
    has no truncation bias; ``step`` only trades off round-off.
    """
    (leg_a, slice_a), (leg_b, slice_b) = insertion_slices(ordering, t_index, t_index_prime, contour.n)

    def z(sign_a: float, sign_b: float) -> complex:
        return ztilde_trace(spec, contour, [
            SourceField(leg_a, slice_a, x, i, sign_a * step),
            SourceField(leg_b, slice_b, x_prime, i_prime, sign_b * step),
        ])

    mixed = (z(1, 1) - z(1, -1) - z(-1, 1) + z(-1, -1)) / (4 * step * step)
    norm = source_coefficient(leg_a, contour) * source_coefficient(leg_b, contour) * ztilde_trace(spec, contour)
    value = complex(mixed / norm)
    logger.debug("fd_correlator %s N=%d (%d,%d) -> %s", Ordering(ordering).value, contour.n, t_index, t_index_prime, value)
    return value
