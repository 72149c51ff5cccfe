#!/usr/bin/env python3
# coherent.py - Spin coherent states, overlaps and product-sphere quadrature.
"""
Coherent states are generated exactly as

    |Omega_x> = exp(i theta (s1 sin phi - s2 cos phi)) |s, s>

with the (2s+1)-dimensional representation matrices built from ladder
operators (basis ordered m = s, s-1, ..., -s). The closed-form overlap is a
consequence of this convention and is tested against it, not assumed.

Quadrature uses Gauss-Legendre nodes in cos(theta) and the trapezoid rule in
phi, with weights carrying the (2s+1)/(4 pi) measure factor so that one sphere
integrates the constant function to 2s+1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy.linalg import expm

from .errors import DimensionMismatch, InvalidBlochPoint, TooFewNodes
from .lattice import SpinRep

logger = logging.getLogger("spinkeldysh.coherent")

TWO_PI = 2.0 * np.pi

# Upper bound on block_nodes * dim**2 complex entries held at once by quad_operator.
_BLOCK_BUDGET = 2 ** 21


@dataclass(frozen=True)
class BlochPoint:
    theta: float
    phi: float

    def __post_init__(self):
        if not (0.0 <= self.theta <= np.pi):
            raise InvalidBlochPoint(f"theta={self.theta!r} outside [0, pi].")
        if not (0.0 <= self.phi < TWO_PI):
            raise InvalidBlochPoint(f"phi={self.phi!r} outside [0, 2 pi).")

    def cartesian(self) -> np.ndarray:
        st = np.sin(self.theta)
        return np.array([st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)])


@dataclass(frozen=True)
class SphereConfig:
    """One Bloch point per lattice site (a single timeslice of the field)."""

    points: tuple[BlochPoint, ...]

    @classmethod
    def from_angles(cls, theta: Sequence[float], phi: Sequence[float]) -> "SphereConfig":
        if len(theta) != len(phi):
            raise DimensionMismatch("theta and phi must have equal length.")
        return cls(tuple(BlochPoint(float(t), float(p)) for t, p in zip(theta, phi)))

    @property
    def theta(self) -> np.ndarray:
        return np.array([p.theta for p in self.points])

    @property
    def phi(self) -> np.ndarray:
        return np.array([p.phi for p in self.points])

    def cartesian(self) -> np.ndarray:
        return np.array([p.cartesian() for p in self.points])

    def __len__(self) -> int:
        return len(self.points)


@lru_cache(maxsize=None)
def _spin_matrices(two_s: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    s = two_s / 2
    m = s - np.arange(two_s + 1)
    s3 = np.diag(m).astype(complex)
    s_plus = np.zeros((two_s + 1, two_s + 1), dtype=complex)
    for k in range(1, two_s + 1):
        s_plus[k - 1, k] = np.sqrt(s * (s + 1) - m[k] * (m[k] + 1))
    s_minus = s_plus.T.copy()
    s1 = (s_plus + s_minus) / 2
    s2 = (s_plus - s_minus) / 2j
    for mat in (s1, s2, s3):
        mat.setflags(write=False)
    return s1, s2, s3


def spin_rep_matrices(rep: SpinRep) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(s1, s2, s3) in the spin-s representation; read-only arrays."""
    return _spin_matrices(rep.two_s)


def site_coherent_state(theta: float, phi: float, rep: SpinRep) -> np.ndarray:
    s1, s2, _ = spin_rep_matrices(rep)
    generator = 1j * theta * (s1 * np.sin(phi) - s2 * np.cos(phi))
    highest = np.zeros(rep.dim, dtype=complex)
    highest[0] = 1.0
    return expm(generator) @ highest


def coherent_state(config: SphereConfig, rep: SpinRep) -> np.ndarray:
    """Tensor product of single-site coherent states, site 0 most significant."""
    state = np.ones(1, dtype=complex)
    for p in config.points:
        state = np.kron(state, site_coherent_state(p.theta, p.phi, rep))
    return state


def overlap_factors(theta_bra, phi_bra, theta_ket, phi_ket) -> np.ndarray:
    """Per-site spin-1/2 overlap factors; raise to 2s and multiply over sites for <Omega'|Omega>."""
    return (
        np.cos(theta_bra / 2) * np.cos(theta_ket / 2)
        + np.exp(-1j * (phi_bra - phi_ket)) * np.sin(theta_bra / 2) * np.sin(theta_ket / 2)
    )


def overlap(bra: SphereConfig, ket: SphereConfig, rep: SpinRep) -> complex:
    """<bra|ket> from the closed form."""
    if len(bra) != len(ket):
        raise DimensionMismatch(f"Overlap of configurations with {len(bra)} and {len(ket)} sites.")
    factors = overlap_factors(bra.theta, bra.phi, ket.theta, ket.phi)
    return complex(np.prod(factors ** rep.two_s))


@dataclass(frozen=True)
class QuadratureGrid:
    """Tensor-product grid over ``n_sites`` identical spheres.

    Per-sphere nodes are stored once; product nodes are generated in blocks.
    """

    rep: SpinRep
    n_sites: int
    n_theta: int
    n_phi: int
    theta: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    states: np.ndarray = field(repr=False)

    @property
    def nodes_per_sphere(self) -> int:
        return self.theta.size

    @property
    def n_nodes(self) -> int:
        return self.nodes_per_sphere ** self.n_sites

    @property
    def hilbert_dim(self) -> int:
        return self.rep.dim ** self.n_sites

    @property
    def nodes(self) -> list[list[tuple[BlochPoint, float]]]:
        per_sphere = [
            (BlochPoint(float(t), float(p)), float(w))
            for t, p, w in zip(self.theta, self.phi, self.weights)
        ]
        return [per_sphere for _ in range(self.n_sites)]

    def cartesian(self) -> np.ndarray:
        st = np.sin(self.theta)
        return np.stack([st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)], axis=-1)

    def blocks(self, block_size: int | None = None) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
        """Yield ``(omega[B, V, 3], weights[B], states[B, D])`` over all product nodes."""
        if block_size is None:
            block_size = max(1024, _BLOCK_BUDGET // self.hilbert_dim ** 2)
        site_cart = self.cartesian()
        shape = (self.nodes_per_sphere,) * self.n_sites
        for start in range(0, self.n_nodes, block_size):
            idx = np.arange(start, min(start + block_size, self.n_nodes))
            digits = np.unravel_index(idx, shape)
            omega = np.stack([site_cart[d] for d in digits], axis=1)
            weights = np.ones(idx.size)
            psi = np.ones((idx.size, 1), dtype=complex)
            for d in digits:
                weights = weights * self.weights[d]
                psi = (psi[:, :, None] * self.states[d][:, None, :]).reshape(idx.size, -1)
            yield omega, weights, psi


def build_grid(rep: SpinRep, n_sites: int, n_theta: int, n_phi: int) -> QuadratureGrid:
    """Gauss-Legendre (cos theta) x trapezoid (phi) grid on each of ``n_sites`` spheres."""
    if n_theta < 2 or n_phi < 2:
        raise TooFewNodes(f"Need n_theta >= 2 and n_phi >= 2, got ({n_theta}, {n_phi}).")
    x, w_x = np.polynomial.legendre.leggauss(n_theta)
    phis = TWO_PI * np.arange(n_phi) / n_phi
    theta = np.repeat(np.arccos(x), n_phi)
    phi = np.tile(phis, n_theta)
    weights = np.repeat(w_x, n_phi) * (TWO_PI / n_phi) * rep.dim / (4.0 * np.pi)
    states = np.array([site_coherent_state(t, p, rep) for t, p in zip(theta, phi)])
    for arr in (theta, phi, weights, states):
        arr.setflags(write=False)
    logger.debug("Built %dx%d sphere grid for 2s=%d on %d sites", n_theta, n_phi, rep.two_s, n_sites)
    return QuadratureGrid(rep, n_sites, n_theta, n_phi, theta, phi, weights, states)


def quad_operator(grid: QuadratureGrid, f: Callable[[np.ndarray], np.ndarray] | None = None) -> np.ndarray:
    """Sum over nodes of weight * f(Omega) * |Omega><Omega| as a dense matrix.

    Args:
        grid: Quadrature grid built for the target representation and site count.
        f: Vectorized symbol; receives cartesian points of shape ``(B, V, 3)``
            and returns ``B`` values (or a scalar). ``None`` means f = 1.

    Returns:
        Complex ``(D, D)`` matrix. Blocks are reduced with numpy's pairwise
        summation and combined in a fixed order, so the result does not depend
        on thread counts.
    """
    dim = grid.hilbert_dim
    total = np.zeros((dim, dim), dtype=complex)
    for omega, weights, psi in grid.blocks():
        if f is None:
            wf = weights.astype(complex)
        else:
            values = np.asarray(f(omega), dtype=complex)
            wf = weights * np.broadcast_to(values, weights.shape)
        terms = np.einsum("m,ma,mb->abm", wf, psi, psi.conj())
        total += np.ascontiguousarray(terms).sum(axis=-1)
    return total
