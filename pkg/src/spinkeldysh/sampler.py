#!/usr/bin/env python3
# sampler.py - Phase-reweighted Metropolis sampling of the Schwinger-Keldysh path integral.
"""
A path holds one Bloch point per (leg, timeslice, site). Its complex weight is

    exp( i dt sum h(Omega+) - i dt sum h(Omega-) - dtau sum h(OmegaE) )
      * prod_k <Omega_k | Omega_{k+1}>

with the overlap chain running +1..+N, -1..-N, E1..EN and closing back onto +1.
Chains sample |weight| with single-site, single-slice moves drawn uniformly
from a geodesic cap; observables are reweighted by the phase,

    <O> = <O e^{i arg w}> / <e^{i arg w}>

and errors come from a jackknife over bins whose size is grown until the
error estimate stops moving.
"""

from __future__ import annotations

import cmath
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from numba import njit

from .coherent import TWO_PI, QuadratureGrid, overlap_factors
from .contour import ContourParams, Leg, Ordering, insertion_slices
from .errors import ConfigValidationError, DimensionMismatch, InvalidBlochPoint, InvalidContour, ZeroOverlap
from .lattice import HamiltonianSpec, compile_terms, h_eval_batch, validate
from .snapshots import SnapshotHeader, write_snapshot

logger = logging.getLogger("spinkeldysh.sampler")

ZERO_OVERLAP_TOL = 1e-12
FEASIBLE_SPHERES = 200
MIN_BINS = 16
PLATEAU_TOL = 0.05


@dataclass(frozen=True)
class PathConfig:
    """Angles of shape ``(3, N, V)``; axis 0 is the leg in +, -, E order, slices 0-based."""

    theta: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=np.float64)
        phi = np.asarray(self.phi, dtype=np.float64)
        if theta.shape != phi.shape or theta.ndim != 3 or theta.shape[0] != 3:
            raise DimensionMismatch(f"Path angles must have shape (3, N, V), got {theta.shape} and {phi.shape}.")
        if np.any((theta < 0) | (theta > np.pi)):
            raise InvalidBlochPoint("Path has theta outside [0, pi].")
        if np.any((phi < 0) | (phi >= TWO_PI)):
            raise InvalidBlochPoint("Path has phi outside [0, 2 pi).")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)

    @classmethod
    def constant(cls, n: int, n_sites: int, theta: float = 0.0, phi: float = 0.0) -> "PathConfig":
        return cls(np.full((3, n, n_sites), theta), np.full((3, n, n_sites), phi))

    @classmethod
    def random(cls, n: int, n_sites: int, rng: np.random.Generator) -> "PathConfig":
        """Independent uniform points on the sphere."""
        shape = (3, n, n_sites)
        return cls(np.arccos(1.0 - 2.0 * rng.random(shape)), TWO_PI * rng.random(shape))

    @property
    def n(self) -> int:
        return self.theta.shape[1]

    @property
    def n_sites(self) -> int:
        return self.theta.shape[2]


@dataclass(frozen=True)
class ActionValue:
    log_magnitude: float
    phase: float

    @property
    def weight(self) -> complex:
        return cmath.exp(complex(self.log_magnitude, self.phase))


@dataclass(frozen=True)
class McEstimate:
    mean: complex
    stderr: complex
    avg_sign: complex
    avg_sign_stderr: complex
    n_samples: int
    n_therm: int
    seed: int
    acceptance: float = 0.0
    bin_size: int = 1
    n_chains: int = 1
    sign_collapse: bool = False

    def as_dict(self) -> dict:
        return {
            "re_mean": self.mean.real,
            "im_mean": self.mean.imag,
            "re_stderr": self.stderr.real,
            "im_stderr": self.stderr.imag,
            "re_avg_sign": self.avg_sign.real,
            "im_avg_sign": self.avg_sign.imag,
            "re_avg_sign_stderr": self.avg_sign_stderr.real,
            "im_avg_sign_stderr": self.avg_sign_stderr.imag,
            "n_samples": self.n_samples,
            "n_therm": self.n_therm,
            "seed": self.seed,
            "acceptance": self.acceptance,
            "bin_size": self.bin_size,
            "n_chains": self.n_chains,
            "sign_collapse": self.sign_collapse,
        }


@dataclass(frozen=True)
class PathObservable:
    """Product ``scale * prod Omega_{leg, slice, site, component}`` evaluated on path batches.

    ``factors`` entries are (leg, 1-based slice, site, component).
    """

    factors: tuple[tuple[Leg, int, int, int], ...]
    scale: float = 1.0
    label: str = ""

    def __call__(self, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
        value = np.full(theta.shape[:-3], self.scale, dtype=complex)
        for leg, k, x, comp in self.factors:
            t = theta[..., Leg(leg).index, k - 1, x]
            p = phi[..., Leg(leg).index, k - 1, x]
            if comp == 1:
                value = value * np.sin(t) * np.cos(p)
            elif comp == 2:
                value = value * np.sin(t) * np.sin(p)
            else:
                value = value * np.cos(t)
        return value


def spin_observable(leg: Leg, timeslice: int, x: int, i: int, s: float = 0.5) -> PathObservable:
    """(s+1) Omega_{x,i} at one slice: the path-integral image of s_i(x)."""
    return PathObservable(((Leg(leg), timeslice, x, i),), s + 1, f"s{i}({x})@{Leg(leg).value}{timeslice}")


def correlator_observable(
    ordering: Ordering, t_index: int, t_index_prime: int, x: int, i: int, x_prime: int, i_prime: int, n: int, s: float = 0.5
) -> PathObservable:
    """(s+1)^2 Omega Omega' placed like the matrix-trace insertions for ``ordering``."""
    (leg_a, slice_a), (leg_b, slice_b) = insertion_slices(ordering, t_index, t_index_prime, n)
    return PathObservable(
        ((leg_a, slice_a, x, i), (leg_b, slice_b, x_prime, i_prime)),
        (s + 1) ** 2,
        f"{Ordering(ordering).value} s{i}({x},{t_index}) s{i_prime}({x_prime},{t_index_prime})",
    )


def _leg_coefficients(contour: ContourParams) -> np.ndarray:
    return np.array([1j * contour.dt, -1j * contour.dt, -contour.dtau])


def _require_equal_legs(contour: ContourParams) -> None:
    if contour.n_e != contour.n:
        raise InvalidContour(f"Path sampling needs equal slice counts on all legs, got N={contour.n}, N_E={contour.n_e}.")


def _cartesian(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def _chain_factors(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Per-site overlap factors <k|k+1> along the cyclic chain; shape (..., 3N, V)."""
    lead = theta.shape[:-3]
    chain = theta.shape[-3] * theta.shape[-2]
    th = theta.reshape(lead + (chain, theta.shape[-1]))
    ph = phi.reshape(lead + (chain, phi.shape[-1]))
    return overlap_factors(th, ph, np.roll(th, -1, axis=-2), np.roll(ph, -1, axis=-2))


def _h_exponent_batch(spec: HamiltonianSpec, contour: ContourParams, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    h = h_eval_batch(spec, _cartesian(theta, phi))
    return np.tensordot(h.sum(axis=-1), _leg_coefficients(contour), axes=([-1], [0]))


def _log_weight_batch(spec: HamiltonianSpec, contour: ContourParams, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Complex log-weight of paths with angle arrays of shape (..., 3, N, V)."""
    factors = _chain_factors(theta, phi)
    with np.errstate(divide="ignore"):
        berry = spec.rep.two_s * np.log(factors).sum(axis=(-2, -1))
    return _h_exponent_batch(spec, contour, theta, phi) + berry


def _weight_batch(spec: HamiltonianSpec, contour: ContourParams, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    factors = _chain_factors(theta, phi)
    berry = np.prod((factors ** spec.rep.two_s).reshape(factors.shape[:-2] + (-1,)), axis=-1)
    return np.exp(_h_exponent_batch(spec, contour, theta, phi)) * berry


def sk_action(spec: HamiltonianSpec, contour: ContourParams, path: PathConfig) -> ActionValue:
    """Log-magnitude and principal phase of the path weight.

    Raises:
        ZeroOverlap: Two neighbouring points on the chain are antipodal on some site.
        DimensionMismatch: The path does not match the contour or lattice.
    """
    validate(spec)
    _require_equal_legs(contour)
    if path.n != contour.n or path.n_sites != spec.n_sites:
        raise DimensionMismatch(
            f"Path of shape {path.theta.shape} for N={contour.n}, V={spec.n_sites}."
        )
    factors = _chain_factors(path.theta, path.phi)
    small = np.abs(factors) < ZERO_OVERLAP_TOL
    if np.any(small):
        k, x = np.argwhere(small)[0]
        raise ZeroOverlap(f"Chain positions {k} and {(k + 1) % factors.shape[0]} are antipodal on site {x}.")
    log_w = complex(_log_weight_batch(spec, contour, path.theta, path.phi))
    return ActionValue(log_w.real, float(np.angle(cmath.exp(1j * log_w.imag))))


def brute_force_partition(spec: HamiltonianSpec, contour: ContourParams, grid: QuadratureGrid, block_size: int = 65536) -> complex:
    """Sum of the path weight over every path on the tensor quadrature grid.

    Algebraically the same number as ``partition_trace`` built on ``grid``;
    the cost is (nodes per sphere)^(3 N V) weight evaluations.
    """
    validate(spec)
    _require_equal_legs(contour)
    n_spheres = 3 * contour.n * spec.n_sites
    m = grid.nodes_per_sphere
    total_paths = m ** n_spheres
    logger.debug("Brute-force partition over %d paths", total_paths)
    shape = (3, contour.n, spec.n_sites)
    total = 0.0 + 0.0j
    for start in range(0, total_paths, block_size):
        idx = np.arange(start, min(start + block_size, total_paths))
        digits = np.stack(np.unravel_index(idx, (m,) * n_spheres), axis=-1)
        theta = grid.theta[digits].reshape(idx.size, *shape)
        phi = grid.phi[digits].reshape(idx.size, *shape)
        weights = np.prod(grid.weights[digits], axis=-1)
        total += np.sum(weights * _weight_batch(spec, contour, theta, phi))
    return complex(total)


@njit(nogil=True)
def _h_slice(theta, phi, couplings, sites, comps, counts, scale):
    total = 0.0
    for k in range(couplings.size):
        prod = couplings[k]
        for f in range(counts[k]):
            x = sites[k, f]
            c = comps[k, f]
            if c == 1:
                w = math.sin(theta[x]) * math.cos(phi[x])
            elif c == 2:
                w = math.sin(theta[x]) * math.sin(phi[x])
            else:
                w = math.cos(theta[x])
            prod *= scale * w
        total += prod
    return total


@njit(nogil=True)
def _site_overlap_abs(t_bra, p_bra, t_ket, p_ket):
    z = math.cos(t_bra / 2) * math.cos(t_ket / 2) + cmath.exp(-1j * (p_bra - p_ket)) * math.sin(t_bra / 2) * math.sin(t_ket / 2)
    return abs(z)


@njit(nogil=True)
def _sweep(theta, phi, leg_re, two_s, scale, couplings, sites, comps, counts, cap, uniforms):
    """One in-place pass over every (leg, slice, site); returns the number of accepted moves."""
    n_legs, n, v = theta.shape
    chain = n_legs * n
    accepted = 0
    r = 0
    for leg in range(n_legs):
        for k in range(n):
            c = leg * n + k
            pc = (c + chain - 1) % chain
            nc = (c + 1) % chain
            pl, pk = pc // n, pc % n
            nl, nk = nc // n, nc % n
            for x in range(v):
                u_cap, u_psi, u_acc = uniforms[r, 0], uniforms[r, 1], uniforms[r, 2]
                r += 1
                t_old = theta[leg, k, x]
                p_old = phi[leg, k, x]
                st, ct = math.sin(t_old), math.cos(t_old)
                sp, cp = math.sin(p_old), math.cos(p_old)
                cg = 1.0 - u_cap * cap
                sg = math.sqrt(max(0.0, 1.0 - cg * cg))
                psi = 2.0 * math.pi * u_psi
                a = sg * math.cos(psi)
                b = sg * math.sin(psi)
                nx = cg * st * cp + a * ct * cp - b * sp
                ny = cg * st * sp + a * ct * sp + b * cp
                nz = min(1.0, max(-1.0, cg * ct - a * st))
                t_new = math.acos(nz)
                p_new = math.atan2(ny, nx)
                if p_new < 0.0:
                    p_new += 2.0 * math.pi
                if p_new >= 2.0 * math.pi:
                    p_new = 0.0

                log_ratio = 0.0
                if leg_re[leg] != 0.0:
                    h_old = _h_slice(theta[leg, k], phi[leg, k], couplings, sites, comps, counts, scale)
                    theta[leg, k, x] = t_new
                    phi[leg, k, x] = p_new
                    h_new = _h_slice(theta[leg, k], phi[leg, k], couplings, sites, comps, counts, scale)
                    theta[leg, k, x] = t_old
                    phi[leg, k, x] = p_old
                    log_ratio += leg_re[leg] * (h_new - h_old)

                new_prev = _site_overlap_abs(theta[pl, pk, x], phi[pl, pk, x], t_new, p_new)
                new_next = _site_overlap_abs(t_new, p_new, theta[nl, nk, x], phi[nl, nk, x])
                if new_prev == 0.0 or new_next == 0.0:
                    continue
                old_prev = _site_overlap_abs(theta[pl, pk, x], phi[pl, pk, x], t_old, p_old)
                old_next = _site_overlap_abs(t_old, p_old, theta[nl, nk, x], phi[nl, nk, x])
                if old_prev > 0.0 and old_next > 0.0:
                    log_ratio += two_s * (
                        math.log(new_prev) + math.log(new_next) - math.log(old_prev) - math.log(old_next)
                    )
                    if log_ratio < 0.0 and u_acc >= math.exp(log_ratio):
                        continue
                theta[leg, k, x] = t_new
                phi[leg, k, x] = p_new
                accepted += 1
    return accepted


def _bin_means(data: np.ndarray, size: int) -> np.ndarray:
    n_bins = data.shape[-1] // size
    return data[..., : n_bins * size].reshape(data.shape[:-1] + (n_bins, size)).mean(axis=-1)


def _componentwise_std(values: np.ndarray) -> complex:
    return complex(np.std(values.real), np.std(values.imag))


def jackknife_ratio(num_bins: np.ndarray, den_bins: np.ndarray) -> tuple[complex, complex]:
    """Ratio of means with a leave-one-bin-out jackknife error (real and imaginary parts separately)."""
    n = num_bins.size
    if n < 2:
        raise ConfigValidationError("Jackknife needs at least two bins; increase n_samples.")
    tot_num, tot_den = num_bins.sum(), den_bins.sum()
    loo = (tot_num - num_bins) / (tot_den - den_bins)
    spread = _componentwise_std(loo) * math.sqrt(n - 1)
    return complex(tot_num / tot_den), spread


def binned_ratio(num: np.ndarray, den: np.ndarray, min_bins: int = MIN_BINS) -> tuple[complex, complex, int]:
    """Reweighted ratio over chains with arrays of shape (chains, samples).

    Bin sizes double until the jackknife error grows by less than
    ``PLATEAU_TOL`` or fewer than ``min_bins`` bins would remain.
    """
    num = np.atleast_2d(num)
    den = np.atleast_2d(den)
    size = 1
    ratio, err = jackknife_ratio(_bin_means(num, 1).ravel(), _bin_means(den, 1).ravel())
    while num.shape[0] * (num.shape[1] // (2 * size)) >= min_bins:
        candidate = jackknife_ratio(_bin_means(num, 2 * size).ravel(), _bin_means(den, 2 * size).ravel())
        grew = abs(candidate[1]) > abs(err) * (1 + PLATEAU_TOL)
        size *= 2
        ratio, err = candidate
        if not grew:
            break
    return ratio, err, size


def _run_chain(
    spec: HamiltonianSpec,
    contour: ContourParams,
    cap: float,
    n_samples: int,
    n_therm: int,
    seed_seq: np.random.SeedSequence,
) -> tuple[np.ndarray, np.ndarray, float]:
    rng = np.random.default_rng(seed_seq)
    start = PathConfig.random(contour.n, spec.n_sites, rng)
    theta = np.ascontiguousarray(start.theta)
    phi = np.ascontiguousarray(start.phi)
    couplings, sites, comps, counts = compile_terms(spec)
    leg_re = np.ascontiguousarray(_leg_coefficients(contour).real)
    scale = spec.rep.s + 1
    updates = theta.size
    theta_out = np.empty((n_samples,) + theta.shape)
    phi_out = np.empty((n_samples,) + phi.shape)
    accepted = 0
    for sweep in range(n_therm + n_samples):
        uniforms = rng.random((updates, 3))
        acc = _sweep(theta, phi, leg_re, float(spec.rep.two_s), scale, couplings, sites, comps, counts, cap, uniforms)
        if sweep >= n_therm:
            accepted += acc
            theta_out[sweep - n_therm] = theta
            phi_out[sweep - n_therm] = phi
    return theta_out, phi_out, accepted / (updates * n_samples)


def metropolis_run(
    spec: HamiltonianSpec,
    contour: ContourParams,
    proposal_width: float,
    n_samples: int,
    n_therm: int,
    seed: int | None,
    observable: Callable[[np.ndarray, np.ndarray], np.ndarray],
    n_chains: int = 1,
    workers: int = 1,
    snapshot: str | Path | None = None,
) -> McEstimate:
    """Phase-reweighted estimate of ``observable`` under |path weight|.

    Chains use independent streams spawned from ``seed`` and are merged in
    chain order, so results depend only on (seed, n_chains).

    Raises:
        ConfigValidationError: Bad sampler parameters.
        InvalidContour: Unequal slice counts on the legs.
    """
    validate(spec)
    _require_equal_legs(contour)
    if not 0 < proposal_width <= math.pi:
        raise ConfigValidationError(f"proposal_width must lie in (0, pi], got {proposal_width!r}.")
    if n_samples < 2 or n_therm < 0 or n_chains < 1:
        raise ConfigValidationError(
            f"Need n_samples >= 2, n_therm >= 0, n_chains >= 1; got {n_samples}, {n_therm}, {n_chains}."
        )
    spheres = 3 * contour.n * spec.n_sites
    if spheres > FEASIBLE_SPHERES:
        logger.warning("Sampling %d spheres; expect a severe sign problem above %d.", spheres, FEASIBLE_SPHERES)

    root = np.random.SeedSequence(seed)
    children = root.spawn(n_chains)
    cap = 1.0 - math.cos(proposal_width)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        futures = [
            executor.submit(_run_chain, spec, contour, cap, n_samples, n_therm, child) for child in children
        ]
        chains = [fut.result() for fut in futures]

    theta = np.stack([c[0] for c in chains])
    phi = np.stack([c[1] for c in chains])
    acceptance = float(np.mean([c[2] for c in chains]))
    log_w = _log_weight_batch(spec, contour, theta, phi)
    sign = np.exp(1j * log_w.imag)
    values = np.asarray(observable(theta, phi), dtype=complex)

    mean, stderr, bin_size = binned_ratio(values * sign, sign)
    sign_bins = _bin_means(sign, bin_size).ravel()
    avg_sign = complex(sign_bins.mean())
    avg_sign_stderr = _componentwise_std(sign_bins) / math.sqrt(sign_bins.size - 1)
    collapse = abs(avg_sign) < 3 * abs(avg_sign_stderr)
    logger.info("MC acceptance %.3f, <sign> = %.4g%+.4gi, bin size %d", acceptance, avg_sign.real, avg_sign.imag, bin_size)
    if collapse:
        logger.warning(
            "Average sign %.3g is within 3 sigma of zero; the estimate is unreliable.", abs(avg_sign)
        )

    if snapshot is not None:
        header = SnapshotHeader.for_run(spec, contour, root.entropy, n_chains, n_samples)
        write_snapshot(snapshot, header, theta, phi)

    return McEstimate(
        mean=mean,
        stderr=stderr,
        avg_sign=avg_sign,
        avg_sign_stderr=avg_sign_stderr,
        n_samples=n_samples,
        n_therm=n_therm,
        seed=int(root.entropy),
        acceptance=acceptance,
        bin_size=bin_size,
        n_chains=n_chains,
        sign_collapse=bool(collapse),
    )
