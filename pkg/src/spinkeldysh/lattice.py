#!/usr/bin/env python3
# lattice.py - Lattices, spin representations and symbolic Hamiltonians.
"""
Hamiltonians are stored as term lists rather than matrices so that one
description drives both the Hilbert-space oracle (``oracle.hamiltonian_matrix``)
and the classical h-function used inside the path integral (``h_eval``).

A term is ``coupling * s_{c1}(x1) * s_{c2}(x2) * ...`` with all sites distinct
and components 1, 2, 3 standing for x, y, z.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    BadComponent,
    BadLattice,
    BadSiteIndex,
    DimensionMismatch,
    HamiltonianError,
    SameSiteProduct,
)

COMPONENTS = (1, 2, 3)


@dataclass(frozen=True)
class LatticeSpec:
    n_sites: int
    adjacency: tuple[tuple[int, int], ...] = ()
    dim_label: str = ""

    def __post_init__(self):
        if not isinstance(self.n_sites, (int, np.integer)) or self.n_sites < 1:
            raise BadLattice(f"Site count must be a positive integer, got {self.n_sites!r}.")
        for a, b in self.adjacency:
            if not (0 <= a < self.n_sites and 0 <= b < self.n_sites):
                raise BadSiteIndex(f"Adjacency pair ({a}, {b}) outside [0, {self.n_sites}).")
            if a == b:
                raise BadLattice(f"Adjacency contains self-pair ({a}, {b}).")


@dataclass(frozen=True)
class SpinRep:
    """Spin-s representation, stored as the integer 2s."""

    two_s: int

    def __post_init__(self):
        if not isinstance(self.two_s, (int, np.integer)) or self.two_s < 1:
            raise HamiltonianError(f"two_s must be a positive integer, got {self.two_s!r}.")

    @property
    def s(self) -> float:
        return self.two_s / 2

    @property
    def dim(self) -> int:
        return self.two_s + 1


@dataclass(frozen=True)
class HamiltonianTerm:
    coupling: float
    factors: tuple[tuple[int, int], ...]

    @classmethod
    def of(cls, coupling: float, factors: Iterable[Sequence[int]]) -> "HamiltonianTerm":
        return cls(float(coupling), tuple((int(x), int(c)) for x, c in factors))


@dataclass(frozen=True)
class HamiltonianSpec:
    terms: tuple[HamiltonianTerm, ...]
    lattice: LatticeSpec
    rep: SpinRep = field(default_factory=lambda: SpinRep(1))

    @property
    def n_sites(self) -> int:
        return self.lattice.n_sites

    @property
    def hilbert_dim(self) -> int:
        return self.rep.dim ** self.lattice.n_sites


def validate(spec: HamiltonianSpec) -> None:
    """Check every term against the lattice; raise on the first violation.

    Args:
        spec: The Hamiltonian to check.

    Raises:
        SameSiteProduct: A term multiplies two spins on one site.
        BadSiteIndex: A factor names a site outside the lattice.
        BadComponent: A factor component is not 1, 2 or 3.
        HamiltonianError: Empty factor list or non-finite coupling.
    """
    n_sites = spec.lattice.n_sites
    for k, term in enumerate(spec.terms):
        if not np.isfinite(term.coupling):
            raise HamiltonianError(f"Term {k} has non-finite coupling {term.coupling!r}.")
        if not term.factors:
            raise HamiltonianError(f"Term {k} has no spin factors.")
        seen = set()
        for site, comp in term.factors:
            if not 0 <= site < n_sites:
                raise BadSiteIndex(f"Term {k} uses site {site} on a lattice of {n_sites} sites.")
            if comp not in COMPONENTS:
                raise BadComponent(f"Term {k} uses component {comp}; expected 1, 2 or 3.")
            if site in seen:
                raise SameSiteProduct(
                    f"Term {k} multiplies spins on site {site}; same-site products need the product formula."
                )
            seen.add(site)


def compile_terms(spec: HamiltonianSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Pack the term list into dense arrays (couplings, sites, components, factor counts).

    Padding entries have count-limited loops so they are never read.
    """
    n_terms = len(spec.terms)
    width = max((len(t.factors) for t in spec.terms), default=1)
    couplings = np.zeros(n_terms, dtype=np.float64)
    sites = np.zeros((n_terms, width), dtype=np.int64)
    comps = np.ones((n_terms, width), dtype=np.int64)
    counts = np.zeros(n_terms, dtype=np.int64)
    for k, term in enumerate(spec.terms):
        couplings[k] = term.coupling
        counts[k] = len(term.factors)
        for f, (site, comp) in enumerate(term.factors):
            sites[k, f] = site
            comps[k, f] = comp
    return couplings, sites, comps, counts


def h_eval_batch(spec: HamiltonianSpec, omega: np.ndarray) -> np.ndarray:
    """Classical h-function on a batch of sphere configurations.

    Args:
        spec: Validated Hamiltonian.
        omega: Cartesian unit vectors, shape ``(..., V, 3)``.

    Returns:
        Real array of shape ``omega.shape[:-2]``.
    """
    omega = np.asarray(omega, dtype=np.float64)
    if omega.ndim < 2 or omega.shape[-2:] != (spec.n_sites, 3):
        raise DimensionMismatch(
            f"Expected configurations of shape (..., {spec.n_sites}, 3), got {omega.shape}."
        )
    scale = spec.rep.s + 1
    total = np.zeros(omega.shape[:-2], dtype=np.float64)
    for term in spec.terms:
        prod = np.full(omega.shape[:-2], term.coupling, dtype=np.float64)
        for site, comp in term.factors:
            prod = prod * (scale * omega[..., site, comp - 1])
        total = total + prod
    return total


def h_eval(spec: HamiltonianSpec, config) -> float:
    """h(Omega) = H(s -> (s+1) Omega) for one sphere configuration."""
    points = getattr(config, "points", None)
    if points is not None:
        if len(points) != spec.n_sites:
            raise DimensionMismatch(
                f"Configuration has {len(points)} points for {spec.n_sites} sites."
            )
        omega = np.array([p.cartesian() for p in points])
    else:
        omega = np.asarray(config, dtype=np.float64)
    return float(h_eval_batch(spec, omega))


def xz_chain(n_sites: int = 2, j: float = 1.0, periodic: bool = True, two_s: int = 1) -> HamiltonianSpec:
    """H = -(j/2) sum over bonds of s1 s1 + s3 s3 on a ring or open chain.

    Bonds are de-duplicated, so a periodic two-site ring has a single bond.
    """
    bonds: list[tuple[int, int]] = []
    last = n_sites if periodic else n_sites - 1
    for x in range(last):
        bond = tuple(sorted((x, (x + 1) % n_sites)))
        if bond[0] != bond[1] and bond not in bonds:
            bonds.append(bond)
    terms = []
    for a, b in bonds:
        terms.append(HamiltonianTerm.of(-j / 2, [(a, 1), (b, 1)]))
        terms.append(HamiltonianTerm.of(-j / 2, [(a, 3), (b, 3)]))
    label = f"1d {'periodic' if periodic else 'open'} chain, {n_sites} sites"
    lattice = LatticeSpec(n_sites, tuple(bonds), label)
    spec = HamiltonianSpec(tuple(terms), lattice, SpinRep(two_s))
    validate(spec)
    return spec


MODELS = {"xz-chain": xz_chain}


def spec_from_mapping(data: Mapping[str, Any]) -> HamiltonianSpec:
    """Build a HamiltonianSpec from the ``hamiltonian`` block of an experiment config."""
    if not isinstance(data, Mapping):
        raise HamiltonianError("Hamiltonian block must be a mapping.")
    two_s = int(data.get("two_s", 1))
    model = data.get("model")
    if model is not None:
        name = model.get("name") if isinstance(model, Mapping) else model
        if name not in MODELS:
            raise HamiltonianError(f"Unknown model {name!r}; known models: {sorted(MODELS)}.")
        kwargs = {k: v for k, v in model.items() if k != "name"} if isinstance(model, Mapping) else {}
        return MODELS[name](n_sites=int(data.get("sites", 2)), two_s=two_s, **kwargs)

    try:
        n_sites = int(data["sites"])
    except (KeyError, TypeError, ValueError) as e:
        raise HamiltonianError(f"Hamiltonian needs an integer 'sites' entry: {e}") from e
    adjacency = tuple(tuple(int(v) for v in pair) for pair in data.get("adjacency") or [])
    lattice = LatticeSpec(n_sites, adjacency, str(data.get("dim_label", "")))
    terms = []
    for k, entry in enumerate(data.get("terms") or []):
        try:
            terms.append(HamiltonianTerm.of(entry["coupling"], entry["factors"]))
        except (KeyError, TypeError, ValueError) as e:
            raise HamiltonianError(f"Malformed term {k}: {entry!r}") from e
    spec = HamiltonianSpec(tuple(terms), lattice, SpinRep(two_s))
    validate(spec)
    return spec


def spec_to_mapping(spec: HamiltonianSpec) -> dict:
    return {
        "sites": spec.lattice.n_sites,
        "two_s": spec.rep.two_s,
        "adjacency": [list(p) for p in spec.lattice.adjacency],
        "dim_label": spec.lattice.dim_label,
        "terms": [
            {"coupling": t.coupling, "factors": [list(f) for f in t.factors]}
            for t in spec.terms
        ],
    }


def spec_hash(spec: HamiltonianSpec) -> str:
    """Content hash of the Hamiltonian; stable across runs and platforms."""
    canonical = json.dumps(spec_to_mapping(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
