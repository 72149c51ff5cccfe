#!/usr/bin/env python3
# contour.py - The discretized three-leg Schwinger-Keldysh contour.
"""
The contour runs forward in real time to t_max (leg ``+``), back to zero
(leg ``-``), then down the imaginary axis by beta (leg ``E``). Each leg is cut
into timeslices numbered 1..N in path order; a trace over the contour is the
ordered product of all slice factors, ``+`` slices first.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np

from .errors import InvalidContour, InvalidOrderingDomain, NonIntegralTime


class Leg(str, Enum):
    PLUS = "+"
    MINUS = "-"
    EUCLID = "E"

    @property
    def index(self) -> int:
        return ("+", "-", "E").index(self.value)


class Ordering(str, Enum):
    TIME_ORDERED = "time-ordered"
    ANTI_ORDERED = "anti-ordered"
    UNORDERED = "unordered"


@dataclass(frozen=True)
class ContourParams:
    beta: float
    t_max: float
    n: int
    n_euclid: int | None = None

    def __post_init__(self):
        if not self.beta > 0:
            raise InvalidContour(f"beta must be positive, got {self.beta!r}.")
        if not self.t_max > 0:
            raise InvalidContour(f"t_max must be positive, got {self.t_max!r}.")
        if int(self.n) != self.n or self.n < 1:
            raise InvalidContour(f"Timeslice count must be a positive integer, got {self.n!r}.")
        if self.n_euclid is not None and (int(self.n_euclid) != self.n_euclid or self.n_euclid < 1):
            raise InvalidContour(f"Euclidean slice count must be a positive integer, got {self.n_euclid!r}.")

    @property
    def n_e(self) -> int:
        return self.n if self.n_euclid is None else int(self.n_euclid)

    @property
    def dt(self) -> float:
        return self.t_max / self.n

    @property
    def dtau(self) -> float:
        return self.beta / self.n_e

    def slices(self, leg: Leg) -> int:
        return self.n_e if leg is Leg.EUCLID else self.n

    def with_n(self, n: int) -> "ContourParams":
        return ContourParams(self.beta, self.t_max, n, self.n_euclid)

    def time_index(self, t: float, tol: float = 1e-9) -> int:
        """Integer t / dt; raises when t is not on the slice grid."""
        ratio = t / self.dt
        k = int(round(ratio))
        if abs(ratio - k) > tol * max(1.0, abs(ratio)):
            raise NonIntegralTime(f"t={t} is not a multiple of dt={self.dt} (N={self.n}).")
        return k

    def as_dict(self) -> dict:
        return {"beta": self.beta, "t_max": self.t_max, "n": self.n, "n_euclid": self.n_euclid}


Placement = tuple[tuple[Leg, int], tuple[Leg, int]]


def insertion_slices(ordering: Ordering, t_index: int, t_index_prime: int, n: int) -> Placement:
    """Leg and 1-based slice for the two insertions of <s(t) s'(t')>.

    The first element carries the unprimed operator. Physical times are
    ``t_index * dt`` and ``t_index_prime * dt``; a - slice k sits at time
    ``(n - k) * dt``.

    Raises:
        InvalidOrderingDomain: The time pair is outside the ordering's domain.
    """
    ordering = Ordering(ordering)
    a, b = int(t_index), int(t_index_prime)
    if ordering is Ordering.ANTI_ORDERED:
        if not 1 <= a < b <= n:
            raise InvalidOrderingDomain(
                f"anti-ordered needs 1 <= t_index < t_index' <= {n}, got ({a}, {b})."
            )
        return (Leg.PLUS, a), (Leg.PLUS, b)
    if ordering is Ordering.TIME_ORDERED:
        if not 0 <= b < a <= n - 1:
            raise InvalidOrderingDomain(
                f"time-ordered needs 0 <= t_index' < t_index <= {n - 1}, got ({a}, {b})."
            )
        return (Leg.MINUS, n - a), (Leg.MINUS, n - b)
    if not (1 <= a <= n and 0 <= b <= n - 1):
        raise InvalidOrderingDomain(
            f"unordered needs 1 <= t_index <= {n} and 0 <= t_index' <= {n - 1}, got ({a}, {b}); "
            "the + leg has no slice at t=0, so the earliest unordered t is dt."
        )
    return (Leg.PLUS, a), (Leg.MINUS, n - b)


def leg_product(base: np.ndarray, n_slices: int, overrides: Mapping[int, np.ndarray] | None = None) -> np.ndarray:
    """Ordered product of ``n_slices`` factors, slice 1 leftmost.

    Every slice is ``base`` except those in ``overrides`` (1-based slice ->
    matrix). Runs of identical factors are raised with binary powering.
    """
    overrides = overrides or {}
    result = np.eye(base.shape[0], dtype=complex)
    cursor = 1
    for k in sorted(overrides):
        if not 1 <= k <= n_slices:
            raise InvalidOrderingDomain(f"Slice {k} outside 1..{n_slices}.")
        if k > cursor:
            result = result @ np.linalg.matrix_power(base, k - cursor)
        result = result @ overrides[k]
        cursor = k + 1
    if cursor <= n_slices:
        result = result @ np.linalg.matrix_power(base, n_slices - cursor + 1)
    return result


def contour_trace(
    factors: Mapping[Leg, np.ndarray],
    contour: ContourParams,
    overrides: Mapping[Leg, Mapping[int, np.ndarray]] | None = None,
) -> complex:
    """tr(prod_+ prod_- prod_E) with optional per-slice replacements on each leg."""
    overrides = overrides or {}
    product = None
    for leg in (Leg.PLUS, Leg.MINUS, Leg.EUCLID):
        part = leg_product(factors[leg], contour.slices(leg), overrides.get(leg))
        product = part if product is None else product @ part
    return complex(np.trace(product))
