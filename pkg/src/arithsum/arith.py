"""Arithmetic weights: periodic sequences and their transforms, d(n), residue classes."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .kernels import CapacityError

SIEVE_CAP = 10**8
TIE_TOL = 1e-12


class GuardError(ValueError):
    """An input violates a stated hypothesis of an identity; ``guard`` names which."""

    def __init__(self, guard: str, detail: str = ""):
        self.guard = guard
        self.detail = detail
        super().__init__(f"{guard}: {detail}" if detail else guard)


def near_integer(x: float, tol: float = TIE_TOL) -> bool:
    return abs(x - round(x)) <= tol


@dataclass(frozen=True)
class PeriodicSequence:
    """chi with period k; ``values[l - 1]`` is chi(l) for l = 1..k."""

    values: tuple[complex, ...]

    def __post_init__(self):
        if len(self.values) < 1:
            raise ValueError("period must be >= 1")
        object.__setattr__(self, "values", tuple(complex(v) for v in self.values))

    @property
    def k(self) -> int:
        return len(self.values)

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[float]]):
        return cls(tuple(complex(re, im) for re, im in pairs))

    def __call__(self, n):
        if isinstance(n, np.ndarray):
            return np.asarray(self.values)[(n - 1) % self.k]
        return self.values[(int(n) - 1) % self.k]

    def dilate(self, m: int) -> "PeriodicSequence":
        """The sequence r -> chi(m r), same period."""
        return PeriodicSequence(tuple(self(m * r) for r in range(1, self.k + 1)))


def tau(chi: PeriodicSequence, n):
    """sum_{l=1}^{k} chi(l) exp(2 pi i n l / k), exactly k-periodic in n."""
    k = chi.k
    n_arr = np.asarray(n, dtype=np.int64)
    l = np.arange(1, k + 1)
    # reduce n*l mod k in integers so periodicity holds bit for bit
    res = np.multiply.outer(n_arr % k, l) % k
    phases = np.exp(2j * math.pi * res / k)
    out = phases @ np.asarray(chi.values)
    return complex(out) if np.ndim(n) == 0 else out


@dataclass(frozen=True)
class DivisorTable:
    limit: int
    d: np.ndarray  # d[0] is unused

    def __getitem__(self, n):
        return self.d[n]

    def __len__(self):
        return self.limit


@lru_cache(maxsize=8)
def divisor_sieve(limit: int, cap: int = SIEVE_CAP) -> DivisorTable:
    """d(n) for 1 <= n <= limit by adding 1 along every multiple of each i."""
    if limit < 1:
        raise ValueError("limit must be >= 1")
    if limit > cap:
        raise CapacityError(f"sieve limit {limit} exceeds cap {cap}")
    d = np.zeros(limit + 1, dtype=np.int64)
    for i in range(1, limit + 1):
        d[i::i] += 1
    d.setflags(write=False)
    return DivisorTable(limit, d)


def harmonic(n: int) -> float:
    """H(n) = sum_{m<=n} 1/m, correctly rounded."""
    return math.fsum(1.0 / m for m in range(1, n + 1))


def integer_range(a: float, b: float, m: int = 1) -> tuple[int, int]:
    """First and last integer n with a/m < n <= b/m, computed exactly."""
    lo = math.floor(Fraction(a) / m) + 1
    hi = math.floor(Fraction(b) / m)
    return lo, hi


def residues_in_class(a: float, b: float, r: int, k: int, m: int = 1) -> Iterator[int]:
    """Integers n in (a/m, b/m] with n = r (mod k), ascending."""
    if not a < b:
        raise ValueError("need a < b")
    if k < 1 or m < 1:
        raise ValueError("need k >= 1 and m >= 1")
    lo, hi = integer_range(a, b, m)
    first = lo + ((r - lo) % k)
    return iter(range(first, hi + 1, k))
