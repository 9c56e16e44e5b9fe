"""Brute-force periodic-orbit ground truth for maximizing values."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from betatherm.beta import DEFAULT_LANGUAGE_CAP, BetaSpec, enumerate_language, is_admissible_sequence, presentation_matrix
from betatherm.symbolic import EventuallyPeriodicSeq, Word, format_word, periodic
from betatherm.transfer import FORWARD, CylinderMeasure, Potential, cylinder_basis

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PeriodicOrbit:
    word: Word
    birkhoff_mean: float | None = None

    @property
    def period(self) -> int:
        return len(self.word)

    @property
    def point(self) -> EventuallyPeriodicSeq:
        return periodic(self.word)

    def rotations(self) -> list[Word]:
        w = self.word
        return [w[i:] + w[:i] for i in range(len(w))]

    def __str__(self) -> str:
        return format_word(self.word)


@dataclass(frozen=True)
class OrbitOptimum:
    m: float
    argmax: tuple[PeriodicOrbit, ...]
    unique: bool
    n_cycles: int


def is_lyndon(w: Word) -> bool:
    """Primitive and strictly smaller than each of its proper rotations."""
    return all(w < w[i:] + w[:i] for i in range(1, len(w)))


def enumerate_cycles(p_max: int, spec: BetaSpec, *, cap: int = DEFAULT_LANGUAGE_CAP) -> list[PeriodicOrbit]:
    """Primitive admissible cycles of period <= p_max, minimal rotation first."""
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    out: list[PeriodicOrbit] = []
    for p in range(1, p_max + 1):
        for w in enumerate_language(p, spec, cap=cap):
            if is_lyndon(w) and is_admissible_sequence(periodic(w), spec):
                out.append(PeriodicOrbit(w))
    return out


def birkhoff_average(A: Potential, orbit: PeriodicOrbit) -> float:
    x = orbit.point
    return sum(A(x.shift(i)) for i in range(orbit.period)) / orbit.period


def max_orbit_mean(A: Potential, p_max: int, spec: BetaSpec, *, tie_tol: float = 1e-12) -> OrbitOptimum:
    cycles = [replace(c, birkhoff_mean=birkhoff_average(A, c)) for c in enumerate_cycles(p_max, spec)]
    m = max(c.birkhoff_mean for c in cycles)
    argmax = tuple(c for c in cycles if c.birkhoff_mean >= m - tie_tol)
    log.debug(
        "[oracle] p_max=%d cycles=%d m=%.12g argmax=%s",
        p_max,
        len(cycles),
        m,
        ",".join(str(c) for c in argmax[:8]),
    )
    return OrbitOptimum(m, argmax, len(argmax) == 1, len(cycles))


def empirical_orbit_measure(orbit: PeriodicOrbit, k: int, spec: BetaSpec) -> CylinderMeasure:
    """Depth-k factor frequencies along one period."""
    if k < 1:
        raise ValueError("k must be >= 1")
    x = orbit.point
    basis = cylinder_basis(spec, k, FORWARD)
    masses = np.zeros(basis.size)
    for i in range(orbit.period):
        masses[basis.locate(x.shift(i))] += 1.0 / orbit.period
    return CylinderMeasure.from_basis(basis, masses)


# Counting through the finite presentation


def _mobius(n: int) -> int:
    result, p = 1, 2
    while p * p <= n:
        if n % p == 0:
            n //= p
            if n % p == 0:
                return 0
            result = -result
        p += 1
    return -result if n > 1 else result


def periodic_point_count(n: int, spec: BetaSpec) -> int:
    """trace M^n of the Parry automaton (points of period dividing n)."""
    mat = presentation_matrix(spec)
    return int(np.trace(np.linalg.matrix_power(mat, n)))


def necklace_count(n: int, spec: BetaSpec) -> int:
    """Primitive cycles of exact period n, by Mobius inversion of the traces."""
    total = sum(_mobius(n // d) * periodic_point_count(d, spec) for d in range(1, n + 1) if n % d == 0)
    return total // n
