"""Involution kernel, transpose potential and the bilateral coupling.

A potential A reads one coordinate of a bilateral pair (y, x): a forward
potential reads the future x, a transpose potential reads the past y. The
kernel sums A over the points obtained by pushing the other coordinate's first
n digits in front of the one A reads, against the same sum with a fixed
reference (0^inf by default):

    W(y, x) = sum_{n >= 1} A(y_n ... y_1 x) - A(y_n ... y_1 x')

For a locally constant A of depth d only n < d contribute, so d - 1 terms are exact.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from betatherm.beta import BetaSpec, is_admissible_on, is_admissible_sequence, language_on
from betatherm.errors import EigenMismatch, FillerDependence, NotBilateral
from betatherm.symbolic import (
    ZERO,
    BilateralPair,
    EventuallyPeriodicSeq,
    Sequenceish,
    Word,
    as_sequence,
    format_word,
    padded,
    transpose_word,
)
from betatherm.transfer import (
    FORWARD,
    TRANSPOSE,
    CylinderBasis,
    CylinderFunction,
    CylinderMeasure,
    Potential,
    SpectralTriple,
    TailStates,
    cylinder_basis,
    make_potential,
    other_side,
    tail_states,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class KernelSpec:
    reference: EventuallyPeriodicSeq = ZERO
    truncation: int = 0
    tail_bound: float = 0.0

    @property
    def exact(self) -> bool:
        return self.tail_bound == 0.0

    @classmethod
    def for_potential(
        cls,
        A: Potential,
        truncation: int | None = None,
        reference: EventuallyPeriodicSeq = ZERO,
    ) -> "KernelSpec":
        """d - 1 terms by default; fewer terms carry the geometric Holder tail."""
        n = A.depth - 1 if truncation is None else int(truncation)
        if n < 0:
            raise ValueError("truncation must be nonnegative")
        if n >= A.depth - 1:
            tail = 0.0
        else:
            q = 2.0 ** (-A.theta)
            tail = A.holder_const * q ** (n + 1) / (1.0 - q)
        return cls(reference=reference, truncation=n, tail_bound=tail)


# Bilateral windows


def bilateral_window(other: EventuallyPeriodicSeq, own: EventuallyPeriodicSeq, m: int) -> Word:
    """other_m ... other_1 own_1 ... own_m."""
    return transpose_word(other.prefix(m)) + own.prefix(m)


def _inspected_window(other: EventuallyPeriodicSeq, own: EventuallyPeriodicSeq, spec: BetaSpec, reach: int) -> int:
    return reach + other.window + own.window + spec.memory


def _tail_admissible(past: EventuallyPeriodicSeq, future: EventuallyPeriodicSeq, spec: BetaSpec, tails: TailStates) -> bool:
    t = tails.transpose_state(past)
    return t is not None and is_admissible_sequence(future, spec) and tails.forward_state(future) <= t


def is_bilateral(other: Sequenceish, own: Sequenceish, spec: BetaSpec, side: str = FORWARD, *, reach: int = 1) -> bool:
    """Admissibility of a pair, read on `side`.

    For side=FORWARD `other` is the past y and `own` the future x; for
    side=TRANSPOSE the roles swap. With an eventually periodic x^beta the test
    is exact: x must not exceed the orbit point T(y) left by the past. A
    truncated x^beta checks the widest inspected window instead (admissible
    windows are closed under taking factors).
    """
    o, w = as_sequence(other), as_sequence(own)
    tails = tail_states(spec)
    if tails is not None:
        past, future = (o, w) if side == FORWARD else (w, o)
        return _tail_admissible(past, future, spec, tails)
    m = _inspected_window(o, w, spec, reach)
    return is_admissible_on(bilateral_window(o, w, m), spec, side)


def require_bilateral(other: Sequenceish, own: Sequenceish, spec: BetaSpec, side: str = FORWARD, *, reach: int = 1) -> None:
    if not is_bilateral(other, own, spec, side, reach=reach):
        o, w = as_sequence(other), as_sequence(own)
        raise NotBilateral(bilateral_window(o, w, _inspected_window(o, w, spec, reach)))


def is_bilateral_words(u: Sequence[int], w: Sequence[int], spec: BetaSpec) -> bool:
    """Depth-k cylinder pair (u past, w future) meets the bilateral shift."""
    return is_admissible_on(transpose_word(u) + tuple(w), spec, FORWARD)


def bilateral_mask(past: CylinderBasis, future: CylinderBasis, spec: BetaSpec) -> np.ndarray:
    """Cell pairs (past i, future j) holding bilateral points; exact on refined bases."""
    if past.exact and future.exact:
        return np.asarray(future.states)[None, :] <= np.asarray(past.states)[:, None]
    return np.array([[is_bilateral_words(u, w, spec) for w in future.words] for u in past.words], dtype=bool).reshape(
        past.size, future.size
    )


# Kernel


def kernel_value(A: Potential, other: EventuallyPeriodicSeq, own: EventuallyPeriodicSeq, ks: KernelSpec) -> float:
    """Truncated kernel sum without admissibility checks."""
    total = 0.0
    for n in range(1, ks.truncation + 1):
        head = transpose_word(other.prefix(n))
        total += A(own.prepend(head)) - A(ks.reference.prepend(head))
    return total


def involution_kernel(A: Potential, y: Sequenceish, x: Sequenceish, ks: KernelSpec, spec: BetaSpec) -> float:
    """W(y, x) for a forward A (for a transpose A the first argument is the future).

    The result is exact when ks.exact; otherwise it is within ks.tail_bound.
    """
    other, own = as_sequence(y), as_sequence(x)
    reach = max(A.depth, ks.truncation + 1)
    require_bilateral(other, own, spec, A.side, reach=reach)
    require_bilateral(other, ks.reference, spec, A.side, reach=reach)
    return kernel_value(A, other, own, ks)


# Transpose potential


def _fillers(A: Potential, spec: BetaSpec) -> tuple[Word, ...]:
    # A(a x) and W(., x) only read the first d - 1 digits of the filler
    return language_on(max(A.depth - 1, 0), spec, A.side)


def transpose_potential(A: Potential, spec: BetaSpec, ks: KernelSpec | None = None) -> Potential:
    """A^T(a y) = A(a x) + W(y, a x) - W(a y, x) as a depth-d table on the other side.

    Every admissible filler x is evaluated; they must agree up to twice the
    kernel tail.
    """
    ks = ks or KernelSpec.for_potential(A)
    d = A.depth
    fillers = _fillers(A, spec)
    table: dict[Word, float] = {}
    worst = 0.0
    for u in language_on(d, spec, other_side(A.side)):
        a = u[0]
        y, ay = padded(u[1:]), padded(u)
        values = []
        for v in fillers:
            x, ax = padded(v), padded((a,) + v)
            if not is_bilateral(ay, x, spec, A.side):
                continue
            values.append(A(ax) + kernel_value(A, y, ax, ks) - kernel_value(A, ay, x, ks))
        spread = max(values) - min(values)
        worst = max(worst, spread)
        if spread > 2 * ks.tail_bound + 1e-12:
            raise FillerDependence(f"transpose value at {format_word(u)} moves by {spread:.3e} across fillers")
        table[u] = values[0]
    log.debug("[involution] transpose table depth=%d filler spread=%.3e", d, worst)
    return make_potential(table, spec, theta=A.theta, side=other_side(A.side), path="transpose.table")


def check_duality(
    A: Potential,
    y: Sequenceish,
    x: Sequenceish,
    spec: BetaSpec,
    *,
    AT: Potential | None = None,
    ks: KernelSpec | None = None,
) -> float:
    """|L_{A^T}(1 e^{W(., x)})(y) - L_A(1 e^{W(y, .)})(x)| for a forward A."""
    if A.side != FORWARD:
        raise ValueError("duality is stated for a forward potential")
    ks = ks or KernelSpec.for_potential(A)
    AT = AT or transpose_potential(A, spec, ks)
    ys, xs = as_sequence(y), as_sequence(x)
    reach = max(A.depth, ks.truncation + 1) + 1
    require_bilateral(ys, xs, spec, reach=reach)
    lhs = 0.0
    rhs = 0.0
    for a in range(spec.alphabet_top + 1):
        # (a y, x) and (y, a x) are the same bilateral point
        ay, ax = ys.prepend((a,)), xs.prepend((a,))
        if not is_bilateral(ys, ax, spec, reach=reach):
            continue
        lhs += math.exp(AT(ay) + kernel_value(A, ay, xs, ks))
        rhs += math.exp(A(ax) + kernel_value(A, ys, ax, ks))
    return abs(lhs - rhs)


# Cylinder-level kernel table, normalization and coupling


@dataclass(frozen=True, eq=False)
class KernelTable:
    """W on depth-k cell pairs, rows past cells (transpose side), columns future cells."""

    depth: int
    past: CylinderBasis
    future: CylinderBasis
    W: np.ndarray
    mask: np.ndarray

    @property
    def past_words(self) -> tuple[Word, ...]:
        return self.past.words

    @property
    def future_words(self) -> tuple[Word, ...]:
        return self.future.words

    @property
    def n_pairs(self) -> int:
        return int(self.mask.sum())

    def pairs(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(self.mask))]

    def value(self, y: Sequenceish, x: Sequenceish) -> float:
        """W on the cell pair holding (y, x); words are 0^inf-padded."""
        i, j = self.past.locate(y), self.future.locate(x)
        if not self.mask[i, j]:
            raise NotBilateral(transpose_word(self.past.words[i]) + self.future.words[j])
        return float(self.W[i, j])


def kernel_table(A: Potential, k: int, spec: BetaSpec, ks: KernelSpec | None = None) -> KernelTable:
    if A.side != FORWARD:
        raise ValueError("kernel tables are built for forward potentials")
    ks = ks or KernelSpec.for_potential(A)
    past = cylinder_basis(spec, k, TRANSPOSE)
    future = cylinder_basis(spec, k, FORWARD)
    mask = bilateral_mask(past, future, spec)
    W = np.zeros(mask.shape)
    for i, j in zip(*np.nonzero(mask)):
        W[i, j] = kernel_value(A, past.representatives[i], future.representatives[j], ks)
    return KernelTable(k, past, future, W, mask)


def _log_pair_weights(table: KernelTable, forward: SpectralTriple, transpose: SpectralTriple, t: float | None) -> np.ndarray:
    if not (forward.basis.same_cells(table.future) and transpose.basis.same_cells(table.past)):
        raise ValueError("spectral data and kernel table live on different cylinders")
    scale = forward.t if t is None else t
    logw = scale * table.W + transpose.log_rho[:, None] + forward.log_rho[None, :]
    return np.where(table.mask, logw, -np.inf)


def normalization_constant(
    table: KernelTable, forward: SpectralTriple, transpose: SpectralTriple, t: float | None = None
) -> float:
    """c = log sum over bilateral pairs of e^{tW} rho^T(u) rho(w).

    t defaults to the inverse temperature the spectral data were computed at.
    """
    return float(logsumexp(_log_pair_weights(table, forward, transpose, t)))


def log_eigenfunction_from_kernel(
    table: KernelTable, forward: SpectralTriple, transpose: SpectralTriple, t: float | None = None
) -> np.ndarray:
    logw = _log_pair_weights(table, forward, transpose, t)
    c = logsumexp(logw)
    # drop rho(w) again: psi(w) = sum_u 1 e^{tW - c} rho^T(u)
    return logsumexp(logw, axis=0) - forward.log_rho - c


def eigenfunction_from_kernel(
    table: KernelTable,
    forward: SpectralTriple,
    transpose: SpectralTriple,
    *,
    t: float | None = None,
    tol: float = 1e-8,
) -> CylinderFunction:
    """Kernel-built psi, checked against the power-iteration eigenfunction."""
    log_psi = log_eigenfunction_from_kernel(table, forward, transpose, t)
    gap = float(np.abs(np.expm1(log_psi - forward.log_psi)).max())
    mass = float(np.exp(logsumexp(log_psi + forward.log_rho)))
    if gap > tol or abs(mass - 1.0) > 1e-10:
        raise EigenMismatch(f"kernel eigenfunction off by {gap:.3e} (integral {mass:.12g}) at t={forward.t:g}")
    with np.errstate(over="ignore", under="ignore"):
        return forward.psi.with_values(np.exp(log_psi))


@dataclass(frozen=True, eq=False)
class CouplingMeasure:
    depth: int
    past: CylinderBasis
    future: CylinderBasis
    masses: np.ndarray
    c: float
    t: float = 1.0

    @property
    def past_words(self) -> tuple[Word, ...]:
        return self.past.words

    @property
    def future_words(self) -> tuple[Word, ...]:
        return self.future.words

    @property
    def total(self) -> float:
        return float(self.masses.sum())

    def mass(self, y: Sequenceish, x: Sequenceish) -> float:
        return float(self.masses[self.past.locate(y), self.future.locate(x)])

    def future_marginal(self) -> CylinderMeasure:
        return CylinderMeasure.from_basis(self.future, self.masses.sum(axis=0))

    def past_marginal(self) -> CylinderMeasure:
        return CylinderMeasure.from_basis(self.past, self.masses.sum(axis=1))


def coupling_measure(
    table: KernelTable, forward: SpectralTriple, transpose: SpectralTriple, t: float | None = None
) -> CouplingMeasure:
    """e^{tW - c} d(rho^T x rho) on bilateral cylinder pairs."""
    logw = _log_pair_weights(table, forward, transpose, t)
    c = float(logsumexp(logw))
    with np.errstate(under="ignore"):
        masses = np.exp(logw - c)
    return CouplingMeasure(table.depth, table.past, table.future, masses, c, forward.t if t is None else t)


def check_marginals(cm: CouplingMeasure, muT: CylinderMeasure, mu: CylinderMeasure) -> tuple[float, float]:
    """(past defect, future defect) in the sup norm over depth-k cylinders."""
    if muT.depth != cm.depth or mu.depth != cm.depth:
        raise ValueError("marginal check needs equal depths")
    past = cm.past_marginal()
    future = cm.future_marginal()
    return (
        float(np.abs(past.values - muT.values).max()),
        float(np.abs(future.values - mu.values).max()),
    )


# Sampling


def random_bilateral_pairs(
    spec: BetaSpec,
    n: int,
    k: int,
    rng: np.random.Generator,
    *,
    periodic_tails: bool = False,
) -> list[BilateralPair]:
    """n seeded bilateral pairs drawn uniformly from depth-k cylinder pairs.

    Tails are 0^inf; with periodic_tails the future (and past) may instead
    continue with a short admissible cycle when the pair stays bilateral.
    """
    past = cylinder_basis(spec, k, TRANSPOSE)
    future = cylinder_basis(spec, k, FORWARD)
    candidates = list(zip(*np.nonzero(bilateral_mask(past, future, spec))))
    short = [c for j in (1, 2, 3) for c in language_on(j, spec, FORWARD)]
    out: list[BilateralPair] = []
    for idx in rng.integers(0, len(candidates), size=n):
        i, j = candidates[int(idx)]
        y, x = past.representatives[i], future.representatives[j]
        if periodic_tails:
            u, w = past.words[i], future.words[j]
            cx = short[int(rng.integers(0, len(short)))]
            cy = short[int(rng.integers(0, len(short)))]
            x2 = EventuallyPeriodicSeq(w, cx)
            y2 = EventuallyPeriodicSeq(u, transpose_word(cy))
            if is_admissible_sequence(x2, spec) and is_bilateral(y, x2, spec):
                x = x2
            if is_bilateral(y2, x, spec):
                y = y2
        out.append(BilateralPair(y, x))
    return out

