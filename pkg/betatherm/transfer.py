"""Ruelle operator on depth-k cylinders.

The operator is the sparse matrix (L phi)(c) = sum_a e^{A(a x)} phi(cell of a x)
over the cells c of a basis, summing over the digits a with a·x admissible on
the potential's side. Cells are depth-k cylinders split by the tail state of
their points, which keeps the matrix exact on sofic beta-shifts. Eigendata come
from damped power iteration carried out on logarithms, so zero-temperature
sweeps do not underflow; a dense solve is kept as an independent check.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, replace
from functools import cached_property, cmp_to_key, lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.special import logsumexp

from betatherm.beta import (
    DEFAULT_LANGUAGE_CAP,
    BetaSpec,
    is_admissible_on,
    language_on,
)
from betatherm.errors import (
    DepthMismatch,
    IllConditioned,
    InadmissibleTableKey,
    NoConvergence,
    NonPrimitive,
    NotAdmissible,
    ResourceCapExceeded,
    SchemaError,
)
from betatherm.symbolic import (
    EventuallyPeriodicSeq,
    Ordering,
    Sequenceish,
    Word,
    as_sequence,
    format_word,
    lex_compare,
    padded,
    shift_metric,
)

log = logging.getLogger(__name__)

FORWARD = "forward"
TRANSPOSE = "transpose"

_EPS = float(np.finfo(float).eps)


def other_side(side: str) -> str:
    return TRANSPOSE if side == FORWARD else FORWARD


# Potentials


@dataclass(frozen=True, eq=False)
class Potential:
    depth: int
    table: Mapping[Word, float]
    theta: float = 1.0
    holder_const: float = 0.0
    side: str = FORWARD

    def __call__(self, x: Sequence[int] | EventuallyPeriodicSeq) -> float:
        """A at a point; a word stands for its 0^inf-padded representative."""
        if isinstance(x, EventuallyPeriodicSeq):
            key = x.prefix(self.depth)
        else:
            key = tuple(x[: self.depth])
            key = key + (0,) * (self.depth - len(key))
        return self.table[key]

    @property
    def words(self) -> tuple[Word, ...]:
        return tuple(sorted(self.table))

    @property
    def max_value(self) -> float:
        return max(self.table.values())

    def scaled(self, t: float) -> "Potential":
        return replace(
            self,
            table={w: t * v for w, v in self.table.items()},
            holder_const=abs(t) * self.holder_const,
        )

    def shifted(self, c: float) -> "Potential":
        return replace(self, table={w: v + c for w, v in self.table.items()})

    def describe(self) -> str:
        body = ", ".join(f"{format_word(w)}:{v:g}" for w, v in sorted(self.table.items()))
        return f"{self.side} depth={self.depth} {{{body}}}"


def holder_constant(table: Mapping[Word, float], theta: float) -> float:
    """max |A(u 0^inf) - A(v 0^inf)| / d(u, v)^theta over distinct keys."""
    items = sorted(table.items())
    best = 0.0
    for i, (u, a) in enumerate(items):
        for v, b in items[i + 1 :]:
            best = max(best, abs(a - b) / shift_metric(u, v) ** theta)
    return best


def make_potential(
    table: Mapping[Sequence[int], float],
    spec: BetaSpec,
    *,
    theta: float = 1.0,
    side: str = FORWARD,
    path: str = "potential.table",
) -> Potential:
    """Validate a table against the language and attach Holder metadata."""
    clean = {tuple(int(d) for d in w): float(v) for w, v in table.items()}
    if not clean:
        raise SchemaError(path, "empty table")
    depths = {len(w) for w in clean}
    if len(depths) != 1 or 0 in depths:
        raise SchemaError(path, f"keys must share one positive length, got {sorted(depths)}")
    depth = depths.pop()
    for w in sorted(clean):
        if any(d > spec.alphabet_top for d in w) or not is_admissible_on(w, spec, side):
            raise InadmissibleTableKey(w)
    missing = [w for w in language_on(depth, spec, side) if w not in clean]
    if missing:
        raise SchemaError(path, "missing words " + ", ".join(format_word(w) for w in missing[:8]))
    if not 0 < theta <= 1:
        raise SchemaError("potential.theta", f"must lie in (0, 1], got {theta}")
    return Potential(depth, clean, theta, holder_constant(clean, theta), side)


def digit_potential(values: Sequence[float], spec: BetaSpec) -> Potential:
    """Depth-1 potential A(x) = values[x_1]."""
    return make_potential({(a,): v for a, v in enumerate(values)}, spec)


# Cylinder bases


class TailStates:
    """Where a point sits against the finite orbit {sigma^j x^beta}, sorted increasingly.

    A future x is labelled by the number of orbit points strictly below it; that
    count decides every comparison a·x <= sigma^j x^beta. A past y is labelled
    by the orbit point the Parry automaton ends in after reading y from its
    remote end, and the digits that may precede y are those up to that point's
    first digit. A bilateral pair (y, x) is admissible iff x <= T(y).
    """

    def __init__(self, xbeta: EventuallyPeriodicSeq) -> None:
        self.xbeta = xbeta
        orbit = {xbeta.shift(j) for j in range(xbeta.window)}
        self.points = tuple(sorted(orbit, key=cmp_to_key(lex_compare)))
        rank = {p: i for i, p in enumerate(self.points)}
        self.top = rank[xbeta]
        self.heads = tuple(p.digit(1) for p in self.points)
        self.next = tuple(rank[p.shift(1)] for p in self.points)

    def forward_state(self, x: EventuallyPeriodicSeq) -> int:
        return sum(1 for p in self.points if lex_compare(p, x) == Ordering.LT)

    def transpose_state(self, y: EventuallyPeriodicSeq) -> int | None:
        """Rank of T(y), None when y is not in the transposed shift."""
        n = 2 * (y.window + self.xbeta.window) + 2
        q = self.top
        for d in reversed(y.prefix(n)):
            if d < self.heads[q]:
                q = self.top
            elif d == self.heads[q]:
                q = self.next[q]
            else:
                return None
        return q

    def state(self, x: EventuallyPeriodicSeq, side: str) -> int | None:
        return self.forward_state(x) if side == FORWARD else self.transpose_state(x)

    def allowed(self, s: int, side: str) -> tuple[int, ...]:
        """Digits a with a·x in the shift for x in state s."""
        if side == FORWARD:
            h, nxt = self.heads[self.top], self.next[self.top]
            return tuple(range(h)) + ((h,) if s <= nxt else ())
        return tuple(range(self.heads[s] + 1))

    def step(self, s: int, a: int, side: str) -> int:
        """State of a·x from the state of x."""
        if side == FORWARD:
            return sum(1 for r, h in enumerate(self.heads) if h < a or (h == a and self.next[r] < s))
        return self.top if a < self.heads[s] else self.next[s]


@lru_cache(maxsize=64)
def tail_states(spec: BetaSpec) -> TailStates | None:
    """Tail labelling of an eventually periodic x^beta; None for a truncated stream."""
    return TailStates(spec.xbeta) if spec.xbeta is not None else None


@dataclass(frozen=True, eq=False)
class CylinderBasis:
    """Depth-k cylinders, each split by the tail states its points actually take.

    The branch set {a : a·x admissible} and the cell of a·x depend on x only
    through its depth-k word and its tail state, so the operator on these cells
    is exact for potentials of depth <= k. On a shift of finite type at depth
    >= the memory every word carries one state. A truncated x^beta falls back to
    plain depth-k words.
    """

    depth: int
    side: str
    words: tuple[Word, ...]
    states: tuple[int, ...]
    representatives: tuple[EventuallyPeriodicSeq, ...]
    branches: tuple[tuple[tuple[int, int], ...], ...]
    tails: TailStates | None = None

    @property
    def size(self) -> int:
        return len(self.words)

    @property
    def exact(self) -> bool:
        return self.tails is not None

    @cached_property
    def split_words(self) -> frozenset[Word]:
        counts = Counter(self.words)
        return frozenset(w for w, n in counts.items() if n > 1)

    @cached_property
    def labels(self) -> tuple[str, ...]:
        out = []
        piece: dict[Word, int] = {}
        for w in self.words:
            if w in self.split_words:
                out.append(f"{format_word(w)}#{piece.get(w, 0)}")
                piece[w] = piece.get(w, 0) + 1
            else:
                out.append(format_word(w))
        return tuple(out)

    @cached_property
    def _cells(self) -> dict[tuple[Word, int], int]:
        return {key: i for i, key in enumerate(zip(self.words, self.states))}

    def digits(self, i: int) -> tuple[int, ...]:
        return tuple(a for a, _ in self.branches[i])

    def same_cells(self, other: "CylinderBasis") -> bool:
        return self.side == other.side and self.words == other.words and self.states == other.states

    def locate(self, x: Sequenceish) -> int:
        """Index of the cell holding x (a word is 0^inf-padded)."""
        x = as_sequence(x)
        w = x.prefix(self.depth)
        s = self.tails.state(x, self.side) if self.tails is not None else 0
        try:
            return self._cells[(w, s)]
        except KeyError:
            raise NotAdmissible(f"{x} lies in no depth-{self.depth} cell on the {self.side} side") from None


def _word_basis(spec: BetaSpec, k: int, side: str, cap: int) -> CylinderBasis:
    words = language_on(k, spec, side, cap=cap)
    index = {w: i for i, w in enumerate(words)}
    branches = tuple(tuple((a, index[((a,) + w)[:k]]) for a in branch_digits(w, spec, side)) for w in words)
    return CylinderBasis(k, side, words, (0,) * len(words), tuple(padded(w) for w in words), branches)


def _refined_basis(spec: BetaSpec, k: int, side: str, cap: int, tails: TailStates) -> CylinderBasis:
    found: dict[tuple[Word, int], EventuallyPeriodicSeq] = {}
    stack: list[tuple[Word, int]] = []
    for w in language_on(k, spec, side, cap=cap):
        x = padded(w)
        key = (w, tails.state(x, side))
        if key not in found:
            found[key] = x
            stack.append(key)
    # cells of every admissible v·0^inf are reached by prepending digits
    while stack:
        w, s = stack.pop()
        x = found[(w, s)]
        for a in tails.allowed(s, side):
            key = (((a,) + w)[:k], tails.step(s, a, side))
            if key not in found:
                found[key] = x.prepend((a,))
                stack.append(key)
        if len(found) > cap:
            raise ResourceCapExceeded(f"cells at depth {k}", len(found), cap)
    keys = sorted(found)
    index = {key: i for i, key in enumerate(keys)}
    branches = tuple(
        tuple((a, index[(((a,) + w)[:k], tails.step(s, a, side))]) for a in tails.allowed(s, side)) for w, s in keys
    )
    return CylinderBasis(
        k,
        side,
        tuple(w for w, _ in keys),
        tuple(s for _, s in keys),
        tuple(found[key] for key in keys),
        branches,
        tails,
    )


@lru_cache(maxsize=256)
def cylinder_basis(spec: BetaSpec, k: int, side: str = FORWARD, cap: int = DEFAULT_LANGUAGE_CAP) -> CylinderBasis:
    tails = tail_states(spec)
    if tails is None:
        log.warning(
            "[basis] x^beta known to %d digits only; depth-%d %s cylinders approximate the operator",
            len(spec.stream),
            k,
            side,
        )
        return _word_basis(spec, k, side, cap)
    basis = _refined_basis(spec, k, side, cap, tails)
    if basis.split_words:
        log.debug("[basis] depth=%d side=%s cells=%d split words=%d", k, side, basis.size, len(basis.split_words))
    return basis


# Cylinder functions and measures


@lru_cache(maxsize=256)
def cylinder_words(spec: BetaSpec, k: int, side: str = FORWARD, cap: int = DEFAULT_LANGUAGE_CAP) -> tuple[Word, ...]:
    return language_on(k, spec, side, cap=cap)


@dataclass(frozen=True, eq=False)
class CylinderFunction:
    depth: int
    words: tuple[Word, ...]
    values: np.ndarray
    side: str = FORWARD
    basis: CylinderBasis | None = None

    @classmethod
    def from_basis(cls, basis: CylinderBasis, values: np.ndarray | Sequence[float]):
        return cls(basis.depth, basis.words, np.asarray(values, dtype=float), basis.side, basis)

    @cached_property
    def _index(self) -> dict[Word, int]:
        return {w: i for i, w in enumerate(self.words)}

    @cached_property
    def _split(self) -> frozenset[Word]:
        return self.basis.split_words if self.basis is not None else frozenset()

    def __getitem__(self, w: Sequence[int]) -> float:
        w = tuple(w)
        if w in self._split:
            raise KeyError(f"cylinder {format_word(w)} is split by tail state; use at()")
        return float(self.values[self._index[w]])

    def __len__(self) -> int:
        return len(self.words)

    @property
    def labels(self) -> tuple[str, ...]:
        if self.basis is not None:
            return self.basis.labels
        return tuple(format_word(w) for w in self.words)

    def at(self, x: EventuallyPeriodicSeq | Sequence[int]) -> float:
        """Value on the cell containing x (a word is 0^inf-padded)."""
        if self.basis is not None:
            return float(self.values[self.basis.locate(as_sequence(x))])
        if isinstance(x, EventuallyPeriodicSeq):
            return self[x.prefix(self.depth)]
        w = tuple(x[: self.depth])
        return self[w + (0,) * (self.depth - len(w))]

    def as_dict(self) -> dict[Word, float]:
        if self._split:
            raise ValueError("cylinders split by tail state have no single value per word")
        return {w: float(v) for w, v in zip(self.words, self.values)}

    def with_values(self, values: np.ndarray) -> "CylinderFunction":
        return replace(self, values=np.asarray(values, dtype=float))


@dataclass(frozen=True, eq=False)
class CylinderMeasure(CylinderFunction):
    @property
    def masses(self) -> np.ndarray:
        return self.values

    @property
    def total(self) -> float:
        return float(self.values.sum())

    def mass_of(self, prefix: Sequence[int]) -> float:
        p = tuple(prefix)
        if len(p) > self.depth:
            raise DepthMismatch(self.depth, len(p))
        return float(sum(v for w, v in zip(self.words, self.values) if w[: len(p)] == p))

    def as_dict(self) -> dict[Word, float]:
        """Mass of each depth-k cylinder, pieces of a split cylinder added up."""
        out: dict[Word, float] = {}
        for w, v in zip(self.words, self.values):
            out[w] = out.get(w, 0.0) + float(v)
        return out

    def coarsen(self) -> dict[Word, float]:
        """Masses of the depth k-1 cylinders [w] = union of [w b]."""
        out: dict[Word, float] = {}
        for w, v in zip(self.words, self.values):
            out[w[:-1]] = out.get(w[:-1], 0.0) + float(v)
        return out

    def normalized(self) -> "CylinderMeasure":
        return replace(self, values=self.values / self.values.sum())


def constant_function(spec: BetaSpec, k: int, value: float = 1.0, side: str = FORWARD) -> CylinderFunction:
    basis = cylinder_basis(spec, k, side)
    return CylinderFunction.from_basis(basis, np.full(basis.size, float(value)))


def uniform_measure(spec: BetaSpec, k: int, side: str = FORWARD) -> CylinderMeasure:
    basis = cylinder_basis(spec, k, side)
    return CylinderMeasure.from_basis(basis, np.full(basis.size, 1.0 / basis.size))


def function_from(values: Mapping[Word, float] | Iterable[float], spec: BetaSpec, k: int, side: str = FORWARD) -> CylinderFunction:
    """A function of the depth-k word (lifted to every piece), or one value per cell."""
    basis = cylinder_basis(spec, k, side)
    if isinstance(values, Mapping):
        arr = np.array([float(values[w]) for w in basis.words])
    else:
        arr = np.asarray(list(values), dtype=float)
        if len(arr) != basis.size:
            raise ValueError(f"expected {basis.size} values, got {len(arr)}")
    return CylinderFunction.from_basis(basis, arr)


def measure_from(values: Iterable[float], spec: BetaSpec, k: int, side: str = FORWARD) -> CylinderMeasure:
    """One mass per cell of the depth-k basis."""
    basis = cylinder_basis(spec, k, side)
    arr = np.asarray(list(values), dtype=float)
    if len(arr) != basis.size:
        raise ValueError(f"expected {basis.size} masses, got {len(arr)}")
    return CylinderMeasure.from_basis(basis, arr)


# Operator matrix


def branch_digits(w: Word, spec: BetaSpec, side: str = FORWARD) -> tuple[int, ...]:
    """Preimage digits of the padded point w·0^inf: {a : a·w admissible}."""
    return tuple(a for a in range(spec.alphabet_top + 1) if is_admissible_on((a,) + w, spec, side))


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    """L_A on the cells of a basis as (row, col, log weight) entries."""

    basis: CylinderBasis
    rows: np.ndarray
    cols: np.ndarray
    log_weights: np.ndarray

    @property
    def depth(self) -> int:
        return self.basis.depth

    @property
    def side(self) -> str:
        return self.basis.side

    @property
    def words(self) -> tuple[Word, ...]:
        return self.basis.words

    @property
    def size(self) -> int:
        return self.basis.size

    @property
    def shift(self) -> float:
        return float(self.log_weights.max())

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        """Entries exp(log weight - shift), all <= 1."""
        n = self.size
        return sp.csr_matrix((np.exp(self.log_weights - self.shift), (self.rows, self.cols)), shape=(n, n))

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        n = self.size
        return sp.csr_matrix((np.ones(len(self.rows)), (self.rows, self.cols)), shape=(n, n))


def transfer_matrix(A: Potential, k: int, spec: BetaSpec, *, cap: int = DEFAULT_LANGUAGE_CAP) -> TransferMatrix:
    if k < A.depth:
        raise DepthMismatch(k, A.depth)
    basis = cylinder_basis(spec, k, A.side, cap)
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for i, (w, branches) in enumerate(zip(basis.words, basis.branches)):
        for a, j in branches:
            rows.append(i)
            cols.append(j)
            vals.append(A.table[((a,) + w)[: A.depth]])
    return TransferMatrix(
        basis,
        np.asarray(rows, dtype=np.int64),
        np.asarray(cols, dtype=np.int64),
        np.asarray(vals, dtype=float),
    )


def _matrix_for(A: Potential, f: CylinderFunction, spec: BetaSpec) -> TransferMatrix:
    if f.depth < A.depth:
        raise DepthMismatch(f.depth, A.depth)
    tm = transfer_matrix(A, f.depth, spec)
    if f.basis is not None and not f.basis.same_cells(tm.basis):
        raise ValueError("function and operator live on different cells")
    if len(f) != tm.size:
        raise ValueError(f"expected {tm.size} cell values, got {len(f)}")
    return tm


def apply_transfer(A: Potential, phi: CylinderFunction, spec: BetaSpec) -> CylinderFunction:
    tm = _matrix_for(A, phi, spec)
    return CylinderFunction.from_basis(tm.basis, math.exp(tm.shift) * (tm.matrix @ phi.values))


def adjoint_apply(A: Potential, m: CylinderMeasure, spec: BetaSpec) -> CylinderMeasure:
    """L*_A m, unnormalized."""
    tm = _matrix_for(A, m, spec)
    return CylinderMeasure.from_basis(tm.basis, math.exp(tm.shift) * (tm.matrix.T @ m.values))


# Spectral data


@dataclass(frozen=True, eq=False)
class SpectralTriple:
    eigenvalue: float
    log_eigenvalue: float
    psi: CylinderFunction
    rho: CylinderMeasure
    gibbs: CylinderMeasure
    log_psi: np.ndarray
    log_rho: np.ndarray
    t: float
    iterations: int
    residual: float

    @property
    def words(self) -> tuple[Word, ...]:
        return self.psi.words

    @property
    def basis(self) -> CylinderBasis:
        return self.psi.basis

    @property
    def log_gibbs(self) -> np.ndarray:
        return self.log_psi + self.log_rho


class _LogOperator:
    """y_i = log sum_j M_ij e^{phi_j}, entries grouped by target."""

    def __init__(self, targets: np.ndarray, sources: np.ndarray, log_weights: np.ndarray, n: int) -> None:
        order = np.lexsort((sources, targets))
        self.sources = sources[order]
        self.log_weights = log_weights[order]
        counts = np.bincount(targets[order], minlength=n)
        if (counts == 0).any():
            raise NonPrimitive("a cylinder has no preimage branch")
        self.starts = np.concatenate(([0], np.cumsum(counts)[:-1]))

    def __call__(self, phi: np.ndarray) -> np.ndarray:
        return np.logaddexp.reduceat(self.log_weights + phi[self.sources], self.starts)


def _perron_log_vector(op: _LogOperator, n: int, tol: float, max_iter: int, t: float) -> tuple[np.ndarray, float, int, float]:
    """Damped power iteration on log phi.

    Each step applies L + s I with log s the midpoint of the Collatz-Wielandt
    bounds, so iterates of near-periodic matrices still contract. Stops once the
    bounds pinch to tol (or to the float resolution of the iterates) and the
    estimate has settled.
    """
    phi = np.zeros(n)
    log_lam_prev = math.nan
    spread = math.inf
    for it in range(1, max_iter + 1):
        y = op(phi)
        r = y - phi
        lo, hi = float(r.min()), float(r.max())
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise IllConditioned("transfer iterate left the floating range", spread)
        spread = hi - lo
        log_lam = 0.5 * (lo + hi)
        floor = 16 * _EPS * max(1.0, float(np.abs(y).max()))
        if spread <= max(tol, floor) and abs(log_lam - log_lam_prev) <= max(tol, floor):
            return phi, log_lam, it, spread
        log_lam_prev = log_lam
        phi = np.logaddexp(y, log_lam + phi)
        phi -= phi.max()
    raise NoConvergence(spread, max_iter, t)


def power_iteration(
    A: Potential,
    k: int,
    spec: BetaSpec,
    tol: float = 1e-12,
    max_iter: int = 100_000,
    *,
    t: float = 1.0,
    cap: int = DEFAULT_LANGUAGE_CAP,
) -> SpectralTriple:
    """Perron eigendata of L_A at depth k; psi is scaled so that sum psi rho = 1."""
    if not spec.spec_gap.exact:
        log.warning("[spectrum] specification not certified (%s)", spec.describe())
    tm = transfer_matrix(A, k, spec, cap=cap)
    n = tm.size
    n_comp, _ = connected_components(tm.adjacency, directed=True, connection="strong")
    if n_comp > 1:
        raise NonPrimitive(f"cylinder graph at depth {k} splits into {n_comp} strong components")

    forward = _LogOperator(tm.rows, tm.cols, tm.log_weights, n)
    adjoint = _LogOperator(tm.cols, tm.rows, tm.log_weights, n)
    log_psi, log_lam, it_f, _ = _perron_log_vector(forward, n, tol, max_iter, t)
    log_rho, _, it_a, _ = _perron_log_vector(adjoint, n, tol, max_iter, t)
    log_rho = log_rho - logsumexp(log_rho)
    log_psi = log_psi - logsumexp(log_psi + log_rho)
    log_gibbs = log_psi + log_rho
    log_gibbs = log_gibbs - logsumexp(log_gibbs)

    # sup-norm residual of (L psi - lambda psi) / lambda with psi scaled to sup 1
    top = float(log_psi.max())
    residual = float(np.abs(np.exp(forward(log_psi - top) - log_lam) - np.exp(log_psi - top)).max())

    log.debug("[spectrum] side=%s k=%d t=%g log_lambda=%.15g iterations=%d/%d", A.side, k, t, log_lam, it_f, it_a)
    with np.errstate(over="ignore", under="ignore"):
        psi = np.exp(log_psi)
        rho = np.exp(log_rho)
        gibbs = np.exp(log_gibbs)
    return SpectralTriple(
        eigenvalue=math.exp(log_lam) if log_lam < 700 else math.inf,
        log_eigenvalue=float(log_lam),
        psi=CylinderFunction.from_basis(tm.basis, psi),
        rho=CylinderMeasure.from_basis(tm.basis, rho),
        gibbs=CylinderMeasure.from_basis(tm.basis, gibbs),
        log_psi=log_psi,
        log_rho=log_rho,
        t=t,
        iterations=max(it_f, it_a),
        residual=residual,
    )


def dense_perron_root(A: Potential, k: int, spec: BetaSpec) -> float:
    """Largest real eigenvalue of the same matrix by a dense solve."""
    tm = transfer_matrix(A, k, spec)
    ev = scipy.linalg.eigvals(tm.matrix.toarray())
    return float(np.max(ev.real)) * math.exp(tm.shift)


# Cone and invariance checks


def cone_membership(phi: CylinderFunction, K: float, theta: float, spec: BetaSpec) -> tuple[bool, float]:
    """phi in Lambda_K after scaling to sup 1.

    Cells are compared only when they have the same branch set and different
    words; pieces of one split cylinder hold points at every distance. Returns
    (member, worst ratio phi(w)/phi(v)/e^{K d^theta}).
    """
    vals = np.asarray(phi.values, dtype=float)
    if not (vals > 0).all():
        return False, math.inf
    vals = vals / vals.max()
    basis = phi.basis or cylinder_basis(spec, phi.depth, phi.side)
    groups: dict[tuple[int, ...], list[int]] = {}
    for i in range(basis.size):
        groups.setdefault(basis.digits(i), []).append(i)
    worst = 1.0
    for members in groups.values():
        for i in members:
            for j in members:
                if phi.words[i] != phi.words[j]:
                    d = shift_metric(phi.words[i], phi.words[j])
                    worst = max(worst, (vals[i] / vals[j]) / math.exp(K * d**theta))
    return worst <= 1.0 + 1e-12, worst


def invariance_check(mu: CylinderMeasure, spec: BetaSpec) -> float:
    """max_w |mu(sigma^-1 [w]) - mu([w])| over depth k-1 cylinders."""
    if mu.depth < 2:
        raise ValueError("invariance needs depth >= 2")
    coarse = mu.coarsen()
    pre: dict[Word, float] = {}
    for w, v in zip(mu.words, mu.values):
        pre[w[1:]] = pre.get(w[1:], 0.0) + float(v)
    return max(abs(pre.get(w, 0.0) - coarse.get(w, 0.0)) for w in set(coarse) | set(pre))
