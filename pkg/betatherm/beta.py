"""beta-expansions, the Parry criterion and the language of the beta-shift.

Two ways in:

- numeric beta: digits computed with mpmath at the working precision under a tie guard
- digit presentation "pre(period)" of the quasi-greedy expansion of 1, beta recovered
  by bisection (the reference mode for everything downstream)

Admissibility uses the non-strict criterion sigma^k(w 0^inf) <= x^beta.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence, Union

import mpmath as mp
import numpy as np
from scipy import optimize

from betatherm.errors import (
    NotAdmissible,
    NotQuasiGreedy,
    PrecisionBreach,
    ResourceCapExceeded,
    UnknownAtDepth,
)
from betatherm.symbolic import (
    EventuallyPeriodicSeq,
    Ordering,
    Word,
    format_word,
    lex_compare,
    parse_sequence,
    transpose_word,
)

log = logging.getLogger(__name__)

DEFAULT_DPS = 50
DEFAULT_GUARD = 1e-12
DEFAULT_LANGUAGE_CAP = 2_000_000

BetaLike = Union[float, int, str, "mp.mpf"]


@dataclass(frozen=True)
class SpecificationGap:
    """Maximal run of 0s in x^beta; a lower bound when x^beta is truncated."""

    n0: int
    exact: bool
    depth: int | None = None


@dataclass(frozen=True)
class BetaSpec:
    beta: float
    alphabet_top: int
    xbeta: EventuallyPeriodicSeq | None
    stream: Word = ()
    spec_gap: SpecificationGap = field(default=SpecificationGap(0, True))
    beta_hp: str = field(default="", compare=False, repr=False)

    @property
    def is_periodic(self) -> bool:
        return self.xbeta is not None

    @property
    def memory(self) -> int:
        """Length of the finite presentation of x^beta."""
        if self.xbeta is not None:
            return self.xbeta.window
        return len(self.stream)

    def xbeta_prefix(self, n: int) -> Word:
        if self.xbeta is not None:
            return self.xbeta.prefix(n)
        if n > len(self.stream):
            raise UnknownAtDepth(len(self.stream))
        return self.stream[:n]

    def describe(self) -> str:
        x = str(self.xbeta) if self.xbeta is not None else format_word(self.stream) + "..."
        gap = f"n0={self.spec_gap.n0}" + ("" if self.spec_gap.exact else "+")
        return f"beta={self.beta:.15g} x^beta={x} {gap}"

    @classmethod
    def from_digits(cls, digits: str | EventuallyPeriodicSeq, *, dps: int = DEFAULT_DPS) -> "BetaSpec":
        d = parse_sequence(digits) if isinstance(digits, str) else digits
        root = _beta_root(d, dps)
        with mp.workdps(dps):
            # digits run over 0..floor(beta); for integer beta the top digit is never admissible
            return cls(
                beta=float(root),
                alphabet_top=int(mp.floor(root)),
                xbeta=d,
                spec_gap=specification_gap_of(d),
                beta_hp=mp.nstr(root, dps),
            )

    @classmethod
    def from_value(
        cls,
        beta: BetaLike,
        *,
        n_digits: int = 64,
        dps: int = DEFAULT_DPS,
        guard: float = DEFAULT_GUARD,
    ) -> "BetaSpec":
        with mp.workdps(dps):
            b = mp.mpf(beta)
            if b <= 1:
                raise ValueError("beta must exceed 1")
            top = int(mp.floor(b))
            x = quasi_greedy_of_one(b, n_digits, dps=dps, guard=guard)
            if isinstance(x, EventuallyPeriodicSeq):
                return cls(float(b), top, x, (), specification_gap_of(x), mp.nstr(b, dps))
            gap = _max_zero_run(x)
            log.warning("[beta] x^beta not eventually periodic within %d digits; truncated", n_digits)
            return cls(float(b), top, None, x, SpecificationGap(gap, False, len(x)), mp.nstr(b, dps))


# Greedy / quasi-greedy


def _hp(spec_or_beta: BetaSpec | BetaLike) -> "mp.mpf":
    if isinstance(spec_or_beta, BetaSpec):
        return mp.mpf(spec_or_beta.beta_hp or spec_or_beta.beta)
    return mp.mpf(spec_or_beta)


def _greedy_run(alpha: BetaLike, beta: BetaLike, n: int, dps: int, guard: float) -> tuple[Word, bool, list]:
    """First n greedy digits, whether the expansion terminated, and the remainders.

    rests[i] is the remainder after i digits, so rests[0] = alpha.
    """
    with mp.workdps(dps):
        b = mp.mpf(beta)
        r = mp.mpf(alpha)
        top = int(mp.floor(b))
        exact = mp.mpf(10) ** (-(dps - 10))
        if r < 0 or r > top / (b - 1) + exact:
            raise ValueError(f"alpha={alpha} outside [0, {mp.nstr(top / (b - 1), 12)}]")
        digits: list[int] = []
        rests = [r]
        for i in range(1, n + 1):
            if r == 0:
                return tuple(digits) + (0,) * (n - len(digits)), True, rests
            v = b * r
            j = int(mp.nint(v))
            dist = abs(v - j)
            if 1 <= j <= top and dist <= guard:
                if dist > exact:
                    raise PrecisionBreach(i, float(dist))
                digits.append(j)
                r = mp.mpf(0)
                rests.append(r)
                continue
            d = min(int(mp.floor(v)), top)
            digits.append(d)
            r = v - d
            rests.append(r)
        return tuple(digits), r == 0, rests


def _greedy_digits(alpha: BetaLike, beta: BetaLike, n: int, dps: int, guard: float) -> tuple[Word, bool]:
    digits, finite, _ = _greedy_run(alpha, beta, n, dps, guard)
    return digits, finite


def greedy_expansion(
    alpha: BetaLike, beta: BetaLike, n: int, *, dps: int = DEFAULT_DPS, guard: float = DEFAULT_GUARD
) -> Word:
    """First n digits of the lexicographically largest beta-expansion of alpha."""
    digits, _ = _greedy_digits(alpha, beta, n, dps, guard)
    return digits


def quasi_greedy_of_one(
    beta: BetaLike, n: int, *, dps: int = DEFAULT_DPS, guard: float = DEFAULT_GUARD
) -> EventuallyPeriodicSeq | Word:
    """x^beta within n digits, else the n greedy digits.

    A finite greedy expansion d_1 ... d_m of 1 gives (d_1 ... d_m - 1)^inf. An
    infinite one is the quasi-greedy expansion itself; it is eventually periodic
    exactly when the greedy map revisits a remainder.
    """
    digits, finite, rests = _greedy_run(1, beta, n, dps, guard)
    if finite:
        w = list(digits)
        while w and w[-1] == 0:
            w.pop()
        w[-1] -= 1
        return EventuallyPeriodicSeq((), tuple(w))
    with mp.workdps(dps):
        tol = mp.mpf(10) ** (-(dps // 2))
        for j in range(1, len(rests)):
            for i in range(j):
                if abs(rests[j] - rests[i]) <= tol:
                    return EventuallyPeriodicSeq(digits[:i], digits[i:j])
    return digits


def _series(d: EventuallyPeriodicSeq, b):
    pre = sum(dig * b ** (-(i + 1)) for i, dig in enumerate(d.preperiod))
    L, P = len(d.preperiod), len(d.period)
    per = sum(dig * b ** (-(i + 1)) for i, dig in enumerate(d.period))
    return pre + b ** (-L) * per / (1 - b ** (-P))


def _is_self_admissible(d: EventuallyPeriodicSeq) -> bool:
    return all(lex_compare(d.shift(k), d) != Ordering.GT for k in range(1, d.window + 1))


def _beta_root(d: EventuallyPeriodicSeq, dps: int) -> "mp.mpf":
    if d.is_finite_support:
        raise NotQuasiGreedy(f"{d} has finitely many nonzero digits")
    if not _is_self_admissible(d):
        raise NotQuasiGreedy(f"{d} is not self-admissible")
    hi = max(d.preperiod + d.period) + 1.5
    beta_f = optimize.bisect(lambda b: float(_series(d, b)) - 1.0, 1.0 + 1e-9, hi, xtol=1e-15, rtol=1e-15)
    with mp.workdps(dps):
        root = mp.findroot(lambda b: _series(d, b) - 1, mp.mpf(beta_f))
        exact = mp.mpf(10) ** (-(dps - 10))
        if abs(root - mp.nint(root)) <= exact:
            root = mp.nint(root)
        n = max(16, d.window + 2 * len(d.period))
        back = quasi_greedy_of_one(root, n, dps=dps)
        same = back == d if isinstance(back, EventuallyPeriodicSeq) else back == d.prefix(n)
        if not same:
            raise NotQuasiGreedy(f"{d} does not round-trip (got {back})")
        return root


def beta_from_digits(d: str | EventuallyPeriodicSeq, *, dps: int = DEFAULT_DPS) -> float:
    """The beta > 1 whose quasi-greedy expansion of 1 is d."""
    seq = parse_sequence(d) if isinstance(d, str) else d
    return float(_beta_root(seq, dps))


def evaluate_beta_x(x: EventuallyPeriodicSeq, spec: BetaSpec) -> float:
    """sum x_n beta^-n, closed form."""
    with mp.workdps(DEFAULT_DPS):
        return float(_series(x, _hp(spec)))


# Specification gap


def _max_zero_run(digits: Sequence[int]) -> int:
    best = run = 0
    for d in digits:
        run = run + 1 if d == 0 else 0
        best = max(best, run)
    return best


def specification_gap_of(x: EventuallyPeriodicSeq) -> SpecificationGap:
    return SpecificationGap(_max_zero_run(x.prefix(len(x.preperiod) + 2 * len(x.period))), True)


def specification_gap(spec: BetaSpec) -> SpecificationGap:
    return spec.spec_gap


# Admissibility


def _suffix_ok(s: Word, spec: BetaSpec) -> bool:
    """s·0^inf <= x^beta on the first |s| digits (the tail can only help)."""
    if spec.xbeta is None and len(s) > len(spec.stream):
        head = s[: len(spec.stream)]
        order = lex_compare(head, spec.stream)
        if order == Ordering.EQ:
            raise UnknownAtDepth(len(spec.stream))
        return order == Ordering.LT
    return lex_compare(s, spec.xbeta_prefix(len(s))) != Ordering.GT


def _check_digits(w: Sequence[int], spec: BetaSpec) -> None:
    if any(d < 0 or d > spec.alphabet_top for d in w):
        raise ValueError(f"digit outside alphabet 0..{spec.alphabet_top} in {format_word(w)!r}")


def is_admissible_word(w: Sequence[int], spec: BetaSpec) -> bool:
    w = tuple(w)
    _check_digits(w, spec)
    return all(_suffix_ok(w[j:], spec) for j in range(len(w)))


def is_admissible_transpose(w: Sequence[int], spec: BetaSpec) -> bool:
    return is_admissible_word(transpose_word(w), spec)


def is_admissible_on(w: Sequence[int], spec: BetaSpec, side: str) -> bool:
    if side == "transpose":
        return is_admissible_transpose(w, spec)
    return is_admissible_word(w, spec)


def is_admissible_sequence(x: EventuallyPeriodicSeq, spec: BetaSpec) -> bool:
    """Exact membership of an eventually periodic point in Sigma_beta."""
    _check_digits(x.preperiod + x.period, spec)
    if spec.xbeta is None:
        depth = len(spec.stream)
        for k in range(x.window):
            order = lex_compare(x.shift(k).prefix(depth), spec.stream)
            if order == Ordering.GT:
                return False
            if order == Ordering.EQ:
                raise UnknownAtDepth(depth)
        return True
    return all(lex_compare(x.shift(k), spec.xbeta) != Ordering.GT for k in range(x.window))


def require_admissible_sequence(x: EventuallyPeriodicSeq, spec: BetaSpec) -> None:
    if not is_admissible_sequence(x, spec):
        raise NotAdmissible(f"{x} is not in the beta-shift ({spec.describe()})")


# Language


@lru_cache(maxsize=256)
def _forward_language(spec: BetaSpec, n: int, cap: int) -> tuple[Word, ...]:
    if n == 0:
        return ((),)
    shorter = _forward_language(spec, n - 1, cap)
    out: list[Word] = []
    for w in shorter:
        for a in range(spec.alphabet_top + 1):
            aw = (a,) + w
            # suffixes of w were checked one level down
            if _suffix_ok(aw, spec):
                out.append(aw)
        if len(out) > cap:
            raise ResourceCapExceeded(f"language at depth {n}", len(out), cap)
    out.sort()
    return tuple(out)


def enumerate_language(
    n: int, spec: BetaSpec, transpose: bool = False, *, cap: int = DEFAULT_LANGUAGE_CAP
) -> tuple[Word, ...]:
    """Sorted admissible words of length n, built by left extension."""
    if n < 0:
        raise ValueError("depth must be nonnegative")
    words = _forward_language(spec, n, cap)
    if transpose:
        return tuple(sorted(transpose_word(w) for w in words))
    return words


def language_on(n: int, spec: BetaSpec, side: str, *, cap: int = DEFAULT_LANGUAGE_CAP) -> tuple[Word, ...]:
    return enumerate_language(n, spec, transpose=(side == "transpose"), cap=cap)


# Finite presentation


def presentation_matrix(spec: BetaSpec) -> np.ndarray:
    """Adjacency counts of the Parry automaton; state 0 is the start state.

    State j means the longest suffix read so far matches x^beta_1 ... x^beta_j.
    Digits below x^beta_{j+1} reset to 0, the digit x^beta_{j+1} advances, and the
    last state wraps to the start of the period.
    """
    if spec.xbeta is None:
        raise UnknownAtDepth(len(spec.stream), "finite presentation")
    x = spec.xbeta
    L, P = len(x.preperiod), len(x.period)
    n_states = L + P
    mat = np.zeros((n_states, n_states), dtype=np.int64)
    for j in range(n_states):
        xd = x.digit(j + 1)
        mat[j, 0] += xd
        nxt = j + 1 if j + 1 < n_states else L
        mat[j, nxt] += 1
    return mat


def count_words_by_presentation(n: int, spec: BetaSpec) -> int:
    mat = presentation_matrix(spec)
    start = np.zeros(mat.shape[0], dtype=np.int64)
    start[0] = 1
    return int((start @ np.linalg.matrix_power(mat, n)).sum())
