"""Words, eventually periodic sequences and the maps between them.

A word is a plain tuple of digits so it hashes and sorts for free. Infinite
sequences only ever appear as EventuallyPeriodicSeq; a bare word standing for a
point means the word followed by 0^inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence, Union

Word = tuple[int, ...]


class Ordering(IntEnum):
    LT = -1
    EQ = 0
    GT = 1


def _primitive_root(period: Word) -> Word:
    n = len(period)
    for p in range(1, n + 1):
        if n % p == 0 and period[:p] * (n // p) == period:
            return period[:p]
    return period


@dataclass(frozen=True)
class EventuallyPeriodicSeq:
    """pre·(period)^inf, stored in canonical form.

    Canonical means: the period is primitive and the preperiod does not end with
    the last digit of the period (that digit is rolled into the period instead).
    """

    preperiod: Word
    period: Word

    def __post_init__(self) -> None:
        pre = tuple(int(d) for d in self.preperiod)
        per = tuple(int(d) for d in self.period)
        if not per:
            raise ValueError("period must be nonempty")
        if any(d < 0 for d in pre + per):
            raise ValueError("digits must be nonnegative")
        per = _primitive_root(per)
        while pre and pre[-1] == per[-1]:
            pre = pre[:-1]
            per = (per[-1],) + per[:-1]
        object.__setattr__(self, "preperiod", pre)
        object.__setattr__(self, "period", per)

    @property
    def window(self) -> int:
        """Digits needed before the sequence is fully determined by periodicity."""
        return len(self.preperiod) + len(self.period)

    def digit(self, n: int) -> int:
        """n-th digit, 1-based."""
        if n < 1:
            raise ValueError("digits are indexed from 1")
        i = n - 1
        if i < len(self.preperiod):
            return self.preperiod[i]
        return self.period[(i - len(self.preperiod)) % len(self.period)]

    def prefix(self, n: int) -> Word:
        return tuple(self.digit(i) for i in range(1, n + 1))

    def shift(self, k: int = 1) -> "EventuallyPeriodicSeq":
        if k <= len(self.preperiod):
            return EventuallyPeriodicSeq(self.preperiod[k:], self.period)
        r = (k - len(self.preperiod)) % len(self.period)
        return EventuallyPeriodicSeq((), self.period[r:] + self.period[:r])

    def prepend(self, word: Sequence[int]) -> "EventuallyPeriodicSeq":
        return EventuallyPeriodicSeq(tuple(word) + self.preperiod, self.period)

    @property
    def is_finite_support(self) -> bool:
        return all(d == 0 for d in self.period)

    def __str__(self) -> str:
        return f"{format_word(self.preperiod)}({format_word(self.period)})"


Sequenceish = Union[EventuallyPeriodicSeq, Word]

ZERO = EventuallyPeriodicSeq((), (0,))


def padded(word: Sequence[int]) -> EventuallyPeriodicSeq:
    """The 0^inf-padded representative w·0^inf."""
    return EventuallyPeriodicSeq(tuple(word), (0,))


def periodic(word: Sequence[int]) -> EventuallyPeriodicSeq:
    return EventuallyPeriodicSeq((), tuple(word))


def as_sequence(x: Sequenceish) -> EventuallyPeriodicSeq:
    if isinstance(x, EventuallyPeriodicSeq):
        return x
    return padded(x)


# Text form


def format_word(word: Sequence[int]) -> str:
    if any(d > 9 for d in word):
        return ",".join(str(d) for d in word)
    return "".join(str(d) for d in word)


def parse_word(text: str) -> Word:
    text = text.strip()
    if not text:
        return ()
    parts = text.split(",") if "," in text else list(text)
    try:
        digits = tuple(int(p) for p in parts)
    except ValueError:
        raise ValueError(f"not a digit string: {text!r}") from None
    if any(d < 0 for d in digits):
        raise ValueError(f"negative digit in {text!r}")
    return digits


def parse_sequence(text: str) -> EventuallyPeriodicSeq:
    """Parse "pre(period)", e.g. "11(01)"; a bare word means word·0^inf."""
    text = text.strip()
    if "(" not in text:
        return padded(parse_word(text))
    if not text.endswith(")") or text.count("(") != 1:
        raise ValueError(f"expected pre(period), got {text!r}")
    pre, per = text[:-1].split("(")
    return EventuallyPeriodicSeq(parse_word(pre), parse_word(per))


# Order and metric


def _agreement_window(x: EventuallyPeriodicSeq, y: EventuallyPeriodicSeq) -> int:
    return max(len(x.preperiod), len(y.preperiod)) + math.lcm(len(x.period), len(y.period))


def lex_compare(u: Sequenceish, v: Sequenceish) -> Ordering:
    """Lexicographic order on words or on eventually periodic sequences.

    Two words compare on the common prefix first; a proper prefix is LT.
    Two sequences compare exactly. A word against a sequence compares the
    0^inf-padded word.
    """
    if isinstance(u, EventuallyPeriodicSeq) or isinstance(v, EventuallyPeriodicSeq):
        x, y = as_sequence(u), as_sequence(v)
        a = x.prefix(_agreement_window(x, y))
        b = y.prefix(len(a))
    else:
        a, b = tuple(u), tuple(v)
    for da, db in zip(a, b):
        if da != db:
            return Ordering.LT if da < db else Ordering.GT
    if len(a) == len(b):
        return Ordering.EQ
    return Ordering.LT if len(a) < len(b) else Ordering.GT


def shift_metric(x: Sequenceish, y: Sequenceish) -> float:
    """d(x, y) = 2^-(n-1) for the first disagreement at index n, 0 if equal."""
    a, b = as_sequence(x), as_sequence(y)
    n = _agreement_window(a, b)
    for i in range(1, n + 1):
        if a.digit(i) != b.digit(i):
            return 2.0 ** (-(i - 1))
    return 0.0


# Transposition and concatenation


def transpose_word(w: Sequence[int]) -> Word:
    return tuple(reversed(tuple(w)))


def tau_concat(y: Sequenceish, m: int, x: Sequenceish) -> EventuallyPeriodicSeq:
    """(y_m, ..., y_1, x_1, x_2, ...)."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    ys = as_sequence(y)
    return as_sequence(x).prepend(transpose_word(ys.prefix(m)))


@dataclass(frozen=True)
class BilateralPair:
    """(y, x): y is read y_1 y_2 ... into the past, x is the future."""

    past: EventuallyPeriodicSeq
    future: EventuallyPeriodicSeq

    def window(self, m: int) -> Word:
        """y_m ... y_1 x_1 ... x_m."""
        return transpose_word(self.past.prefix(m)) + self.future.prefix(m)

    def __str__(self) -> str:
        return f"{self.past} | {self.future}"


def bilateral_shift(p: BilateralPair) -> BilateralPair:
    """Push x_1 onto the past: (tau_{x,1}(y), sigma(x))."""
    return BilateralPair(p.past.prepend((p.future.digit(1),)), p.future.shift(1))


def bilateral_unshift(p: BilateralPair) -> BilateralPair:
    return BilateralPair(p.past.shift(1), p.future.prepend((p.past.digit(1),)))
