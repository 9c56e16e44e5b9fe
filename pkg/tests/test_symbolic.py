from __future__ import annotations

import itertools

import numpy as np
import pytest

from betatherm.symbolic import (
    ZERO,
    BilateralPair,
    EventuallyPeriodicSeq,
    Ordering,
    bilateral_shift,
    bilateral_unshift,
    format_word,
    lex_compare,
    padded,
    parse_sequence,
    parse_word,
    periodic,
    shift_metric,
    tau_concat,
    transpose_word,
)


def test_parse_and_format_sequence():
    x = parse_sequence("1(100)")
    assert x.preperiod == (1,)
    assert x.period == (1, 0, 0)
    assert str(x) == "1(100)"
    assert x.prefix(7) == (1, 1, 0, 0, 1, 0, 0)


def test_canonical_form_rolls_preperiod_and_reduces_period():
    assert parse_sequence("11(01)") == parse_sequence("1(10)")
    assert EventuallyPeriodicSeq((), (1, 0, 1, 0)) == periodic((1, 0))
    assert padded((1, 0, 0)) == padded((1,))
    assert parse_sequence("0(10)") == periodic((0, 1))


def test_bare_word_is_zero_padded():
    assert parse_sequence("101") == padded((1, 0, 1))
    assert parse_sequence("") == ZERO


def test_digit_indexing_is_one_based():
    x = parse_sequence("2(01)")
    assert x.digit(1) == 2
    assert x.digit(2) == 0
    assert x.digit(5) == 1
    with pytest.raises(ValueError):
        x.digit(0)


def test_shift_and_prepend():
    x = parse_sequence("12(30)")
    assert x.shift(1) == parse_sequence("2(30)")
    assert x.shift(3) == periodic((0, 3))
    assert x.shift(2).prepend((1, 2)) == x


def test_empty_period_rejected():
    with pytest.raises(ValueError):
        EventuallyPeriodicSeq((1,), ())


def test_parse_word_multidigit_alphabet():
    assert parse_word("10,2,0") == (10, 2, 0)
    assert format_word((10, 2, 0)) == "10,2,0"
    assert format_word((1, 0, 1)) == "101"
    with pytest.raises(ValueError):
        parse_word("1a")


def test_lex_compare_words_and_sequences():
    assert lex_compare((1, 0), (1, 1)) == Ordering.LT
    assert lex_compare((1, 1), (1, 0)) == Ordering.GT
    assert lex_compare((1, 0), (1, 0, 0)) == Ordering.LT
    assert lex_compare(padded((1,)), periodic((1, 0))) == Ordering.LT
    assert lex_compare(periodic((1, 0)), parse_sequence("10(10)")) == Ordering.EQ


def test_shift_metric():
    assert shift_metric((1, 0, 1), (1, 1, 1)) == 0.5
    assert shift_metric((0,), (1,)) == 1.0
    assert shift_metric(periodic((1, 0)), parse_sequence("1010(10)")) == 0.0
    assert shift_metric(padded((1, 0, 1)), periodic((1, 0))) == 2.0**-4


def test_transpose_and_tau_concat():
    assert transpose_word((1, 2, 3)) == (3, 2, 1)
    z = tau_concat(padded((1, 2)), 2, padded((3,)))
    assert z.prefix(4) == (2, 1, 3, 0)
    assert tau_concat(padded((1,)), 0, periodic((1, 0))) == periodic((1, 0))
    with pytest.raises(ValueError):
        tau_concat(ZERO, -1, ZERO)


def test_bilateral_shift_round_trip():
    p = BilateralPair(padded((1, 0)), parse_sequence("0(10)"))
    q = bilateral_shift(p)
    assert q.past == padded((0, 1))
    assert q.future == periodic((1, 0))
    assert bilateral_unshift(q) == p


def test_bilateral_window():
    p = BilateralPair(padded((1, 0)), padded((0, 1)))
    assert p.window(2) == (0, 1, 0, 1)
    assert str(p) == "1(0) | 01(0)"


def _random_sequences(rng, n, alphabet=3):
    out = []
    for _ in range(n):
        pre = tuple(int(d) for d in rng.integers(0, alphabet, size=int(rng.integers(0, 4))))
        per = tuple(int(d) for d in rng.integers(0, alphabet, size=int(rng.integers(1, 4))))
        out.append(EventuallyPeriodicSeq(pre, per))
    return out


def test_lex_compare_is_a_total_order():
    rng = np.random.default_rng(7)
    xs = _random_sequences(rng, 30)
    for u in xs:
        assert lex_compare(u, u) == Ordering.EQ
        for v in xs:
            assert lex_compare(u, v) == -lex_compare(v, u)
            assert (lex_compare(u, v) == Ordering.EQ) == (u == v)
            for w in xs:
                if lex_compare(u, v) <= 0 and lex_compare(v, w) <= 0:
                    assert lex_compare(u, w) <= 0


def test_shift_metric_is_ultrametric():
    rng = np.random.default_rng(11)
    xs = _random_sequences(rng, 20, alphabet=2)
    for x, y, z in itertools.product(xs, repeat=3):
        assert shift_metric(x, z) <= max(shift_metric(x, y), shift_metric(y, z))
        assert shift_metric(x, y) == shift_metric(y, x)


def test_tau_concat_grows_one_digit_at_a_time():
    rng = np.random.default_rng(3)
    ys = _random_sequences(rng, 10)
    xs = _random_sequences(rng, 10)
    for y, x in zip(ys, xs):
        for m in range(6):
            assert tau_concat(y, m + 1, x) == tau_concat(y, m, x).prepend((y.digit(m + 1),))


def test_transpose_reverses_concatenation():
    rng = np.random.default_rng(5)
    for _ in range(100):
        v = tuple(int(d) for d in rng.integers(0, 3, size=int(rng.integers(0, 6))))
        w = tuple(int(d) for d in rng.integers(0, 3, size=int(rng.integers(0, 6))))
        assert transpose_word(v + w) == transpose_word(w) + transpose_word(v)


def test_bilateral_shift_of_zero_past():
    p = BilateralPair(ZERO, periodic((0, 1)))
    assert bilateral_shift(p) == BilateralPair(ZERO, periodic((1, 0)))
    assert bilateral_unshift(bilateral_shift(p)) == p
