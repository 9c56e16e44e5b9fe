from __future__ import annotations

import pytest

from betatherm.oracle import (
    PeriodicOrbit,
    birkhoff_average,
    empirical_orbit_measure,
    enumerate_cycles,
    is_lyndon,
    max_orbit_mean,
    necklace_count,
    periodic_point_count,
)
from betatherm.symbolic import periodic
from betatherm.transfer import digit_potential, invariance_check


def test_lyndon_words():
    assert is_lyndon((0,))
    assert is_lyndon((0, 1))
    assert is_lyndon((0, 0, 1))
    assert not is_lyndon((1, 0))
    assert not is_lyndon((0, 1, 0, 1))


def test_golden_cycles_up_to_period_four(golden):
    cycles = enumerate_cycles(4, golden)
    assert [c.word for c in cycles] == [(0,), (0, 1), (0, 0, 1), (0, 0, 0, 1)]
    assert all(c.period == len(c.word) for c in cycles)
    with pytest.raises(ValueError):
        enumerate_cycles(0, golden)


def test_traces_of_presentation(golden, full_shift):
    assert [periodic_point_count(n, golden) for n in range(1, 7)] == [1, 3, 4, 7, 11, 18]
    assert [periodic_point_count(n, full_shift) for n in range(1, 5)] == [2, 4, 8, 16]
    assert [necklace_count(n, golden) for n in range(1, 5)] == [1, 1, 1, 1]
    assert [necklace_count(n, full_shift) for n in range(1, 6)] == [2, 1, 2, 3, 6]


@pytest.mark.parametrize("fixture", ["golden", "full_shift"])
def test_cycle_enumeration_matches_necklace_count(fixture, request):
    spec = request.getfixturevalue(fixture)
    p_max = 10
    assert len(enumerate_cycles(p_max, spec)) == sum(necklace_count(p, spec) for p in range(1, p_max + 1))


def test_birkhoff_average(A1):
    assert birkhoff_average(A1, PeriodicOrbit((0, 1))) == pytest.approx(0.0)
    assert birkhoff_average(A1, PeriodicOrbit((0,))) == pytest.approx(-1.0)
    assert birkhoff_average(A1, PeriodicOrbit((0, 0, 1))) == pytest.approx(-1.0 / 3.0)


def test_rotations_and_point():
    orbit = PeriodicOrbit((0, 0, 1))
    assert orbit.rotations() == [(0, 0, 1), (0, 1, 0), (1, 0, 0)]
    assert orbit.point == periodic((0, 0, 1))
    assert str(orbit) == "001"


@pytest.mark.parametrize(
    "fixture, m, argmax",
    [
        ("A1", 0.0, (0, 1)),
        ("A2", 0.0, (0,)),
        ("golden_A", 0.0, (0,)),
        ("golden_B", -0.5, (0, 1)),
    ],
)
def test_max_orbit_mean(golden, fixture, m, argmax, request):
    A = request.getfixturevalue(fixture)
    opt = max_orbit_mean(A, 10, golden)
    assert opt.m == pytest.approx(m, abs=1e-12)
    assert opt.unique
    assert opt.argmax[0].word == argmax
    assert opt.n_cycles == len(enumerate_cycles(10, golden))


def test_tied_cycles_are_not_unique(full_shift):
    A = digit_potential([0.0, 0.0], full_shift)
    opt = max_orbit_mean(A, 3, full_shift)
    assert not opt.unique
    assert opt.m == 0.0


def test_empirical_orbit_measure(golden):
    mu = empirical_orbit_measure(PeriodicOrbit((0, 1)), 2, golden)
    assert mu.as_dict() == pytest.approx({(0, 0): 0.0, (0, 1): 0.5, (1, 0): 0.5})
    assert mu.total == pytest.approx(1.0)


@pytest.mark.parametrize("word", [(0,), (0, 1), (0, 0, 1), (0, 0, 1, 0, 1), (0, 0, 0, 1, 0, 1, 0, 1)])
def test_empirical_orbit_measure_is_invariant(golden, word):
    mu = empirical_orbit_measure(PeriodicOrbit(word), 4, golden)
    assert invariance_check(mu, golden) == pytest.approx(0.0, abs=1e-12)
    assert mu.total == pytest.approx(1.0)


def test_empirical_orbit_measure_on_sofic_cells(sofic):
    mu = empirical_orbit_measure(PeriodicOrbit((0, 0, 1)), 3, sofic)
    assert invariance_check(mu, sofic) == pytest.approx(0.0, abs=1e-12)
    masses = mu.as_dict()
    for w in [(0, 0, 1), (0, 1, 0), (1, 0, 0)]:
        assert masses[w] == pytest.approx(1.0 / 3.0)
    assert sum(masses.values()) == pytest.approx(1.0)


@pytest.mark.parametrize("word", [(0,), (0, 1), (0, 0, 1), (0, 1, 0, 0, 1)])
def test_birkhoff_average_ignores_repetition(A1, word):
    assert birkhoff_average(A1, PeriodicOrbit(word + word)) == pytest.approx(birkhoff_average(A1, PeriodicOrbit(word)), abs=1e-12)
