from __future__ import annotations

import logging
import math

import numpy as np
import pytest

from betatherm.beta import BetaSpec
from betatherm.errors import DepthMismatch, InadmissibleTableKey, SchemaError
from betatherm.symbolic import padded, periodic
from betatherm.transfer import (
    FORWARD,
    TRANSPOSE,
    adjoint_apply,
    apply_transfer,
    branch_digits,
    cone_membership,
    constant_function,
    cylinder_basis,
    cylinder_words,
    dense_perron_root,
    digit_potential,
    function_from,
    invariance_check,
    make_potential,
    measure_from,
    power_iteration,
    uniform_measure,
)

from conftest import GOLDEN, TRIBONACCI, random_potential

GRID = (2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0)


def test_potential_table_and_holder_constant(golden, golden_A, A1):
    assert golden_A.depth == 1
    assert golden_A.holder_const == pytest.approx(1.0)
    assert golden_A(padded((1, 0))) == -1.0
    assert golden_A((0,)) == 0.0
    assert A1(periodic((0, 1))) == 0.5
    assert A1((1,)) == -0.5
    # |A(01) - A(00)| / d(01, 00) = 1.5 / 0.5
    assert A1.holder_const == pytest.approx(3.0)


def test_potential_scaled_and_shifted(A1):
    B = A1.scaled(2.0)
    assert B.table[(0, 1)] == 1.0
    assert B.holder_const == pytest.approx(6.0)
    assert A1.shifted(1.0).table[(0, 0)] == 0.0


def test_inadmissible_table_key(golden):
    with pytest.raises(InadmissibleTableKey) as exc:
        make_potential({(0, 0): 0.0, (0, 1): 0.0, (1, 0): 0.0, (1, 1): 0.0}, golden)
    assert exc.value.word == (1, 1)


def test_missing_table_key(golden):
    with pytest.raises(SchemaError):
        make_potential({(0, 0): 0.0, (0, 1): 0.0}, golden)
    with pytest.raises(SchemaError):
        make_potential({(0,): 0.0, (0, 1): 0.0}, golden)


def test_transpose_side_table(golden):
    A = make_potential({(0, 0): 1.0, (0, 1): 2.0, (1, 0): 3.0}, golden, side=TRANSPOSE)
    assert A.side == TRANSPOSE
    assert cylinder_words(golden, 2, TRANSPOSE) == ((0, 0), (0, 1), (1, 0))


def test_branch_digits(golden):
    assert branch_digits((0, 0), golden) == (0, 1)
    assert branch_digits((1, 0), golden) == (0,)


@pytest.mark.parametrize(
    "fixture, beta",
    [("golden", GOLDEN), ("full_shift", 2.0), ("tribonacci", TRIBONACCI)],
)
def test_zero_potential_recovers_entropy(fixture, beta, request):
    spec = request.getfixturevalue(fixture)
    A = digit_potential([0.0, 0.0], spec)
    tr = power_iteration(A, 8, spec)
    assert tr.eigenvalue == pytest.approx(beta, abs=1e-9)
    assert tr.residual < 1e-9


@pytest.mark.parametrize("t", GRID)
def test_bernoulli_closed_form(full_shift, bernoulli, t):
    tr = power_iteration(bernoulli.scaled(t), 1, full_shift, t=t)
    assert tr.eigenvalue == pytest.approx(1.0 + math.exp(-t), rel=1e-12)
    np.testing.assert_allclose(tr.rho.values, np.array([1.0, math.exp(-t)]) / (1.0 + math.exp(-t)), rtol=1e-10)
    np.testing.assert_allclose(tr.psi.values, [1.0, 1.0], rtol=1e-10)
    assert tr.gibbs.total == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("t", [0.5, 1.0, 3.0, 10.0])
def test_golden_depth1_closed_form(golden, golden_A, t):
    tr = power_iteration(golden_A.scaled(t), 1, golden, t=t)
    assert tr.eigenvalue == pytest.approx((1 + math.sqrt(1 + 4 * math.exp(-t))) / 2, rel=1e-11)


def test_large_t_stays_in_log_domain(golden, golden_B):
    tr = power_iteration(golden_B.scaled(256.0), 6, golden, t=256.0)
    assert tr.log_eigenvalue / 256.0 == pytest.approx(-0.5, abs=1e-6)
    assert np.isfinite(tr.log_psi).all()
    assert np.isfinite(tr.log_rho).all()


def test_power_iteration_matches_dense_solve(golden, A1, A2):
    for A in (A1, A2):
        tr = power_iteration(A, 4, golden)
        assert tr.eigenvalue == pytest.approx(dense_perron_root(A, 4, golden), rel=1e-10)


def test_eigen_equations(golden, A1):
    tr = power_iteration(A1, 4, golden)
    Lpsi = apply_transfer(A1, tr.psi, golden)
    np.testing.assert_allclose(Lpsi.values, tr.eigenvalue * tr.psi.values, rtol=1e-10)
    Lrho = adjoint_apply(A1, tr.rho, golden)
    np.testing.assert_allclose(Lrho.values, tr.eigenvalue * tr.rho.values, rtol=1e-10)
    assert tr.rho.total == pytest.approx(1.0, abs=1e-12)
    assert float(tr.psi.values @ tr.rho.values) == pytest.approx(1.0, abs=1e-12)


def test_gibbs_state_is_invariant_and_consistent(golden, A1):
    tr = power_iteration(A1, 5, golden)
    assert invariance_check(tr.gibbs, golden) < 1e-10
    coarse = tr.gibbs.coarsen()
    assert sum(coarse.values()) == pytest.approx(1.0, abs=1e-12)
    assert tr.gibbs.mass_of((0,)) + tr.gibbs.mass_of((1,)) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(DepthMismatch):
        tr.gibbs.mass_of((0, 0, 0, 0, 0, 0))


def test_depth_below_potential_depth(golden, A1):
    with pytest.raises(DepthMismatch):
        power_iteration(A1, 1, golden)
    with pytest.raises(DepthMismatch):
        apply_transfer(A1, constant_function(golden, 1), golden)


def test_transfer_preserves_cone(golden, A1):
    K = A1.holder_const
    phi = constant_function(golden, 4)
    assert cone_membership(phi, K, 1.0, golden)[0]
    for _ in range(5):
        phi = apply_transfer(A1, phi, golden)
        member, worst = cone_membership(phi, K, 1.0, golden)
        assert member, worst


def test_cone_rejects_steep_function(golden):
    phi = function_from({(0, 0): 1.0, (0, 1): 1e3, (1, 0): 1.0}, golden, 2)
    member, worst = cone_membership(phi, 1.0, 1.0, golden)
    assert not member
    assert worst > 1.0


def test_uniform_measure(golden):
    mu = uniform_measure(golden, 3)
    assert len(mu) == 5
    assert mu.total == pytest.approx(1.0)
    assert mu.side == FORWARD


def test_apply_transfer_counts_branches(golden):
    A = digit_potential([0.0, 0.0], golden)
    phi = constant_function(golden, 2)
    L = apply_transfer(A, phi, golden)
    assert L.as_dict() == pytest.approx({(0, 0): 2.0, (0, 1): 2.0, (1, 0): 1.0})
    m = measure_from([0.0, 0.0, 1.0], golden, 2)
    assert adjoint_apply(A, m, golden).total == pytest.approx(1.0)
    assert adjoint_apply(A, uniform_measure(golden, 2), golden).total == pytest.approx(5.0 / 3.0)


def test_adjoint_pairing(golden, A1):
    rng = np.random.default_rng(20)
    k = 6
    n = len(constant_function(golden, k))
    for _ in range(20):
        phi = function_from(rng.uniform(0.1, 2.0, size=n), golden, k)
        m = measure_from(rng.uniform(0.0, 1.0, size=n), golden, k)
        lhs = float(apply_transfer(A1, phi, golden).values @ m.values)
        rhs = float(phi.values @ adjoint_apply(A1, m, golden).values)
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_invariance_check_flags_point_mass(golden):
    mu = measure_from([0.0, 0.0, 1.0], golden, 2)
    assert invariance_check(mu, golden) == pytest.approx(1.0)


def test_eigenfunction_lies_in_cone(golden, A1):
    tr = power_iteration(A1, 8, golden)
    member, worst = cone_membership(tr.psi, A1.holder_const, A1.theta, golden)
    assert member, worst


def test_sofic_basis_splits_cylinders(sofic):
    basis = cylinder_basis(sofic, 3)
    assert basis.exact
    assert (1, 0, 0) in basis.split_words
    assert basis.size > len(set(basis.words))
    # 1 0^inf may be preceded by 1, a point above (100)^inf may not
    low = basis.locate(padded((1, 0, 0)))
    high = basis.locate(padded((1, 0, 0, 1, 1)))
    assert low != high
    assert basis.digits(low) == (0, 1)
    assert basis.digits(high) == (0,)
    assert "100#0" in basis.labels and "100#1" in basis.labels


def test_sofic_split_value_needs_a_point(sofic):
    psi = constant_function(sofic, 3)
    with pytest.raises(KeyError):
        psi[(1, 0, 0)]
    assert psi.at(padded((1, 0, 0))) == 1.0
    assert psi[(0, 0, 0)] == 1.0


def test_sofic_entropy_plateau(sofic):
    A = digit_potential([0.0, 0.0], sofic)
    lams = [power_iteration(A, k, sofic).eigenvalue for k in range(3, 9)]
    assert sofic.beta == pytest.approx(1.72208, abs=1e-5)
    for lam in lams:
        assert lam == pytest.approx(sofic.beta, abs=1e-9)
    assert max(lams) - min(lams) < 1e-10


def test_sofic_gibbs_state_is_invariant(sofic):
    A = random_potential(sofic, 3, np.random.default_rng(4))
    tr = power_iteration(A, 5, sofic)
    assert invariance_check(tr.gibbs, sofic) < 1e-10
    assert tr.eigenvalue == pytest.approx(dense_perron_root(A, 5, sofic), rel=1e-10)


def test_truncated_stream_falls_back_to_words(caplog):
    spec = BetaSpec.from_value("1.8")
    assert spec.xbeta is None
    cylinder_basis.cache_clear()
    with caplog.at_level(logging.WARNING, logger="betatherm.transfer"):
        basis = cylinder_basis(spec, 3)
    assert not basis.exact
    assert not basis.split_words
    assert basis.words == cylinder_words(spec, 3)
    assert any("[basis]" in r.getMessage() for r in caplog.records)
