from __future__ import annotations

import numpy as np
import pytest

from betatherm.beta import BetaSpec, enumerate_language
from betatherm.config import load_config
from betatherm.transfer import Potential, make_potential

GOLDEN = (1.0 + 5.0**0.5) / 2.0
TRIBONACCI = 1.8392867552141612

# golden-mean test potentials (depth-2 keys 00, 01, 10)
A1_TABLE = {(0, 0): -1.0, (0, 1): 0.5, (1, 0): -0.5}
A2_TABLE = {(0, 0): 0.0, (0, 1): -0.3, (1, 0): -0.9}


@pytest.fixture(scope="session")
def golden() -> BetaSpec:
    return BetaSpec.from_digits("(10)")


@pytest.fixture(scope="session")
def full_shift() -> BetaSpec:
    return BetaSpec.from_digits("(1)")


@pytest.fixture(scope="session")
def tribonacci() -> BetaSpec:
    return BetaSpec.from_digits("(110)")


@pytest.fixture(scope="session")
def sofic() -> BetaSpec:
    """x^beta = 1(100): eventually periodic, so the shift is sofic but not of finite type."""
    return BetaSpec.from_digits("1(100)")


@pytest.fixture(scope="session")
def config():
    return load_config()


@pytest.fixture(scope="session")
def golden_A(golden) -> Potential:
    """A = (0 -> 0, 1 -> -1): ground state 0^inf."""
    return make_potential({(0,): 0.0, (1,): -1.0}, golden)


@pytest.fixture(scope="session")
def golden_B(golden) -> Potential:
    """A = (0 -> -1, 1 -> 0): ground state (01)^inf, m = -1/2."""
    return make_potential({(0,): -1.0, (1,): 0.0}, golden)


@pytest.fixture(scope="session")
def bernoulli(full_shift) -> Potential:
    return make_potential({(0,): 0.0, (1,): -1.0}, full_shift)


@pytest.fixture(scope="session")
def A1(golden) -> Potential:
    return make_potential(A1_TABLE, golden)


@pytest.fixture(scope="session")
def A2(golden) -> Potential:
    return make_potential(A2_TABLE, golden)


def random_golden_potential(golden: BetaSpec, rng: np.random.Generator) -> Potential:
    """Values in [-1, 0] with the 0^inf and (01)^inf means at least 0.5 apart."""
    while True:
        a00, a01, a10 = rng.uniform(-1.0, 0.0, size=3)
        if abs(a00 - (a01 + a10) / 2) >= 0.5:
            return make_potential({(0, 0): a00, (0, 1): a01, (1, 0): a10}, golden)


def random_potential(spec: BetaSpec, depth: int, rng: np.random.Generator) -> Potential:
    words = enumerate_language(depth, spec)
    return make_potential({w: float(v) for w, v in zip(words, rng.uniform(-1.0, 0.0, size=len(words)))}, spec)
