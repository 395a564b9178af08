import numpy as np
import pytest

from src.witt_base import BaseSpec, Flavor, PrimeLevel


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def node():
    """k[T1,T2]/(T1 T2) with the trivial log base."""
    return BaseSpec(2, 2, Flavor.QUOTIENT_TRIVIAL)


@pytest.fixture
def smooth():
    """r = 1: the special fibre is smooth."""
    return BaseSpec(2, 1, Flavor.QUOTIENT_TRIVIAL)


@pytest.fixture
def triple():
    return BaseSpec(3, 3, Flavor.QUOTIENT_TRIVIAL)


@pytest.fixture
def poly2():
    return BaseSpec(2, 2, Flavor.POLY_TRIVIAL)


@pytest.fixture
def level_3_1():
    return PrimeLevel(3, 1)


@pytest.fixture
def level_3_2():
    return PrimeLevel(3, 2)


@pytest.fixture
def level_2_2():
    return PrimeLevel(2, 2)
