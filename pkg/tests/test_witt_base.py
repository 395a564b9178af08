from fractions import Fraction

import pytest

from src.witt_base import (
    BaseSpec, CoeffW, Flavor, InadmissibleTermError, LevelMismatchError, NonBasicTermError,
    PartitionSpec, PrimeLevel, WeightFunction, block_keys, normalize_term, p_valuation, teichmuller,
    term_from_key, wedge_index, weight_frame,
)


def test_p_valuation():
    assert p_valuation(12, 2) == 2
    assert p_valuation(Fraction(5, 9), 3) == -2
    assert p_valuation(0, 3, cap=4) == 4
    with pytest.raises(ValueError):
        p_valuation(0, 3)


def test_wedge_index_signs():
    assert wedge_index((2,), (1,)) == (-1, (1, 2))
    assert wedge_index((1,), (2, 3)) == (1, (1, 2, 3))
    assert wedge_index((1,), (1,)) == (0, ())


def test_prime_level_validation():
    with pytest.raises(ValueError):
        PrimeLevel(4, 1)
    with pytest.raises(ValueError):
        PrimeLevel(3, 0)
    assert PrimeLevel(3, 2).modulus == 9
    assert PrimeLevel(3, 2).up().m == 3


def test_coefficient_arithmetic(level_3_2):
    x = CoeffW(5, level_3_2)
    assert x + 7 == CoeffW(3, level_3_2)
    assert (x * 2).value == 1
    assert CoeffW(0, level_3_2).valuation() == 2
    assert CoeffW(3, level_3_2).valuation() == 1
    assert not CoeffW(6, level_3_2).is_unit()
    with pytest.raises(LevelMismatchError):
        x + CoeffW(1, PrimeLevel(3, 1))


@pytest.mark.parametrize("p,m", [(2, 3), (3, 3), (5, 2)])
def test_teichmuller_is_multiplicative_root(p, m):
    level = PrimeLevel(p, m)
    for a in range(p):
        t = teichmuller(a, level)
        assert t ** p == t
        assert t.value % p == a


def test_weight_function_rendering_and_checks():
    k = WeightFunction.of(Fraction(1, 3), 0)
    assert k.render(3) == "(1/3^1,0)"
    assert k.denominator_exponent(3) == 1
    assert k.support == frozenset({1})
    with pytest.raises(InadmissibleTermError):
        WeightFunction.of(-1, 0)
    with pytest.raises(InadmissibleTermError):
        WeightFunction.of(Fraction(1, 2), 0).check_denominators(3)


def test_base_spec_validation():
    with pytest.raises(ValueError):
        BaseSpec(2, 3)
    with pytest.raises(ValueError):
        BaseSpec(2, 2, Flavor.POLY_TRIVIAL, (1,))
    node = BaseSpec(2, 2, Flavor.QUOTIENT_TRIVIAL)
    assert node.killed(WeightFunction.of(1, 1))
    assert not node.admits(WeightFunction.of(1, 1))
    assert node.admits(WeightFunction.of(2, 0))


def test_integral_block_keys(poly2, level_3_1):
    k = WeightFunction.of(1, 0)
    keys = block_keys(poly2, k, 1, level_3_1)
    assert keys == [(k, 1, (1,)), (k, 1, (2,))]
    s0 = poly2.with_flavor(Flavor.QUOTIENT_LOG_POINT)
    assert weight_frame(s0, k, 3).eliminated == 2
    assert block_keys(s0, k, 1, level_3_1) == [(k, 1, (1,))]


def test_fractional_block_keys(poly2, level_3_2, level_3_1):
    k = WeightFunction.of(Fraction(1, 3), 0)
    assert block_keys(poly2, k, 0, level_3_2) == [(k, 2, ())]
    assert block_keys(poly2, k, 1, level_3_2) == [(k, 2, (2,)), (k, 3, ())]
    assert block_keys(poly2, k, 2, level_3_2) == [(k, 3, (2,))]
    # u(k) >= m: nothing survives
    assert block_keys(poly2, k, 0, level_3_1) == []
    term = term_from_key((k, 2, ()), 1, level_3_2)
    assert term.annihilator_exp == 1
    assert term.valuation() == 1


def test_normalize_d_teichmuller(poly2, level_3_1):
    k = WeightFunction.of(1, 0)
    term = normalize_term(1, k, PartitionSpec((frozenset(), frozenset({1}))), level_3_1, poly2)
    assert term.key == (k, 1, (1,))
    assert term.coeff.value == 1
    assert term.render() == "1 * e((1,0); - ; 1)"


def test_normalize_rejects_non_basic_and_inadmissible(poly2, level_3_1):
    k = WeightFunction.of(1, 1)
    with pytest.raises(NonBasicTermError):
        normalize_term(1, k, PartitionSpec((frozenset(), frozenset({1, 2}))), level_3_1, poly2)
    with pytest.raises(InadmissibleTermError):
        normalize_term(1, WeightFunction.of(Fraction(1, 3), 0), PartitionSpec((frozenset({1}),)),
                       level_3_1, poly2)
    with pytest.raises(InadmissibleTermError):
        PartitionSpec((frozenset({1}),), (frozenset({1}),))


@pytest.mark.parametrize("a,p,m,expected", [(1, 5, 3, 1), (2, 5, 2, 7), (2, 3, 2, 8)])
def test_teichmuller_values(a, p, m, expected):
    assert teichmuller(a, PrimeLevel(p, m)).value == expected


def test_coefficient_examples():
    assert (CoeffW(5, PrimeLevel(2, 3)) * 3).value == 7
    assert CoeffW(10, PrimeLevel(5, 2)).valuation() == 1
    assert CoeffW(0, PrimeLevel(3, 3)).valuation() == 3
