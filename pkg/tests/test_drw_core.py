from fractions import Fraction

import numpy as np
import pytest

from src import utils
from src.drw_core import (
    build_slice, constant, d_teich, differential, dlog, enumerate_basis, enumerate_weights, frobenius,
    lattice_quotient_factors, multiply, one,
    operator_matrix, restrict, slice_document, teich_monomial, verschiebung, wedge_dlog,
)
from src.exact_homology import InvariantFactors
from src.witt_base import BaseSpec, Flavor, LevelMismatchError, PrimeLevel, WeightFunction


def test_differential_of_teichmuller_monomial(poly2, level_3_2):
    x = teich_monomial((2, 0), level_3_2, poly2)
    k = WeightFunction.of(2, 0)
    assert differential(x).coeffs == (((k, 1, (1,)), 2),)


def test_verschiebung_of_one_is_p(poly2, level_3_1, level_3_2):
    assert verschiebung(one(level_3_1, poly2)) == constant(3, level_3_2, poly2)
    assert restrict(verschiebung(one(level_3_1, poly2))).is_zero


def test_verschiebung_and_its_differential(poly2, level_3_1):
    x = verschiebung(teich_monomial((1, 0), level_3_1, poly2))
    k = WeightFunction.of(Fraction(1, 3), 0)
    assert x.coeffs == (((k, 2, ()), 1),)
    assert differential(x).coeffs == (((k, 3, ()), 1),)
    # F d V = d
    assert frobenius(differential(x)) == d_teich(1, level_3_1, poly2)


def test_level_errors(poly2, level_3_1, level_3_2):
    x = one(level_3_1, poly2)
    with pytest.raises(LevelMismatchError):
        multiply(x, one(level_3_2, poly2))
    with pytest.raises(LevelMismatchError):
        frobenius(x)
    with pytest.raises(LevelMismatchError):
        restrict(x)


def test_wedge_dlog_outside_divisor_indices(level_3_1):
    base = BaseSpec(2, 1, Flavor.POLY_TRIVIAL)
    with pytest.raises(ValueError):
        wedge_dlog(one(level_3_1, base), 2)


@pytest.mark.parametrize("p,m", [(2, 2), (3, 2)])
def test_d_squared_and_fv(poly2, p, m):
    level = PrimeLevel(p, m)
    slice_ = build_slice(poly2, level, 1)
    assert slice_.check_d_squared() == []
    for q in range(3):
        for x in slice_.basis_elements(q):
            assert differential(differential(x)).is_zero
            assert frobenius(verschiebung(x)) == x.scale(p)


def test_leibniz_on_random_pairs(poly2, level_2_2, rng):
    basis = [x for q in range(3) for x in build_slice(poly2, level_2_2, 1).basis_elements(q)]
    for i, j in rng.integers(0, len(basis), size=(25, 2)):
        x, y = basis[i], basis[j]
        lhs = differential(multiply(x, y))
        rhs = multiply(differential(x), y) + multiply(x, differential(y)).scale((-1) ** x.degree)
        assert lhs == rhs


def test_frobenius_of_d_teichmuller(poly2):
    p = 3
    upper, lower = PrimeLevel(p, 2), PrimeLevel(p, 1)
    lhs = frobenius(d_teich(1, upper, poly2))
    rhs = multiply(teich_monomial((p - 1, 0), lower, poly2), d_teich(1, lower, poly2))
    assert lhs == rhs


def test_slice_dimensions(poly2, node, level_3_1):
    assert build_slice(poly2, level_3_1, 1).dims() == {0: 3, 1: 6, 2: 3}
    assert build_slice(node, level_3_1, 1).dims() == {0: 3, 1: 6, 2: 3}
    s0 = node.with_flavor(Flavor.QUOTIENT_LOG_POINT)
    assert build_slice(s0, level_3_1, 1).dims() == {0: 3, 1: 3, 2: 0}


def test_cohomology_of_the_line(level_3_1):
    line = BaseSpec(1, 1, Flavor.POLY_TRIVIAL)
    groups = build_slice(line, level_3_1, 3).cohomology()
    # weights 0 and 3 carry Z/3 in both degrees, weights 1 and 2 are acyclic
    assert groups[0].exponents == (1, 1)
    assert groups[1].exponents == (1, 1)


def test_lattice_oracle_matches_basis(poly2, level_3_2):
    slice_ = build_slice(poly2, level_3_2, 1)
    for block in slice_.blocks:
        for q in range(block.top_degree + 1):
            got = lattice_quotient_factors(poly2, level_3_2, block.weight, q)
            assert got == InvariantFactors(block.annihilators(q)), (block.weight, q)


def test_operator_matrix_drops_images_beyond_the_bound(poly2, level_3_1, level_3_2):
    lower, upper = build_slice(poly2, level_3_1, 1), build_slice(poly2, level_3_2, 1)
    mat, dropped = operator_matrix(frobenius, upper, lower, 0)
    assert mat.shape == (len(lower.basis(0)), len(upper.basis(0)))
    assert dropped
    res, none_dropped = operator_matrix(restrict, upper, lower, 1)
    assert none_dropped == []
    assert np.count_nonzero(res.toarray()) > 0


def test_serialization_is_deterministic(node, level_2_2):
    a = slice_document(build_slice(node, level_2_2, 1))
    b = slice_document(build_slice(node, level_2_2, 1))
    assert utils.canonical_json(a) == utils.canonical_json(b)
    assert utils.sha256_digest(a) == utils.sha256_digest(b)
    assert a["flavor"] == "QuotientTrivialBase"
    assert len(a["bases"]) == 3


def test_small_identities(poly2, level_3_1):
    x1 = dlog(1, level_3_1, poly2)
    assert differential(x1).is_zero
    assert wedge_dlog(x1, 1).is_zero
    assert wedge_dlog(one(level_3_1, poly2), 1) == x1
    assert wedge_dlog(x1, 2) == -wedge_dlog(dlog(2, level_3_1, poly2), 1)
    t1 = teich_monomial((1, 0), level_3_1, poly2)
    assert differential(multiply(t1, t1)) == multiply(t1, d_teich(1, level_3_1, poly2)).scale(2)


def test_restriction_examples(poly2):
    assert restrict(constant(9, PrimeLevel(3, 3), poly2)).is_zero
    assert restrict(constant(7, PrimeLevel(5, 2), poly2)) == constant(2, PrimeLevel(5, 1), poly2)


def test_enumerate_basis_of_the_line_at_level_one():
    line = BaseSpec(1, 1, Flavor.POLY_TRIVIAL)
    basis = enumerate_basis(line, 0, PrimeLevel(3, 1), 2)
    assert [t.key[0] for t in basis] == [WeightFunction.of(a) for a in range(3)]


@pytest.mark.parametrize("flavor", list(Flavor)[:3])
@pytest.mark.parametrize("p,m,K", [(3, 2, 2), (2, 3, 1)])
def test_weights_and_bases_are_duplicate_free(flavor, p, m, K):
    base = BaseSpec(2, 2, flavor)
    level = PrimeLevel(p, m)
    weights = enumerate_weights(base, level, K)
    assert len(set(weights)) == len(weights)
    slice_ = build_slice(base, level, K)
    assert len({b.weight for b in slice_.blocks}) == len(slice_.blocks)
    for q in range(slice_.top_degree + 1):
        assert len(set(slice_.basis(q))) == len(slice_.basis(q))


def test_log_point_slice_has_one_unit_block(node):
    s0 = node.with_flavor(Flavor.QUOTIENT_LOG_POINT)
    slice_ = build_slice(s0, PrimeLevel(3, 2), 2)
    zero = WeightFunction.of(0, 0)
    assert sum(1 for b in slice_.blocks if b.weight == zero) == 1
    assert slice_.block(zero).complex().modules[0].annihilators == (2,)
