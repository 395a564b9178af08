import numpy as np
import pytest

from src.drw_core import build_slice, dlog, one, weight_block
from src.exact_homology import matmul, zeros
from src.monodromy_filtration import (
    NotInFiltrationError, build_B, build_C, certify_filtration, endomorphism_power_zero, frobenius_check,
    ladder_check, matrices_agree, monodromy_N, nilpotency_index, residue, residue_check,
    restriction_naturality, stratum_base, weight_filtration,
)
from src.witt_base import PrimeLevel, WeightFunction


def test_weight_filtration_graded_pieces(node, level_3_1):
    filt = weight_filtration(build_slice(node, level_3_1, 0))
    assert filt.graded_dims() == {0: {0: 1}, 1: {1: 2}, 2: {2: 1}}
    assert filt.exhausted_at() == 2
    assert filt.contains(dlog(1, level_3_1, node), 1)
    assert not filt.contains(dlog(1, level_3_1, node), 0)


def test_weight_filtration_needs_trivial_quotient(poly2, level_3_1):
    with pytest.raises(ValueError):
        weight_filtration(build_slice(poly2, level_3_1, 0))


@pytest.mark.parametrize("weight", [(0, 0), (1, 0), (0, 2)])
def test_filtration_matches_its_image_description(node, level_3_1, weight):
    block = weight_block(node, level_3_1, WeightFunction.of(*weight))
    for q in range(block.top_degree + 1):
        for j in range(q + 1):
            assert certify_filtration(block, j, q), (weight, q, j)


def test_residue_of_dlog(node, level_3_1):
    res = residue(1, dlog(1, level_3_1, node))
    assert list(res) == [(1,)]
    assert res[(1,)] == one(level_3_1, stratum_base(node, (1,)))
    with pytest.raises(NotInFiltrationError):
        residue(0, dlog(1, level_3_1, node))
    # P_0 terms have zero residue
    assert residue(1, one(level_3_1, node)) == {}


@pytest.mark.parametrize("j", [1, 2])
def test_residue_is_a_graded_isomorphism(node, level_3_2, j):
    check = residue_check(weight_block(node, level_3_2, WeightFunction.of(0, 0)), j)
    assert check.bijective
    assert check.commutes


def test_nu_anticommutes_with_the_differential(node, level_3_2):
    B = build_B(weight_block(node, level_3_2, WeightFunction.of(0, 0)))
    for n in range(B.top):
        total = matmul(B.differential(n), B.nu(n)) + matmul(B.nu(n + 1), B.differential(n))
        assert matrices_agree(total, zeros(*total.shape), B.annihilators(n + 1), 3)


def test_cone_is_a_complex_and_sequence_exact(triple):
    B = build_B(weight_block(triple, PrimeLevel(2, 2), WeightFunction.of(0, 0, 0)))
    C = build_C(B)
    C.total_complex().check()
    C.sequence().check()


def test_nilpotency_index():
    mat = zeros(2, 2)
    mat[0, 1] = 1
    assert nilpotency_index(mat, (1, 1), 3) == 2
    assert endomorphism_power_zero(mat, (1, 1), 3, 2)
    assert not endomorphism_power_zero(mat, (1, 1), 3, 1)
    with pytest.raises(ValueError):
        nilpotency_index(np.eye(2, dtype=object), (1, 1), 3)


def test_monodromy_on_the_node(node, level_3_1):
    result = monodromy_N(node, level_3_1, 1)
    assert result.blocks
    assert result.agree
    assert result.theta_iso
    for q in range(3):
        assert endomorphism_power_zero(result.matrix(q), result.exponents(q), 3, node.r)


def test_monodromy_vanishes_for_smooth_fibre(smooth, level_3_1):
    result = monodromy_N(smooth, level_3_1, 1)
    for q in range(3):
        assert endomorphism_power_zero(result.matrix(q), result.exponents(q), 3, 1)


def test_monodromy_does_not_depend_on_lifts(node, level_3_2, rng):
    a = monodromy_N(node, level_3_2, 1)
    b = monodromy_N(node, level_3_2, 1, strategy="random", rng=rng)
    for q in range(3):
        assert matrices_agree(a.matrix(q), b.matrix(q), a.exponents(q), 3)


def test_ladder_commutes(node, level_3_1):
    assert ladder_check(node, level_3_1, WeightFunction.of(0, 0))
    assert ladder_check(node, level_3_1, WeightFunction.of(1, 0))


def test_naturality_in_the_level(node, level_3_1):
    assert restriction_naturality(node, level_3_1, WeightFunction.of(0, 0))


def test_theta_commutes_with_phi(node, level_3_1):
    checks = frobenius_check(node, level_3_1, WeightFunction.of(0, 0))
    assert checks
    assert all(c.theta_phi_commutes for c in checks)
    assert all(c.commutator_zero for c in checks)
