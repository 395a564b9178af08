from fractions import Fraction

import pytest

from src.drw_core import build_slice, constant, one, teich_monomial
from src.log_semistable import (
    d_crosses_weights, fil_sequence_report, fil_subspace, int_frac_split, lambda_matrix, lambda_project,
    project_to_S0, section_from_S0, theta, theta_sequence, theta_wedge,
)
from src.witt_base import BaseSpec, Flavor, PrimeLevel, WeightFunction


def test_theta_vanishes_over_the_log_point(node, level_3_2):
    assert not theta(level_3_2, node).is_zero
    s0 = node.with_flavor(Flavor.QUOTIENT_LOG_POINT)
    assert theta(level_3_2, s0).is_zero
    assert project_to_S0(theta(level_3_2, node)).is_zero


def test_lambda_kills_the_ideal(poly2, node, level_3_1):
    assert lambda_project(teich_monomial((1, 1), level_3_1, poly2)).is_zero
    image = lambda_project(teich_monomial((2, 0), level_3_1, poly2))
    assert image == teich_monomial((2, 0), level_3_1, node)
    with pytest.raises(ValueError):
        lambda_project(one(level_3_1, node))


def test_lambda_matrix_is_onto_the_quotient_basis(poly2, node, level_3_1):
    mat, dropped = lambda_matrix(build_slice(poly2, level_3_1, 2), build_slice(node, level_3_1, 2), 0)
    assert dropped == []
    # every quotient basis vector is hit
    assert set(mat.tocoo().row.tolist()) == set(range(mat.shape[0]))


def test_theta_wedge_requires_trivial_quotient(poly2, level_3_1):
    with pytest.raises(ValueError):
        theta_wedge(one(level_3_1, poly2))


def test_section_then_projection_is_identity(node, level_3_1):
    s0 = node.with_flavor(Flavor.QUOTIENT_LOG_POINT)
    for x in build_slice(s0, level_3_1, 2).basis_elements(1):
        assert project_to_S0(section_from_S0(x)) == x


@pytest.mark.parametrize("m", [1, 2])
@pytest.mark.parametrize("weight", [(0, 0), (1, 0), (0, 2)])
def test_theta_sequence_is_exact(node, m, weight):
    level = PrimeLevel(3, m)
    k = WeightFunction.of(*weight)
    seq = theta_sequence(node, level, k)
    seq.ses.check()
    assert seq.weight == k


def test_theta_sequence_fractional_weight(node):
    theta_sequence(node, PrimeLevel(3, 2), WeightFunction.of(Fraction(1, 3), 0)).ses.check()


def test_theta_sequence_on_the_triple_point():
    triple = BaseSpec(3, 3, Flavor.QUOTIENT_TRIVIAL)
    theta_sequence(triple, PrimeLevel(2, 2), WeightFunction.of(0, 0, 0)).ses.check()


def test_fil_membership(poly2, level_3_2):
    fil1 = fil_subspace(1, build_slice(poly2, level_3_2, 1))
    assert fil1.contains(constant(3, level_3_2, poly2))
    assert not fil1.contains(one(level_3_2, poly2))
    with pytest.raises(ValueError):
        fil_subspace(5, build_slice(poly2, level_3_2, 1))


def test_fil_zero_is_everything(poly2, level_3_2):
    fil0 = fil_subspace(0, build_slice(poly2, level_3_2, 1))
    assert fil0.contains(teich_monomial((1, 0), level_3_2, poly2))


@pytest.mark.parametrize("weight", [(0, 0), (1, 0), (1, 1)])
def test_fil_sequence_is_exact(poly2, level_3_1, weight):
    k = WeightFunction.of(*weight)
    for q in range(3):
        report = fil_sequence_report(poly2, level_3_1, k, q)
        assert report.exact_middle
        assert report.surjective


def test_fractional_part_is_acyclic(node, level_3_2):
    slice_ = build_slice(node, level_3_2, 1)
    split = int_frac_split(slice_)
    assert split.fractional
    assert split.acyclic_failures() == []
    assert d_crosses_weights(slice_) == []
    total = split.dims("int")
    for q, n in split.dims("frac").items():
        total[q] = total.get(q, 0) + n
    assert total == slice_.dims()


def test_theta_wedge_examples(node, level_3_2):
    th = theta(level_3_2, node)
    assert theta_wedge(one(level_3_2, node)) == th
    assert theta_wedge(th).is_zero
