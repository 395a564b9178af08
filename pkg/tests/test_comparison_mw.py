from fractions import Fraction

import pytest

from src.comparison_mw import (
    BoundMismatchError, EmptyFamilyError, MWForm, build_mw, epsilon_grid, expected_rational_dims, gauge_fit,
    integral_iso_check, kappa, level_one_identification, mod_pm_comparison, mw_differential, mw_dlog,
    mw_monomial, mw_multiply, mw_theta, rational_dims,
)
from src.drw_core import constant, d_teich, differential, dlog, teich_monomial, verschiebung
from src.witt_base import BaseSpec, Flavor, PrimeLevel


@pytest.fixture
def line():
    return BaseSpec(1, 1, Flavor.POLY_TRIVIAL)


def test_bounded_mw_complex(line, level_3_1):
    mw = build_mw(line, level_3_1, 3)
    assert len(mw.keys(0)) == 4
    assert len(mw.keys(1)) == 4
    assert mw_differential(mw_monomial((2,), level_3_1, line)).coeffs == ((((2,), (1,)), 2),)


def test_build_mw_rejects(node, level_3_1):
    with pytest.raises(ValueError):
        build_mw(node, level_3_1, -1)
    with pytest.raises(ValueError):
        build_mw(node.with_flavor(Flavor.STRATUM, (1,)), level_3_1, 1)


def test_mw_theta_over_the_log_point(node, level_3_1):
    assert not mw_theta(level_3_1, node).is_zero
    assert mw_theta(level_3_1, node.with_flavor(Flavor.QUOTIENT_LOG_POINT)).is_zero
    # T1 T2 = 0 on the quotient
    assert mw_monomial((1, 1), level_3_1, node).is_zero


def test_kappa_on_generators(level_3_2):
    base = BaseSpec(2, 1, Flavor.POLY_TRIVIAL)
    assert kappa(mw_monomial((2, 1), level_3_2, base)) == teich_monomial((2, 1), level_3_2, base)
    dT2 = MWForm.build(level_3_2, base, 1, {((0, 0), (2,)): 1})
    assert kappa(dT2) == d_teich(2, level_3_2, base)
    assert kappa(mw_dlog(1, level_3_2, base)) == dlog(1, level_3_2, base)


def test_kappa_is_multiplicative(node, level_3_2):
    x = mw_monomial((2, 0), level_3_2, node)
    y = mw_dlog(2, level_3_2, node)
    assert kappa(mw_multiply(x, y)) == kappa(x) * kappa(y)
    assert kappa(mw_differential(x)) == differential(kappa(x))


def test_integral_isomorphism(node, level_3_2):
    cert = integral_iso_check(node, level_3_2, 2, 2)
    assert cert.ok
    s0 = integral_iso_check(node.with_flavor(Flavor.QUOTIENT_LOG_POINT), level_3_2, 2, 2)
    assert s0.ok
    with pytest.raises(BoundMismatchError):
        integral_iso_check(node, level_3_2, 1, 2)


def test_level_one_identification(node):
    assert level_one_identification(node, 3, 2).ok


def test_mod_pm_comparison(node, level_3_2):
    comparison = mod_pm_comparison(node, level_3_2, 2)
    assert comparison.isomorphic
    assert comparison.equal


@pytest.mark.parametrize("flavor,expected", [
    (Flavor.QUOTIENT_TRIVIAL, {0: 1, 1: 2, 2: 1}),
    (Flavor.QUOTIENT_LOG_POINT, {0: 1, 1: 1, 2: 0}),
])
def test_rational_dimensions(flavor, expected):
    base = BaseSpec(2, 2, flavor)
    assert rational_dims(base, 2, 2) == expected
    assert expected_rational_dims(base) == expected


def test_epsilon_grid():
    assert epsilon_grid(2, Fraction(1, 8)) == [1, Fraction(1, 2), Fraction(1, 4), Fraction(1, 8)]
    grid = epsilon_grid(3, Fraction(1, 64))
    assert grid[:3] == [1, Fraction(1, 2), Fraction(1, 3)]
    assert grid == sorted(grid, reverse=True)


def test_gauge_on_teichmuller_family(poly2, level_3_2):
    family = [teich_monomial((a, 0), level_3_2, poly2) for a in range(3)]
    report = gauge_fit(family, c_max=1)
    assert report.passes
    assert report.epsilon == Fraction(1, 2)
    assert report.C == 1
    strict = gauge_fit(family, c_max=0)
    assert not strict.passes
    assert strict.epsilon == Fraction(1, 64)


def test_gauge_on_verschiebung_family(poly2, level_3_1):
    x = constant(1, level_3_1, poly2)
    family = [x]
    for _ in range(2):
        x = verschiebung(x)
        family.append(x)
    report = gauge_fit(family)
    assert report.epsilon == 1
    assert report.C == 0
    assert report.as_dict()["passes"] is True


def test_gauge_rejects_empty_family():
    with pytest.raises(EmptyFamilyError):
        gauge_fit([])
    with pytest.raises(ValueError):
        gauge_fit([object()], norm="l2")
