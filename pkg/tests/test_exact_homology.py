import numpy as np
import pytest
from sympy.polys.domains import ZZ
from sympy.polys.matrices import DM
from sympy.polys.matrices.normalforms import invariant_factors

from src.exact_homology import (
    ComplexSES, InvariantFactors, NotAComplexError, NotExactError, PresentedComplex, PresentedModule,
    as_matrix, cohomology, connecting_hom, euler_characteristic, exactness_check, kernel,
    smith_normal_form, solve,
)
from src.witt_base import p_valuation


def test_smith_form_certificate(rng):
    A = as_matrix(rng.integers(0, 27, size=(4, 5)))
    sf = smith_normal_form(A, 3, 3)
    assert sf.certificate_holds(A)
    assert list(sf.exponents) == sorted(sf.exponents)


def test_smith_form_small_cases():
    assert smith_normal_form(np.eye(3, dtype=int), 5, 2).exponents == (0, 0, 0)
    assert smith_normal_form([[3]], 3, 2).exponents == (1,)
    assert smith_normal_form([[9]], 3, 2).exponents == ()


@pytest.mark.parametrize("p,e", [(2, 4), (3, 2), (5, 1)])
def test_smith_form_matches_sympy(p, e):
    rows = [[2, 4, 4], [-6, 6, 12], [10, -4, -16]]
    factors = invariant_factors(DM(rows, ZZ))
    nonzero = [int(d) for d in factors if int(d) != 0]
    expected = sorted(v for v in (p_valuation(d, p) for d in nonzero) if v < e)
    sf = smith_normal_form(as_matrix(rows), p, e)
    assert sorted(sf.exponents) == expected
    assert sf.certificate_holds(as_matrix(rows))


def test_kernel_and_solve():
    A = as_matrix([[3]])
    K = kernel(A, 3, 2)
    assert K.shape == (1, 1) and K[0, 0] % 9 == 3
    x = solve(A, [6], 3, 2)
    assert (3 * x[0]) % 9 == 6
    assert solve(A, [1], 3, 2) is None


def test_invariant_factors():
    h = InvariantFactors((1, 0, 2))
    assert h.exponents == (2, 1)
    assert h.length == 3
    assert h.full_count(2) == 1
    assert h.render(3) == "Z/3^2 + Z/3^1"
    assert InvariantFactors().render(3) == "0"


def _two_term(p, e, anns, d):
    return PresentedComplex(p, e, (PresentedModule((anns[0],)), PresentedModule((anns[1],))), (d,))


def test_cohomology_of_multiplication_by_p():
    C = _two_term(3, 2, (2, 2), [[3]])
    groups = cohomology(C)
    assert groups[0].exponents == (1,)
    assert groups[1].exponents == (1,)
    assert euler_characteristic(C, groups) == (0, 0)


def test_not_a_complex():
    one = PresentedModule((2,))
    C = PresentedComplex(3, 2, (one, one, one), ([[1]], [[1]]))
    with pytest.raises(NotAComplexError):
        cohomology(C)


def test_exactness_check():
    A, B, C = PresentedModule((1,)), PresentedModule((2,)), PresentedModule((1,))
    report = exactness_check([[3]], [[1]], A, B, C, 3, 2)
    assert report.exact
    broken = exactness_check([[3]], [[0]], A, B, C, 3, 2)
    assert not broken.surjective
    assert broken.cokernel_factors.exponents == (1,)


def _bockstein_ses(g_scale=1):
    A = _two_term(3, 2, (1, 1), [[0]])
    B = _two_term(3, 2, (2, 2), [[3]])
    C = _two_term(3, 2, (1, 1), [[0]])
    return ComplexSES(A, B, C, {0: [[3]], 1: [[3]]}, {0: [[g_scale]], 1: [[g_scale]]})


def test_connecting_homomorphism_is_the_bockstein(rng):
    ses = _bockstein_ses()
    ses.check()
    delta, HC, HA = connecting_hom(ses, 0)
    assert HC.exponents == (1,) and HA.exponents == (1,)
    assert delta.shape == (1, 1) and delta[0, 0] % 3 != 0
    drawn, _, _ = connecting_hom(ses, 0, strategy="random", rng=rng)
    assert (drawn[0, 0] - delta[0, 0]) % 3 == 0


def test_ses_check_rejects_non_exact():
    with pytest.raises(NotExactError):
        _bockstein_ses(g_scale=0).check()
