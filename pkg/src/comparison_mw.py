"""
Truncated logarithmic Monsky-Washnitzer complexes mod p^m, the comparison map
kappa into the de Rham-Witt slices, and the overconvergence gauge.

The MW side is built in the Kahler frame: dlog T_i for divisor indices and dT_j
for the others, with monomials T^a of A = (Z/p^m)[T]/(T1...Tr). Total degree
counts each dT_j once, so d is homogeneous and the degree bound D matches the
weight bound K of the slices.
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import comb

import numpy as np

from .drw_core import (
    DRWElement, build_slice, change_base, weight_block,
)
from .exact_homology import (
    InvariantFactors, PresentedComplex, PresentedModule, cohomology, cohomology_group,
    induced_map, is_isomorphism, matmul, smith_normal_form, zeros,
)
from .utils import bounded_exponents
from .witt_base import BaseSpec, Flavor, PrimeLevel, WeightFunction, wedge_index


class BoundMismatchError(ValueError):
    """The MW degree bound and the slice weight bound do not describe the same range."""


class EmptyFamilyError(ValueError):
    """gauge_fit needs at least one element."""


# ==============================================================================
# 1. MW FORMS
# ==============================================================================
def _frame_degree(a: tuple, J: tuple, r: int) -> int:
    return sum(a) + sum(1 for j in J if j > r)


def mw_weight(a: tuple, J: tuple, r: int) -> WeightFunction:
    """Weight of kappa(T^a w_J): dT_j contributes one to entry j."""
    entries = list(a)
    for j in J:
        if j > r:
            entries[j - 1] += 1
    return WeightFunction(tuple(entries))


@dataclass(frozen=True)
class MWForm:
    """sum c T^a w_J, w_J = wedge of dlog T_i (i <= r) and dT_j (j > r); coeffs sorted by (a, J)."""
    level: PrimeLevel
    base: BaseSpec
    degree: int
    coeffs: tuple = ()

    @classmethod
    def build(cls, level: PrimeLevel, base: BaseSpec, degree: int, mapping: dict) -> "MWForm":
        mod = level.modulus
        r = base.r
        clean = {}
        for (a, J), c in mapping.items():
            if base.is_quotient and set(range(1, r + 1)) <= {i + 1 for i, x in enumerate(a) if x}:
                continue
            if base.flavor is Flavor.QUOTIENT_LOG_POINT and r in J:
                # dlog T_r = theta - sum_{i<r} dlog T_i
                pos = J.index(r)
                rest = J[:pos] + J[pos + 1:]
                for i in range(1, r):
                    s2, J3 = wedge_index((i,), rest)
                    if s2:
                        key = (a, J3)
                        clean[key] = clean.get(key, 0) - ((-1) ** pos) * s2 * c
                continue
            clean[(a, J)] = clean.get((a, J), 0) + c
        clean = {k: v % mod for k, v in clean.items() if v % mod}
        return cls(level, base, degree, tuple(sorted(clean.items())))

    def __add__(self, other: "MWForm") -> "MWForm":
        total = dict(self.coeffs)
        for key, c in other.coeffs:
            total[key] = total.get(key, 0) + c
        return MWForm.build(self.level, self.base, self.degree, total)

    @property
    def is_zero(self) -> bool:
        return not self.coeffs


def mw_monomial(a, level: PrimeLevel, base: BaseSpec) -> MWForm:
    return MWForm.build(level, base, 0, {(tuple(a), ()): 1})


def mw_dlog(i: int, level: PrimeLevel, base: BaseSpec) -> MWForm:
    if i not in range(1, base.r + 1):
        raise ValueError(f"dlog index {i} outside [1, {base.r}]")
    return MWForm.build(level, base, 1, {((0,) * base.n, (i,)): 1})


def mw_theta(level: PrimeLevel, base: BaseSpec) -> MWForm:
    return MWForm.build(level, base, 1, {((0,) * base.n, (i,)): 1 for i in range(1, base.r + 1)})


def mw_differential(x: MWForm) -> MWForm:
    r = x.base.r
    out = {}
    for (a, J), c in x.coeffs:
        for i, ai in enumerate(a, start=1):
            if not ai:
                continue
            sign, J2 = wedge_index((i,), J)
            if not sign:
                continue
            if i <= r:
                key = (a, J2)
            else:
                key = (a[:i - 1] + (ai - 1,) + a[i:], J2)
            out[key] = out.get(key, 0) + sign * ai * c
    return MWForm.build(x.level, x.base, x.degree + 1, out)


def mw_multiply(x: MWForm, y: MWForm) -> MWForm:
    out = {}
    for (a, J1), c1 in x.coeffs:
        for (b, J2), c2 in y.coeffs:
            sign, J = wedge_index(J1, J2)
            if sign:
                key = (tuple(u + v for u, v in zip(a, b)), J)
                out[key] = out.get(key, 0) + sign * c1 * c2
    return MWForm.build(x.level, x.base, x.degree + y.degree, out)


# ==============================================================================
# 2. THE BOUNDED MW COMPLEX
# ==============================================================================
@dataclass
class MWComplexLevel:
    """ω~ (or its theta-quotient over S0) in total degree <= D, grouped by kappa-weight."""
    base: BaseSpec
    level: PrimeLevel
    D: int
    blocks: dict = field(repr=False)     # weight -> tuple of key lists per degree

    def keys(self, q: int) -> list:
        return [key for w in sorted(self.blocks) for key in self.blocks[w][q]]

    def complex(self, weight: WeightFunction) -> PresentedComplex:
        per_degree = self.blocks[weight]
        m = self.level.m
        modules = tuple(PresentedModule((m,) * len(keys)) for keys in per_degree)
        diffs = tuple(self.d_block(weight, q) for q in range(len(per_degree) - 1))
        return PresentedComplex(self.level.p, m, modules, diffs)

    def d_block(self, weight: WeightFunction, q: int) -> np.ndarray:
        src, tgt = self.blocks[weight][q], self.blocks[weight][q + 1]
        index = {key: i for i, key in enumerate(tgt)}
        out = zeros(len(tgt), len(src))
        for col, key in enumerate(src):
            image = mw_differential(MWForm.build(self.level, self.base, q, {key: 1}))
            for k2, c in image.coeffs:
                out[index[k2], col] = c
        return out

    def element(self, key, q: int) -> MWForm:
        return MWForm.build(self.level, self.base, q, {key: 1})

    def cohomology(self) -> dict:
        total = {q: InvariantFactors() for q in range(self.base.n + 1)}
        for weight in sorted(self.blocks):
            for q, h in cohomology(self.complex(weight)).items():
                total[q] = total[q] + h
        return total


def build_mw(base: BaseSpec, level: PrimeLevel, D: int) -> MWComplexLevel:
    if D < 0:
        raise ValueError(f"degree bound D={D} must be >= 0")
    if base.flavor is Flavor.STRATUM:
        raise ValueError("the MW complex is built for the log flavors")
    n, r = base.n, base.r
    blocks = {}
    for a in bounded_exponents(n, D):
        if base.is_quotient and all(a[i - 1] for i in range(1, r + 1)):
            continue
        for q in range(n + 1):
            for J in combinations(range(1, n + 1), q):
                if _frame_degree(a, J, r) > D:
                    continue
                if base.flavor is Flavor.QUOTIENT_LOG_POINT and r in J:
                    continue
                weight = mw_weight(a, J, r)
                blocks.setdefault(weight, [[] for _ in range(n + 1)])[q].append((a, J))
    blocks = {w: tuple(sorted(ks) for ks in per) for w, per in blocks.items()}
    logging.debug(f"build_mw {base.label} m={level.m} D={D}: {len(blocks)} weights")
    return MWComplexLevel(base, level, D, blocks)


# ==============================================================================
# 3. KAPPA AND THE COMPARISONS
# ==============================================================================
def kappa(x: MWForm) -> DRWElement:
    """T_i -> [T_i], dT_j -> d[T_j], dlog T_i -> dlog[T_i], coefficients unchanged."""
    base = x.base
    source = base if base.flavor is not Flavor.QUOTIENT_LOG_POINT else base.with_flavor(Flavor.QUOTIENT_TRIVIAL)
    std = {}
    for (a, J), c in x.coeffs:
        key = (mw_weight(a, J, base.r), J)
        std[key] = std.get(key, Fraction(0)) + c
    image = DRWElement.from_standard(x.level, source, x.degree, std)
    return change_base(image, base) if source != base else image


def kappa_matrix(mw: MWComplexLevel, weight: WeightFunction, q: int) -> np.ndarray:
    block = weight_block(mw.base, mw.level, weight)
    src = mw.blocks[weight][q]
    index = block.index(q)
    out = zeros(len(index), len(src))
    for col, key in enumerate(src):
        for k2, c in kappa(mw.element(key, q)).coeffs:
            if k2 not in index:
                raise ValueError(f"kappa leaves the weight block {weight}")
            out[index[k2], col] = c
    return out


@dataclass
class IntegralIsoCertificate:
    base: BaseSpec
    level: PrimeLevel
    bound: int
    bijective: bool
    commutes: bool
    missing_weights: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.bijective and self.commutes and not self.missing_weights


def _free_iso(matrix: np.ndarray, p: int, m: int) -> bool:
    rows, cols = matrix.shape
    if rows != cols:
        return False
    if rows == 0:
        return True
    return smith_normal_form(matrix, p, m).exponents == (0,) * rows


def integral_iso_check(base: BaseSpec, level: PrimeLevel, D: int, K: int) -> IntegralIsoCertificate:
    """kappa onto the integral part of the slice: basis bijection plus d-conjugation, weight by weight."""
    if D != K:
        raise BoundMismatchError(f"integral comparison needs D == K, got D={D}, K={K}")
    mw = build_mw(base, level, D)
    slice_ = build_slice(base, level, K)
    p, m = level.p, level.m
    integral = {b.weight: b for b in slice_.blocks if b.weight.is_integral}
    missing = sorted(set(integral) ^ set(mw.blocks))
    bijective, commutes = True, True
    for weight in sorted(set(integral) & set(mw.blocks)):
        block = integral[weight]
        mats = {q: kappa_matrix(mw, weight, q) for q in range(base.n + 1)}
        bijective = bijective and all(_free_iso(mats[q], p, m) for q in mats)
        for q in range(base.n):
            lhs = matmul(mats[q + 1], mw.d_block(weight, q))
            rhs = matmul(block.d(q), mats[q])
            if ((lhs - rhs) % p ** m).any():
                commutes = False
    if missing:
        logging.warning(f"integral_iso_check: {len(missing)} weights present on one side only")
    return IntegralIsoCertificate(base, level, K, bijective, commutes, [w.render(p) for w in missing])


def level_one_identification(base: BaseSpec, p: int, K: int) -> IntegralIsoCertificate:
    """At m = 1 every weight is integral, so the S0 slice itself is the log Kahler complex."""
    return integral_iso_check(base.with_flavor(Flavor.QUOTIENT_LOG_POINT), PrimeLevel(p, 1), K, K)


@dataclass
class ModComparison:
    mw_factors: dict
    slice_factors: dict
    isomorphic: bool

    @property
    def equal(self) -> bool:
        return self.mw_factors == self.slice_factors


def mod_pm_comparison(base: BaseSpec, level: PrimeLevel, D: int) -> ModComparison:
    """H^q(MW mod p^m) against H^q(S0 slice) with K = D; kappa_* checked to be an isomorphism per weight."""
    quotient = base.with_flavor(Flavor.QUOTIENT_LOG_POINT)
    mw = build_mw(quotient, level, D)
    slice_ = build_slice(quotient, level, D)
    iso = True
    for weight in sorted(mw.blocks):
        block = slice_.block(weight)
        if block is None:
            iso = False
            continue
        source, target = mw.complex(weight), block.complex()
        for q in range(quotient.n + 1):
            H_mw, H_sl = cohomology_group(source, q), cohomology_group(target, q)
            if not H_mw.exponents and not H_sl.exponents:
                continue
            star = induced_map(kappa_matrix(mw, weight, q), H_mw, H_sl)
            iso = iso and is_isomorphism(star, H_mw, H_sl)
    return ModComparison(mw.cohomology(), slice_.cohomology(), iso)


def rational_dims(base: BaseSpec, p: int, D: int) -> dict:
    """
    d_t: full-level classes of H^t(MW_M), p^M > D, that survive reduction to level 1,
    counted as the F_p-rank of their image in H^t(MW_1).
    """
    M = 1
    while p ** M <= D:
        M += 1
    top, bottom = build_mw(base, PrimeLevel(p, M), D), build_mw(base, PrimeLevel(p, 1), D)
    dims = {t: 0 for t in range(base.n + 1)}
    for weight in sorted(top.blocks):
        C_top, C_one = top.complex(weight), bottom.complex(weight)
        for t in range(base.n + 1):
            H_top, H_one = cohomology_group(C_top, t), cohomology_group(C_one, t)
            full = [j for j, a in enumerate(H_top.exponents) if a == M]
            if not full or not H_one.exponents:
                continue
            images = np.stack([H_one.coordinates(H_top.generators[:, j] % p) for j in full], axis=1)
            dims[t] += smith_normal_form(images, p, 1).rank
    return dims


def expected_rational_dims(base: BaseSpec) -> dict:
    """Binomial pattern: C(r-1, t) over S0, C(r, t) over the trivial base."""
    mu = base.r - 1 if base.flavor is Flavor.QUOTIENT_LOG_POINT else base.r
    return {t: comb(mu, t) for t in range(base.n + 1)}


# ==============================================================================
# 4. OVERCONVERGENCE GAUGE
# ==============================================================================
@dataclass
class GaugeReport:
    epsilon: Fraction
    C: Fraction
    passes: bool
    norm: str
    family_size: int
    n_terms: int
    table: list = field(default_factory=list)   # (epsilon, minimal C) for the whole grid

    def as_dict(self) -> dict:
        return {
            "epsilon": str(self.epsilon),
            "C": str(self.C),
            "passes": self.passes,
            "norm": self.norm,
            "family_size": self.family_size,
            "n_terms": self.n_terms,
        }


def epsilon_grid(p: int, floor: Fraction) -> list:
    """{1/2^j, 1/(p 2^j)} down to the floor, descending."""
    floor = Fraction(floor)
    grid, j = set(), 0
    while Fraction(1, 2 ** j) >= floor:
        grid.add(Fraction(1, 2 ** j))
        if Fraction(1, p * 2 ** j) >= floor:
            grid.add(Fraction(1, p * 2 ** j))
        j += 1
    return sorted(grid, reverse=True)


def gauge_fit(family, epsilon_floor=Fraction(1, 64), c_max=Fraction(1), norm: str = "sum") -> GaugeReport:
    """Largest grid epsilon whose minimal C with v_p(xi) >= epsilon |k| - C stays within c_max."""
    family = list(family)
    if not family:
        raise EmptyFamilyError("gauge_fit needs a nonempty family")
    if norm not in ("sum", "max"):
        raise ValueError(f"unknown weight norm {norm!r}")
    points = [(t.weight.norm(norm), t.valuation()) for x in family for t in x.terms]
    p = family[0].level.p
    table = []
    for eps in epsilon_grid(p, epsilon_floor):
        C = max([Fraction(0)] + [eps * size - val for size, val in points])
        table.append((eps, C))
    chosen = next(((eps, C) for eps, C in table if C <= Fraction(c_max)), None)
    passes = chosen is not None
    eps, C = chosen if passes else table[-1]
    return GaugeReport(eps, C, passes, norm, len(family), len(points), table)
