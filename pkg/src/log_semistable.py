"""
Semistable quotient structure: the lambda projection, theta, the theta short
exact sequence defining the complex over S0, the Fil filtration and the
integral/fractional decomposition.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from .drw_core import (
    ComplexSlice, DRWElement, WeightBlock, block_operator_matrix, change_base, differential, dlog, multiply,
    operator_matrix, restrict, verschiebung, weight_block,
)
from .exact_homology import (
    ComplexSES, ExactnessReport, InvariantFactors, PresentedComplex, PresentedModule,
    cohomology, exactness_check, hstack, solve, zeros,
)
from .witt_base import BaseSpec, Flavor, PrimeLevel, WeightFunction, weight_frame


def trivial_base(base: BaseSpec) -> BaseSpec:
    return base.with_flavor(Flavor.QUOTIENT_TRIVIAL)


def log_point_base(base: BaseSpec) -> BaseSpec:
    return base.with_flavor(Flavor.QUOTIENT_LOG_POINT)


# ==============================================================================
# 1. THETA, LAMBDA AND THE PROJECTION TO S0
# ==============================================================================
def theta(level: PrimeLevel, base: BaseSpec) -> DRWElement:
    """theta_m = dlog[T1] + ... + dlog[Tr] (zero over S0)."""
    total = DRWElement.zero(level, base, 1)
    for i in base.log_indices:
        total = total + dlog(i, level, base)
    return total


def lambda_project(x: DRWElement) -> DRWElement:
    """(B, N^r)/(k,*) -> (A, N^r)/(k,*): keep-or-kill on weight blocks."""
    if x.base.flavor is not Flavor.POLY_TRIVIAL:
        raise ValueError(f"lambda_project expects a polynomial-base element, got {x.base.label}")
    return change_base(x, trivial_base(x.base))


def theta_wedge(x: DRWElement) -> DRWElement:
    if x.base.flavor is not Flavor.QUOTIENT_TRIVIAL:
        raise ValueError(f"theta_wedge acts on the trivial-base quotient, got {x.base.label}")
    return multiply(x, theta(x.level, x.base))


def project_to_S0(x: DRWElement) -> DRWElement:
    if x.base.flavor is not Flavor.QUOTIENT_TRIVIAL:
        raise ValueError(f"project_to_S0 expects a trivial-base quotient element, got {x.base.label}")
    return change_base(x, log_point_base(x.base))


def section_from_S0(x: DRWElement) -> DRWElement:
    """Lift along project_to_S0 by including the S0 basis into the trivial-base one."""
    return change_base(x, trivial_base(x.base))


def wedge_theta_from_S0(x: DRWElement) -> DRWElement:
    """The left map of the theta sequence: lift to the trivial base, then wedge with theta."""
    return theta_wedge(section_from_S0(x))


# ==============================================================================
# 2. THETA SHORT EXACT SEQUENCE (PER WEIGHT BLOCK)
# ==============================================================================
@dataclass
class ThetaSequence:
    """0 -> Lambda_S0[-1] -(^theta)-> Lambda~ -> Lambda_S0 -> 0 for one weight block."""
    weight: WeightFunction
    tilde: WeightBlock
    quotient: WeightBlock
    ses: ComplexSES


def theta_sequence(base: BaseSpec, level: PrimeLevel, weight: WeightFunction) -> ThetaSequence:
    tilde = weight_block(trivial_base(base), level, weight)
    quotient = weight_block(log_point_base(base), level, weight)
    top = tilde.top_degree
    # A^q = S0^(q-1); d unsigned so that ^theta is a chain map
    shifted = PresentedComplex(level.p, level.m,
                               tuple(PresentedModule(quotient.annihilators(q)) for q in range(top + 1)),
                               quotient.differentials, start=1)
    f = {q: block_operator_matrix(wedge_theta_from_S0, quotient, tilde, q - 1, q) for q in range(1, top + 1)}
    g = {q: block_operator_matrix(project_to_S0, tilde, quotient, q) for q in range(top + 1)}
    ses = ComplexSES(shifted, tilde.complex(), quotient.complex(), f, g)
    return ThetaSequence(weight, tilde, quotient, ses)


# ==============================================================================
# 3. THE FIL FILTRATION
# ==============================================================================
@dataclass
class FilSubspace:
    """Fil^s of a slice: generators per weight block and degree, as block coordinate columns."""
    s: int
    level: PrimeLevel
    generators: dict = field(repr=False)   # weight -> {q: matrix}
    blocks: dict = field(repr=False)       # weight -> WeightBlock

    def matrix(self, weight: WeightFunction, q: int) -> np.ndarray:
        block = self.blocks[weight]
        return self.generators[weight].get(q, zeros(len(block.index(q)), 0))

    def contains(self, x: DRWElement) -> bool:
        p, m = self.level.p, self.level.m
        for weight in {key[0] for key, _ in x.coeffs}:
            if weight not in self.blocks:
                return False
            block = self.blocks[weight]
            module = PresentedModule(block.annihilators(x.degree))
            aug = hstack(self.matrix(weight, x.degree), module.relations(p), rows=module.rank)
            if solve(aug, block.vector(x), p, m) is None:
                return False
        return True

    def elements(self, q: int) -> list:
        out = []
        for weight, block in self.blocks.items():
            mat = self.matrix(weight, q)
            out.extend(block.element(mat[:, j], q) for j in range(mat.shape[1]))
        return out


def fil_generators(block: WeightBlock, s: int) -> dict:
    """V^s(basis) + dV^s(basis) of the level-(m-s) block of weight p^s k, per degree."""
    level, base, weight = block.level, block.base, block.weight
    p = level.p
    out = {}
    if s == 0:
        for q in range(block.top_degree + 1):
            n = len(block.keys[q])
            mat = zeros(n, n)
            for i in range(n):
                mat[i, i] = 1
            out[q] = mat
        return out
    if s >= level.m:
        return out
    lower_level = level.down(s)
    lifted = weight.scaled(p ** s)
    if weight_frame(base, lifted, p).u >= lower_level.m or not base.admits(lifted):
        return out
    lower = weight_block(base, lower_level, lifted)

    def v_power(x: DRWElement) -> DRWElement:
        for _ in range(s):
            x = verschiebung(x)
        return x

    for q in range(block.top_degree + 1):
        cols = []
        if q <= lower.top_degree and lower.keys[q]:
            cols.append(block_operator_matrix(v_power, lower, block, q))
        if 1 <= q and lower.keys[q - 1]:
            cols.append(block_operator_matrix(lambda x: differential(v_power(x)), lower, block, q - 1, q))
        out[q] = hstack(*cols, rows=len(block.keys[q]))
    return out


def fil_subspace(s: int, slice_: ComplexSlice) -> FilSubspace:
    if not 0 <= s <= slice_.level.m:
        raise ValueError(f"Fil index s={s} outside [0, {slice_.level.m}]")
    gens = {b.weight: fil_generators(b, s) for b in slice_.blocks}
    return FilSubspace(s, slice_.level, gens, {b.weight: b for b in slice_.blocks})


def fil_sequence_report(base: BaseSpec, level: PrimeLevel, weight: WeightFunction, q: int) -> ExactnessReport:
    """
    0 -> Fil^m W_{m+1} -> W_{m+1} -> W_m -> 0 in degree q for one weight, with
    Fil^m presented by its generators (so only the middle and right ends are meaningful).
    """
    upper_level = level.up()
    upper = weight_block(base, upper_level, weight)
    lower = weight_block(base, level, weight)
    gens = fil_generators(upper, level.m).get(q, zeros(len(upper.index(q)), 0))
    free = PresentedModule((upper_level.m,) * gens.shape[1])
    res = block_operator_matrix(restrict, upper, lower, q) \
        if upper.keys[q] else zeros(len(lower.index(q)), 0)
    return exactness_check(gens, res, free, PresentedModule(upper.annihilators(q)),
                           PresentedModule(lower.annihilators(q)), level.p, upper_level.m)


# ==============================================================================
# 4. INTEGRAL / FRACTIONAL DECOMPOSITION
# ==============================================================================
@dataclass
class IntFracSplit:
    integral: tuple     # weight blocks with integral weight
    fractional: tuple   # weight blocks with purely fractional weight

    def dims(self, part: str) -> dict:
        blocks = self.integral if part == "int" else self.fractional
        out = {}
        for block in blocks:
            for q, keys in enumerate(block.keys):
                out[q] = out.get(q, 0) + len(keys)
        return out

    def cohomology(self, part: str) -> dict:
        blocks = self.integral if part == "int" else self.fractional
        total = {}
        for block in blocks:
            for q, h in cohomology(block.complex()).items():
                total[q] = total.get(q, InvariantFactors()) + h
        return total

    def acyclic_failures(self) -> list:
        """Fractional weight blocks with nonzero cohomology."""
        bad = []
        for block in self.fractional:
            groups = cohomology(block.complex())
            if any(h.length for h in groups.values()):
                bad.append((block.weight, groups))
        return bad


def int_frac_split(slice_: ComplexSlice) -> IntFracSplit:
    integral = tuple(b for b in slice_.blocks if b.weight.is_integral)
    fractional = tuple(b for b in slice_.blocks if not b.weight.is_integral)
    logging.debug(f"int_frac_split: {len(integral)} integral, {len(fractional)} fractional blocks")
    return IntFracSplit(integral, fractional)


def d_crosses_weights(slice_: ComplexSlice) -> list:
    """Entries of the slice differential linking different weights (always empty for a weight-graded d)."""
    crossings = []
    for q in range(slice_.top_degree):
        src, tgt = slice_.basis(q), slice_.basis(q + 1)
        mat = slice_.d_matrix(q).tocoo()
        for r, c in zip(mat.row, mat.col):
            if src[c][0] != tgt[r][0]:
                crossings.append((q, int(r), int(c)))
    return crossings


def lambda_matrix(slice_poly: ComplexSlice, slice_quot: ComplexSlice, q: int):
    return operator_matrix(lambda_project, slice_poly, slice_quot, q)
