"""
Weight filtration, Poincare residues, the Steenbrink double complexes B and C,
the operators nu and Phi, and the monodromy N, all at a fixed truncation level.

Everything is assembled per weight block of the trivial-base quotient: the
filtration P_j is spanned by basis terms, so every quotient ω~/P_j is again
presented by a subset of the basis and all maps are submatrices of d, ^theta
and F.
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations, product

import numpy as np

from .drw_core import (
    DRWElement, WeightBlock, block_operator_matrix, change_base, enumerate_weights, frobenius,
    multiply, restrict, weight_block,
)
from .exact_homology import (
    ComplexSES, PresentedComplex, PresentedModule, cohomology_group, connecting_hom,
    hstack, induced_map, is_isomorphism, matmul, subquotient, zeros,
)
from .log_semistable import (
    log_point_base, theta_sequence, theta_wedge, wedge_theta_from_S0,
)
from .witt_base import BaseSpec, Flavor, PrimeLevel, WeightFunction, key_to_standard, wedge_index


class NotInFiltrationError(ValueError):
    """residue(j, x) was asked for an x outside P_j."""


def log_count(key, base: BaseSpec) -> int:
    """Number of pure-log directions (divisor indices off the support) in a basis key."""
    weight, _, J = key
    return sum(1 for i in J if i in base.log_indices and i not in weight.support)


# ==============================================================================
# 1. WEIGHT FILTRATION
# ==============================================================================
@dataclass
class WeightFiltration:
    """P_0 ⊆ P_1 ⊆ ... on the trivial-base quotient slice, per weight block."""
    base: BaseSpec
    level: PrimeLevel
    blocks: tuple

    def mask(self, block: WeightBlock, q: int, j: int) -> list:
        return [log_count(key, self.base) <= j for key in block.keys[q]]

    def contains(self, x: DRWElement, j: int) -> bool:
        return all(log_count(key, x.base) <= j for key, _ in x.coeffs)

    def graded_dims(self) -> dict:
        """{q: {j: rank of Gr_j in degree q}}."""
        out = {}
        for block in self.blocks:
            for q, keys in enumerate(block.keys):
                for key in keys:
                    j = log_count(key, self.base)
                    out.setdefault(q, {}).setdefault(j, 0)
                    out[q][j] += 1
        return out

    def exhausted_at(self) -> int:
        """Smallest j with P_j everything."""
        dims = self.graded_dims()
        return max((j for per in dims.values() for j, c in per.items() if c), default=0)


def weight_filtration(slice_) -> WeightFiltration:
    if slice_.base.flavor is not Flavor.QUOTIENT_TRIVIAL:
        raise ValueError(f"the weight filtration lives on the trivial-base quotient, got {slice_.base.label}")
    return WeightFiltration(slice_.base, slice_.level, slice_.blocks)


def _classical_base(base: BaseSpec) -> BaseSpec:
    return BaseSpec(base.n, base.r, Flavor.STRATUM, ())


def _grid_below(weight: WeightFunction, level: PrimeLevel):
    N = level.p ** (level.m - 1)
    ranges = [range(int(x * N) + 1) for x in weight.entries]
    for numerators in product(*ranges):
        yield WeightFunction(tuple(Fraction(a, N) for a in numerators))


def filtration_image_generators(block: WeightBlock, j: int, q: int) -> np.ndarray:
    """
    Columns spanning the image of (classical forms of degree q-j) x (log forms
    of degree j) in the block: the defining description of P_j.
    """
    base, level, weight = block.base, block.level, block.weight
    classical = _classical_base(base)
    cols = []
    if q - j < 0:
        return zeros(len(block.keys[q]), 0)
    for k1 in _grid_below(weight, level):
        k2 = WeightFunction(tuple(a - b for a, b in zip(weight.entries, k1.entries)))
        if not base.admits(k1) or not base.admits(k2):
            continue
        left = weight_block(classical, level, k1).basis_elements(q - j)
        right = weight_block(base, level, k2).basis_elements(j)
        for y in left:
            y_log = change_base(y, base)
            for w in right:
                cols.append(block.vector(multiply(y_log, w)))
    if not cols:
        return zeros(len(block.keys[q]), 0)
    return np.stack(cols, axis=1)


def certify_filtration(block: WeightBlock, j: int, q: int) -> bool:
    """Span of count-<=j basis terms equals the image description of P_j."""
    p, m = block.level.p, block.level.m
    module = PresentedModule(block.annihilators(q))
    n = module.rank
    counted = zeros(n, 0)
    picks = [i for i, key in enumerate(block.keys[q]) if log_count(key, block.base) <= j]
    if picks:
        counted = zeros(n, len(picks))
        for col, i in enumerate(picks):
            counted[i, col] = 1
    image = filtration_image_generators(block, j, q)
    rel = module.relations(p)
    a = subquotient(hstack(counted, rel, rows=n), hstack(rel, rows=n), p, m).factors
    b = subquotient(hstack(counted, image, rel, rows=n), hstack(rel, rows=n), p, m).factors
    c = subquotient(hstack(image, rel, rows=n), hstack(rel, rows=n), p, m).factors
    return a == b == c


# ==============================================================================
# 2. POINCARE RESIDUES
# ==============================================================================
def stratum_base(base: BaseSpec, indices) -> BaseSpec:
    return BaseSpec(base.n, base.r, Flavor.STRATUM, tuple(indices))


def residue(j: int, x: DRWElement) -> dict:
    """
    Res_j: P_j -> ⊕_{|I|=j} (classical complex of Y_I)[-j]. Terms of P_{j-1} go
    to zero; dlog T_I is stripped from the left, so e_I ^ w -> w.
    """
    base = x.base
    if base.flavor is not Flavor.QUOTIENT_TRIVIAL:
        raise ValueError(f"residues are taken on the trivial-base quotient, got {base.label}")
    if j < 0:
        raise ValueError("residue index must be >= 0")
    parts = {}
    for key, c in x.coeffs:
        count = log_count(key, base)
        if count > j:
            raise NotInFiltrationError(f"term with {count} log poles is not in P_{j}")
        if count < j:
            continue
        weight, _, J = key
        I = tuple(i for i in J if i in base.log_indices and i not in weight.support)
        for J2, a in key_to_standard(key, c, base, x.level.p).items():
            rest = tuple(i for i in J2 if i not in I)
            sign, merged = wedge_index(I, rest)
            if not sign or merged != J2:
                continue
            bucket = parts.setdefault(I, {})
            bucket[(weight, rest)] = bucket.get((weight, rest), Fraction(0)) + sign * a
    return {I: DRWElement.from_standard(x.level, stratum_base(base, I), x.degree - j, std)
            for I, std in sorted(parts.items())}


@dataclass
class ResidueCheck:
    weight: WeightFunction
    j: int
    bijective: bool
    commutes: bool


def residue_check(block: WeightBlock, j: int) -> ResidueCheck:
    """Gr_j of one weight block against the direct sum of stratum blocks, shifted by j."""
    base, level, weight = block.base, block.level, block.weight
    strata = [I for I in combinations(base.log_indices, j) if not set(I) & weight.support]
    targets = {I: weight_block(stratum_base(base, I), level, weight) for I in strata}
    p, m = level.p, level.m
    bijective, commutes = True, True
    graded = {}
    for q in range(j, block.top_degree + 1):
        src = [key for key in block.keys[q] if log_count(key, base) == j]
        tgt = [(I, key) for I in strata for key in targets[I].keys[q - j]]
        tindex = {t: i for i, t in enumerate(tgt)}
        mat = zeros(len(tgt), len(src))
        for col, key in enumerate(src):
            for I, y in residue(j, DRWElement.from_keys(level, base, q, {key: 1})).items():
                for k2, c in y.coeffs:
                    mat[tindex[(I, k2)], col] = c
        src_ann = tuple(block.annihilators(q)[block.index(q)[key]] for key in src)
        tgt_ann = tuple(targets[I].annihilators(q - j)[targets[I].index(q - j)[key]] for I, key in tgt)
        graded[q] = (src, tgt, mat, tgt_ann)
        bijective = bijective and _module_iso(mat, src_ann, tgt_ann, p, m)

    sign = (-1) ** j
    for q in range(j, block.top_degree):
        src, tgt, mat, _ = graded[q]
        src1, tgt1, mat1, anns = graded[q + 1]
        rows = [block.index(q + 1)[k] for k in src1]
        cols = [block.index(q)[k] for k in src]
        d_gr = block.d(q)[np.ix_(rows, cols)] if rows and cols else zeros(len(rows), len(cols))
        t1index = {t: i for i, t in enumerate(tgt1)}
        d_strat = zeros(len(tgt1), len(tgt))
        for col, (I, key) in enumerate(tgt):
            tb = targets[I]
            dcol = tb.d(q - j)[:, tb.index(q - j)[key]]
            for r_key, r in tb.index(q - j + 1).items():
                if dcol[r]:
                    d_strat[t1index[(I, r_key)], col] = dcol[r]
        lhs = matmul(mat1, d_gr)
        rhs = sign * matmul(d_strat, mat)
        commutes = commutes and matrices_agree(lhs, rhs, anns, p)
    return ResidueCheck(weight, j, bijective, commutes)


def _diag(exponents, p: int) -> np.ndarray:
    out = zeros(len(exponents), len(exponents))
    for i, a in enumerate(exponents):
        out[i, i] = p ** a
    return out


def _module_iso(matrix: np.ndarray, src_ann: tuple, tgt_ann: tuple, p: int, e: int) -> bool:
    """Is the map ⊕Z/p^src -> ⊕Z/p^tgt given by `matrix` an isomorphism?"""
    if sorted(src_ann) != sorted(tgt_ann):
        return False
    n = len(tgt_ann)
    if n == 0:
        return True
    image = hstack(matrix, _diag(tgt_ann, p), rows=n)
    return subquotient(_diag((0,) * n, p), image, p, e).factors.length == 0


# ==============================================================================
# 3. STEENBRINK DOUBLE COMPLEXES
# ==============================================================================
@dataclass
class SteenbrinkB:
    """B^{i,j} = ω~^{i+j+1}/P_j for one weight block, with its total complex sB."""
    block: WeightBlock

    @property
    def base(self) -> BaseSpec:
        return self.block.base

    @property
    def level(self) -> PrimeLevel:
        return self.block.level

    @property
    def top(self) -> int:
        return self.block.top_degree - 1

    def entry_keys(self, i: int, j: int) -> list:
        q = i + j + 1
        if i < 0 or j < 0 or q > self.block.top_degree:
            return []
        return [key for key in self.block.keys[q] if log_count(key, self.base) > j]

    def layout(self, n: int) -> list:
        """Basis of sB^n as (i, j, key), ordered by i then key."""
        if not 0 <= n <= self.top:
            return []
        return [(i, n - i, key) for i in range(n + 1) for key in self.entry_keys(i, n - i)]

    def annihilators(self, n: int) -> tuple:
        block = self.block
        return tuple(block.annihilators(i + j + 1)[block.index(i + j + 1)[key]] for i, j, key in self.layout(n))

    @cached_property
    def _theta(self) -> dict:
        b = self.block
        return {q: block_operator_matrix(theta_wedge, b, b, q, q + 1) for q in range(b.top_degree)}

    def differential(self, n: int) -> np.ndarray:
        src, tgt = self.layout(n), self.layout(n + 1)
        tindex = {t: r for r, t in enumerate(tgt)}
        out = zeros(len(tgt), len(src))
        block = self.block
        for col, (i, j, key) in enumerate(src):
            q = i + j + 1
            c = block.index(q)[key]
            if q < block.top_degree:
                dcol = block.d(q)[:, c]
                tcol = self._theta[q][:, c]
                for r_key, r in block.index(q + 1).items():
                    if dcol[r] and (i + 1, j, r_key) in tindex:
                        out[tindex[(i + 1, j, r_key)], col] += (-1) ** j * dcol[r]
                    if tcol[r] and (i, j + 1, r_key) in tindex:
                        out[tindex[(i, j + 1, r_key)], col] += tcol[r]
        return out

    def nu(self, n: int) -> np.ndarray:
        """nu on sB^n: (-1)^(j+1) times the projection B^{i,j} -> B^{i-1,j+1}."""
        lay = self.layout(n)
        index = {t: r for r, t in enumerate(lay)}
        out = zeros(len(lay), len(lay))
        for col, (i, j, key) in enumerate(lay):
            target = (i - 1, j + 1, key)
            if target in index:
                out[index[target], col] = (-1) ** (j + 1)
        return out

    def total_complex(self) -> PresentedComplex:
        modules = tuple(PresentedModule(self.annihilators(n)) for n in range(self.top + 1))
        diffs = tuple(self.differential(n) for n in range(self.top))
        return PresentedComplex(self.level.p, self.level.m, modules, diffs)

    def entry_map(self, n: int, full_matrices: dict, target: "SteenbrinkB", scale) -> np.ndarray:
        """Entrywise map sB^n -> target sB^n from full-degree matrices; scale(i) multiplies B^{i,j}."""
        src, tgt = self.layout(n), target.layout(n)
        tindex = {t: r for r, t in enumerate(tgt)}
        out = zeros(len(tgt), len(src))
        for col, (i, j, key) in enumerate(src):
            q = i + j + 1
            mat = full_matrices[q]
            c = self.block.index(q)[key]
            for r_key, r in target.block.index(q).items():
                if mat[r, c] and (i, j, r_key) in tindex:
                    out[tindex[(i, j, r_key)], col] += scale(i) * mat[r, c]
        return out


def build_B(block: WeightBlock) -> SteenbrinkB:
    if block.base.flavor is not Flavor.QUOTIENT_TRIVIAL:
        raise ValueError(f"B is built from the trivial-base quotient, got {block.base.label}")
    return SteenbrinkB(block)


@dataclass
class SteenbrinkC:
    """sC^n = sB^{n-1} ⊕ sB^n with D(w1, w2) = (D w1 + nu w2, D w2)."""
    B: SteenbrinkB

    def rank(self, n: int) -> tuple:
        return len(self.B.layout(n - 1)), len(self.B.layout(n))

    def differential(self, n: int) -> np.ndarray:
        a0, b0 = self.rank(n)
        a1, b1 = self.rank(n + 1)
        out = zeros(a1 + b1, a0 + b0)
        if a0 and a1:
            out[:a1, :a0] = self.B.differential(n - 1)
        if b0 and a1:
            out[:a1, a0:] = self.B.nu(n)
        if b0 and b1:
            out[a1:, a0:] = self.B.differential(n)
        return out

    def annihilators(self, n: int) -> tuple:
        return self.B.annihilators(n - 1) + self.B.annihilators(n)

    def total_complex(self) -> PresentedComplex:
        top = self.B.top + 1
        modules = tuple(PresentedModule(self.annihilators(n)) for n in range(top + 1))
        diffs = tuple(self.differential(n) for n in range(top))
        return PresentedComplex(self.B.level.p, self.B.level.m, modules, diffs)

    def sequence(self) -> ComplexSES:
        """0 -> sB[-1] -> sC -> sB -> 0 (inclusion of the first summand, projection to the second)."""
        B = self.B
        sB = B.total_complex()
        shifted = PresentedComplex(sB.p, sB.e, sB.modules, sB.differentials, start=1)
        f, g = {}, {}
        for n in range(B.top + 2):
            a, b = self.rank(n)
            inc = zeros(a + b, a)
            pro = zeros(b, a + b)
            for i in range(a):
                inc[i, i] = 1
            for i in range(b):
                pro[i, a + i] = 1
            f[n], g[n] = inc, pro
        return ComplexSES(shifted, self.total_complex(), sB, f, g)


def build_C(B: SteenbrinkB) -> SteenbrinkC:
    return SteenbrinkC(B)


# ==============================================================================
# 4. THETA, PSI AND PHI
# ==============================================================================
def theta_map(B: SteenbrinkB, quotient: WeightBlock, n: int) -> np.ndarray:
    """Θ: ω^n -> sB^n, x -> (section x) ^ theta mod P_0 in B^{n,0}."""
    block = B.block
    lay = B.layout(n)
    index = {t: r for r, t in enumerate(lay)}
    out = zeros(len(lay), len(quotient.keys[n]) if n <= quotient.top_degree else 0)
    if n + 1 > block.top_degree or not out.shape[1]:
        return out
    full = block_operator_matrix(wedge_theta_from_S0, quotient, block, n, n + 1)
    for col in range(full.shape[1]):
        for r_key, r in block.index(n + 1).items():
            if full[r, col] and (n, 0, r_key) in index:
                out[index[(n, 0, r_key)], col] = full[r, col]
    return out


def psi_map(C: SteenbrinkC, n: int) -> np.ndarray:
    """Ψ: ω~^n -> sC^n, x -> (x mod P_0 in B^{n-1,0}, x ^ theta mod P_0 in B^{n,0})."""
    B = C.B
    block = B.block
    a, b = C.rank(n)
    out = zeros(a + b, len(block.keys[n]) if n <= block.top_degree else 0)
    first = {t: r for r, t in enumerate(B.layout(n - 1))}
    second = {t: r for r, t in enumerate(B.layout(n))}
    for col, key in enumerate(block.keys[n] if n <= block.top_degree else []):
        if (n - 1, 0, key) in first:
            out[first[(n - 1, 0, key)], col] = 1
        if n < block.top_degree:
            tcol = B._theta[n][:, col]
            for r_key, r in block.index(n + 1).items():
                if tcol[r] and (n, 0, r_key) in second:
                    out[a + second[(n, 0, r_key)], col] = tcol[r]
    return out


def phi_on_B(upper: SteenbrinkB, lower: SteenbrinkB, n: int) -> np.ndarray:
    """Φ = p^{i+1} F on B^{i,j}, from level m+1 (weight k) to level m (weight pk)."""
    p = upper.level.p
    fulls = {q: block_operator_matrix(frobenius, upper.block, lower.block, q)
             for q in range(upper.block.top_degree + 1)}
    return upper.entry_map(n, fulls, lower, lambda i: p ** (i + 1))


def phi_on_omega(upper: WeightBlock, lower: WeightBlock, n: int) -> np.ndarray:
    """Φ = p^{n+1} F on ω^n."""
    return upper.level.p ** (n + 1) * block_operator_matrix(frobenius, upper, lower, n)


def matrices_agree(a: np.ndarray, b: np.ndarray, annihilators, p: int) -> bool:
    diff = a - b
    return all(int(v) % p ** annihilators[r] == 0 for r in range(diff.shape[0]) for v in diff[r, :])


# ==============================================================================
# 5. MONODROMY
# ==============================================================================
def endomorphism_power_zero(matrix: np.ndarray, exponents: tuple, p: int, k: int) -> bool:
    n = len(exponents)
    power = zeros(n, n)
    for i in range(n):
        power[i, i] = 1
    for _ in range(k):
        power = matmul(matrix, power)
    return all(int(power[r, c]) % p ** exponents[r] == 0 for r in range(n) for c in range(n))


def nilpotency_index(matrix: np.ndarray, exponents: tuple, p: int) -> int:
    """Smallest k >= 1 with N^k = 0 (N acts on ⊕Z/p^exponents)."""
    n = len(exponents)
    for k in range(1, n + 2):
        if endomorphism_power_zero(matrix, exponents, p, k):
            return k
    raise ValueError("matrix is not nilpotent")


@dataclass
class BlockMonodromy:
    weight: WeightFunction
    degree: int
    exponents: tuple            # H^q(ω) invariant factors in generator order
    n_connecting: np.ndarray    # N as connecting homomorphism, in H^q(ω) coordinates
    n_nu: np.ndarray            # [nu] on H^q(sB), in H^q(sB) coordinates
    theta_star: np.ndarray      # Θ_*: H^q(ω) -> H^q(sB)
    theta_iso: bool
    agree: bool


def block_monodromy(base: BaseSpec, level: PrimeLevel, weight: WeightFunction,
                    strategy: str = "particular", rng=None) -> list:
    """N per degree for one weight block, computed both ways."""
    seq = theta_sequence(base, level, weight)
    B = build_B(seq.tilde)
    sB = B.total_complex()
    p = level.p
    out = []
    for q in range(seq.quotient.top_degree + 1):
        if not seq.quotient.keys[q]:
            continue
        n_conn, HC, _ = connecting_hom(seq.ses, q, strategy=strategy, rng=rng)
        HB = cohomology_group(sB, q)
        nu_star = induced_map(B.nu(q), HB, HB) if q <= B.top else zeros(0, 0)
        theta_mat = theta_map(B, seq.quotient, q)
        theta_star = induced_map(theta_mat, HC, HB) if q <= B.top else zeros(0, len(HC.exponents))
        iso = is_isomorphism(theta_star, HC, HB) if q <= B.top else not HC.exponents
        lhs = matmul(theta_star, n_conn)
        rhs = matmul(nu_star, theta_star)
        agree = matrices_agree(lhs, rhs, HB.exponents, p) if len(HB.exponents) else True
        out.append(BlockMonodromy(weight, q, HC.exponents, n_conn, nu_star, theta_star, iso, agree))
    return out


@dataclass
class MonodromyResult:
    base: BaseSpec
    level: PrimeLevel
    blocks: list = field(repr=False)

    def matrix(self, q: int) -> np.ndarray:
        """N on H^q as the block-diagonal sum over weights."""
        parts = [b for b in self.blocks if b.degree == q]
        size = sum(len(b.exponents) for b in parts)
        out = zeros(size, size)
        offset = 0
        for b in parts:
            k = len(b.exponents)
            if k:
                out[offset:offset + k, offset:offset + k] = b.n_connecting % self.level.p ** self.level.m
            offset += k
        return out

    def exponents(self, q: int) -> tuple:
        return tuple(a for b in self.blocks if b.degree == q for a in b.exponents)

    def nilpotency_index(self, q: int) -> int:
        return nilpotency_index(self.matrix(q), self.exponents(q), self.level.p)

    @property
    def agree(self) -> bool:
        return all(b.agree for b in self.blocks)

    @property
    def theta_iso(self) -> bool:
        return all(b.theta_iso for b in self.blocks)


def monodromy_N(base: BaseSpec, level: PrimeLevel, K, strategy: str = "particular", rng=None,
                max_block_size: int | None = None) -> MonodromyResult:
    quotient = log_point_base(base)
    blocks = []
    for weight in enumerate_weights(quotient, level, K):
        block = weight_block(quotient, level, weight)
        if block.is_empty or (max_block_size is not None and block.size > max_block_size):
            continue
        blocks.extend(block_monodromy(base, level, weight, strategy, rng))
    logging.debug(f"monodromy_N {base.label} m={level.m}: {len(blocks)} (weight, degree) pieces")
    return MonodromyResult(base, level, blocks)


def restriction_naturality(base: BaseSpec, level: PrimeLevel, weight: WeightFunction) -> bool:
    """N_m . R = R . N_{m+1} for the restriction W_{m+1} -> W_m on one weight block."""
    upper, lower = level.up(), level
    quotient = log_point_base(base)
    up_block = weight_block(quotient, upper, weight)
    low_block = weight_block(quotient, lower, weight)
    up_seq = theta_sequence(base, upper, weight)
    low_seq = theta_sequence(base, lower, weight)
    p = level.p
    for q in range(up_block.top_degree + 1):
        if not up_block.keys[q] or not low_block.keys[q]:
            continue
        n_up, H_up, _ = connecting_hom(up_seq.ses, q)
        n_low, H_low, _ = connecting_hom(low_seq.ses, q)
        res = block_operator_matrix(restrict, up_block, low_block, q)
        R = induced_map(res, H_up, H_low)
        if not R.size:
            continue
        if not matrices_agree(matmul(n_low, R), matmul(R, n_up), H_low.exponents, p):
            return False
    return True


@dataclass
class FrobeniusCheck:
    weight: WeightFunction
    degree: int
    theta_phi_commutes: bool
    commutator_zero: bool


def frobenius_check(base: BaseSpec, level: PrimeLevel, weight: WeightFunction) -> list:
    """ΘΦ = ΦΘ from level m+1 (weight k) to level m (weight pk); N Φ - Φ N is recorded."""
    p = level.p
    upper = level.up()
    lifted = weight.scaled(p)
    up_seq = theta_sequence(base, upper, weight)
    low_seq = theta_sequence(base, level, lifted)
    B_up, B_low = build_B(up_seq.tilde), build_B(low_seq.tilde)
    out = []
    for n in range(up_seq.quotient.top_degree + 1):
        if not up_seq.quotient.keys[n]:
            continue
        lhs = matmul(phi_on_B(B_up, B_low, n), theta_map(B_up, up_seq.quotient, n))
        rhs = matmul(theta_map(B_low, low_seq.quotient, n), phi_on_omega(up_seq.quotient, low_seq.quotient, n))
        commutes = matrices_agree(lhs, rhs, B_low.annihilators(n), p) if lhs.size else True
        n_up, H_up, _ = connecting_hom(up_seq.ses, n)
        n_low, H_low, _ = connecting_hom(low_seq.ses, n)
        phi_star = induced_map(phi_on_omega(up_seq.quotient, low_seq.quotient, n), H_up, H_low)
        comm = matmul(n_low, phi_star) - matmul(phi_star, n_up)
        zero = matrices_agree(comm, zeros(*comm.shape), H_low.exponents, p) if comm.size else True
        out.append(FrobeniusCheck(weight, n, commutes, zero))
    return out


def ladder_check(base: BaseSpec, level: PrimeLevel, weight: WeightFunction) -> bool:
    """Ψ is a chain map and the ladder θ-sequence -> (B[-1] -> C -> B) commutes."""
    seq = theta_sequence(base, level, weight)
    B = build_B(seq.tilde)
    C = build_C(B)
    sC = C.total_complex()
    c_seq = C.sequence()
    p = level.p
    tilde, quotient = seq.tilde, seq.quotient
    for n in range(tilde.top_degree + 1):
        psi = psi_map(C, n)
        ann_next = C.annihilators(n + 1)
        if n < tilde.top_degree and ann_next:
            lhs = matmul(sC.differential(n), psi)
            rhs = matmul(psi_map(C, n + 1), tilde.d(n))
            if not matrices_agree(lhs, rhs, ann_next, p):
                return False
        ann = C.annihilators(n)
        if n >= 1 and ann and quotient.keys[n - 1]:
            left = matmul(psi, seq.ses.f_at(n))
            inc = c_seq.f_at(n)
            right = matmul(inc, theta_map(B, quotient, n - 1))
            if not matrices_agree(left, right, ann, p):
                return False
        annB = B.annihilators(n)
        if annB and tilde.keys[n]:
            proj = c_seq.g_at(n)
            left = matmul(proj, psi)
            right = matmul(theta_map(B, quotient, n), seq.ses.g_at(n))
            if not matrices_agree(left, right, annB, p):
                return False
    return True
