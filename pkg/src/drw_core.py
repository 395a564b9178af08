"""
Weight-bounded truncations of W_m Lambda^q and the operators d, F, V,
restriction and products on them.

Elements are kept in the canonical basis of witt_base; every operator is
applied in integral-forms coordinates and normalized back, so results are
always reduced modulo the target level's annihilators.
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from itertools import combinations

import numpy as np
import scipy.sparse

from .exact_homology import (
    InvariantFactors, PresentedComplex, PresentedModule, cohomology, hstack, identity, kernel,
    subquotient, zeros,
)
from .utils import bounded_exponents
from .witt_base import (
    BaseSpec, Flavor, InadmissibleTermError, LevelMismatchError, PartitionSpec, PrimeLevel,
    WeightFunction, annihilator_of, block_keys, key_to_standard, raw_standard_value,
    standard_to_keys, term_from_key, wedge_index, weight_frame,
)


# ==============================================================================
# 1. ELEMENTS
# ==============================================================================
@dataclass(frozen=True)
class DRWElement:
    """Normalized finite sum of basis terms; `coeffs` is sorted by (weight, case, J)."""
    level: PrimeLevel
    base: BaseSpec
    degree: int
    coeffs: tuple = ()

    @classmethod
    def from_keys(cls, level: PrimeLevel, base: BaseSpec, degree: int, mapping: dict) -> "DRWElement":
        clean = {}
        for key, c in mapping.items():
            ann = annihilator_of(key, level)
            if ann <= 0:
                continue
            c = int(c) % level.p ** ann
            if c:
                clean[key] = c
        return cls(level, base, degree, tuple(sorted(clean.items())))

    @classmethod
    def from_standard(cls, level: PrimeLevel, base: BaseSpec, degree: int, std: dict) -> "DRWElement":
        """{(weight, J): c} in integral-forms coordinates -> normalized element."""
        by_weight = {}
        for (weight, J), c in std.items():
            if c:
                by_weight.setdefault(weight, {})
                by_weight[weight][J] = by_weight[weight].get(J, Fraction(0)) + c
        merged = {}
        for weight, part in by_weight.items():
            for key, c in standard_to_keys(part, weight, level, base).items():
                merged[key] = merged.get(key, 0) + c
        return cls.from_keys(level, base, degree, merged)

    @classmethod
    def zero(cls, level: PrimeLevel, base: BaseSpec, degree: int) -> "DRWElement":
        return cls(level, base, degree)

    def to_standard(self) -> dict:
        out = {}
        for key, c in self.coeffs:
            weight = key[0]
            for J, a in key_to_standard(key, c, self.base, self.level.p).items():
                out[(weight, J)] = out.get((weight, J), Fraction(0)) + a
        return {k: v for k, v in out.items() if v}

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def terms(self) -> list:
        return [term_from_key(key, c, self.level) for key, c in self.coeffs]

    @property
    def weights(self) -> list:
        return sorted({key[0] for key, _ in self.coeffs})

    def as_dict(self) -> dict:
        return dict(self.coeffs)

    def _check(self, other: "DRWElement") -> None:
        if self.level != other.level:
            raise LevelMismatchError(f"levels differ: m={self.level.m} vs m={other.level.m}")
        if self.base != other.base:
            raise ValueError(f"bases differ: {self.base.label} vs {other.base.label}")
        if self.degree != other.degree:
            raise ValueError(f"degrees differ: {self.degree} vs {other.degree}")

    def __add__(self, other: "DRWElement") -> "DRWElement":
        self._check(other)
        total = self.as_dict()
        for key, c in other.coeffs:
            total[key] = total.get(key, 0) + c
        return DRWElement.from_keys(self.level, self.base, self.degree, total)

    def __neg__(self) -> "DRWElement":
        return self.scale(-1)

    def __sub__(self, other: "DRWElement") -> "DRWElement":
        return self + (-other)

    def scale(self, c: int) -> "DRWElement":
        return DRWElement.from_keys(self.level, self.base, self.degree,
                                    {key: c * a for key, a in self.coeffs})

    def __mul__(self, other):
        if isinstance(other, int):
            return self.scale(other)
        return multiply(self, other)

    def __rmul__(self, other):
        if isinstance(other, int):
            return self.scale(other)
        return NotImplemented

    def render(self) -> str:
        return " + ".join(t.render() for t in self.terms) if self.coeffs else "0"


def _map_standard(x: DRWElement, fn) -> dict:
    """Apply fn(weight, J, c) -> iterable of ((weight', J'), c') to every coordinate."""
    out = {}
    for (weight, J), c in x.to_standard().items():
        for key, value in fn(weight, J, c):
            if value:
                out[key] = out.get(key, Fraction(0)) + value
    return out


# ==============================================================================
# 2. CONSTRUCTORS
# ==============================================================================
def constant(c: int, level: PrimeLevel, base: BaseSpec) -> DRWElement:
    zero = WeightFunction.zero(base.n)
    return DRWElement.from_keys(level, base, 0, {(zero, 1, ()): c})


def one(level: PrimeLevel, base: BaseSpec) -> DRWElement:
    return constant(1, level, base)


def teich_monomial(a, level: PrimeLevel, base: BaseSpec) -> DRWElement:
    """[T^a] for a nonnegative integer exponent vector."""
    if len(a) != base.n or any(int(x) != x or x < 0 for x in a):
        raise InadmissibleTermError(f"exponent {tuple(a)} is not a nonnegative integer vector of length {base.n}")
    weight = WeightFunction(tuple(a))
    return DRWElement.from_standard(level, base, 0, {(weight, ()): Fraction(1)})


def unit_vector(i: int, n: int) -> tuple:
    return tuple(1 if j == i else 0 for j in range(1, n + 1))


def dlog(i: int, level: PrimeLevel, base: BaseSpec) -> DRWElement:
    return wedge_dlog(one(level, base), i)


def d_teich(i: int, level: PrimeLevel, base: BaseSpec) -> DRWElement:
    """d[T_i]."""
    return differential(teich_monomial(unit_vector(i, base.n), level, base))


def element_from_raw(coeff: int, weight: WeightFunction, partition: PartitionSpec,
                     level: PrimeLevel, base: BaseSpec) -> DRWElement:
    """The value of a raw term as an element; unlike normalize_term it may expand to several terms."""
    std = raw_standard_value(coeff, weight, partition, level.p)
    return DRWElement.from_standard(level, base, partition.degree,
                                    {(weight, J): c for J, c in std.items()})


def basis_element(key, level: PrimeLevel, base: BaseSpec) -> DRWElement:
    _, case, J = key
    return DRWElement.from_keys(level, base, len(J) + (case == 3), {key: 1})


# ==============================================================================
# 3. OPERATORS
# ==============================================================================
def differential(x: DRWElement) -> DRWElement:
    def fn(weight, J, c):
        for j in sorted(weight.support):
            sign, J2 = wedge_index((j,), J)
            if sign:
                yield (weight, J2), sign * weight[j] * c

    return DRWElement.from_standard(x.level, x.base, x.degree + 1, _map_standard(x, fn))


def frobenius(x: DRWElement) -> DRWElement:
    """F: W_{m+1} -> W_m."""
    if x.level.m < 2:
        raise LevelMismatchError("frobenius needs an element of level >= 2")
    p = x.level.p
    std = _map_standard(x, lambda weight, J, c: [((weight.scaled(p), J), c)])
    return DRWElement.from_standard(x.level.down(), x.base, x.degree, std)


def verschiebung(x: DRWElement) -> DRWElement:
    """V: W_m -> W_{m+1}."""
    p = x.level.p
    std = _map_standard(x, lambda weight, J, c: [((weight.scaled(Fraction(1, p)), J), p * c)])
    return DRWElement.from_standard(x.level.up(), x.base, x.degree, std)


def restrict(x: DRWElement, steps: int = 1) -> DRWElement:
    """Projection W_{m+s} -> W_m."""
    if steps < 0 or x.level.m - steps < 1:
        raise LevelMismatchError(f"cannot restrict level {x.level.m} by {steps}")
    return DRWElement.from_standard(x.level.down(steps), x.base, x.degree, x.to_standard())


def mul_teichmuller(x: DRWElement, a) -> DRWElement:
    """x * [T^a]."""
    if len(a) != x.base.n or any(int(v) != v or v < 0 for v in a):
        raise InadmissibleTermError(f"exponent {tuple(a)} is not a nonnegative integer vector")
    shift = WeightFunction(tuple(a))
    std = _map_standard(x, lambda weight, J, c: [((weight + shift, J), c)])
    return DRWElement.from_standard(x.level, x.base, x.degree, std)


def wedge_dlog(x: DRWElement, i: int) -> DRWElement:
    """x ^ dlog[T_i] for a divisor index i."""
    if i not in x.base.log_indices:
        raise ValueError(f"dlog index {i} outside the divisor indices {x.base.log_indices}")

    def fn(weight, J, c):
        sign, J2 = wedge_index(J, (i,))
        if sign:
            yield (weight, J2), sign * c

    return DRWElement.from_standard(x.level, x.base, x.degree + 1, _map_standard(x, fn))


def multiply(x: DRWElement, y: DRWElement) -> DRWElement:
    if x.level != y.level:
        raise LevelMismatchError(f"levels differ: m={x.level.m} vs m={y.level.m}")
    if x.base != y.base:
        raise ValueError(f"bases differ: {x.base.label} vs {y.base.label}")
    ys = y.to_standard()
    out = {}
    for (w1, J1), c1 in x.to_standard().items():
        for (w2, J2), c2 in ys.items():
            sign, J = wedge_index(J1, J2)
            if sign:
                key = (w1 + w2, J)
                out[key] = out.get(key, Fraction(0)) + sign * c1 * c2
    return DRWElement.from_standard(x.level, x.base, x.degree + y.degree, out)


def change_base(x: DRWElement, base: BaseSpec) -> DRWElement:
    """Reinterpret the coordinates of x over another flavor (keep-or-kill on weights)."""
    return DRWElement.from_standard(x.level, base, x.degree, x.to_standard())


# ==============================================================================
# 4. ENUMERATION AND WEIGHT BLOCKS
# ==============================================================================
@lru_cache(maxsize=None)
def enumerate_weights(base: BaseSpec, level: PrimeLevel, K) -> tuple:
    """Weights of the base with |k| <= K and denominators dividing p^(m-1), sorted."""
    N = level.p ** (level.m - 1)
    limit = int(Fraction(K) * N)
    variables = base.variables
    weights = []
    for numerators in bounded_exponents(len(variables), limit):
        entries = [Fraction(0)] * base.n
        for i, a in zip(variables, numerators):
            entries[i - 1] = Fraction(a, N)
        weight = WeightFunction(tuple(entries))
        if base.admits(weight):
            weights.append(weight)
    return tuple(sorted(weights))


def enumerate_basis(base: BaseSpec, q: int, level: PrimeLevel, K) -> list:
    """All basis terms of degree q with |k| <= K, coefficient 1, in deterministic order."""
    return [term_from_key(key, 1, level)
            for weight in enumerate_weights(base, level, K)
            for key in block_keys(base, weight, q, level)]


@dataclass(frozen=True)
class WeightBlock:
    """The finite subcomplex of one weight; keys[q] lists the degree-q basis."""
    base: BaseSpec
    level: PrimeLevel
    weight: WeightFunction
    keys: tuple
    differentials: tuple = field(repr=False, compare=False)

    @property
    def top_degree(self) -> int:
        return len(self.keys) - 1

    @property
    def size(self) -> int:
        return max((len(k) for k in self.keys), default=0)

    @property
    def is_empty(self) -> bool:
        return self.size == 0

    def annihilators(self, q: int) -> tuple:
        if not 0 <= q <= self.top_degree:
            return ()
        return tuple(annihilator_of(key, self.level) for key in self.keys[q])

    @cached_property
    def _index(self) -> tuple:
        return tuple({key: i for i, key in enumerate(ks)} for ks in self.keys)

    def index(self, q: int) -> dict:
        return self._index[q] if 0 <= q <= self.top_degree else {}

    def d(self, q: int) -> np.ndarray:
        if 0 <= q < self.top_degree:
            return self.differentials[q]
        return zeros(len(self.keys[q + 1]) if 0 <= q + 1 <= self.top_degree else 0,
                     len(self.keys[q]) if 0 <= q <= self.top_degree else 0)

    def complex(self, e: int | None = None) -> PresentedComplex:
        modules = tuple(PresentedModule(self.annihilators(q)) for q in range(self.top_degree + 1))
        return PresentedComplex(self.level.p, e or self.level.m, modules, self.differentials)

    def vector(self, x: DRWElement) -> np.ndarray:
        """Coordinates of the weight-k component of x (other weights are ignored)."""
        index = self.index(x.degree)
        out = np.zeros(len(index), dtype=object)
        for key, c in x.coeffs:
            if key[0] == self.weight:
                out[index[key]] = c
        return out

    def element(self, vector, q: int) -> DRWElement:
        return DRWElement.from_keys(self.level, self.base, q,
                                    {key: int(c) for key, c in zip(self.keys[q], vector)})

    def basis_elements(self, q: int) -> list:
        return [basis_element(key, self.level, self.base) for key in self.keys[q]] \
            if 0 <= q <= self.top_degree else []


def _block_differential(base: BaseSpec, level: PrimeLevel, weight: WeightFunction,
                        src: tuple, tgt: tuple) -> np.ndarray:
    index = {key: i for i, key in enumerate(tgt)}
    out = zeros(len(tgt), len(src))
    p = level.p
    for col, key in enumerate(src):
        std = {}
        for J, c in key_to_standard(key, 1, base, p).items():
            for j in sorted(weight.support):
                sign, J2 = wedge_index((j,), J)
                if sign:
                    std[J2] = std.get(J2, Fraction(0)) + sign * weight[j] * c
        for k2, c in standard_to_keys(std, weight, level, base).items():
            out[index[k2], col] = c
    return out


@lru_cache(maxsize=None)
def weight_block(base: BaseSpec, level: PrimeLevel, weight: WeightFunction) -> WeightBlock:
    keys = tuple(tuple(block_keys(base, weight, q, level)) for q in range(base.n + 1))
    diffs = tuple(_block_differential(base, level, weight, keys[q], keys[q + 1]) for q in range(base.n))
    return WeightBlock(base, level, weight, keys, diffs)


def block_operator_matrix(op, source: WeightBlock, target: WeightBlock, q: int,
                          target_degree: int | None = None) -> np.ndarray:
    """Matrix of `op` from source degree q into the target block; images must stay in that block."""
    tq = q if target_degree is None else target_degree
    index = target.index(tq)
    sources = source.basis_elements(q)
    out = zeros(len(index), len(sources))
    for col, x in enumerate(sources):
        for key, c in op(x).coeffs:
            if key not in index:
                raise ValueError(f"image term of weight {key[0].render(source.level.p)} leaves the target block")
            out[index[key], col] = c
    return out


# ==============================================================================
# 5. COMPLEX SLICES
# ==============================================================================
@dataclass
class ComplexSlice:
    """W_m Lambda^* truncated to |k| <= K, as a direct sum of weight blocks."""
    base: BaseSpec
    level: PrimeLevel
    bound: object
    blocks: tuple
    skipped: tuple = ()

    @property
    def top_degree(self) -> int:
        return self.base.n

    @cached_property
    def _layout(self) -> dict:
        layout = {}
        for q in range(self.top_degree + 1):
            offsets, keys = {}, []
            for block in self.blocks:
                offsets[block.weight] = len(keys)
                keys.extend(block.keys[q])
            layout[q] = (offsets, keys, {key: i for i, key in enumerate(keys)})
        return layout

    def basis(self, q: int) -> list:
        return self._layout[q][1] if q in self._layout else []

    def index(self, q: int) -> dict:
        return self._layout[q][2] if q in self._layout else {}

    def annihilators(self, q: int) -> list:
        return [annihilator_of(key, self.level) for key in self.basis(q)]

    def block(self, weight: WeightFunction) -> WeightBlock | None:
        return next((b for b in self.blocks if b.weight == weight), None)

    def dims(self) -> dict:
        return {q: len(self.basis(q)) for q in range(self.top_degree + 1)}

    def d_matrix(self, q: int) -> scipy.sparse.coo_array:
        rows, cols, data = [], [], []
        if q in self._layout and q + 1 in self._layout:
            src_off, tgt_off = self._layout[q][0], self._layout[q + 1][0]
            for block in self.blocks:
                mat = block.d(q)
                for r, c in zip(*np.nonzero(mat)):
                    rows.append(tgt_off[block.weight] + r)
                    cols.append(src_off[block.weight] + c)
                    data.append(int(mat[r, c]))
        shape = (len(self.basis(q + 1)), len(self.basis(q)))
        return scipy.sparse.coo_array((np.array(data, dtype=np.int64), (rows, cols)), shape=shape)

    def check_d_squared(self) -> list:
        """(degree, row, col, value) entries of d.d that do not vanish modulo the annihilators."""
        violations = []
        for q in range(self.top_degree - 1):
            prod = (self.d_matrix(q + 1).tocsr() @ self.d_matrix(q).tocsr()).tocoo()
            anns = self.annihilators(q + 2)
            p = self.level.p
            for r, c, v in zip(prod.row, prod.col, prod.data):
                if int(v) % p ** anns[r]:
                    violations.append((q, int(r), int(c), int(v)))
        return violations

    def cohomology(self) -> dict:
        """Invariant factors per degree, as the multiset union over weight blocks."""
        total = {q: InvariantFactors() for q in range(self.top_degree + 1)}
        for block in self.blocks:
            if block.is_empty:
                continue
            for q, h in cohomology(block.complex()).items():
                total[q] = total[q] + h
        return total

    def coordinates(self, x: DRWElement) -> np.ndarray:
        index = self.index(x.degree)
        out = np.zeros(len(index), dtype=object)
        for key, c in x.coeffs:
            if key not in index:
                raise ValueError(f"term of weight {key[0].render(self.level.p)} is outside the slice")
            out[index[key]] = c
        return out

    def element(self, vector, q: int) -> DRWElement:
        return DRWElement.from_keys(self.level, self.base, q,
                                    {key: int(c) for key, c in zip(self.basis(q), vector)})

    def basis_elements(self, q: int) -> list:
        return [basis_element(key, self.level, self.base) for key in self.basis(q)]


def build_slice(base: BaseSpec, level: PrimeLevel, K, max_block_size: int | None = None) -> ComplexSlice:
    blocks, skipped = [], []
    for weight in enumerate_weights(base, level, K):
        frame = weight_frame(base, weight, level.p)
        if frame.u >= level.m:
            continue
        block = weight_block(base, level, weight)
        if block.is_empty:
            continue
        if max_block_size is not None and block.size > max_block_size:
            logging.warning(f"Skipping weight block {weight.render(level.p)}: size {block.size} > {max_block_size}")
            skipped.append(weight)
            continue
        blocks.append(block)
    logging.debug(f"build_slice {base.label} m={level.m} K={K}: {len(blocks)} blocks, {len(skipped)} skipped")
    return ComplexSlice(base, level, K, tuple(blocks), tuple(skipped))


def operator_matrix(op, source: ComplexSlice, target: ComplexSlice, q: int,
                    target_degree: int | None = None) -> tuple[scipy.sparse.coo_array, list]:
    """
    Sparse matrix of `op` from source degree q to the target slice. Source basis
    elements whose image leaves the target's weight bound are listed in `dropped`
    and contribute no column entries.
    """
    tq = q if target_degree is None else target_degree
    index = target.index(tq)
    rows, cols, data, dropped = [], [], [], []
    for col, x in enumerate(source.basis_elements(q)):
        image = op(x)
        if any(key not in index for key, _ in image.coeffs):
            dropped.append(col)
            continue
        for key, c in image.coeffs:
            rows.append(index[key])
            cols.append(col)
            data.append(int(c))
    shape = (len(target.basis(tq)), len(source.basis(q)))
    return scipy.sparse.coo_array((np.array(data, dtype=np.int64), (rows, cols)), shape=shape), dropped


def sparse_triplets(matrix: scipy.sparse.coo_array) -> list:
    coo = matrix.tocoo()
    entries = sorted(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))
    return [[int(r), int(c), int(v)] for r, c, v in entries if v]


def render_key(key, p: int) -> str:
    weight, case, J = key
    return f"e({weight.render(p)}; {PartitionSpec.canonical(weight, case, J).render()})"


def slice_document(slice_: ComplexSlice, operators: dict | None = None) -> dict:
    """JSON-ready description: bases per degree and sparse triplet matrices."""
    p = slice_.level.p
    doc = {
        "p": p,
        "m": slice_.level.m,
        "n": slice_.base.n,
        "r": slice_.base.r,
        "flavor": slice_.base.flavor.value,
        "K": str(slice_.bound),
        "bases": [[render_key(key, p) for key in slice_.basis(q)] for q in range(slice_.top_degree + 1)],
        "annihilators": [slice_.annihilators(q) for q in range(slice_.top_degree + 1)],
        "matrices": {"d": [sparse_triplets(slice_.d_matrix(q)) for q in range(slice_.top_degree)]},
        "skipped": [w.render(p) for w in slice_.skipped],
    }
    for name, mats in (operators or {}).items():
        doc["matrices"][name] = [sparse_triplets(m) for m in mats]
    return doc


# ==============================================================================
# 6. LATTICE-QUOTIENT ORACLE
# ==============================================================================
def _wedge_kappa_matrix(scaled: dict, indices: tuple, src: list, tgt: list) -> np.ndarray:
    tindex = {J: i for i, J in enumerate(tgt)}
    out = zeros(len(tgt), len(src))
    for col, J in enumerate(src):
        for j in indices:
            if scaled.get(j):
                sign, J2 = wedge_index((j,), J)
                if sign:
                    out[tindex[J2], col] += sign * scaled[j]
    return out


def lattice_quotient_factors(base: BaseSpec, level: PrimeLevel, weight: WeightFunction, q: int) -> InvariantFactors:
    """
    Invariant factors of E_k / (V^m E + dV^m E) in degree q, computed from the
    lattice of integral forms with integral differential. Independent of the
    enumerated basis; used to validate its annihilators.
    """
    if base.flavor is Flavor.QUOTIENT_LOG_POINT:
        raise ValueError("the lattice oracle works on the trivial-base and stratum flavors")
    if not base.admits(weight) or q < 0:
        return InvariantFactors()
    p, m = level.p, level.m
    frame = weight_frame(base, weight, p)
    u = frame.u
    if u >= m:
        return InvariantFactors()
    S = frame.full_indices
    e = m + 2 * u + 1
    mod = p ** e
    scaled = {j: int(weight[j] * p ** u) for j in S}
    lam = {t: list(combinations(S, t)) if 0 <= t <= len(S) else [] for t in (q - 1, q, q + 1)}
    A_q = _wedge_kappa_matrix(scaled, S, lam[q], lam[q + 1])
    A_prev = _wedge_kappa_matrix(scaled, S, lam[q - 1], lam[q])

    def integral_forms(A: np.ndarray, size: int, t: int) -> np.ndarray:
        # {w : A w = 0 mod p^t} plus p^t times the lattice
        if t <= 0:
            return identity(size)
        return hstack(kernel(A, p, t), p ** t * identity(size), rows=size)

    N = len(lam[q])
    E_gens = integral_forms(A_q, N, u) % mod
    inner_q = integral_forms(A_q, N, u - m)
    inner_prev = integral_forms(A_prev, len(lam[q - 1]), u - m)
    images = A_prev.dot(inner_prev) if inner_prev.size else zeros(N, 0)
    images = images * p ** (m - u) if m >= u else images // p ** (u - m)
    fil_gens = hstack(p ** m * inner_q, images, rows=N) % mod
    return subquotient(E_gens, fil_gens, p, e).factors
