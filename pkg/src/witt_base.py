"""
Exact arithmetic in W_m(F_p) = Z/p^m, weight functions, partitions and the
normal form of basic log Witt differentials.

Every element of weight k is handled in integral-forms coordinates:
T^k * sum_J c_J dlog T_J with J running over subsets of the allowed dlog
indices S(k). The level-m module of weight k is the lattice of forms w with w
and dw integral, modulo V^m + dV^m. Its canonical basis has three shapes:

    Case 1  k integral      T^k dlog T_J            J in S(k)            ann. m
    Case 2  k fractional    p^u T^k dlog T_J        J in S(k) - {j0}     ann. m - u
    Case 3  k fractional    T^k (kappa' ^ dlog T_J) J in S(k) - {j0}     ann. m - u

where u = u(k) is the denominator exponent, j0 the first index of minimal
p-adic valuation and kappa' = k / p^{v_p(k)} the primitive weight vector.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from itertools import combinations

import sympy


class LevelMismatchError(ValueError):
    """Operands live at different truncation levels (or over different primes)."""


class InadmissibleTermError(ValueError):
    """A raw term cannot be normalized at the requested level and base."""


class NonBasicTermError(ValueError):
    """A raw term expands to more than one basis term."""


# ==============================================================================
# 1. P-ADIC HELPERS
# ==============================================================================
def p_valuation(x, p: int, cap: int | None = None) -> int:
    """v_p of an int or Fraction. Zero maps to `cap`."""
    x = Fraction(x)
    if x == 0:
        if cap is None:
            raise ValueError("valuation of 0 needs a cap")
        return cap
    v = 0
    num, den = x.numerator, x.denominator
    while num % p == 0:
        num //= p
        v += 1
    while den % p == 0:
        den //= p
        v -= 1
    if cap is not None:
        v = min(v, cap)
    return v


def to_residue(x, p: int, e: int) -> int:
    """Image of a p-integral rational in Z/p^e."""
    x = Fraction(x)
    mod = p ** e
    if x.denominator % p == 0:
        raise ValueError(f"{x} is not p-integral for p={p}")
    return (x.numerator * pow(x.denominator, -1, mod)) % mod if mod > 1 else 0


@lru_cache(maxsize=None)
def _is_prime(p: int) -> bool:
    return bool(sympy.isprime(p))


def wedge_index(a: tuple, b: tuple) -> tuple[int, tuple]:
    """dlog T_a ^ dlog T_b = sign * dlog T_c with c sorted; sign 0 on overlap."""
    if set(a) & set(b):
        return 0, ()
    inversions = sum(1 for x in a for y in b if x > y)
    return (-1) ** inversions, tuple(sorted(a + b))


# ==============================================================================
# 2. COEFFICIENTS IN W_m(F_p)
# ==============================================================================
@dataclass(frozen=True, order=True)
class PrimeLevel:
    p: int
    m: int

    def __post_init__(self):
        if not isinstance(self.p, int) or not _is_prime(self.p):
            raise ValueError(f"p={self.p} is not a prime")
        if not isinstance(self.m, int) or self.m < 1:
            raise ValueError(f"truncation level m={self.m} must be >= 1")

    @property
    def modulus(self) -> int:
        return self.p ** self.m

    def up(self, s: int = 1) -> "PrimeLevel":
        return PrimeLevel(self.p, self.m + s)

    def down(self, s: int = 1) -> "PrimeLevel":
        return PrimeLevel(self.p, self.m - s)


@dataclass(frozen=True)
class CoeffW:
    """An element of W_m(F_p) = Z/p^m, kept as its canonical residue."""
    value: int
    level: PrimeLevel

    def __post_init__(self):
        object.__setattr__(self, "value", int(self.value) % self.level.modulus)

    def _coerce(self, other) -> "CoeffW":
        if isinstance(other, int):
            return CoeffW(other, self.level)
        if not isinstance(other, CoeffW):
            return NotImplemented
        if other.level != self.level:
            raise LevelMismatchError(f"cannot combine W_{self.level.m} and W_{other.level.m} coefficients")
        return other

    def __add__(self, other):
        other = self._coerce(other)
        return CoeffW(self.value + other.value, self.level)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        return CoeffW(self.value - other.value, self.level)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        return CoeffW(self.value * other.value, self.level)

    __rmul__ = __mul__

    def __neg__(self):
        return CoeffW(-self.value, self.level)

    def __pow__(self, k: int):
        return CoeffW(pow(self.value, k, self.level.modulus), self.level)

    def __int__(self):
        return self.value

    def valuation(self) -> int:
        """v_p, with v_p(0) = m."""
        return p_valuation(self.value, self.level.p, cap=self.level.m)

    def is_unit(self) -> bool:
        return self.value % self.level.p != 0


def teichmuller(a: int, level: PrimeLevel) -> CoeffW:
    """Teichmuller lift of a residue mod p, via the Hensel limit a^(p^(m-1))."""
    p, m = level.p, level.m
    if not 0 <= a < p:
        raise ValueError(f"residue {a} not in [0, {p})")
    return CoeffW(pow(a, p ** (m - 1), p ** m), level)


# ==============================================================================
# 3. WEIGHT FUNCTIONS AND BASES
# ==============================================================================
@dataclass(frozen=True, order=True)
class WeightFunction:
    """k: [1, n] -> Z>=0[1/p]; position i-1 of `entries` holds k(i)."""
    entries: tuple

    def __post_init__(self):
        values = tuple(Fraction(x) for x in self.entries)
        if any(x < 0 for x in values):
            raise InadmissibleTermError(f"negative weight {values}")
        object.__setattr__(self, "entries", values)

    @classmethod
    def of(cls, *values) -> "WeightFunction":
        return cls(tuple(values))

    @classmethod
    def zero(cls, n: int) -> "WeightFunction":
        return cls((0,) * n)

    @property
    def n(self) -> int:
        return len(self.entries)

    def __getitem__(self, i: int) -> Fraction:
        return self.entries[i - 1]

    @property
    def support(self) -> frozenset:
        return frozenset(i + 1 for i, x in enumerate(self.entries) if x != 0)

    @property
    def size(self) -> Fraction:
        return sum(self.entries, Fraction(0))

    @property
    def max_entry(self) -> Fraction:
        return max(self.entries, default=Fraction(0))

    @property
    def is_integral(self) -> bool:
        return all(x.denominator == 1 for x in self.entries)

    def check_denominators(self, p: int) -> None:
        for x in self.entries:
            den = x.denominator
            while den % p == 0:
                den //= p
            if den != 1:
                raise InadmissibleTermError(f"weight value {x} is not in Z[1/{p}]")

    def denominator_exponent(self, p: int) -> int:
        """u(k): the largest p-adic denominator exponent."""
        return max((max(0, -p_valuation(x, p)) for x in self.entries if x != 0), default=0)

    def valuation(self, p: int) -> int | None:
        """min v_p(k(i)) over the support; None for the zero weight."""
        vals = [p_valuation(x, p) for x in self.entries if x != 0]
        return min(vals) if vals else None

    def restricted(self, indices) -> "WeightFunction":
        keep = set(indices)
        return WeightFunction(tuple(x if i + 1 in keep else 0 for i, x in enumerate(self.entries)))

    def scaled(self, c) -> "WeightFunction":
        c = Fraction(c)
        return WeightFunction(tuple(x * c for x in self.entries))

    def __add__(self, other: "WeightFunction") -> "WeightFunction":
        return WeightFunction(tuple(x + y for x, y in zip(self.entries, other.entries)))

    def norm(self, kind: str = "sum") -> Fraction:
        return self.size if kind == "sum" else self.max_entry

    def render(self, p: int) -> str:
        parts = []
        for x in self.entries:
            if x.denominator == 1:
                parts.append(str(x.numerator))
            else:
                e = p_valuation(x.denominator, p)
                parts.append(f"{x.numerator}/{p}^{e}")
        return "(" + ",".join(parts) + ")"


class Flavor(str, Enum):
    POLY_TRIVIAL = "PolyTrivialBase"
    QUOTIENT_TRIVIAL = "QuotientTrivialBase"
    QUOTIENT_LOG_POINT = "QuotientLogPoint"
    STRATUM = "Stratum"


@dataclass(frozen=True)
class BaseSpec:
    """
    (B, N^r)/(k,*), (A, N^r)/(k,*) or (A, N^r)/S0 with B = k[T1..Tn] and
    A = B/(T1...Tr); the Stratum flavor is the classical (log-free) complex of
    k[T_j : j not in `stratum`].
    """
    n: int
    r: int
    flavor: Flavor = Flavor.POLY_TRIVIAL
    stratum: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "flavor", Flavor(self.flavor))
        object.__setattr__(self, "stratum", tuple(sorted(self.stratum)))
        if not 1 <= self.r <= self.n:
            raise ValueError(f"base requires 1 <= r <= n, got n={self.n}, r={self.r}")
        if self.stratum and self.flavor is not Flavor.STRATUM:
            raise ValueError("only the Stratum flavor carries stratum indices")
        if not set(self.stratum) <= set(range(1, self.r + 1)):
            raise ValueError(f"stratum {self.stratum} must lie in the divisor indices [1, {self.r}]")

    @property
    def is_quotient(self) -> bool:
        return self.flavor in (Flavor.QUOTIENT_TRIVIAL, Flavor.QUOTIENT_LOG_POINT)

    @property
    def log_indices(self) -> tuple:
        return () if self.flavor is Flavor.STRATUM else tuple(range(1, self.r + 1))

    @property
    def variables(self) -> tuple:
        return tuple(i for i in range(1, self.n + 1) if i not in self.stratum)

    def with_flavor(self, flavor: Flavor, stratum: tuple = ()) -> "BaseSpec":
        return BaseSpec(self.n, self.r, flavor, stratum)

    def killed(self, weight: WeightFunction) -> bool:
        """Weights in the ideal generated by [T1...Tr] vanish on the quotient flavors."""
        return self.is_quotient and set(range(1, self.r + 1)) <= weight.support

    def admits(self, weight: WeightFunction) -> bool:
        if weight.n != self.n or not weight.support <= set(self.variables):
            return False
        return not self.killed(weight)

    def eliminated_index(self, weight: WeightFunction) -> int | None:
        """The pure-log direction removed over S0: max([1, r] - supp k)."""
        if self.flavor is not Flavor.QUOTIENT_LOG_POINT:
            return None
        free = [i for i in range(1, self.r + 1) if i not in weight.support]
        return max(free) if free else None

    @property
    def label(self) -> str:
        suffix = f"[{','.join(map(str, self.stratum))}]" if self.flavor is Flavor.STRATUM else ""
        return f"{self.flavor.value}{suffix}(n={self.n},r={self.r})"


@dataclass(frozen=True)
class WeightFrame:
    """Per-weight data fixing the canonical basis."""
    weight: WeightFunction
    p: int
    indices: tuple          # S(k) after the S0 elimination
    full_indices: tuple     # S(k) before it
    eliminated: int | None
    pivot: int | None
    u: int
    v: int | None
    kappa_prime: dict       # j -> int, zero off the support

    @property
    def fractional(self) -> bool:
        return self.u > 0

    @property
    def kernel_indices(self) -> tuple:
        """Indices available to J in Case 2/3 terms."""
        return tuple(j for j in self.indices if j != self.pivot)


@lru_cache(maxsize=None)
def weight_frame(base: BaseSpec, weight: WeightFunction, p: int) -> WeightFrame:
    support = weight.support
    full = tuple(sorted(support | set(base.log_indices)))
    eliminated = base.eliminated_index(weight)
    indices = tuple(j for j in full if j != eliminated)
    v = weight.valuation(p)
    u = weight.denominator_exponent(p)
    if v is None:
        pivot, kappa_prime = None, {j: 0 for j in full}
    else:
        scale = Fraction(p) ** (-v)
        kappa_prime = {j: int(weight[j] * scale) for j in full}
        pivot = min(j for j in support if p_valuation(weight[j], p) == v)
    return WeightFrame(weight, p, indices, full, eliminated, pivot, u, v, kappa_prime)


# ==============================================================================
# 4. PARTITIONS AND BASIC TERMS
# ==============================================================================
def _render_set(s) -> str:
    return ",".join(map(str, sorted(s))) if s else "-"


@dataclass(frozen=True)
class PartitionSpec:
    """Teichmuller parts (I0, I1, ..., I_rho) and log parts (L1, ..., L_l)."""
    teich_parts: tuple
    log_parts: tuple = ()

    def __post_init__(self):
        teich = tuple(frozenset(x) for x in self.teich_parts) or (frozenset(),)
        logs = tuple(frozenset(x) for x in self.log_parts)
        object.__setattr__(self, "teich_parts", teich)
        object.__setattr__(self, "log_parts", logs)
        seen = set()
        for part in teich + logs:
            if seen & part:
                raise InadmissibleTermError(f"partition parts overlap: {self.render()}")
            seen |= part
        if any(not part for part in logs):
            raise InadmissibleTermError("log parts must be nonempty")

    @property
    def rho(self) -> int:
        return len(self.teich_parts) - 1

    @property
    def degree(self) -> int:
        return self.rho + len(self.log_parts)

    @property
    def indices(self) -> frozenset:
        return frozenset().union(*self.teich_parts, *self.log_parts)

    @classmethod
    def canonical(cls, weight: WeightFunction, case: int, exterior: tuple) -> "PartitionSpec":
        rest = weight.support - set(exterior)
        teich = (frozenset(), rest) if case == 3 else (rest,)
        return cls(teich, tuple(frozenset({j}) for j in exterior))

    def render(self) -> str:
        teich = "|".join(_render_set(s) for s in self.teich_parts)
        logs = "|".join(_render_set(s) for s in self.log_parts)
        return f"{teich} ; {logs}"


TermKey = tuple  # (WeightFunction, case, J)


@dataclass(frozen=True)
class BasicTerm:
    coeff: CoeffW
    weight: WeightFunction
    partition: PartitionSpec
    case_tag: int
    annihilator_exp: int

    @property
    def degree(self) -> int:
        return self.partition.degree

    @property
    def exterior(self) -> tuple:
        return tuple(sorted(j for part in self.partition.log_parts for j in part))

    @property
    def key(self) -> TermKey:
        return (self.weight, self.case_tag, self.exterior)

    def valuation(self) -> int:
        """v_p of the coefficient in integral-forms coordinates."""
        p = self.coeff.level.p
        extra = 0 if self.case_tag == 1 else self.weight.denominator_exponent(p)
        return p_valuation(self.coeff.value, p, cap=self.annihilator_exp) + extra

    def render(self) -> str:
        p = self.coeff.level.p
        return f"{self.coeff.value} * e({self.weight.render(p)}; {self.partition.render()})"


def annihilator_of(key: TermKey, level: PrimeLevel) -> int:
    weight, case, _ = key
    return level.m if case == 1 else level.m - weight.denominator_exponent(level.p)


def term_from_key(key: TermKey, coeff: int, level: PrimeLevel) -> BasicTerm:
    weight, case, exterior = key
    ann = annihilator_of(key, level)
    return BasicTerm(
        coeff=CoeffW(coeff % level.p ** ann, level),
        weight=weight,
        partition=PartitionSpec.canonical(weight, case, exterior),
        case_tag=case,
        annihilator_exp=ann,
    )


def block_keys(base: BaseSpec, weight: WeightFunction, q: int, level: PrimeLevel) -> list:
    """Canonical basis keys of weight k and degree q, in deterministic order."""
    if q < 0 or not base.admits(weight):
        return []
    frame = weight_frame(base, weight, level.p)
    if frame.u >= level.m:
        return []
    if not frame.fractional:
        return [(weight, 1, J) for J in combinations(frame.indices, q)]
    free = frame.kernel_indices
    keys = [(weight, 2, J) for J in combinations(free, q)]
    keys += [(weight, 3, J) for J in combinations(free, q - 1)] if q >= 1 else []
    return keys


# ==============================================================================
# 5. CONVERSIONS BETWEEN INTEGRAL-FORMS COORDINATES AND THE BASIS
# ==============================================================================
def key_to_standard(key: TermKey, coeff, base: BaseSpec, p: int) -> dict:
    """Basis term -> {J: c} meaning T^k * sum c dlog T_J."""
    weight, case, exterior = key
    coeff = Fraction(coeff)
    if case == 1:
        return {exterior: coeff}
    frame = weight_frame(base, weight, p)
    if case == 2:
        return {exterior: coeff * p ** frame.u}
    out = {}
    for j in frame.indices:
        kp = frame.kappa_prime.get(j, 0)
        if kp == 0:
            continue
        sign, J = wedge_index((j,), exterior)
        if sign:
            out[J] = out.get(J, Fraction(0)) + sign * kp * coeff
    return out


def _substitute_eliminated(std: dict, frame: WeightFrame, base: BaseSpec) -> dict:
    """Rewrite dlog T_{i*} = - sum_{i<=r, i != i*} dlog T_i."""
    star = frame.eliminated
    out = {}
    for J, c in std.items():
        if star not in J:
            out[J] = out.get(J, Fraction(0)) + c
            continue
        pos = J.index(star)
        rest = J[:pos] + J[pos + 1:]
        sign = (-1) ** pos
        for i in base.log_indices:
            if i == star:
                continue
            s2, J2 = wedge_index((i,), rest)
            if s2:
                out[J2] = out.get(J2, Fraction(0)) - sign * s2 * c
    return out


def standard_to_keys(std: dict, weight: WeightFunction, level: PrimeLevel, base: BaseSpec) -> dict:
    """Normal form of a weight-k element: {J: c} -> {key: residue}."""
    p, m = level.p, level.m
    if not base.admits(weight):
        if base.killed(weight) and weight.support <= set(base.variables):
            return {}
        raise InadmissibleTermError(f"weight {weight.render(p)} is not a weight of {base.label}")
    frame = weight_frame(base, weight, p)
    allowed = set(frame.full_indices)
    for J, c in std.items():
        if c != 0 and not set(J) <= allowed:
            raise InadmissibleTermError(
                f"dlog indices {J} not allowed at weight {weight.render(p)} over {base.label}")
    if frame.u >= m:
        return {}
    if frame.eliminated is not None:
        std = _substitute_eliminated(std, frame, base)

    out = {}
    if not frame.fractional:
        for J, c in std.items():
            if c == 0:
                continue
            out[(weight, 1, J)] = (out.get((weight, 1, J), 0) + to_residue(c, p, m)) % p ** m
        return {k: v for k, v in out.items() if v}

    ann = m - frame.u
    mod = p ** ann
    j0 = frame.pivot
    k0 = frame.kappa_prime[j0]
    alpha, beta = {}, {}
    for J, c in std.items():
        if c == 0:
            continue
        if j0 not in J:
            beta[J] = beta.get(J, Fraction(0)) + c
            continue
        pos = J.index(j0)
        rest = J[:pos] + J[pos + 1:]
        sign = (-1) ** pos
        alpha[rest] = alpha.get(rest, Fraction(0)) + sign * c / k0
        for j in frame.kernel_indices:
            kp = frame.kappa_prime.get(j, 0)
            if kp == 0:
                continue
            s2, J2 = wedge_index((j,), rest)
            if s2:
                beta[J2] = beta.get(J2, Fraction(0)) - sign * s2 * c * kp / k0
    scale = Fraction(p) ** frame.u
    for J, a in alpha.items():
        if a:
            out[(weight, 3, J)] = to_residue(a, p, ann)
    for J, b in beta.items():
        if b:
            if p_valuation(b, p) < frame.u:
                raise InadmissibleTermError(
                    f"form at weight {weight.render(p)} is not integral (coefficient {b})")
            out[(weight, 2, J)] = to_residue(b / scale, p, ann)
    return {k: v % mod for k, v in out.items() if v % mod}


def raw_standard_value(coeff: int, weight: WeightFunction, partition: PartitionSpec, p: int) -> dict:
    """
    Integral-forms coordinates of xi * p^u(k_I0) * T^(k_M) * d^(I1) ^ ... ^ l(L1) ^ ...,
    with M the indices outside I1..I_rho and d^(I) = p^(-v(k_I)) d(T^(k_I)).
    """
    weight.check_denominators(p)
    if not weight.support <= partition.indices:
        raise InadmissibleTermError(
            f"partition {partition.render()} does not cover supp(k) = {sorted(weight.support)}")
    for part in partition.log_parts:
        if len(part) > 1 and any(weight[i] != 0 for i in part):
            raise InadmissibleTermError("a log part carrying weight must be a singleton")
    i0 = partition.teich_parts[0]
    vector = {(): Fraction(coeff) * p ** weight.restricted(i0).denominator_exponent(p)}
    factors = []
    for part in partition.teich_parts[1:]:
        sub = weight.restricted(part)
        v = sub.valuation(p)
        if v is None:
            raise InadmissibleTermError(f"differential part {sorted(part)} carries no weight")
        factors.append({(i,): sub[i] * Fraction(p) ** (-v) for i in sorted(part)})
    for part in partition.log_parts:
        factors.append({(i,): Fraction(1) for i in sorted(part)})
    for factor in factors:
        nxt = {}
        for J, c in vector.items():
            for (i,), a in factor.items():
                sign, J2 = wedge_index(J, (i,))
                if sign:
                    nxt[J2] = nxt.get(J2, Fraction(0)) + sign * a * c
        vector = {J: c for J, c in nxt.items() if c != 0}
    return vector


def normalize_term(coeff: int, weight: WeightFunction, partition: PartitionSpec,
                   level: PrimeLevel, base: BaseSpec) -> BasicTerm | None:
    """Canonical form of a raw term; None when it is zero at this level."""
    if weight.n != base.n:
        raise InadmissibleTermError(f"weight has {weight.n} entries, base has n={base.n}")
    weight.check_denominators(level.p)
    if weight.denominator_exponent(level.p) >= level.m:
        raise InadmissibleTermError(
            f"weight {weight.render(level.p)} has denominator exponent >= m={level.m}")
    for part in partition.log_parts:
        for i in part:
            if weight[i] == 0 and i not in base.log_indices:
                raise InadmissibleTermError(f"dlog T_{i} is not available over {base.label}")
    std = raw_standard_value(coeff, weight, partition, level.p)
    coords = standard_to_keys(std, weight, level, base)
    if not coords:
        return None
    if len(coords) > 1:
        raise NonBasicTermError(f"{partition.render()} expands to {len(coords)} basis terms")
    (key, value), = coords.items()
    logging.debug(f"normalize_term: {partition.render()} -> case {key[1]}, J={key[2]}")
    return term_from_key(key, value, level)
