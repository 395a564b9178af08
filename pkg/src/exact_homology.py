"""
Exact homological algebra over Z/p^e.

Finitely generated Z/p^e-modules are carried as presentations R^g / diag(p^a_i)
(`PresentedModule`); maps are integer matrices acting on coordinate columns.
Everything reduces to one Smith normal form routine with unimodular certificates,
which also drives kernels, solves, subquotients and connecting homomorphisms.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from .witt_base import p_valuation


class NotAComplexError(ValueError):
    """Consecutive differentials do not compose to zero."""


class NotExactError(ValueError):
    """A sequence claimed short exact is not."""


# ==============================================================================
# 1. MATRIX HELPERS
# ==============================================================================
def zeros(rows: int, cols: int) -> np.ndarray:
    return np.zeros((rows, cols), dtype=object)


def identity(n: int) -> np.ndarray:
    out = zeros(n, n)
    for i in range(n):
        out[i, i] = 1
    return out


def as_matrix(data, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Object-dtype integer matrix; empty inputs need explicit `rows`/`cols`."""
    if isinstance(data, np.ndarray) and data.ndim == 2:
        out = zeros(*data.shape)
        for (i, j), x in np.ndenumerate(data):
            out[i, j] = int(x)
        return out
    data = [list(row) for row in data]
    if not data:
        return zeros(rows or 0, cols or 0)
    out = zeros(len(data), len(data[0]))
    for i, row in enumerate(data):
        for j, x in enumerate(row):
            out[i, j] = int(x)
    return out


def as_vector(data, size: int | None = None) -> np.ndarray:
    data = list(data)
    out = np.zeros(size if size is not None else len(data), dtype=object)
    for i, x in enumerate(data):
        out[i] = int(x)
    return out


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """a @ b for object matrices, also when the inner dimension is empty."""
    if a.shape[-1] == 0:
        return np.zeros(a.shape[:-1] + b.shape[1:], dtype=object)
    return a.dot(b)


def reduce_mod(a: np.ndarray, mod: int) -> np.ndarray:
    return a % mod if a.size else a


def hstack(*blocks: np.ndarray, rows: int) -> np.ndarray:
    blocks = [b for b in blocks if b.shape[1]]
    return np.concatenate(blocks, axis=1) if blocks else zeros(rows, 0)


# ==============================================================================
# 2. SMITH NORMAL FORM
# ==============================================================================
@dataclass(frozen=True)
class SmithForm:
    """U @ A @ W = diag(p^exponents) (mod p^e), with U, W unimodular."""
    U: np.ndarray
    W: np.ndarray
    U_inv: np.ndarray
    W_inv: np.ndarray
    exponents: tuple
    shape: tuple
    p: int
    e: int

    @property
    def rank(self) -> int:
        return len(self.exponents)

    @property
    def diagonal(self) -> np.ndarray:
        out = zeros(*self.shape)
        for i, v in enumerate(self.exponents):
            out[i, i] = self.p ** v
        return out

    def certificate_holds(self, matrix: np.ndarray) -> bool:
        mod = self.p ** self.e
        lhs = (matmul(matmul(self.U, as_matrix(matrix, *self.shape)), self.W) - self.diagonal) % mod
        inverses = ((matmul(self.U, self.U_inv) - identity(self.shape[0])) % mod,
                    (matmul(self.W, self.W_inv) - identity(self.shape[1])) % mod)
        return not lhs.any() and not any(x.any() for x in inverses)


def smith_normal_form(matrix, p: int, e: int) -> SmithForm:
    """
    Smith normal form over Z/p^e. Pivot rule: smallest valuation, ties broken
    by (row, col); the pivot is scaled to exactly p^v.
    """
    mod = p ** e
    A = as_matrix(matrix) % mod
    rows, cols = A.shape
    U, U_inv = identity(rows), identity(rows)
    W, W_inv = identity(cols), identity(cols)
    exponents = []

    for t in range(min(rows, cols)):
        sub = A[t:, t:]
        nz = np.argwhere(sub != 0)
        if len(nz) == 0:
            break
        best = min(((p_valuation(sub[i, j], p), i, j) for i, j in nz))
        v, i, j = best[0], best[1] + t, best[2] + t

        if i != t:
            A[[t, i], :] = A[[i, t], :]
            U[[t, i], :] = U[[i, t], :]
            U_inv[:, [t, i]] = U_inv[:, [i, t]]
        if j != t:
            A[:, [t, j]] = A[:, [j, t]]
            W[:, [t, j]] = W[:, [j, t]]
            W_inv[[t, j], :] = W_inv[[j, t], :]

        unit = (A[t, t] // p ** v) % mod
        inv = pow(int(unit), -1, mod)
        A[t, :] = (A[t, :] * inv) % mod
        U[t, :] = (U[t, :] * inv) % mod
        U_inv[:, t] = (U_inv[:, t] * unit) % mod

        pivot = p ** v
        for r in range(rows):
            if r != t and A[r, t] % mod:
                f = A[r, t] // pivot
                A[r, :] = (A[r, :] - f * A[t, :]) % mod
                U[r, :] = (U[r, :] - f * U[t, :]) % mod
                U_inv[:, t] = (U_inv[:, t] + f * U_inv[:, r]) % mod
        for c in range(cols):
            if c != t and A[t, c] % mod:
                f = A[t, c] // pivot
                A[:, c] = (A[:, c] - f * A[:, t]) % mod
                W[:, c] = (W[:, c] - f * W[:, t]) % mod
                W_inv[t, :] = (W_inv[t, :] + f * W_inv[c, :]) % mod
        exponents.append(v)

    return SmithForm(U, W, U_inv, W_inv, tuple(exponents), (rows, cols), p, e)


def kernel(matrix: np.ndarray, p: int, e: int) -> np.ndarray:
    """Generators (as columns) of {x : A x = 0 mod p^e}."""
    A = as_matrix(matrix)
    cols = A.shape[1]
    sf = smith_normal_form(A, p, e)
    gens = []
    for i in range(cols):
        if i < sf.rank:
            if sf.exponents[i] == 0:
                continue
            gens.append((sf.W[:, i] * p ** (e - sf.exponents[i])) % p ** e)
        else:
            gens.append(sf.W[:, i] % p ** e)
    return np.stack(gens, axis=1) if gens else zeros(cols, 0)


def solve(matrix: np.ndarray, b, p: int, e: int) -> np.ndarray | None:
    """Some x with A x = b mod p^e, or None when b is outside the image."""
    A = as_matrix(matrix)
    mod = p ** e
    sf = smith_normal_form(A, p, e)
    c = sf.U.dot(as_vector(b, A.shape[0])) % mod if A.shape[0] else np.zeros(0, dtype=object)
    y = np.zeros(A.shape[1], dtype=object)
    for i in range(A.shape[0]):
        if i < sf.rank:
            pv = p ** sf.exponents[i]
            if c[i] % pv:
                return None
            y[i] = c[i] // pv
        elif c[i] % mod:
            return None
    return sf.W.dot(y) % mod if A.shape[1] else y


# ==============================================================================
# 3. MODULES, SUBQUOTIENTS, INVARIANT FACTORS
# ==============================================================================
@dataclass(frozen=True)
class InvariantFactors:
    """Multiset of exponents a_i for a module isomorphic to sum Z/p^a_i (descending)."""
    exponents: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "exponents", tuple(sorted((int(a) for a in self.exponents if a > 0), reverse=True)))

    @property
    def length(self) -> int:
        return sum(self.exponents)

    @property
    def rank(self) -> int:
        return len(self.exponents)

    def full_count(self, m: int) -> int:
        return sum(1 for a in self.exponents if a >= m)

    def __add__(self, other: "InvariantFactors") -> "InvariantFactors":
        return InvariantFactors(self.exponents + other.exponents)

    def render(self, p: int) -> str:
        if not self.exponents:
            return "0"
        return " + ".join(f"Z/{p}^{a}" for a in self.exponents)


@dataclass(frozen=True)
class PresentedModule:
    annihilators: tuple = ()

    @property
    def rank(self) -> int:
        return len(self.annihilators)

    def relations(self, p: int) -> np.ndarray:
        out = zeros(self.rank, self.rank)
        for i, a in enumerate(self.annihilators):
            out[i, i] = p ** a
        return out

    def reduce(self, vector: np.ndarray, p: int) -> np.ndarray:
        return as_vector([int(x) % p ** a for x, a in zip(vector, self.annihilators)], self.rank)

    def is_zero(self, vector, p: int) -> bool:
        return all(int(x) % p ** a == 0 for x, a in zip(vector, self.annihilators))

    @property
    def factors(self) -> InvariantFactors:
        return InvariantFactors(self.annihilators)


@dataclass
class Subquotient:
    """The module span(U)/span(W) inside (Z/p^e)^n with explicit generators and coordinates."""
    p: int
    e: int
    exponents: tuple            # order exponent of each generator, aligned with columns below
    generators: np.ndarray      # ambient columns
    _first: SmithForm = field(repr=False)
    _second: SmithForm = field(repr=False)
    _kept: tuple = field(repr=False)
    _u_orders: tuple = field(repr=False)

    @property
    def factors(self) -> InvariantFactors:
        return InvariantFactors(self.exponents)

    def coordinates(self, z) -> np.ndarray:
        """Coordinates of an element of span(U) in the chosen generators."""
        mod = self.p ** self.e
        z = as_vector(z, self._first.shape[0])
        y = self._first.U.dot(z) % mod if len(z) else z
        t = len(self._u_orders)
        ycoords = np.zeros(t, dtype=object)
        for i in range(len(y)):
            if i < t:
                pv = self.p ** (self.e - self._u_orders[i])
                if y[i] % pv:
                    raise ValueError("vector is not in the numerator submodule")
                ycoords[i] = (y[i] // pv) % self.p ** self._u_orders[i]
            elif y[i] % mod:
                raise ValueError("vector is not in the numerator submodule")
        c = self._second.U.dot(ycoords) % mod if t else ycoords
        return as_vector([int(c[i]) % self.p ** a for i, a in zip(self._kept, self.exponents)], len(self._kept))

    def contains_zero_class(self, z) -> bool:
        return not self.coordinates(z).any()


def subquotient(numerator: np.ndarray, denominator: np.ndarray, p: int, e: int) -> Subquotient:
    """span(numerator)/span(denominator); the denominator span must lie in the numerator span."""
    mod = p ** e
    n = numerator.shape[0]
    first = smith_normal_form(numerator, p, e)
    # span(U) = sum over i of Z/p^(e - v_i) generated by p^v_i * U_inv[:, i]
    u_orders = tuple(e - v for v in first.exponents if e - v > 0)
    t = len(u_orders)
    ys = []
    for col in range(denominator.shape[1]):
        y = matmul(first.U, denominator[:, col]) % mod
        entry = []
        for i in range(n):
            if i < t:
                pv = p ** (e - u_orders[i])
                if y[i] % pv:
                    raise ValueError("denominator is not contained in the numerator")
                entry.append((y[i] // pv) % p ** u_orders[i])
            elif y[i] % mod:
                raise ValueError("denominator is not contained in the numerator")
        ys.append(entry)
    Y = zeros(t, len(ys))
    for col, entry in enumerate(ys):
        for i, x in enumerate(entry):
            Y[i, col] = x
    torsion = zeros(t, t)
    for i, a in enumerate(u_orders):
        torsion[i, i] = p ** a
    second = smith_normal_form(hstack(Y, torsion, rows=t), p, e)

    kept, exponents = [], []
    for i in range(t):
        w = second.exponents[i] if i < second.rank else e
        if w > 0:
            kept.append(i)
            exponents.append(w)
    generators = zeros(n, len(kept))
    for col, i in enumerate(kept):
        y = second.U_inv[:, i]
        lifted = np.zeros(n, dtype=object)
        for l in range(t):
            lifted[l] = y[l] * p ** (e - u_orders[l])
        generators[:, col] = matmul(first.U_inv, lifted) % mod
    return Subquotient(p, e, tuple(exponents), generators, first, second, tuple(kept), u_orders)


# ==============================================================================
# 4. COCHAIN COMPLEXES
# ==============================================================================
@dataclass
class PresentedComplex:
    """C^start -> C^(start+1) -> ...; differentials[i] maps modules[i] to modules[i+1]."""
    p: int
    e: int
    modules: tuple
    differentials: tuple
    start: int = 0

    def __post_init__(self):
        self.modules = tuple(self.modules)
        self.differentials = tuple(as_matrix(d, self.modules[i + 1].rank, self.modules[i].rank)
                                   for i, d in enumerate(self.differentials))
        if len(self.differentials) != max(len(self.modules) - 1, 0):
            raise ValueError("a complex needs one differential between consecutive modules")
        for i, d in enumerate(self.differentials):
            if d.shape != (self.modules[i + 1].rank, self.modules[i].rank):
                raise ValueError(f"differential {self.start + i} has shape {d.shape}")

    @property
    def degrees(self) -> range:
        return range(self.start, self.start + len(self.modules))

    def module(self, q: int) -> PresentedModule:
        return self.modules[q - self.start] if q in self.degrees else PresentedModule()

    def differential(self, q: int) -> np.ndarray:
        if q in self.degrees and q + 1 in self.degrees:
            return self.differentials[q - self.start]
        return zeros(self.module(q + 1).rank, self.module(q).rank)

    def shifted(self, k: int) -> "PresentedComplex":
        """C[k]: same modules starting at degree start - k, differentials times (-1)^k."""
        sign = -1 if k % 2 else 1
        return PresentedComplex(self.p, self.e, self.modules,
                                tuple(sign * d for d in self.differentials), self.start - k)

    def check(self) -> None:
        for q in self.degrees:
            comp = matmul(self.differential(q + 1), self.differential(q))
            target = self.module(q + 2)
            for col in range(comp.shape[1]):
                if not target.is_zero(comp[:, col], self.p):
                    raise NotAComplexError(f"d^{q + 1} d^{q} is nonzero on generator {col}")


def module_kernel(matrix: np.ndarray, source: PresentedModule, target: PresentedModule,
                  p: int, e: int) -> np.ndarray:
    """Generators of ker(f: source -> target) as source columns, relations included."""
    f = as_matrix(matrix, target.rank, source.rank)
    aug = hstack(f, target.relations(p), rows=target.rank)
    gens = kernel(aug, p, e)[: source.rank, :]
    return hstack(gens, source.relations(p), rows=source.rank)


def module_image(matrix: np.ndarray, target: PresentedModule, p: int) -> np.ndarray:
    return hstack(as_matrix(matrix, target.rank, 0), target.relations(p), rows=target.rank)


def cohomology_group(C: PresentedComplex, q: int) -> Subquotient:
    M = C.module(q)
    Z = module_kernel(C.differential(q), M, C.module(q + 1), C.p, C.e)
    B = module_image(C.differential(q - 1), M, C.p)
    return subquotient(Z, B, C.p, C.e)


def cohomology(C: PresentedComplex) -> dict:
    """{q: InvariantFactors of H^q}."""
    C.check()
    return {q: cohomology_group(C, q).factors for q in C.degrees}


def euler_characteristic(C: PresentedComplex, groups: dict | None = None) -> tuple[int, int]:
    """(sum (-1)^q length C^q, sum (-1)^q length H^q); the two agree for any complex."""
    groups = groups if groups is not None else cohomology(C)
    chain = sum((-1) ** q * C.module(q).factors.length for q in C.degrees)
    homology = sum((-1) ** q * groups[q].length for q in C.degrees)
    return chain, homology


def induced_map(matrix: np.ndarray, source: Subquotient, target: Subquotient) -> np.ndarray:
    """Matrix of the map on subquotients in the chosen generators."""
    f = as_matrix(matrix, target._first.shape[0], source.generators.shape[0])
    mod = target.p ** target.e
    cols = [target.coordinates(matmul(f, source.generators[:, j]) % mod) for j in range(source.generators.shape[1])]
    return np.stack(cols, axis=1) if cols else zeros(len(target.exponents), 0)


def is_isomorphism(matrix: np.ndarray, source: Subquotient, target: Subquotient) -> bool:
    """A map between finite Z/p^e-modules of equal length is an isomorphism iff it is onto."""
    if source.factors != target.factors:
        return False
    k = len(target.exponents)
    if k == 0:
        return True
    rel = zeros(k, k)
    for i, a in enumerate(target.exponents):
        rel[i, i] = target.p ** a
    image = hstack(as_matrix(matrix, k, len(source.exponents)), rel, rows=k)
    return subquotient(identity(k), image, target.p, target.e).factors.length == 0


def same_class(a, b, group: Subquotient) -> bool:
    return not ((group.coordinates(a) - group.coordinates(b)) % group.p ** group.e).any() \
        if len(group.exponents) else True


# ==============================================================================
# 5. EXACTNESS AND CONNECTING HOMOMORPHISMS
# ==============================================================================
@dataclass(frozen=True)
class ExactnessReport:
    injective: bool
    exact_middle: bool
    surjective: bool
    kernel_factors: InvariantFactors
    defect_factors: InvariantFactors
    cokernel_factors: InvariantFactors

    @property
    def exact(self) -> bool:
        return self.injective and self.exact_middle and self.surjective


def exactness_check(f: np.ndarray, g: np.ndarray, A: PresentedModule, B: PresentedModule,
                    C: PresentedModule, p: int, e: int) -> ExactnessReport:
    """0 -> A -f-> B -g-> C -> 0, measured through subquotients."""
    f = as_matrix(f, B.rank, A.rank)
    g = as_matrix(g, C.rank, B.rank)
    comp = matmul(g, f)
    for col in range(comp.shape[1]):
        if not C.is_zero(comp[:, col], p):
            raise NotAComplexError("g . f is nonzero")
    ker_f = subquotient(module_kernel(f, A, B, p, e), A.relations(p), p, e)
    ker_g = module_kernel(g, B, C, p, e)
    defect = subquotient(ker_g, module_image(f, B, p), p, e)
    coker = subquotient(identity(C.rank), module_image(g, C, p), p, e)
    report = ExactnessReport(
        injective=ker_f.factors.length == 0,
        exact_middle=defect.factors.length == 0,
        surjective=coker.factors.length == 0,
        kernel_factors=ker_f.factors,
        defect_factors=defect.factors,
        cokernel_factors=coker.factors,
    )
    logging.debug(f"exactness_check: ker={report.kernel_factors.exponents} "
                  f"defect={report.defect_factors.exponents} coker={report.cokernel_factors.exponents}")
    return report


@dataclass
class ComplexSES:
    """0 -> A -f-> B -g-> C -> 0 degreewise; f[q], g[q] are the degree-q matrices."""
    A: PresentedComplex
    B: PresentedComplex
    C: PresentedComplex
    f: dict
    g: dict

    @property
    def p(self) -> int:
        return self.B.p

    @property
    def e(self) -> int:
        return max(self.A.e, self.B.e, self.C.e)

    def f_at(self, q: int) -> np.ndarray:
        return as_matrix(self.f.get(q, zeros(self.B.module(q).rank, self.A.module(q).rank)),
                         self.B.module(q).rank, self.A.module(q).rank)

    def g_at(self, q: int) -> np.ndarray:
        return as_matrix(self.g.get(q, zeros(self.C.module(q).rank, self.B.module(q).rank)),
                         self.C.module(q).rank, self.B.module(q).rank)

    def check(self) -> dict:
        """Degreewise exactness and chain-map compatibility; raises NotExactError."""
        reports = {}
        p = self.p
        for q in sorted(set(self.A.degrees) | set(self.B.degrees) | set(self.C.degrees)):
            rep = exactness_check(self.f_at(q), self.g_at(q), self.A.module(q), self.B.module(q),
                                  self.C.module(q), p, self.e)
            if not rep.exact:
                raise NotExactError(f"sequence not exact in degree {q}: {rep}")
            reports[q] = rep
            for lhs, rhs, tgt, name in (
                (matmul(self.B.differential(q), self.f_at(q)), matmul(self.f_at(q + 1), self.A.differential(q)),
                 self.B.module(q + 1), "f"),
                (matmul(self.C.differential(q), self.g_at(q)), matmul(self.g_at(q + 1), self.B.differential(q)),
                 self.C.module(q + 1), "g"),
            ):
                diff = lhs - rhs
                for col in range(diff.shape[1]):
                    if not tgt.is_zero(diff[:, col], p):
                        raise NotExactError(f"{name} does not commute with d in degree {q}")
        return reports


def connecting_hom(ses: ComplexSES, q: int, strategy: str = "particular",
                   rng: np.random.Generator | None = None) -> tuple[np.ndarray, Subquotient, Subquotient]:
    """
    delta: H^q(C) -> H^(q+1)(A) by lift / differentiate / pull back.
    With strategy="random" each lift is perturbed by a random element of ker g,
    so independence of the lift can be observed.
    """
    p, e = ses.p, ses.e
    mod = p ** e
    HC = cohomology_group(_at_level(ses.C, e), q)
    HA = cohomology_group(_at_level(ses.A, e), q + 1)
    g, Bq, Cq = ses.g_at(q), ses.B.module(q), ses.C.module(q)
    f_next, Bn = ses.f_at(q + 1), ses.B.module(q + 1)
    lift_matrix = hstack(g, Cq.relations(p), rows=Cq.rank)
    pull_matrix = hstack(f_next, Bn.relations(p), rows=Bn.rank)
    ker_g = module_kernel(g, Bq, Cq, p, e) if strategy == "random" else None

    columns = []
    for j in range(HC.generators.shape[1]):
        c = HC.generators[:, j]
        sol = solve(lift_matrix, c, p, e)
        if sol is None:
            raise NotExactError(f"cocycle {j} of H^{q} does not lift: g is not onto")
        b = sol[: Bq.rank]
        if ker_g is not None and ker_g.shape[1]:
            gen = rng if rng is not None else np.random.default_rng(0)
            weights = as_vector(gen.integers(0, mod, size=ker_g.shape[1]).tolist())
            b = (b + matmul(ker_g, weights)) % mod
        db = matmul(ses.B.differential(q), b) % mod
        sol = solve(pull_matrix, db, p, e)
        if sol is None:
            raise NotExactError(f"d(lift) is not in the image of f in degree {q + 1}")
        a = sol[: ses.A.module(q + 1).rank]
        columns.append(HA.coordinates(a))
    delta = np.stack(columns, axis=1) if columns else zeros(len(HA.exponents), 0)
    return delta, HC, HA


def _at_level(C: PresentedComplex, e: int) -> PresentedComplex:
    return C if C.e == e else PresentedComplex(C.p, e, C.modules, C.differentials, C.start)
