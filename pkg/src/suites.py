"""
Verification suites. Each suite takes a RunConfig and returns a SuiteResult;
failed mathematical checks become defect entries, nothing is raised.
"""
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from . import config as cfg
from .comparison_mw import (
    build_mw, expected_rational_dims, gauge_fit, integral_iso_check, kappa, level_one_identification,
    mod_pm_comparison, mw_multiply, mw_theta, rational_dims,
)
from .drw_core import (
    block_operator_matrix, build_slice, d_teich, differential, dlog, frobenius, lattice_quotient_factors,
    multiply, one, restrict, teich_monomial, unit_vector, verschiebung, weight_block,
)
from .exact_homology import InvariantFactors, NotExactError, cohomology_group, induced_map, smith_normal_form
from .log_semistable import d_crosses_weights, fil_sequence_report, int_frac_split, theta, theta_sequence
from .monodromy_filtration import (
    block_monodromy, certify_filtration, endomorphism_power_zero, frobenius_check, ladder_check,
    matrices_agree, monodromy_N, residue_check, restriction_naturality,
)
from .utils import bounded_exponents
from .witt_base import BaseSpec, Flavor, PrimeLevel


@dataclass
class SuiteResult:
    name: str
    checks: list = field(default_factory=list)
    defects: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)      # label -> {q: InvariantFactors}
    skipped: list = field(default_factory=list)
    sampled: dict = field(default_factory=dict)     # check -> (sample size, population)

    def record(self, check: str, ok: bool, **info) -> bool:
        entry = {"check": check, "ok": bool(ok), **info}
        self.checks.append(entry)
        if not ok:
            self.defects.append(entry)
            logging.error(f"[{self.name}] {check} FAILED {info}")
        else:
            logging.debug(f"[{self.name}] {check} ok")
        return ok

    @property
    def passed(self) -> bool:
        return not self.defects

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "n_checks": len(self.checks),
            "n_defects": len(self.defects),
            "defects": self.defects,
            "checks": self.checks,
            "details": self.details,
            "cohomology": {label: {str(q): list(h.exponents) for q, h in sorted(per.items())}
                           for label, per in self.tables.items()},
            "skipped": self.skipped,
            "sampled": {k: {"sample": s, "population": n} for k, (s, n) in self.sampled.items()},
        }


@contextmanager
def _guard(result: SuiteResult, check: str, **info):
    """Domain errors inside a check turn into a defect for that check."""
    try:
        yield
    except (ValueError, ArithmeticError) as e:
        result.record(check, False, error=f"{type(e).__name__}: {e}", **info)


def _rng(config, suite: str) -> np.random.Generator:
    return np.random.default_rng([config.seed, cfg.SUITES.index(suite)])


def _sample(items: list, cap: int, rng, result: SuiteResult, label: str) -> list:
    if len(items) <= cap:
        return items
    picks = sorted(int(i) for i in rng.choice(len(items), size=cap, replace=False))
    result.sampled[label] = (cap, len(items))
    logging.warning(f"{label}: {len(items)} cases exceed the cap, checking a seeded sample of {cap}")
    return [items[i] for i in picks]


def _pairs(left: list, right: list, cap: int, rng, result: SuiteResult, label: str) -> list:
    total = len(left) * len(right)
    if total <= cap:
        return [(x, y) for x in left for y in right]
    picks = sorted(int(t) for t in rng.choice(total, size=cap, replace=False))
    result.sampled[label] = (cap, total)
    logging.warning(f"{label}: {total} pairs exceed the cap, checking a seeded sample of {cap}")
    return [(left[t // len(right)], right[t % len(right)]) for t in picks]


def _all_basis(slice_) -> list:
    return [x for q in range(slice_.top_degree + 1) for x in slice_.basis_elements(q)]


def _blocks(slice_, config, result: SuiteResult) -> list:
    blocks = []
    for block in slice_.blocks:
        if block.size > config.max_block_size:
            result.skipped.append({"level": slice_.level.m, "weight": block.weight.render(slice_.level.p)})
            continue
        blocks.append(block)
    for weight in slice_.skipped:
        result.skipped.append({"level": slice_.level.m, "weight": weight.render(slice_.level.p)})
    return blocks


def _base(config, flavor: Flavor) -> BaseSpec:
    return BaseSpec(config.n, config.r, flavor)


def _check_identity(result: SuiteResult, check: str, cases: list, fn, **info) -> None:
    """fn(case) -> (lhs, rhs); one check entry with the violation count."""
    violations = []
    with _guard(result, check, **info):
        for case in cases:
            lhs, rhs = fn(case)
            if lhs != rhs:
                violations.append((lhs - rhs).render())
        result.record(check, not violations, cases=len(cases), violations=len(violations),
                      examples=violations[:3], **info)


def _levels(config) -> range:
    return range(1, config.m_max + 1)


# ==============================================================================
# 1. RELATIONS
# ==============================================================================
def run_relations(config) -> SuiteResult:
    logging.info("=== STARTING SUITE: RELATIONS ===")
    result = SuiteResult("relations")
    rng = _rng(config, "relations")
    cap = config.max_relation_pairs
    p = config.p
    poly = _base(config, Flavor.POLY_TRIVIAL)

    for m in _levels(config):
        level = PrimeLevel(p, m)
        for flavor in (Flavor.POLY_TRIVIAL, Flavor.QUOTIENT_TRIVIAL, Flavor.QUOTIENT_LOG_POINT):
            base = _base(config, flavor)
            with _guard(result, "d_squared", level=m, flavor=flavor.value):
                slice_ = build_slice(base, level, config.K, config.max_block_size)
                bad = slice_.check_d_squared()
                result.record("d_squared", not bad, level=m, flavor=flavor.value, violations=len(bad))

        slice_m = build_slice(poly, level, config.K, config.max_block_size)
        slice_up = build_slice(poly, level.up(), config.K, config.max_block_size)
        basis_m = _all_basis(slice_m)
        basis_up = _all_basis(slice_up)
        singles = _sample(basis_m, cap, rng, result, f"singles_m{m}")

        _check_identity(result, "FV=p", singles, lambda x: (frobenius(verschiebung(x)), x.scale(p)), level=m)
        _check_identity(result, "FdV=d", singles,
                        lambda x: (frobenius(differential(verschiebung(x))), differential(x)), level=m)
        _check_identity(result, "F(dlog)=dlog", list(poly.log_indices),
                        lambda i: (frobenius(dlog(i, level.up(), poly)), dlog(i, level, poly)), level=m)
        _check_identity(result, "F(d[T])=[T]^(p-1)d[T]", list(range(1, poly.n + 1)),
                        lambda i: (frobenius(d_teich(i, level.up(), poly)),
                                   multiply(teich_monomial(tuple((p - 1) * a for a in unit_vector(i, poly.n)), level, poly),
                                            d_teich(i, level, poly))),
                        level=m)

        pairs = _pairs(basis_m, basis_m, cap, rng, result, f"pairs_m{m}")
        _check_identity(result, "leibniz", pairs,
                        lambda xy: (differential(multiply(*xy)),
                                    multiply(differential(xy[0]), xy[1])
                                    + multiply(xy[0], differential(xy[1])).scale((-1) ** xy[0].degree)),
                        level=m)
        _check_identity(result, "V(x)V(y)=pV(xy)", pairs,
                        lambda xy: (multiply(verschiebung(xy[0]), verschiebung(xy[1])),
                                    verschiebung(multiply(*xy)).scale(p)),
                        level=m)
        mixed = _pairs(basis_up, basis_m, cap, rng, result, f"mixed_pairs_m{m}")
        _check_identity(result, "V(F(x)y)=xV(y)", mixed,
                        lambda xy: (verschiebung(multiply(frobenius(xy[0]), xy[1])),
                                    multiply(xy[0], verschiebung(xy[1]))),
                        level=m)

        ups = _sample(basis_up, cap, rng, result, f"restriction_m{m}")
        _check_identity(result, "R(dx)=dR(x)", ups, lambda x: (restrict(differential(x)), differential(restrict(x))),
                        level=m)
        _check_identity(result, "R(Vx)=VR(x)", ups, lambda x: (restrict(verschiebung(x)), verschiebung(restrict(x))),
                        level=m)
        top = _sample(_all_basis(build_slice(poly, level.up(2), config.K, config.max_block_size)),
                      cap, rng, result, f"restriction_F_m{m}")
        _check_identity(result, "R(Fx)=FR(x)", top, lambda x: (restrict(frobenius(x)), frobenius(restrict(x))),
                        level=m)

        result.tables[f"{poly.label} m={m}"] = slice_m.cohomology()
        result.details[f"m={m}"] = {"dims": slice_m.dims(), "blocks": len(slice_m.blocks)}

    _diagnostics(result, config.p)
    return result


# ==============================================================================
# 2. EXACTNESS
# ==============================================================================
def run_exactness(config) -> SuiteResult:
    logging.info("=== STARTING SUITE: EXACTNESS ===")
    result = SuiteResult("exactness")
    p = config.p
    poly = _base(config, Flavor.POLY_TRIVIAL)
    trivial = _base(config, Flavor.QUOTIENT_TRIVIAL)

    # Fil sequence: W_{m+1} -> W_m for every upper level up to max(m_max, 2)
    for m in range(1, max(config.m_max, 2)):
        level = PrimeLevel(p, m)
        upper = build_slice(poly, level.up(), config.K, config.max_block_size)
        for block in _blocks(upper, config, result):
            w = block.weight.render(p)
            for q in range(block.top_degree + 1):
                with _guard(result, "fil_sequence", level=m, weight=w, degree=q):
                    report = fil_sequence_report(poly, level, block.weight, q)
                    result.record("fil_sequence", report.exact_middle and report.surjective,
                                  level=m, weight=w, degree=q,
                                  defect=list(report.defect_factors.exponents),
                                  cokernel=list(report.cokernel_factors.exponents))

    for m in _levels(config):
        level = PrimeLevel(p, m)
        quotient_slice = build_slice(trivial.with_flavor(Flavor.QUOTIENT_LOG_POINT), level, config.K,
                                     config.max_block_size)
        for block in _blocks(quotient_slice, config, result):
            w = block.weight.render(p)
            with _guard(result, "theta_sequence", level=m, weight=w):
                try:
                    theta_sequence(trivial, level, block.weight).ses.check()
                    result.record("theta_sequence", True, level=m, weight=w)
                except NotExactError as e:
                    result.record("theta_sequence", False, level=m, weight=w, error=str(e))

        for base in (poly, trivial):
            slice_ = build_slice(base, level, config.K, config.max_block_size)
            mismatches = []
            for block in _blocks(slice_, config, result):
                for q in range(block.top_degree + 1):
                    expected = InvariantFactors(block.annihilators(q))
                    with _guard(result, "lattice_oracle", level=m, flavor=base.flavor.value):
                        got = lattice_quotient_factors(base, level, block.weight, q)
                        if got != expected:
                            mismatches.append({"weight": block.weight.render(p), "degree": q,
                                               "oracle": list(got.exponents), "basis": list(expected.exponents)})
            result.record("lattice_oracle", not mismatches, level=m, flavor=base.flavor.value,
                          mismatches=mismatches[:5])

    _diagnostics(result, config.p)
    return result


# ==============================================================================
# 3. DECOMPOSITION AND WEIGHT FILTRATION
# ==============================================================================
def _stabilization(config, result: SuiteResult, base: BaseSpec) -> None:
    """Full-level classes at m+1 restricted to level m stay full and independent."""
    p = config.p
    for m in range(1, config.m_max):
        lower, upper = PrimeLevel(p, m), PrimeLevel(p, m + 1)
        up_slice = build_slice(base, upper, config.K, config.max_block_size)
        per_degree = {}
        for block in _blocks(up_slice, config, result):
            low_block = weight_block(base, lower, block.weight)
            for q in range(block.top_degree + 1):
                row = per_degree.setdefault(q, {"full_upper": 0, "full_lower": 0, "stable": 0})
                H_up = cohomology_group(block.complex(), q)
                full_up = [j for j, a in enumerate(H_up.exponents) if a == m + 1]
                row["full_upper"] += len(full_up)
                if low_block.is_empty or not low_block.keys[q]:
                    continue
                H_low = cohomology_group(low_block.complex(), q)
                full_low = [i for i, a in enumerate(H_low.exponents) if a == m]
                row["full_lower"] += len(full_low)
                if not full_up or not full_low:
                    continue
                res = block_operator_matrix(restrict, block, low_block, q)
                image = induced_map(res, H_up, H_low)[np.ix_(full_low, full_up)]
                row["stable"] += smith_normal_form(image % p, p, 1).rank
        for q, row in sorted(per_degree.items()):
            result.record("level_stabilization", row["stable"] == row["full_upper"],
                          level=m, degree=q, **row, torsion_difference=row["full_lower"] - row["stable"])


def run_decomposition(config) -> SuiteResult:
    logging.info("=== STARTING SUITE: DECOMPOSITION ===")
    result = SuiteResult("decomposition")
    p = config.p
    trivial = _base(config, Flavor.QUOTIENT_TRIVIAL)
    quotient = _base(config, Flavor.QUOTIENT_LOG_POINT)

    for m in _levels(config):
        level = PrimeLevel(p, m)
        with _guard(result, "fractional_acyclic", level=m):
            slice_ = build_slice(quotient, level, config.K, config.max_block_size)
            split = int_frac_split(slice_)
            bad = split.acyclic_failures()
            result.record("fractional_acyclic", not bad, level=m,
                          failures=[w.render(p) for w, _ in bad],
                          integral_dims=split.dims("int"), fractional_dims=split.dims("frac"))
            result.record("d_preserves_weight", not d_crosses_weights(slice_), level=m)
            result.tables[f"{quotient.label} m={m} int"] = split.cohomology("int")
            result.tables[f"{quotient.label} m={m}"] = slice_.cohomology()

        trivial_slice = build_slice(trivial, level, config.K, config.max_block_size)
        for block in _blocks(trivial_slice, config, result):
            w = block.weight.render(p)
            for j in range(1, config.r + 1):
                with _guard(result, "residue", level=m, weight=w, j=j):
                    check = residue_check(block, j)
                    result.record("residue", check.bijective and check.commutes, level=m, weight=w, j=j,
                                  bijective=check.bijective, commutes=check.commutes)
            if m == 1:
                for j in range(config.r + 1):
                    for q in range(block.top_degree + 1):
                        with _guard(result, "filtration_image", weight=w, j=j, degree=q):
                            result.record("filtration_image", certify_filtration(block, j, q),
                                          weight=w, j=j, degree=q)

    _stabilization(config, result, quotient)
    _diagnostics(result, config.p)
    return result


# ==============================================================================
# 4. COMPARISON WITH THE MW COMPLEX
# ==============================================================================
def run_comparison(config) -> SuiteResult:
    logging.info("=== STARTING SUITE: COMPARISON ===")
    result = SuiteResult("comparison")
    rng = _rng(config, "comparison")
    p, D = config.p, config.degree_bound
    trivial = _base(config, Flavor.QUOTIENT_TRIVIAL)
    quotient = _base(config, Flavor.QUOTIENT_LOG_POINT)

    with _guard(result, "level_one_identification"):
        cert = level_one_identification(trivial, p, config.K)
        result.record("level_one_identification", cert.ok, bijective=cert.bijective,
                      commutes=cert.commutes, missing=cert.missing_weights)

    for m in _levels(config):
        level = PrimeLevel(p, m)
        for base in (trivial, quotient):
            with _guard(result, "integral_iso", level=m, flavor=base.flavor.value):
                cert = integral_iso_check(base, level, D, config.K)
                result.record("integral_iso", cert.ok, level=m, flavor=base.flavor.value,
                              bijective=cert.bijective, commutes=cert.commutes, missing=cert.missing_weights)

        with _guard(result, "mod_pm_comparison", level=m):
            comp = mod_pm_comparison(quotient, level, D)
            result.record("mod_pm_comparison", comp.equal and comp.isomorphic, level=m,
                          equal=comp.equal, isomorphic=comp.isomorphic)
            result.tables[f"MW {quotient.label} m={m}"] = comp.mw_factors

        with _guard(result, "kappa_multiplicative", level=m):
            mw = build_mw(trivial, level, D)
            forms = [mw.element(key, q) for q in range(trivial.n + 1) for key in mw.keys(q)]
            pairs = _pairs(forms, forms, config.max_relation_pairs, rng, result, f"kappa_pairs_m{m}")
            bad = sum(1 for x, y in pairs if kappa(mw_multiply(x, y)) != multiply(kappa(x), kappa(y)))
            theta_ok = kappa(mw_theta(level, trivial)) == theta(level, trivial)
            result.record("kappa_multiplicative", not bad and theta_ok, level=m,
                          cases=len(pairs), violations=bad, theta=theta_ok)

    for base in (trivial, quotient):
        with _guard(result, "rational_dims", flavor=base.flavor.value):
            dims = rational_dims(base, p, D)
            expected = expected_rational_dims(base)
            result.record("rational_dims", dims == expected, flavor=base.flavor.value,
                          dims=dims, expected=expected)
            result.details[f"rational_dims {base.flavor.value}"] = dims

    _diagnostics(result, config.p)
    return result


# ==============================================================================
# 5. MONODROMY
# ==============================================================================
def run_monodromy(config) -> SuiteResult:
    logging.info("=== STARTING SUITE: MONODROMY ===")
    result = SuiteResult("monodromy")
    rng = _rng(config, "monodromy")
    p, r = config.p, config.r
    trivial = _base(config, Flavor.QUOTIENT_TRIVIAL)
    quotient = _base(config, Flavor.QUOTIENT_LOG_POINT)

    for m in _levels(config):
        level = PrimeLevel(p, m)
        with _guard(result, "monodromy", level=m):
            N = monodromy_N(trivial, level, config.K, max_block_size=config.max_block_size)
            result.record("N_agree", N.agree, level=m)
            result.record("theta_iso", N.theta_iso, level=m)
            matrices = {}
            for q in range(config.n):
                exps = N.exponents(q)
                mat = N.matrix(q)
                nilpotent = endomorphism_power_zero(mat, exps, p, r)
                result.record("N_nilpotent", nilpotent, level=m, degree=q, r=r)
                if r == 1:
                    result.record("N_zero_smooth", endomorphism_power_zero(mat, exps, p, 1), level=m, degree=q)
                matrices[str(q)] = {"exponents": list(exps), "matrix": [[int(v) for v in row] for row in mat]}
            result.details[f"N m={m}"] = matrices

        slice_ = build_slice(quotient, level, config.K, config.max_block_size)
        for block in _blocks(slice_, config, result):
            w = block.weight.render(p)
            with _guard(result, "lift_independence", level=m, weight=w):
                fixed = block_monodromy(trivial, level, block.weight)
                drawn = block_monodromy(trivial, level, block.weight, strategy="random", rng=rng)
                same = all(matrices_agree(a.n_connecting, b.n_connecting, a.exponents, p)
                           for a, b in zip(fixed, drawn))
                result.record("lift_independence", same, level=m, weight=w)
            with _guard(result, "psi_ladder", level=m, weight=w):
                result.record("psi_ladder", ladder_check(trivial, level, block.weight), level=m, weight=w)
            if m < config.m_max:
                with _guard(result, "restriction_naturality", level=m, weight=w):
                    result.record("restriction_naturality", restriction_naturality(trivial, level, block.weight),
                                  level=m, weight=w)
                with _guard(result, "frobenius", level=m, weight=w):
                    for check in frobenius_check(trivial, level, block.weight):
                        result.record("theta_phi_commute", check.theta_phi_commutes, level=m, weight=w,
                                      degree=check.degree)
                        result.details.setdefault("N_phi_commutator_zero", []).append(
                            {"level": m, "weight": w, "degree": check.degree, "zero": check.commutator_zero})

    _diagnostics(result, config.p)
    return result


# ==============================================================================
# 6. OVERCONVERGENCE GAUGE
# ==============================================================================
def _prefix_monotone(family: list, config) -> bool:
    """Growing the family never improves the fit."""
    previous = None
    for k in range(1, len(family) + 1):
        fit = gauge_fit(family[:k], config.gauge_epsilon_floor, config.gauge_c_max, config.gauge_norm)
        if previous is not None and (fit.epsilon > previous.epsilon
                                     or (fit.epsilon == previous.epsilon and fit.C < previous.C)):
            return False
        previous = fit
    return True


def run_gauge(config) -> SuiteResult:
    logging.info("=== STARTING SUITE: GAUGE ===")
    result = SuiteResult("gauge")
    p, M = config.p, config.m_max
    poly = _base(config, Flavor.POLY_TRIVIAL)
    top = PrimeLevel(p, M)

    families = {}
    families["teichmuller"] = [teich_monomial(a, top, poly)
                               for a in bounded_exponents(poly.n, config.degree_bound)]
    vs = []
    for s in range(M):
        x = one(PrimeLevel(p, M - s), poly)
        for _ in range(s):
            x = verschiebung(x)
        vs.append(x)
    families["verschiebung"] = vs
    seeds = [x for x in build_slice(poly, top, config.K, config.max_block_size).basis_elements(1)
             if not x.weights[0].is_integral][:4]
    iterates = []
    for x in seeds:
        for t in range(M):
            y = x
            for _ in range(t):
                y = frobenius(y)
            iterates.append(y)
    families["frobenius_iterates"] = iterates

    for name, family in families.items():
        if not family:
            result.details[name] = None
            continue
        with _guard(result, "gauge_fit", family=name):
            fit = gauge_fit(family, config.gauge_epsilon_floor, config.gauge_c_max, config.gauge_norm)
            holds = all(t.valuation() >= fit.epsilon * t.weight.norm(config.gauge_norm) - fit.C
                        for x in family for t in x.terms)
            result.record("gauge_inequality", holds, family=name)
            result.record("gauge_monotone", _prefix_monotone(family, config), family=name)
            result.details[name] = fit.as_dict()

    _diagnostics(result, config.p)
    return result


# ==============================================================================
# DIAGNOSTICS
# ==============================================================================
def _diagnostics(result: SuiteResult, p: int) -> None:
    logging.info(f"--- {result.name.upper()} DIAGNOSTICS ---")
    logging.info(f"Checks performed: {len(result.checks)}  |  defects: {len(result.defects)}")
    if result.skipped:
        logging.warning(f"Weight blocks skipped by the size cap: {len(result.skipped)}")
    for label, (size, population) in result.sampled.items():
        logging.info(f"  sampled {label}: {size}/{population}")
    for label, per_degree in result.tables.items():
        summary = "  ".join(f"H^{q}={h.render(p)}"
                            for q, h in sorted(per_degree.items()))
        logging.info(f"  {label}: {summary}")


SUITE_RUNNERS = {
    "relations": run_relations,
    "exactness": run_exactness,
    "decomposition": run_decomposition,
    "comparison": run_comparison,
    "monodromy": run_monodromy,
    "gauge": run_gauge,
}
