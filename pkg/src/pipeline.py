import logging
import time
from dataclasses import dataclass, field

import pandas as pd

# Internal imports
from . import config as cfg
from . import utils
from .drw_core import build_slice, frobenius, operator_matrix, restrict, slice_document, verschiebung
from .suites import SUITE_RUNNERS, SuiteResult
from .witt_base import BaseSpec, Flavor, PrimeLevel


@dataclass
class RunReport:
    config: cfg.RunConfig
    suites: list = field(default_factory=list)            # SuiteResult in execution order
    slice_hashes: dict = field(default_factory=dict)
    blocked: dict = field(default_factory=dict)           # suite -> failed dependencies
    timing: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites)

    @property
    def exit_status(self) -> int:
        return 0 if self.passed else 1

    def suite(self, name: str) -> SuiteResult | None:
        return next((s for s in self.suites if s.name == name), None)

    def as_dict(self, include_timing: bool = True) -> dict:
        doc = {
            "schema_version": cfg.REPORT_SCHEMA_VERSION,
            "engine_version": cfg.ENGINE_VERSION,
            "config": self.config.as_dict(),
            "passed": self.passed,
            "suites": {s.name: s.as_dict() for s in self.suites},
            "slice_hashes": self.slice_hashes,
            "blocked": self.blocked,
        }
        if include_timing:
            doc["timing"] = self.timing
        return doc

    def digest(self) -> str:
        """SHA-256 of the report without its timing fields."""
        return utils.sha256_digest(self.as_dict(include_timing=False))

    def tables(self) -> pd.DataFrame:
        frames = []
        for s in self.suites:
            if s.tables:
                df = utils.invariant_table(s.tables, self.config.p)
                df.insert(0, "suite", s.name)
                frames.append(df)
        if not frames:
            return pd.DataFrame(columns=["suite", "complex", "degree", "length", "generators", "factors"])
        return pd.concat(frames, ignore_index=True)

    def summary(self) -> pd.DataFrame:
        rows = [{"suite": s.name, "passed": s.passed, "checks": len(s.checks), "defects": len(s.defects),
                 "skipped": len(s.skipped)} for s in self.suites]
        return pd.DataFrame(rows, columns=["suite", "passed", "checks", "defects", "skipped"])


def slice_hashes(config: cfg.RunConfig) -> dict:
    """
    SHA-256 of every serialized slice in range. Polynomial-base documents also
    carry F, V and restriction matrices between adjacent levels.
    """
    hashes = {}
    for flavor in (Flavor.POLY_TRIVIAL, Flavor.QUOTIENT_TRIVIAL, Flavor.QUOTIENT_LOG_POINT):
        base = BaseSpec(config.n, config.r, flavor)
        slices = {m: build_slice(base, PrimeLevel(config.p, m), config.K, config.max_block_size)
                  for m in range(1, config.m_max + 1)}
        for m, slice_ in slices.items():
            operators = {}
            if flavor is Flavor.POLY_TRIVIAL and m + 1 in slices:
                upper = slices[m + 1]
                degrees = range(base.n + 1)
                operators["R"] = [operator_matrix(restrict, upper, slice_, q)[0] for q in degrees]
                operators["F"] = [operator_matrix(frobenius, upper, slice_, q)[0] for q in degrees]
                operators["V"] = [operator_matrix(verschiebung, slice_, upper, q)[0] for q in degrees]
            hashes[f"{base.label} m={m}"] = utils.sha256_digest(slice_document(slice_, operators))
    return hashes


def run(config: cfg.RunConfig) -> RunReport:
    logging.info("=== STARTING PIPELINE: DE RHAM-WITT VERIFICATION ===")
    logging.info(f"Config: {config.as_dict()}")
    report = RunReport(config)
    started = time.perf_counter()

    # 1. Serialized slices
    t0 = time.perf_counter()
    report.slice_hashes = slice_hashes(config)
    report.timing["slices"] = round(time.perf_counter() - t0, 3)
    logging.info(f"Slice hashes computed: {len(report.slice_hashes)}")

    # 2. Suites in dependency order
    failed = set()
    for name in config.ordered_suites():
        missing = [dep for dep in cfg.SUITE_DEPENDENCIES.get(name, []) if dep in failed]
        if missing:
            logging.warning(f"Suite '{name}' runs although its dependencies failed: {missing}")
            report.blocked[name] = missing
        t0 = time.perf_counter()
        result = SUITE_RUNNERS[name](config)
        report.timing[name] = round(time.perf_counter() - t0, 3)
        report.suites.append(result)
        if not result.passed:
            failed.add(name)
        logging.info(f"Suite '{name}': {'PASS' if result.passed else 'FAIL'} "
                     f"({len(result.checks)} checks, {len(result.defects)} defects)")

    report.timing["total"] = round(time.perf_counter() - started, 3)

    # =========================================================================
    # 3. DIAGNOSTICS FOR LOGS
    # =========================================================================
    logging.info("--- FINAL REPORT DIAGNOSTICS ---")
    logging.info("\n" + report.summary().to_string(index=False))
    logging.info(f"Timing (s): {report.timing}")
    logging.info(f"Report digest: {report.digest()}")
    # =========================================================================

    return report


def default_output_path() -> str:
    return str(utils.get_next_version_path(cfg.REPORTS_DIR / f"{cfg.REPORT_PREFIX}.json"))


def save_report(report: RunReport, path=None):
    """Writes the reproducible part of the report; wall-clock timing stays in the log."""
    path = path or report.config.output or default_output_path()
    return utils.write_json(report.as_dict(include_timing=False), path)


def render_tables(report: RunReport) -> str:
    """Human table mode: suite summary plus per-degree invariant factors as p-power lists."""
    parts = [report.summary().to_string(index=False)]
    tables = report.tables()
    if not tables.empty:
        parts.append(tables.to_string(index=False))
    return "\n\n".join(parts)
