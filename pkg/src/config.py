import json
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from pathlib import Path

import sympy

# ==============================================================================
# 1. LOCAL PATHS CONFIGURATION
# ==============================================================================
BASE_DIR = Path(__file__).resolve().parent.parent
CONFIG_PATH = BASE_DIR / "config.local.json"

if CONFIG_PATH.exists():
    with open(CONFIG_PATH, 'r', encoding='utf-8') as f:
        config_local = json.load(f)
    OUTPUTS_DIR = Path(config_local.get("output_dir", BASE_DIR / "outputs"))
else:
    OUTPUTS_DIR = BASE_DIR / "outputs"

REPORTS_DIR = OUTPUTS_DIR / "reports"

for d in [OUTPUTS_DIR, REPORTS_DIR]:
    d.mkdir(parents=True, exist_ok=True)

LOGS_DIR = BASE_DIR / "logs"
LOGS_DIR.mkdir(parents=True, exist_ok=True)

# ==============================================================================
# 2. GLOBAL PROJECT DEFINITIONS
# ==============================================================================
ENGINE_VERSION = "v1.0"
REPORT_SCHEMA_VERSION = 1

# Numerical defaults (overridable per run)
DEFAULT_SEED = 20240607
MAX_BLOCK_SIZE = 64            # rows or columns of a single weight block
MAX_RELATION_PAIRS = 400       # basis pairs per relation before sampling
EPSILON_FLOOR = Fraction(1, 64)
GAUGE_C_MAX = Fraction(1)
GAUGE_NORM = "sum"

# ==============================================================================
# 3. METADATA LOADING (SUITES)
# ==============================================================================
SUITES_PATH = BASE_DIR / "suites.json"

if SUITES_PATH.exists():
    with open(SUITES_PATH, 'r', encoding='utf-8') as f:
        _raw = json.load(f)
else:
    print(f"Warning: File {SUITES_PATH} not found.")
    _raw = {"report_prefix": "drw_report", "suites": {}}

REPORT_PREFIX = _raw.get("report_prefix", "drw_report")

# Ordered as in the file: slices -> homology -> filtration -> comparison -> monodromy
SUITES = list(_raw.get("suites", {}).keys())
SUITE_META = {
    key: {
        "stage": meta.get("stage", key),
        "name": meta.get("name", key),
        "description": meta.get("description", ""),
        "acceptance": meta.get("acceptance", ""),
    }
    for key, meta in _raw.get("suites", {}).items()
}
SUITE_DEPENDENCIES = {key: list(meta.get("depends_on", [])) for key, meta in _raw.get("suites", {}).items()}


# ==============================================================================
# 4. RUN CONFIGURATION
# ==============================================================================
class ConfigError(ValueError):
    """Invalid run configuration; `path` is the dotted field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class RunConfig:
    p: int
    m_max: int
    n: int
    r: int
    K: int
    D: int | None = None
    suites: tuple = tuple(SUITES)
    output: str | None = None
    seed: int = DEFAULT_SEED
    max_block_size: int = MAX_BLOCK_SIZE
    max_relation_pairs: int = MAX_RELATION_PAIRS
    gauge_epsilon_floor: Fraction = EPSILON_FLOOR
    gauge_c_max: Fraction = GAUGE_C_MAX
    gauge_norm: str = GAUGE_NORM

    @classmethod
    def from_dict(cls, data: dict, overrides: dict | None = None) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config", "expected a JSON object")
        data = {**data, **{k: v for k, v in (overrides or {}).items() if v is not None}}
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"config.{unknown[0]}", "unknown key")
        for name in ("p", "m_max", "n", "r", "K"):
            if name not in data:
                raise ConfigError(f"config.{name}", "missing required field")
        values = {}
        for name in ("p", "m_max", "n", "r", "K", "D", "seed", "max_block_size", "max_relation_pairs"):
            if data.get(name) is None:
                continue
            if isinstance(data[name], bool) or not isinstance(data[name], int):
                raise ConfigError(f"config.{name}", f"expected an integer, got {data[name]!r}")
            values[name] = data[name]
        for name in ("gauge_epsilon_floor", "gauge_c_max"):
            if data.get(name) is not None:
                try:
                    values[name] = Fraction(str(data[name]))
                except (ValueError, ZeroDivisionError):
                    raise ConfigError(f"config.{name}", f"expected a rational number, got {data[name]!r}")
        if "suites" in data:
            suites = data["suites"]
            if isinstance(suites, str):
                suites = [suites]
            values["suites"] = tuple(suites)
        if "gauge_norm" in data:
            values["gauge_norm"] = data["gauge_norm"]
        if data.get("output") is not None:
            values["output"] = str(data["output"])
        config = cls(**values)
        config.validate()
        return config

    @property
    def degree_bound(self) -> int:
        return self.K if self.D is None else self.D

    def ordered_suites(self) -> list:
        """Requested suites in the dependency order of suites.json."""
        return [s for s in SUITES if s in self.suites]

    def with_overrides(self, **changes) -> "RunConfig":
        new = replace(self, **{k: v for k, v in changes.items() if v is not None})
        new.validate()
        return new

    def validate(self) -> None:
        if self.p < 2 or not sympy.isprime(self.p):
            raise ConfigError("config.p", f"p={self.p} must be prime")
        if self.m_max < 1:
            raise ConfigError("config.m_max", f"m_max={self.m_max} must be >= 1")
        if self.n < 1:
            raise ConfigError("config.n", f"n={self.n} must be >= 1")
        if not 1 <= self.r <= self.n:
            raise ConfigError("config.r", f"need 1 <= r <= n, got r={self.r}, n={self.n}")
        if self.K < 0:
            raise ConfigError("config.K", f"K={self.K} must be >= 0")
        if self.D is not None and self.D < 0:
            raise ConfigError("config.D", f"D={self.D} must be >= 0")
        if not self.suites:
            raise ConfigError("config.suites", "at least one suite is required")
        for i, name in enumerate(self.suites):
            if name not in SUITES:
                raise ConfigError(f"config.suites[{i}]", f"unknown suite {name!r}; expected one of {SUITES}")
        if "comparison" in self.suites and self.degree_bound != self.K:
            raise ConfigError("config.D", f"the comparison suite needs D == K, got D={self.D}, K={self.K}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("config.seed", "seed must be an unsigned 64-bit integer")
        if self.max_block_size < 1:
            raise ConfigError("config.max_block_size", "must be >= 1")
        if self.max_relation_pairs < 1:
            raise ConfigError("config.max_relation_pairs", "must be >= 1")
        if not 0 < self.gauge_epsilon_floor <= 1:
            raise ConfigError("config.gauge_epsilon_floor", "must lie in (0, 1]")
        if self.gauge_c_max < 0:
            raise ConfigError("config.gauge_c_max", "must be >= 0")
        if self.gauge_norm not in ("sum", "max"):
            raise ConfigError("config.gauge_norm", f"expected 'sum' or 'max', got {self.gauge_norm!r}")

    def as_dict(self) -> dict:
        return {
            "p": self.p,
            "m_max": self.m_max,
            "n": self.n,
            "r": self.r,
            "K": self.K,
            "D": self.degree_bound,
            "suites": self.ordered_suites(),
            "seed": self.seed,
            "max_block_size": self.max_block_size,
            "max_relation_pairs": self.max_relation_pairs,
            "gauge_epsilon_floor": str(self.gauge_epsilon_floor),
            "gauge_c_max": str(self.gauge_c_max),
            "gauge_norm": self.gauge_norm,
        }


def load_run_config(path, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError("config", f"cannot read {path}: {e}")
    except json.JSONDecodeError as e:
        raise ConfigError("config", f"{path} is not valid JSON: {e}")
    return RunConfig.from_dict(data, overrides)
