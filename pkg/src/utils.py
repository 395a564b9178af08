import hashlib
import json
import logging
import re
from datetime import datetime
from fractions import Fraction
from itertools import product
from pathlib import Path

import numpy as np
import pandas as pd

from . import config as cfg  # We need to import config to know where the logs folder is


# Configures the root logger once per run (file at DEBUG, console at INFO)
def setup_logging(log_dir: Path | None = None) -> Path:
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    log_dir = Path(log_dir) if log_dir is not None else cfg.LOGS_DIR
    log_dir.mkdir(parents=True, exist_ok=True)
    log_file = log_dir / f"pipeline_{timestamp}.log"

    logger = logging.getLogger()
    logger.setLevel(logging.DEBUG)

    # Clear old configurations in case it runs more than once in the same session
    if logger.hasHandlers():
        logger.handlers.clear()

    file_format = logging.Formatter('%(asctime)s | %(levelname)-8s | %(module)s:%(funcName)s:%(lineno)d - %(message)s')
    file_handler = logging.FileHandler(log_file, encoding='utf-8')
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(file_format)

    console_format = logging.Formatter('%(asctime)s | %(levelname)-8s | %(message)s', datefmt='%H:%M:%S')
    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.INFO)
    console_handler.setFormatter(console_format)

    logger.addHandler(file_handler)
    logger.addHandler(console_handler)

    logging.info(f"Logs configured. Detailed log file at: {log_file}")
    return log_file


def get_next_version_path(path: Path) -> Path:
    """
    Checks if the file exists. If it does, increments the version (v1 -> v2 -> v3).
    Example: 'report.json' -> 'report_v1.json' -> 'report_v2.json'
    """
    path = Path(path)

    if not path.exists():
        if not re.search(r'_v\d+$', path.stem):
            return path.with_name(f"{path.stem}_v1{path.suffix}")
        return path

    stem = path.stem
    suffix = path.suffix
    parent = path.parent

    match = re.search(r'_v(\d+)$', stem)

    if match:
        base_name = stem[:match.start()]
        next_version = int(match.group(1)) + 1
    else:
        base_name = stem
        next_version = 1

    while True:
        new_path = parent / f"{base_name}_v{next_version}{suffix}"
        if not new_path.exists():
            return new_path
        next_version += 1


def bounded_exponents(n: int, total: int) -> list:
    """Nonnegative integer n-tuples with entry sum <= total, in lexicographic order."""
    return [a for a in product(range(total + 1), repeat=n) if sum(a) <= total]


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [[int(x) for x in row] for row in obj] if obj.ndim == 2 else [int(x) for x in obj]
    if isinstance(obj, (set, frozenset, tuple)):
        return list(obj)
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def canonical_json(data) -> str:
    """Sorted keys, fixed separators: equal data gives equal bytes."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False, default=_jsonable)


def sha256_digest(data) -> str:
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def write_json(data, path: Path) -> Path:
    """
    Writes the document overwriting the previous version.
    The destination folder is created automatically if it doesn't exist.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    logging.info(f"Saving JSON to: {path.name}...")
    with open(path, 'w', encoding='utf-8') as f:
        f.write(json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False, default=_jsonable))
        f.write("\n")
    logging.info("Saved successfully.")
    return path


def invariant_table(tables: dict, p: int) -> pd.DataFrame:
    """
    {label: {q: InvariantFactors}} -> one row per (label, degree) with the
    exponents rendered as p-power lists.
    """
    rows = []
    for label, per_degree in tables.items():
        for q in sorted(per_degree):
            h = per_degree[q]
            rows.append({
                "complex": label,
                "degree": q,
                "length": h.length,
                "generators": h.rank,
                "factors": h.render(p),
            })
    return pd.DataFrame(rows, columns=["complex", "degree", "length", "generators", "factors"])
