"""
builders.py
-----------
Pass/fail rows for run reports.

Each Check records the value it compared, the tolerance and the direction, so the
verdict can be recomputed from the report alone.
"""

from dataclasses import asdict, dataclass
from typing import Dict, Iterable, List

import numpy as np
import pandas as pd

from utils.logger_config import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float
    comparison: str  # "<=", ">=", "flag" or "n/a"
    passed: bool

    def as_dict(self) -> Dict[str, object]:
        row = asdict(self)
        row["value"] = _json_number(self.value)
        row["tolerance"] = _json_number(self.tolerance)
        return row


def _json_number(value: float):
    value = float(value)
    return value if np.isfinite(value) else str(value)


def at_most(name: str, value: float, tolerance: float) -> Check:
    value = float(value)
    return Check(name, value, float(tolerance), "<=", bool(np.isfinite(value) and value <= tolerance))


def at_least(name: str, value: float, tolerance: float) -> Check:
    value = float(value)
    return Check(name, value, float(tolerance), ">=", bool(np.isfinite(value) and value >= tolerance))


def flag(name: str, ok: bool) -> Check:
    return Check(name, 1.0 if ok else 0.0, 1.0, "flag", bool(ok))


def not_applicable(name: str, reason: str) -> Check:
    """A check with nothing to compare; it passes and is marked n/a in the report."""
    logger.warning(f"Check '{name}' not applicable: {reason}")
    return Check(name, np.nan, np.nan, "n/a", True)


def checks_table(checks: Iterable[Check]) -> pd.DataFrame:
    return pd.DataFrame([c.as_dict() for c in checks], columns=["name", "value", "tolerance", "comparison", "passed"])


def summarize_checks(checks: List[Check]) -> Dict[str, int]:
    failed = [c.name for c in checks if not c.passed]
    summary = {"checks": len(checks), "passed": len(checks) - len(failed), "failed": len(failed)}
    if failed:
        logger.warning(f"{len(failed)} checks failed: {failed}")
    else:
        logger.info(f"All {len(checks)} checks passed")
    return summary
