"""
writer.py
---------
Artifact emission: JSON run reports, CSV tables, convergence tables and SVG plots.

The report JSON is written with sorted keys; its "timestamp" block is the only part that
changes between runs of the same (config, seed).
"""

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from reports.builders import Check, checks_table, summarize_checks  # noqa: E402
from utils.errors import ConvergenceTableError  # noqa: E402
from utils.logger_config import get_logger  # noqa: E402

logger = get_logger(__name__)

SCHEMA_VERSION = "1.0"
TOOL_VERSION = "0.1.0"
FLOAT_FORMAT = "%.17g"
SVG_HASH_SALT = "rigidity-lab"
HALVING_RTOL = 1e-6


@dataclass
class RunReport:
    command: str
    config: Dict[str, object]
    checks: List[Check] = field(default_factory=list)
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    results: Dict[str, object] = field(default_factory=dict)
    tolerances: Dict[str, float] = field(default_factory=dict)
    status: str = "ok"  # "ok" or "error"
    error: Optional[str] = None
    started_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    wall_clock_s: float = 0.0

    @property
    def passed(self) -> bool:
        return self.status == "ok" and all(c.passed for c in self.checks)

    def to_dict(self) -> Dict[str, object]:
        return {
            "schema_version": SCHEMA_VERSION,
            "tool_version": TOOL_VERSION,
            "command": self.command,
            "config": self.config,
            "status": self.status,
            "error": self.error,
            "passed": self.passed,
            "summary": summarize_checks(self.checks),
            "checks": [c.as_dict() for c in self.checks],
            "tolerances": dict(sorted(self.tolerances.items())),
            "tables": sorted(self.tables),
            "results": self.results,
            "timestamp": {"started_at": self.started_at, "wall_clock_s": round(self.wall_clock_s, 3)},
        }

    def to_json(self) -> str:
        return json.dumps(to_plain(self.to_dict()), indent=2, sort_keys=True) + "\n"


def to_plain(value):
    """JSON-safe copy: numpy scalars and arrays become Python values, non-finite floats strings."""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else str(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, Path):
        return str(value)
    return value


def reproducible_payload(report_json: str) -> Dict[str, object]:
    """Parsed report without its timestamp block."""
    payload = json.loads(report_json)
    payload.pop("timestamp", None)
    return payload


def write_table(table: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def write_report(report: RunReport, out_dir) -> Dict[str, Path]:
    """report.json, checks.csv and one CSV per table under out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"report": out_dir / "report.json"}
    paths["report"].write_text(report.to_json(), encoding="utf-8")
    paths["checks"] = write_table(checks_table(report.checks), out_dir / "checks.csv")
    for name, table in sorted(report.tables.items()):
        paths[name] = write_table(table, out_dir / f"{name}.csv")
    logger.info(f"Wrote {len(paths)} artifacts to {out_dir} (status={report.status}, passed={report.passed})")
    return paths


# ---------------------------------------------------------------------
# Convergence tables
# ---------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class ConvergenceTable:
    table: pd.DataFrame  # h, residual, observed_order, row
    orders: np.ndarray

    @property
    def final_order(self) -> float:
        return float(self.orders[-1])

    @property
    def min_order(self) -> float:
        return float(np.min(self.orders))


def emit_convergence_table(series: Sequence[Tuple[float, float]], path=None) -> ConvergenceTable:
    """
    Observed orders log2(r_i / r_(i+1)) for residuals at halving steps h.

    Needs at least three rows, strictly halving h and positive residuals. The last row of the
    table is a summary carrying the final order.
    """
    if len(series) < 3:
        raise ConvergenceTableError(f"Need at least 3 (h, residual) rows, got {len(series)}")
    hs = np.array([float(h) for h, _ in series])
    residuals = np.array([float(r) for _, r in series])
    if np.any(hs <= 0.0) or np.any(np.diff(hs) >= 0.0):
        raise ConvergenceTableError(f"Steps must be positive and strictly decreasing, got {hs.tolist()}")
    if not np.allclose(hs[:-1] / hs[1:], 2.0, rtol=HALVING_RTOL):
        raise ConvergenceTableError(f"Steps must halve from row to row, got {hs.tolist()}")
    if np.any(~np.isfinite(residuals)) or np.any(residuals <= 0.0):
        raise ConvergenceTableError(f"Residuals must be positive and finite, got {residuals.tolist()}")

    orders = np.log2(residuals[:-1] / residuals[1:])
    table = pd.DataFrame({
        "row": ["step"] * len(hs),
        "h": hs,
        "residual": residuals,
        "observed_order": np.concatenate([[np.nan], orders]),
    })
    summary = pd.DataFrame([{"row": "final", "h": hs[-1], "residual": residuals[-1], "observed_order": orders[-1]}])
    table = pd.concat([table, summary], ignore_index=True)
    logger.info(f"Convergence table: orders {np.round(orders, 3).tolist()}")
    if path is not None:
        write_table(table, Path(path))
    return ConvergenceTable(table=table, orders=orders)


# ---------------------------------------------------------------------
# Plots
# ---------------------------------------------------------------------
def plot_series(table: pd.DataFrame, x: str, y: str, path, title: str = "", logy: bool = True,
                logx: bool = False) -> Optional[Path]:
    """Line plot of two table columns as SVG; plots never decide pass/fail, so failures only warn."""
    path = Path(path)
    data = table[[x, y]].dropna()
    if data.empty:
        logger.warning(f"Nothing to plot for {path.name}")
        return None
    try:
        with plt.rc_context({"svg.hashsalt": SVG_HASH_SALT, "svg.fonttype": "none"}):
            fig, ax = plt.subplots(figsize=(6, 4))
            ax.plot(data[x], data[y], marker="o", markersize=3)
            if logy and (data[y] > 0).all():
                ax.set_yscale("log")
            if logx:
                ax.set_xscale("log")
            ax.set_xlabel(x)
            ax.set_ylabel(y)
            ax.set_title(title)
            ax.grid(True, alpha=0.3)
            path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
    except (OSError, ValueError) as e:
        logger.warning(f"Plot {path.name} skipped: {e}")
        return None
    return path
