"""
Utility functions for formatting and report persistence
"""

import json
import logging
import os
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

# fields that differ between otherwise identical runs
WALL_TIME_FIELDS = ("wall_time",)


def format_deviation(value: Optional[float], precision: int = 2) -> str:
    """
    Format a max-norm deviation

    Args:
        value: Deviation (None or non-finite for a check that raised)
        precision: Mantissa digits

    Returns:
        Formatted string (e.g., "3.21e-15", "exact", "n/a")
    """
    if value is None or pd.isna(value) or not np.isfinite(value):
        return "n/a"
    if value == 0:
        return "exact"
    return f"{value:.{precision}e}"


def save_report(report: Dict[str, Any], path: str) -> None:
    """
    Write a report dictionary as JSON with sorted keys

    Args:
        report: Output of RunReport.to_dict()
        path: Target file
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info("report written to %s", path)


def load_report(path: str) -> Dict[str, Any]:
    with open(path, 'r') as f:
        return json.load(f)


def strip_wall_times(data: Any) -> Any:
    """Copy of a report with every wall-time field removed"""
    if isinstance(data, dict):
        return {k: strip_wall_times(v) for k, v in data.items() if k not in WALL_TIME_FIELDS}
    if isinstance(data, list):
        return [strip_wall_times(v) for v in data]
    return data


def summarize_frame(df: pd.DataFrame) -> pd.DataFrame:
    """
    Per-suite pass counts and worst deviation

    Args:
        df: DataFrame from RunReport.to_frame()

    Returns:
        DataFrame with columns: suite, checks, passed, worst_deviation
    """
    if df.empty:
        return pd.DataFrame(columns=['suite', 'checks', 'passed', 'worst_deviation'])
    return df.groupby('suite', sort=False).agg(
        checks=('name', 'count'),
        passed=('passed', 'sum'),
        worst_deviation=('deviation', 'max')
    ).reset_index()
