"""
Result Aggregation
Combines per-seed accuracies into mean ± sample standard deviation and
compares loss variants with a paired two-tailed t-test.
"""

from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
from scipy import stats

from src.utils.exceptions import ContractViolation
from src.utils.logger import get_logger

logger = get_logger(__name__)

# p-value thresholds and the marker each earns in a comparison table
SIGNIFICANCE_LEVELS = [(0.001, "strong"), (0.05, "significant")]


def aggregate(values: Sequence[float]) -> Dict[str, Any]:
    """Mean and sample standard deviation (ddof=1; 0.0 for a single run)."""
    arr = np.asarray([v for v in values if v is not None], dtype=np.float64)
    if arr.size == 0:
        raise ContractViolation("Nothing to aggregate")
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return {"mean": float(arr.mean()), "std": std, "n": int(arr.size)}


def format_mean_std(summary: Mapping[str, float], scale: float = 100.0) -> str:
    """Accuracy style '97.66 ± 0.08'."""
    return f"{summary['mean'] * scale:.2f} ± {summary['std'] * scale:.2f}"


def paired_t_test(a: Mapping[int, float], b: Mapping[int, float]) -> Optional[float]:
    """Two-tailed p-value over the seeds both runs share; None with fewer than two pairs."""
    seeds = sorted(set(a) & set(b))
    if len(seeds) < 2:
        return None
    x = np.array([a[s] for s in seeds])
    y = np.array([b[s] for s in seeds])
    if np.allclose(x, y):
        return 1.0
    return float(stats.ttest_rel(x, y).pvalue)


def significance_label(p_value: Optional[float]) -> str:
    if p_value is None:
        return ""
    for threshold, label in SIGNIFICANCE_LEVELS:
        if p_value < threshold:
            return label
    return ""


def compare_variants(runs: Mapping[str, Mapping[int, float]]) -> List[Dict[str, Any]]:
    """
    One row per variant, best mean first. The best variant is tested against
    the next best; other rows carry no test.
    """
    if not runs:
        raise ContractViolation("No runs to compare")
    rows = []
    for name, per_seed in runs.items():
        summary = aggregate(per_seed.values())
        rows.append({"variant": name, **summary, "display": format_mean_std(summary),
                     "p_value_vs_next": None, "significance": ""})
    rows.sort(key=lambda r: (-r["mean"], r["variant"]))

    if len(rows) > 1:
        p = paired_t_test(runs[rows[0]["variant"]], runs[rows[1]["variant"]])
        rows[0]["p_value_vs_next"] = p
        rows[0]["significance"] = significance_label(p)
        logger.info(f"{rows[0]['variant']} vs {rows[1]['variant']}: paired t-test p={p}")
    return rows
