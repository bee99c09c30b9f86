"""Discrimination and calibration metrics: AUC (DeLong CI), calibration-in-the-large,
decile calibration curves with Wilson intervals."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import MetricError

Z95 = 1.96


def _as_pairs(preds, outcomes) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(preds, dtype=float)
    y = np.asarray(outcomes, dtype=float)
    if p.shape != y.shape or p.ndim != 1:
        raise MetricError("predictions and outcomes must be 1-d arrays of equal length")
    if not np.all(np.isfinite(p)):
        raise MetricError("predictions must be finite")
    if not np.all((y == 0) | (y == 1)):
        raise MetricError("outcomes must be 0/1")
    return p, y


def _midrank(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x))
    ranks[order] = np.arange(1, len(x) + 1)
    _, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    # average rank within each tie group
    sums = np.zeros(len(counts))
    np.add.at(sums, inverse, ranks)
    return sums[inverse] / counts[inverse]


def auc(preds, outcomes) -> float:
    """Concordance probability with ties credited 0.5, via midranks (O(n log n))."""
    p, y = _as_pairs(preds, outcomes)
    pos = y == 1
    m = int(pos.sum())
    n_neg = len(y) - m
    if m == 0 or n_neg == 0:
        raise MetricError("AUC needs at least one positive and one negative outcome")
    r = _midrank(p)
    return float((r[pos].sum() - m * (m + 1) / 2.0) / (m * n_neg))


class AucCi(NamedTuple):
    auc: float
    low: float
    high: float
    se: float


def auc_ci(preds, outcomes) -> AucCi:
    """DeLong variance from placement values; normal 95% interval clipped to [0,1]."""
    p, y = _as_pairs(preds, outcomes)
    pos = y == 1
    m = int(pos.sum())
    n_neg = len(y) - m
    if m < 2 or n_neg < 2:
        raise MetricError("DeLong CI needs at least two observations per class")
    r_all = _midrank(p)
    r_pos = _midrank(p[pos])
    r_neg = _midrank(p[~pos])
    a = float((r_all[pos].sum() - m * (m + 1) / 2.0) / (m * n_neg))
    v_pos = (r_all[pos] - r_pos) / n_neg  # placement values of positives
    v_neg = 1.0 - (r_all[~pos] - r_neg) / m
    var = float(np.var(v_pos, ddof=1) / m + np.var(v_neg, ddof=1) / n_neg)
    se = math.sqrt(max(var, 0.0))
    if se == 0.0:
        warnings.warn("degenerate DeLong variance; interval collapsed to the point estimate")
        return AucCi(a, a, a, 0.0)
    return AucCi(a, max(a - Z95 * se, 0.0), min(a + Z95 * se, 1.0), se)


class CilResult(NamedTuple):
    value: float
    low: float
    high: float


def cil(preds, outcomes) -> CilResult:
    """Calibration-in-the-large: mean predicted risk minus prevalence.

    Negative values mean under-prediction. The CI is the paired normal
    approximation value +/- 1.96 * sd(pred - outcome)/sqrt(n)."""
    p, y = _as_pairs(preds, outcomes)
    n = len(p)
    if n < 2:
        raise MetricError("CIL needs at least two observations")
    diffs = p - y
    value = float(np.mean(diffs))
    half = Z95 * float(np.std(diffs, ddof=1)) / math.sqrt(n)
    return CilResult(value, value - half, value + half)


def wilson_interval(successes: int, total: int, *, z: float = Z95) -> tuple[float, float]:
    """Wilson score 95% interval for a binomial proportion."""
    if total <= 0:
        raise MetricError("Wilson interval needs a positive denominator")
    phat = successes / total
    denom = 1.0 + z * z / total
    center = (phat + z * z / (2 * total)) / denom
    half = z * math.sqrt(phat * (1 - phat) / total + z * z / (4 * total * total)) / denom
    return (max(center - half, 0.0), min(center + half, 1.0))


@dataclass(frozen=True)
class CalibrationBin:
    n: int
    mean_predicted: float
    observed: float
    ci_low: float
    ci_high: float

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "mean_predicted": self.mean_predicted,
            "observed": self.observed,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
        }


def calibration_deciles(preds, outcomes) -> tuple[CalibrationBin, ...]:
    """Ten near-equal bins by sorted prediction (sizes differ by at most one,
    ties broken by stable input order) with Wilson 95% intervals per bin."""
    p, y = _as_pairs(preds, outcomes)
    n = len(p)
    if n < 10:
        raise MetricError("decile calibration needs at least 10 observations")
    order = np.argsort(p, kind="stable")
    base, rem = divmod(n, 10)
    bins: list[CalibrationBin] = []
    start = 0
    for i in range(10):
        size = base + (1 if i < rem else 0)
        idx = order[start:start + size]
        start += size
        events = int(y[idx].sum())
        lo, hi = wilson_interval(events, size)
        bins.append(
            CalibrationBin(
                n=size,
                mean_predicted=float(np.mean(p[idx])),
                observed=events / size,
                ci_low=lo,
                ci_high=hi,
            )
        )
    return tuple(bins)
