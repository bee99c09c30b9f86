"""Validation experiments: external validation, leave-one-cohort-out
cross-validation, and cross-method prediction comparison.

Pattern-tailored strategies fit one model per distinct observed pattern in the
validation set (memoized) and predict each record with its own pattern's
model; pattern-free strategies fit once. Model fitting only ever sees the
training split, so validation outcomes cannot leak into predictions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .data import MultiCohortDataset, pooled_missing_rates
from .errors import DataValidationError, FitError, MetricError
from .factors import OPTIONAL_FACTORS, factors_from_mask
from .metrics import CalibrationBin, auc_ci, calibration_deciles, cil
from .strategies import PATTERN_FREE, STRATEGY_IDS, RiskModel, fit_strategy, predict_many

REPORT_SCHEMA_VERSION = "1"

DEFAULT_IMPUTATION_CONFIG = {"m": 30, "cycles": 10, "donors": 5}


def _strategy_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def resolve_strategies(names: Sequence[str] | str | None) -> tuple[str, ...]:
    if names is None or names == "all":
        return STRATEGY_IDS
    out = []
    for name in names:
        if name not in STRATEGY_IDS:
            raise DataValidationError(f"unknown strategy {name!r}; choose from {STRATEGY_IDS}")
        if name not in out:
            out.append(name)
    if not out:
        raise DataValidationError("no strategies requested")
    return tuple(out)


@dataclass
class PatternFallback:
    requested: int
    used: int
    records: int
    reason: str


@dataclass
class StrategyPredictions:
    strategy: str
    predictions: np.ndarray
    n_models: int
    fallbacks: list[PatternFallback] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def fit_pattern_with_fallback(
    strategy: str,
    training: MultiCohortDataset,
    pattern: int,
    *,
    rates: Mapping[str, float],
    seed: int = 0,
) -> tuple[RiskModel, int, str | None]:
    """Fit a pattern-tailored model, greedily dropping the factor with the
    highest training missing rate whenever the pattern cannot be fitted.
    Returns (model, pattern actually used, failure reason if any)."""
    mask = pattern
    reason: str | None = None
    while True:
        try:
            model = fit_strategy(strategy, training, pattern=mask, seed=seed)
            return model, mask, reason
        except FitError as exc:
            if mask == 0:
                raise
            if reason is None:
                reason = str(exc)
            drop = max(
                factors_from_mask(mask),
                key=lambda f: (rates.get(f, 0.0), OPTIONAL_FACTORS.index(f)),
            )
            mask &= ~(1 << OPTIONAL_FACTORS.index(drop))


def collect_predictions(
    training: MultiCohortDataset,
    validation: MultiCohortDataset,
    strategy: str,
    seed: int,
    *,
    imputation_config: Mapping | None = None,
) -> StrategyPredictions:
    """Per-record predicted risks for one strategy over the validation set."""
    if strategy in PATTERN_FREE:
        model = fit_strategy(
            strategy,
            training,
            seed=seed,
            imputation_config=dict(imputation_config or DEFAULT_IMPUTATION_CONFIG)
            if strategy == "imputation"
            else None,
        )
        preds = predict_many(model, validation)
        return StrategyPredictions(
            strategy=strategy,
            predictions=preds,
            n_models=1,
            warnings=list(model.meta.warnings),
        )

    rates = pooled_missing_rates(training)
    masks = validation.observed_masks()
    preds = np.empty(len(validation))
    result = StrategyPredictions(strategy=strategy, predictions=preds, n_models=0)
    memo: dict[int, tuple[RiskModel, int, str | None]] = {}
    for pattern in sorted(int(m) for m in np.unique(masks)):
        if pattern not in memo:
            memo[pattern] = fit_pattern_with_fallback(
                strategy, training, pattern, rates=rates, seed=seed
            )
            result.n_models += 1
        model, used, reason = memo[pattern]
        rows = masks == pattern
        subset = validation.subset(rows)
        preds[rows] = predict_many(model, subset)
        if used != pattern:
            result.fallbacks.append(
                PatternFallback(
                    requested=pattern,
                    used=used,
                    records=int(rows.sum()),
                    reason=reason or "unfittable pattern",
                )
            )
            result.warnings.append(
                f"pattern {pattern} fell back to {used} for {int(rows.sum())} records ({reason})"
            )
    return result


@dataclass
class StrategyResult:
    strategy: str
    status: str  # "ok" | "failed"
    reason: str | None = None
    n: int = 0
    prevalence: float | None = None
    auc: float | None = None
    auc_ci: tuple[float, float] | None = None
    cil_pct: float | None = None
    cil_ci_pct: tuple[float, float] | None = None
    calibration: tuple[CalibrationBin, ...] = ()
    n_models: int = 0
    fallback_records: int = 0
    warnings: tuple[str, ...] = ()
    per_cohort: dict[str, dict] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy,
            "status": self.status,
            "reason": self.reason,
            "n": self.n,
            "prevalence": self.prevalence,
            "auc": self.auc,
            "auc_ci": list(self.auc_ci) if self.auc_ci else None,
            "cil_pct": self.cil_pct,
            "cil_ci_pct": list(self.cil_ci_pct) if self.cil_ci_pct else None,
            "calibration": [b.to_json() for b in self.calibration],
            "n_models": self.n_models,
            "fallback_records": self.fallback_records,
            "warnings": list(self.warnings),
            "per_cohort": self.per_cohort,
        }


@dataclass
class ValidationReport:
    seed: int
    training_fingerprint: str
    validation_fingerprint: str
    strategy_configs: dict
    results: dict[str, StrategyResult]

    def to_json(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "kind": "external_validation",
            "seed": self.seed,
            "training_fingerprint": self.training_fingerprint,
            "validation_fingerprint": self.validation_fingerprint,
            "strategy_configs": self.strategy_configs,
            "strategies": {s: r.to_json() for s, r in sorted(self.results.items())},
        }


def _evaluate(preds: np.ndarray, outcomes: np.ndarray) -> dict:
    a = auc_ci(preds, outcomes)
    c = cil(preds, outcomes)
    return {
        "auc": a.auc,
        "auc_ci": (a.low, a.high),
        "cil_pct": 100.0 * c.value,
        "cil_ci_pct": (100.0 * c.low, 100.0 * c.high),
        "calibration": calibration_deciles(preds, outcomes),
    }


def external_validate(
    training: MultiCohortDataset,
    validation: MultiCohortDataset,
    strategies: Sequence[str] | str | None = None,
    seed: int = 0,
    *,
    imputation_config: Mapping | None = None,
    capture_predictions: bool = False,
) -> ValidationReport | tuple[ValidationReport, dict[str, np.ndarray]]:
    """Fit on the training split, predict every validation record, score.

    A strategy that fails entirely is reported with status="failed" rather
    than aborting the report.
    """
    wanted = resolve_strategies(strategies)
    overlap = set(training.cohort_ids) & set(validation.cohort_ids)
    if overlap:
        raise DataValidationError(f"training/validation cohorts overlap: {sorted(overlap)}")
    outcomes = validation.columns()["outcome"]
    results: dict[str, StrategyResult] = {}
    captured: dict[str, np.ndarray] = {}
    for i, strategy in enumerate(wanted):
        strat_seed = _strategy_seed(seed, i)
        try:
            sp = collect_predictions(
                training, validation, strategy, strat_seed,
                imputation_config=imputation_config,
            )
            scores = _evaluate(sp.predictions, outcomes)
        except (FitError, MetricError, DataValidationError) as exc:
            results[strategy] = StrategyResult(
                strategy=strategy, status="failed", reason=str(exc)
            )
            continue
        captured[strategy] = sp.predictions
        per_cohort: dict[str, dict] = {}
        if len(validation.cohort_ids) > 1:
            codes = validation.columns()["cohort_code"]
            for ci, cid in enumerate(validation.cohort_ids):
                rows = codes == ci
                try:
                    sub = _evaluate(sp.predictions[rows], outcomes[rows])
                    per_cohort[cid] = {
                        "n": int(rows.sum()),
                        "auc": sub["auc"],
                        "cil_pct": sub["cil_pct"],
                    }
                except MetricError as exc:
                    per_cohort[cid] = {"n": int(rows.sum()), "error": str(exc)}
        results[strategy] = StrategyResult(
            strategy=strategy,
            status="ok",
            n=len(validation),
            prevalence=float(np.mean(outcomes)),
            auc=scores["auc"],
            auc_ci=scores["auc_ci"],
            cil_pct=scores["cil_pct"],
            cil_ci_pct=scores["cil_ci_pct"],
            calibration=scores["calibration"],
            n_models=sp.n_models,
            fallback_records=sum(f.records for f in sp.fallbacks),
            warnings=tuple(sp.warnings),
            per_cohort=per_cohort,
        )
    report = ValidationReport(
        seed=seed,
        training_fingerprint=training.fingerprint(),
        validation_fingerprint=validation.fingerprint(),
        strategy_configs={
            "imputation": dict(imputation_config or DEFAULT_IMPUTATION_CONFIG),
        },
        results=results,
    )
    if capture_predictions:
        return report, captured
    return report


# ---------------------------------------------------------------------------
# leave-one-cohort-out


@dataclass
class CVCell:
    status: str
    auc: float | None = None
    cil_pct: float | None = None
    reason: str | None = None

    def to_json(self) -> dict:
        return {"status": self.status, "auc": self.auc, "cil_pct": self.cil_pct,
                "reason": self.reason}


@dataclass
class CVReport:
    seed: int
    cohorts: tuple[str, ...]
    strategies: tuple[str, ...]
    cells: dict[str, dict[str, CVCell]]
    fold_seeds: dict[str, int]
    fold_training_fingerprints: dict[str, str]

    def summary(self) -> dict[str, dict]:
        out: dict[str, dict] = {}
        for strategy in self.strategies:
            aucs = [c.auc for c in self.cells[strategy].values() if c.status == "ok"]
            cils = [c.cil_pct for c in self.cells[strategy].values() if c.status == "ok"]
            entry: dict = {"folds_ok": len(aucs), "folds_failed": len(self.cohorts) - len(aucs)}
            if aucs:
                entry.update(
                    auc_median=float(np.median(aucs)),
                    auc_iqr=[float(np.percentile(aucs, 25)), float(np.percentile(aucs, 75))],
                    cil_pct_median=float(np.median(cils)),
                    cil_pct_iqr=[float(np.percentile(cils, 25)), float(np.percentile(cils, 75))],
                )
            out[strategy] = entry
        return out

    def to_json(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "kind": "loco_cv",
            "seed": self.seed,
            "cohorts": list(self.cohorts),
            "strategies": list(self.strategies),
            "cells": {
                s: {c: cell.to_json() for c, cell in sorted(by_cohort.items())}
                for s, by_cohort in sorted(self.cells.items())
            },
            "fold_seeds": dict(sorted(self.fold_seeds.items())),
            "fold_training_fingerprints": dict(sorted(self.fold_training_fingerprints.items())),
            "summary": self.summary(),
        }


def loco_cv(
    training: MultiCohortDataset,
    strategies: Sequence[str] | str | None = None,
    seed: int = 0,
    *,
    imputation_config: Mapping | None = None,
) -> CVReport:
    """Hold out each cohort in turn, validate on it, assemble the cell grid."""
    wanted = resolve_strategies(strategies)
    cohorts = training.cohort_ids
    if len(cohorts) < 2:
        raise DataValidationError("leave-one-cohort-out needs at least two cohorts")
    cells: dict[str, dict[str, CVCell]] = {s: {} for s in wanted}
    fold_seeds: dict[str, int] = {}
    fold_fps: dict[str, str] = {}
    for fold_index, held_out in enumerate(cohorts):
        fold_seed = _strategy_seed(seed, fold_index)
        fold_seeds[held_out] = fold_seed
        fold_train = training.without_cohort(held_out)
        fold_valid = training.cohort(held_out)
        fold_fps[held_out] = fold_train.fingerprint()
        try:
            report = external_validate(
                fold_train, fold_valid, wanted, fold_seed,
                imputation_config=imputation_config,
            )
        except (FitError, MetricError, DataValidationError) as exc:
            for s in wanted:
                cells[s][held_out] = CVCell(status="failed", reason=str(exc))
            continue
        for s in wanted:
            r = report.results[s]
            if r.status == "ok":
                cells[s][held_out] = CVCell(status="ok", auc=r.auc, cil_pct=r.cil_pct)
            else:
                cells[s][held_out] = CVCell(status="failed", reason=r.reason)
    return CVReport(
        seed=seed,
        cohorts=cohorts,
        strategies=wanted,
        cells=cells,
        fold_seeds=fold_seeds,
        fold_training_fingerprints=fold_fps,
    )


# ---------------------------------------------------------------------------
# cross-method comparison


@dataclass
class MethodComparison:
    strategies: tuple[str, ...]
    correlations: dict[str, dict[str, float | None]]
    summaries: dict[str, dict]

    def to_json(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "kind": "method_comparison",
            "strategies": list(self.strategies),
            "correlations": {
                a: {b: v for b, v in sorted(row.items())}
                for a, row in sorted(self.correlations.items())
            },
            "summaries": dict(sorted(self.summaries.items())),
        }


def _quantile_summary(x: np.ndarray) -> dict:
    if len(x) == 0:
        return {"n": 0}
    return {
        "n": int(len(x)),
        "mean": float(np.mean(x)),
        "min": float(np.min(x)),
        "q25": float(np.percentile(x, 25)),
        "median": float(np.median(x)),
        "q75": float(np.percentile(x, 75)),
        "max": float(np.max(x)),
    }


def method_comparison(
    training: MultiCohortDataset,
    validation: MultiCohortDataset,
    strategies: Sequence[str] | str | None = None,
    seed: int = 0,
    *,
    imputation_config: Mapping | None = None,
) -> MethodComparison:
    """Pairwise Pearson correlations of per-record predictions plus
    per-strategy prediction summaries stratified by outcome."""
    wanted = resolve_strategies(strategies)
    _, captured = external_validate(
        training, validation, wanted, seed,
        imputation_config=imputation_config, capture_predictions=True,
    )
    missing = [s for s in wanted if s not in captured]
    if missing:
        raise FitError(f"method comparison: strategies failed: {missing}")
    outcomes = validation.columns()["outcome"]
    cases = outcomes == 1
    # each unordered pair computed once and mirrored: exactly symmetric
    correlations: dict[str, dict[str, float | None]] = {s: {} for s in wanted}
    for i, a in enumerate(wanted):
        correlations[a][a] = 1.0
        for b in wanted[i + 1:]:
            pa, pb = captured[a], captured[b]
            if np.std(pa) == 0.0 or np.std(pb) == 0.0:
                value: float | None = None
            else:
                value = float(np.corrcoef(pa, pb)[0, 1])
            correlations[a][b] = value
            correlations[b][a] = value
    summaries = {
        s: {
            "cases": _quantile_summary(captured[s][cases]),
            "non_cases": _quantile_summary(captured[s][~cases]),
        }
        for s in wanted
    }
    return MethodComparison(strategies=wanted, correlations=correlations, summaries=summaries)
