"""Chained-equations multiple imputation and prediction-time mean imputation.

Each imputation initializes missing cells from the factor's observed marginal,
then sweeps the factors-with-missingness in canonical bit order for a fixed
number of cycles. Conditional models are fit on the rows where the target was
originally observed, using all other factors (current working values) plus the
outcome as covariates: predictive mean matching for volume, logistic draws for
the binaries and dre. Originally observed cells are never modified.

RNG consumption is canonicalized by sorting records on (cohort, content)
before imputing, so record order does not change the result for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .data import MultiCohortDataset
from .errors import DataValidationError, FitError
from .factors import BINARY_FACTORS, OPTIONAL_FACTORS
from .glm import fit_logistic, sigmoid

# covariate order of the conditional models (volume enters as log2)
IMPUTE_COVARIATE_ORDER: tuple[str, ...] = ("age", "log2_psa", "volume", "dre",
                                           *BINARY_FACTORS, "outcome")


@dataclass(frozen=True)
class ImputationConfig:
    m: int = 30
    cycles: int = 10
    donors: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.cycles < 1 or self.donors < 1:
            raise DataValidationError("imputation config needs m, cycles, donors >= 1")


@dataclass(frozen=True)
class TrainingMeans:
    """Observed-value means/proportions of the training split, used to complete
    a prediction-time record. Continuous means are on the model scale
    (log2 for psa/volume, years for age); categorical entries are full
    observed-category proportion maps."""

    age: float
    log2_psa: float
    log2_volume: float | None
    proportions: Mapping[str, Mapping[str, float]]

    def to_json(self) -> dict:
        return {
            "age": self.age,
            "log2_psa": self.log2_psa,
            "log2_volume": self.log2_volume,
            "proportions": {f: dict(v) for f, v in self.proportions.items()},
        }

    @staticmethod
    def from_json(obj: Mapping) -> "TrainingMeans":
        return TrainingMeans(
            age=obj["age"],
            log2_psa=obj["log2_psa"],
            log2_volume=obj["log2_volume"],
            proportions={f: dict(v) for f, v in obj["proportions"].items()},
        )


def compute_training_means(dataset: MultiCohortDataset) -> TrainingMeans:
    cols = dataset.columns()
    vol = cols["volume"]
    observed_vol = vol[~np.isnan(vol)]
    proportions: dict[str, dict[str, float]] = {}
    dre = cols["dre"]
    dre_obs = dre[~np.isnan(dre)]
    if len(dre_obs):
        p_abn = float(np.mean(dre_obs == 1))
        proportions["dre"] = {"normal": 1.0 - p_abn, "abnormal": p_abn}
    for f in BINARY_FACTORS:
        x = cols[f]
        obs = x[~np.isnan(x)]
        if len(obs):
            p_yes = float(np.mean(obs == 1))
            proportions[f] = {"no": 1.0 - p_yes, "yes": p_yes}
    return TrainingMeans(
        age=float(np.mean(cols["age"])),
        log2_psa=float(np.mean(np.log2(cols["psa"]))),
        log2_volume=float(np.mean(np.log2(observed_vol))) if len(observed_vol) else None,
        proportions=proportions,
    )


def mean_impute_target(vals: Mapping[str, float | None], means: TrainingMeans) -> dict[str, float]:
    """Complete one record's vals with training means: volume on the log2 scale,
    categorical dummies at the observed training proportions. Observed values
    are passed through untouched."""
    out: dict[str, float] = {}
    for f in ("psa", "age"):
        v = vals.get(f)
        if v is None:
            raise DataValidationError(f"mean imputation still requires {f}")
        out[f] = float(v)
    v = vals.get("volume")
    if v is not None:
        out["volume"] = float(v)
    elif means.log2_volume is not None:
        out["volume"] = float(2.0 ** means.log2_volume)
    else:
        raise DataValidationError("no observed training volume to impute from")
    v = vals.get("dre")
    if v is not None:
        out["dre"] = float(v)
    else:
        out["dre"] = means.proportions.get("dre", {}).get("abnormal", 0.0)
    for f in BINARY_FACTORS:
        v = vals.get(f)
        if v is not None:
            out[f] = float(v)
        else:
            out[f] = means.proportions.get(f, {}).get("yes", 0.0)
    return out


@dataclass
class ImputationResult:
    datasets: list[MultiCohortDataset]
    warnings: list[str] = field(default_factory=list)


def _canonical_order(dataset: MultiCohortDataset) -> np.ndarray:
    """Content-based sort (cohort, then factor values) with the original index
    as a final stable tiebreak. lexsort treats its last key as primary."""
    cols = dataset.columns()
    keys = [np.arange(len(dataset))]
    for f in reversed(OPTIONAL_FACTORS):
        keys.append(np.nan_to_num(cols[f], nan=-1.0))
    keys.append(cols["outcome"])
    keys.append(cols["psa"])
    keys.append(cols["age"])
    keys.append(np.array([r.cohort_id for r in dataset.records]))
    return np.lexsort(keys)


def chained_impute(dataset: MultiCohortDataset, cfg: ImputationConfig) -> ImputationResult:
    """Produce cfg.m completed datasets. Deterministic in (dataset content, cfg)."""
    cols = dataset.columns()
    for f in ("psa", "age"):
        if np.isnan(cols[f]).any():
            raise DataValidationError(f"{f} must be complete before imputation")

    targets = [f for f in OPTIONAL_FACTORS if np.isnan(cols[f]).any()]
    if not targets:
        return ImputationResult(datasets=[dataset] * cfg.m)

    order = _canonical_order(dataset)
    n = len(dataset)
    base: dict[str, np.ndarray] = {
        "age": cols["age"][order].copy(),
        "log2_psa": np.log2(cols["psa"][order]),
        "volume": cols["volume"][order].copy(),  # raw scale; log2 taken per use
        "dre": cols["dre"][order].copy(),
        "outcome": cols["outcome"][order].copy(),
    }
    for f in BINARY_FACTORS:
        base[f] = cols[f][order].copy()

    observed_mask = {f: ~np.isnan(base[f]) for f in targets}
    observed_values = {f: base[f][observed_mask[f]] for f in targets}
    for f in targets:
        if len(observed_values[f]) == 0:
            raise DataValidationError(
                f"cannot impute {f}: no cohort in the training set ever observed it"
            )

    warnings: list[str] = []
    completed: list[MultiCohortDataset] = []
    for j in range(cfg.m):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, j]))
        work = {k: v.copy() for k, v in base.items()}
        for f in targets:  # initialize from the observed marginal
            miss = ~observed_mask[f]
            draw = rng.integers(0, len(observed_values[f]), size=int(miss.sum()))
            work[f][miss] = observed_values[f][draw]

        def covariate_matrix(exclude: str) -> np.ndarray:
            cov_cols = [np.ones(n)]
            for c in IMPUTE_COVARIATE_ORDER:
                if c == exclude:
                    continue
                cov_cols.append(np.log2(work["volume"]) if c == "volume" else work[c])
            return np.column_stack(cov_cols)

        for cycle in range(cfg.cycles):
            for f in targets:
                X = covariate_matrix(f)
                obs = observed_mask[f]
                miss = ~obs
                if f == "volume":
                    imputed = _pmm_draw(
                        X, work["volume"], obs, miss, donors=cfg.donors, rng=rng
                    )
                    if imputed is None:
                        warnings.append(
                            f"imputation {j} cycle {cycle}: volume conditional fit failed; "
                            "marginal draws used"
                        )
                        draw = rng.integers(0, len(observed_values[f]), size=int(miss.sum()))
                        imputed = observed_values[f][draw]
                    work[f][miss] = imputed
                else:
                    try:
                        fit = fit_logistic(X[obs], work[f][obs], max_iter=25, tol=1e-6)
                        p_miss = sigmoid(X[miss] @ fit.coefficients)
                        work[f][miss] = (rng.random(int(miss.sum())) < p_miss).astype(float)
                    except FitError:
                        warnings.append(
                            f"imputation {j} cycle {cycle}: {f} conditional fit failed; "
                            "marginal draws used"
                        )
                        draw = rng.integers(0, len(observed_values[f]), size=int(miss.sum()))
                        work[f][miss] = observed_values[f][draw]
        completed.append(_rebuild(dataset, order, work, targets, observed_mask))
    return ImputationResult(datasets=completed, warnings=warnings)


def _pmm_draw(X, volume, obs, miss, *, donors, rng) -> np.ndarray | None:
    """Predictive mean matching on log2(volume): linear fit on observed rows,
    donor draw among the nearest predicted observed values. Returns raw donor
    volumes (exact members of the observed multiset) or None if the fit fails."""
    y = np.log2(volume[obs])
    try:
        coef, *_ = np.linalg.lstsq(X[obs], y, rcond=None)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(coef)):
        return None
    pred_obs = X[obs] @ coef
    pred_mis = X[miss] @ coef
    n_obs = len(pred_obs)
    d = min(donors, n_obs)
    order = np.argsort(pred_obs, kind="stable")
    sorted_pred = pred_obs[order]
    sorted_vals = volume[obs][order]
    pos = np.searchsorted(sorted_pred, pred_mis)
    window = np.arange(-d, d)  # 2d candidates around the insertion point
    cand = np.clip(pos[:, None] + window[None, :], 0, n_obs - 1)
    dist = np.abs(sorted_pred[cand] - pred_mis[:, None])
    nearest = np.argpartition(dist, d - 1, axis=1)[:, :d]
    pick = rng.integers(0, d, size=len(pred_mis))
    chosen = cand[np.arange(len(pred_mis)), nearest[np.arange(len(pred_mis)), pick]]
    return sorted_vals[chosen]


def _rebuild(dataset, order, work, targets, observed_mask) -> MultiCohortDataset:
    """New dataset in the original record order with imputed cells filled in."""
    changes: dict[int, dict] = {}
    for f in targets:
        filled = work[f]
        for sorted_i in np.nonzero(~observed_mask[f])[0]:
            i = int(order[sorted_i])
            v = float(filled[sorted_i])
            if f == "volume":
                value: object = v
            elif f == "dre":
                value = "abnormal" if v == 1.0 else "normal"
            else:
                value = int(v)
            changes.setdefault(i, {})[f] = value
    new_records = list(dataset.records)
    for i, kwargs in changes.items():
        new_records[i] = replace(new_records[i], **kwargs)
    return MultiCohortDataset(new_records)
