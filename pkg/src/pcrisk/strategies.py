"""The six multi-cohort missing-data modeling strategies.

Three are tailored to an end-user's available-factor pattern (available_cases,
iterative_bic, cohort_ensemble) and three are pattern-free single models
(categorization, missing_indicator, imputation). Every strategy produces a
RiskModel whose prediction contract is documented on ``predict_record``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .data import MultiCohortDataset, PatientRecord
from .errors import FitError, InsufficientDataError, MissingValueError
from .factors import BINARY_FACTORS, OPTIONAL_FACTORS, factors_from_mask, validate_mask
from .glm import (
    Binary,
    Categorical,
    Continuous,
    GatedContinuous,
    Intercept,
    LogisticFit,
    MissingIndicator,
    Product,
    Term,
    as_columns,
    bic_score,
    encode_design,
    fit_logistic,
    main_effect,
    sigmoid,
    term_from_json,
    term_matrix,
)
from .impute import (
    ImputationConfig,
    TrainingMeans,
    chained_impute,
    compute_training_means,
    mean_impute_target,
)

STRATEGY_IDS: tuple[str, ...] = (
    "available_cases",
    "iterative_bic",
    "cohort_ensemble",
    "categorization",
    "missing_indicator",
    "imputation",
)
PATTERN_TAILORED: tuple[str, ...] = ("available_cases", "iterative_bic", "cohort_ensemble")
PATTERN_FREE: tuple[str, ...] = ("categorization", "missing_indicator", "imputation")

# a training-cohort factor is usable by the ensemble while its cohort missing
# rate stays below this bound (i.e. it is measured in at least 40% of records)
ENSEMBLE_MISSING_LIMIT = 0.60

FORCED_FACTORS: tuple[str, ...] = ("psa", "age")


@dataclass(frozen=True)
class FitMeta:
    n: int
    cohorts: tuple[str, ...]
    pattern: int | None = None
    dropped: tuple[tuple[str, str], ...] = ()
    warnings: tuple[str, ...] = ()
    trace: tuple[dict, ...] | None = None
    per_imputation: tuple[dict, ...] | None = None


@dataclass(frozen=True)
class RiskModel:
    strategy: str
    meta: FitMeta
    terms: tuple[Term, ...] | None = None
    coefficients: np.ndarray | None = None
    se: np.ndarray | None = None
    members: tuple["RiskModel", ...] | None = None
    means: TrainingMeans | None = None


@dataclass(frozen=True)
class PredictionOutcome:
    risk: float
    strategy: str
    n: int
    cohorts: tuple[str, ...]
    pattern: int | None


# ---------------------------------------------------------------------------
# shared helpers


def _complete_row_mask(dataset: MultiCohortDataset, mask: int) -> np.ndarray:
    need = np.uint16(mask)
    return (dataset.observed_masks() & need) == need


def _sliced_columns(dataset: MultiCohortDataset, rows: np.ndarray) -> dict[str, np.ndarray]:
    return {k: v[rows] for k, v in dataset.columns().items()}


def _contributing_cohorts(dataset: MultiCohortDataset, rows: np.ndarray) -> tuple[str, ...]:
    codes = dataset.columns()["cohort_code"][rows]
    present = set(np.unique(codes).tolist())
    return tuple(c for i, c in enumerate(dataset.cohort_ids) if i in present)


def _base_terms(pattern_factors: Sequence[str]) -> list[Term]:
    terms: list[Term] = [Intercept(), Continuous("age"), Continuous("psa", "log2")]
    terms.extend(main_effect(f) for f in pattern_factors)
    return terms


def combined_family_history_level(vals: Mapping[str, float | None]) -> str:
    """Classify the two extended family-history factors into the combined
    5-level factor: none / pca_second_only / breast_only / both / missing."""
    a = vals.get("fh_pca_second")
    b = vals.get("fh_breast_first")
    if a is None or b is None:
        return "missing"
    if a == 1 and b == 1:
        return "both"
    if a == 1:
        return "pca_second_only"
    if b == 1:
        return "breast_only"
    return "none"


def volume_level(vals: Mapping[str, float | None]) -> str:
    v = vals.get("volume")
    if v is None:
        return "missing"
    if v < 30.0:
        return "lt30"
    if v <= 50.0:
        return "30to50"
    return "gt50"


# ---------------------------------------------------------------------------
# available cases


def fit_available_cases(
    training: MultiCohortDataset, pattern: int, **fit_kwargs
) -> RiskModel:
    """Pool complete records for the pattern's factors and fit main effects on
    age, log2(psa) and the pattern factors."""
    validate_mask(pattern)
    pattern_factors = factors_from_mask(pattern)
    rows = _complete_row_mask(training, pattern)
    terms = _base_terms(pattern_factors)
    n_rows = int(rows.sum())
    if n_rows < len(terms) + 1:
        raise InsufficientDataError(
            f"insufficient complete cases for pattern {pattern}: "
            f"{n_rows} rows for {len(terms)} columns"
        )
    design = encode_design(_sliced_columns(training, rows), terms)
    fit = fit_logistic(design.X, design.y, **fit_kwargs)
    warnings = tuple(f"column dropped ({why}): {name}" for name, why in design.dropped)
    return RiskModel(
        strategy="available_cases",
        terms=design.terms,
        coefficients=fit.coefficients,
        se=fit.standard_errors() if fit.converged else None,
        meta=FitMeta(
            n=n_rows,
            cohorts=_contributing_cohorts(training, rows),
            pattern=pattern,
            dropped=design.dropped,
            warnings=warnings,
        ),
    )


# ---------------------------------------------------------------------------
# stepwise BIC search


@dataclass
class StepwiseResult:
    terms: tuple[Term, ...]
    fit: LogisticFit
    score: float
    selected_factors: tuple[str, ...]
    warnings: tuple[str, ...]


def stepwise_bic(
    training,
    candidates: Sequence[str],
    *,
    max_steps: int = 200,
    **fit_kwargs,
) -> StepwiseResult:
    """Bidirectional greedy search maximizing log L - k*log(n).

    The start state is all main effects. Moves: drop a non-forced main effect
    not used by any included interaction, re-add a dropped main effect, add a
    two-way interaction between included main effects, drop an interaction.
    psa and age are forced. The data (a dataset or a column mapping) must
    already be complete for every candidate, so n is constant across the
    whole search.
    """
    ordered_all = [*FORCED_FACTORS, *[f for f in OPTIONAL_FACTORS if f in set(candidates)]]
    term_of: dict[str, Term] = {
        "psa": Continuous("psa", "log2"),
        "age": Continuous("age"),
        **{f: main_effect(f) for f in ordered_all[2:]},
    }
    cols, n = as_columns(training)
    warnings: list[str] = []
    cache: dict[tuple, tuple[float, LogisticFit, tuple[Term, ...]] | None] = {}

    def build_terms(mains: frozenset, pairs: frozenset) -> list[Term]:
        terms: list[Term] = [Intercept()]
        terms.extend(term_of[f] for f in ordered_all if f in mains)
        idx = {f: i for i, f in enumerate(ordered_all)}
        for a, b in sorted(pairs, key=lambda p: (idx[p[0]], idx[p[1]])):
            terms.append(Product(term_of[a], term_of[b]))
        return terms

    def evaluate(mains: frozenset, pairs: frozenset):
        key = (tuple(sorted(mains)), tuple(sorted(pairs)))
        if key in cache:
            return cache[key]
        terms = build_terms(mains, pairs)
        try:
            design = encode_design(cols, terms)
            fit = fit_logistic(design.X, design.y, **fit_kwargs)
            score = bic_score(fit.log_likelihood, k=len(design.terms) - 1, n=n)
            result = (score, fit, design.terms)
        except FitError as exc:
            warnings.append(f"stepwise move skipped ({exc})")
            result = None
        cache[key] = result
        return result

    mains = frozenset(ordered_all)
    pairs: frozenset = frozenset()
    current = evaluate(mains, pairs)
    if current is None:
        raise FitError("stepwise start model failed to fit")

    def moves(mains: frozenset, pairs: frozenset):
        in_pair = {f for p in pairs for f in p}
        for f in ordered_all[2:]:
            if f in mains and f not in in_pair:
                yield (mains - {f}, pairs)
            elif f not in mains:
                yield (mains | {f}, pairs)
        included = [f for f in ordered_all if f in mains]
        for a, b in combinations(included, 2):
            if (a, b) not in pairs:
                yield (mains, pairs | {(a, b)})
        for p in pairs:
            yield (mains, pairs - {p})

    for _ in range(max_steps):
        best = None
        best_state = None
        for cand_mains, cand_pairs in moves(mains, pairs):
            res = evaluate(cand_mains, cand_pairs)
            if res is None:
                continue
            if best is None or res[0] > best[0]:
                best = res
                best_state = (cand_mains, cand_pairs)
        if best is None or best[0] <= current[0] + 1e-9:
            break
        mains, pairs = best_state
        current = best
    score, fit, terms = current
    selected = tuple(
        f for f in OPTIONAL_FACTORS
        if any(f in t.requires for t in terms)
    )
    return StepwiseResult(
        terms=terms,
        fit=fit,
        score=score,
        selected_factors=selected,
        warnings=tuple(warnings),
    )


def fit_iterative_bic(
    training: MultiCohortDataset, pattern: int, **fit_kwargs
) -> RiskModel:
    """Available-cases with stepwise BIC selection, restarted on the reduced
    factor set whenever selection drops a factor (which frees up records)."""
    validate_mask(pattern)
    used = list(factors_from_mask(pattern))
    trace: list[dict] = []
    warnings: list[str] = []
    while True:
        mask = 0
        for f in used:
            mask |= 1 << OPTIONAL_FACTORS.index(f)
        rows = _complete_row_mask(training, mask)
        n_rows = int(rows.sum())
        p_start = 3 + len(used)
        if n_rows < p_start + 1:
            raise InsufficientDataError(
                f"insufficient complete cases for pattern {pattern}: "
                f"{n_rows} rows for {p_start} columns"
            )
        sw = stepwise_bic(_sliced_columns(training, rows), used, **fit_kwargs)
        warnings.extend(sw.warnings)
        trace.append(
            {
                "used": list(used),
                "n": n_rows,
                "selected": list(sw.selected_factors),
                "score": sw.score,
            }
        )
        if len(sw.selected_factors) < len(used):
            used = list(sw.selected_factors)
            continue
        return RiskModel(
            strategy="iterative_bic",
            terms=sw.terms,
            coefficients=sw.fit.coefficients,
            se=sw.fit.standard_errors() if sw.fit.converged else None,
            meta=FitMeta(
                n=n_rows,
                cohorts=_contributing_cohorts(training, rows),
                pattern=pattern,
                warnings=tuple(warnings),
                trace=tuple(trace),
            ),
        )


# ---------------------------------------------------------------------------
# cohort ensemble


def fit_cohort_ensemble(
    training: MultiCohortDataset, pattern: int, **fit_kwargs
) -> RiskModel:
    """One stepwise-selected model per cohort on the factors both requested by
    the pattern and collected by the cohort (missing rate < 60%); prediction
    averages the member risks on the probability scale."""
    validate_mask(pattern)
    pattern_factors = factors_from_mask(pattern)
    members: list[RiskModel] = []
    warnings: list[str] = []
    for cid in training.cohort_ids:
        cohort_ds = training.cohort(cid)
        cols = cohort_ds.columns()
        size = len(cohort_ds)
        usable = [
            f for f in pattern_factors
            if float(np.mean(np.isnan(cols[f]))) < ENSEMBLE_MISSING_LIMIT
        ]
        mask = 0
        for f in usable:
            mask |= 1 << OPTIONAL_FACTORS.index(f)
        rows = _complete_row_mask(cohort_ds, mask)
        n_rows = int(rows.sum())
        p_start = 3 + len(usable)
        if n_rows < p_start + 1:
            warnings.append(
                f"cohort {cid} skipped: {n_rows} complete records for {p_start} columns"
            )
            continue
        try:
            sw = stepwise_bic(_sliced_columns(cohort_ds, rows), usable, **fit_kwargs)
        except FitError as exc:
            warnings.append(f"cohort {cid} skipped: {exc}")
            continue
        warnings.extend(f"cohort {cid}: {w}" for w in sw.warnings)
        members.append(
            RiskModel(
                strategy="cohort_member",
                terms=sw.terms,
                coefficients=sw.fit.coefficients,
                se=sw.fit.standard_errors() if sw.fit.converged else None,
                meta=FitMeta(n=n_rows, cohorts=(cid,), pattern=mask),
            )
        )
    if not members:
        raise FitError(f"cohort ensemble: no cohort could be fitted for pattern {pattern}")
    return RiskModel(
        strategy="cohort_ensemble",
        members=tuple(members),
        meta=FitMeta(
            n=sum(m.meta.n for m in members),
            cohorts=tuple(m.meta.cohorts[0] for m in members),
            pattern=pattern,
            warnings=tuple(warnings),
        ),
    )


# ---------------------------------------------------------------------------
# pattern-free strategies


def _categorical_block() -> list[Term]:
    """Shared categorical handling: dre and the simple binaries gain a missing
    level; the two extended family-history factors are combined into one
    5-level factor encoded additively (so it nests the plain main effects
    when nothing is missing)."""
    terms: list[Term] = [Categorical("dre", "abnormal"), Categorical("dre", "missing")]
    for f in BINARY_FACTORS:
        if f in ("fh_pca_second", "fh_breast_first"):
            continue
        terms.append(Categorical(f, "yes"))
        terms.append(Categorical(f, "missing"))
    terms.append(Categorical("fh_combo", "pca_second"))
    terms.append(Categorical("fh_combo", "breast_first"))
    terms.append(Categorical("fh_combo", "missing"))
    return terms


def _fit_pattern_free(
    training: MultiCohortDataset, strategy: str, terms: list[Term], **fit_kwargs
) -> RiskModel:
    design = encode_design(training, terms)
    fit = fit_logistic(design.X, design.y, **fit_kwargs)
    warnings = tuple(f"column dropped ({why}): {name}" for name, why in design.dropped)
    return RiskModel(
        strategy=strategy,
        terms=design.terms,
        coefficients=fit.coefficients,
        se=fit.standard_errors() if fit.converged else None,
        meta=FitMeta(
            n=len(training),
            cohorts=training.cohort_ids,
            dropped=design.dropped,
            warnings=warnings,
        ),
    )


def fit_categorization(training: MultiCohortDataset, **fit_kwargs) -> RiskModel:
    """One pooled model; missingness becomes explicit categories. Volume is
    binned <30 / [30,50] / >50 / missing, psa and age stay continuous."""
    terms: list[Term] = [
        Intercept(),
        Continuous("age"),
        Continuous("psa", "log2"),
        Categorical("volume", "30to50"),
        Categorical("volume", "gt50"),
        Categorical("volume", "missing"),
        *_categorical_block(),
    ]
    return _fit_pattern_free(training, "categorization", terms, **fit_kwargs)


def fit_missing_indicator(training: MultiCohortDataset, **fit_kwargs) -> RiskModel:
    """Identical to categorization except volume stays continuous: a missing
    indicator plus an observed-gated log2(volume) slope."""
    terms: list[Term] = [
        Intercept(),
        Continuous("age"),
        Continuous("psa", "log2"),
        MissingIndicator("volume"),
        GatedContinuous("volume", "log2"),
        *_categorical_block(),
    ]
    return _fit_pattern_free(training, "missing_indicator", terms, **fit_kwargs)


FULL_MODEL_TERMS: tuple[Term, ...] = (
    Intercept(),
    Continuous("age"),
    Continuous("psa", "log2"),
    Continuous("volume", "log2"),
    Binary("dre"),
    *(Binary(f) for f in BINARY_FACTORS),
)


def fit_imputation(
    training: MultiCohortDataset,
    *,
    m: int = 30,
    cycles: int = 10,
    donors: int = 5,
    seed: int = 0,
    **fit_kwargs,
) -> RiskModel:
    """Chained-equations multiple imputation: fit the full 12-factor
    main-effects model on each completed dataset and average the coefficients.
    Prediction mean-imputes the target record from the training means."""
    cfg = ImputationConfig(m=m, cycles=cycles, donors=donors, seed=seed)
    means = compute_training_means(training)
    result = chained_impute(training, cfg)
    warnings = list(result.warnings)

    # identical encodings across imputations: keep the terms retained in every
    # completed dataset (completeness makes drops rare, but tiny cohorts can
    # produce constant columns)
    retained_names: list[str] | None = None
    unique: dict[int, object] = {id(ds): ds for ds in result.datasets}
    for ds in unique.values():
        design = encode_design(ds, FULL_MODEL_TERMS)
        names = [t.name for t in design.terms]
        if retained_names is None:
            retained_names = names
        else:
            retained_names = [nm for nm in retained_names if nm in names]
        for name, why in design.dropped:
            warnings.append(f"column dropped ({why}) in an imputed dataset: {name}")
    common_terms = tuple(t for t in FULL_MODEL_TERMS if t.name in set(retained_names or []))

    fits: list[LogisticFit] = []
    fit_by_id: dict[int, LogisticFit] = {}
    for i, ds in enumerate(result.datasets):
        if id(ds) in fit_by_id:
            fits.append(fit_by_id[id(ds)])
            continue
        try:
            X = term_matrix(ds, common_terms)
            fit = fit_logistic(X, ds.columns()["outcome"], **fit_kwargs)
        except FitError as exc:
            raise FitError(f"imputation {i} component fit failed: {exc}") from None
        fit_by_id[id(ds)] = fit
        fits.append(fit)
    avg = np.mean([f.coefficients for f in fits], axis=0)
    diagnostics = tuple(
        {
            "log_likelihood": f.log_likelihood,
            "iterations": f.iterations,
            "converged": f.converged,
            "n": f.n,
        }
        for f in fits
    )
    return RiskModel(
        strategy="imputation",
        terms=common_terms,
        coefficients=avg,
        means=means,
        meta=FitMeta(
            n=len(training),
            cohorts=training.cohort_ids,
            warnings=tuple(warnings),
            per_imputation=diagnostics,
        ),
    )


# ---------------------------------------------------------------------------
# prediction


def fit_strategy(
    strategy: str,
    training: MultiCohortDataset,
    *,
    pattern: int | None = None,
    seed: int = 0,
    imputation_config: dict | None = None,
    **fit_kwargs,
) -> RiskModel:
    """Uniform dispatcher used by the harness and the CLI."""
    if strategy in PATTERN_TAILORED:
        if pattern is None:
            raise FitError(f"strategy {strategy!r} needs a pattern")
        if strategy == "available_cases":
            return fit_available_cases(training, pattern, **fit_kwargs)
        if strategy == "iterative_bic":
            return fit_iterative_bic(training, pattern, **fit_kwargs)
        return fit_cohort_ensemble(training, pattern, **fit_kwargs)
    if strategy == "categorization":
        return fit_categorization(training, **fit_kwargs)
    if strategy == "missing_indicator":
        return fit_missing_indicator(training, **fit_kwargs)
    if strategy == "imputation":
        return fit_imputation(training, seed=seed, **(imputation_config or {}), **fit_kwargs)
    raise FitError(f"unknown strategy {strategy!r}")


def predict_record(model: RiskModel, record: PatientRecord) -> float:
    """Predicted risk for one record.

    Pattern-tailored models require the pattern's factors to be present;
    pattern-free models accept any record with psa and age."""
    if model.strategy == "cohort_ensemble":
        return float(np.mean([predict_record(m, record) for m in model.members]))
    vals = record.to_vals()
    if model.strategy == "imputation":
        vals = mean_impute_target(vals, model.means)
    row = np.array([t.value(vals) for t in model.terms])
    return float(sigmoid(float(np.dot(model.coefficients, row))))


def predict_many(model: RiskModel, dataset: MultiCohortDataset) -> np.ndarray:
    """Vectorized predict_record over a dataset."""
    if model.strategy == "cohort_ensemble":
        return np.mean([predict_many(m, dataset) for m in model.members], axis=0)
    if model.strategy == "imputation":
        cols = _mean_imputed_columns(dataset, model.means)
        X = term_matrix(cols, model.terms)
    else:
        X = term_matrix(dataset, model.terms)
    return sigmoid(X @ model.coefficients)


def _mean_imputed_columns(dataset: MultiCohortDataset, means: TrainingMeans) -> dict:
    cols = dataset.columns()
    out = {"psa": cols["psa"], "age": cols["age"]}
    vol = cols["volume"]
    if np.isnan(vol).any():
        if means.log2_volume is None:
            raise MissingValueError("no observed training volume to impute from")
        out["volume"] = np.where(np.isnan(vol), 2.0 ** means.log2_volume, vol)
    else:
        out["volume"] = vol
    dre = cols["dre"]
    fill = means.proportions.get("dre", {}).get("abnormal", 0.0)
    out["dre"] = np.where(np.isnan(dre), fill, dre)
    for f in BINARY_FACTORS:
        x = cols[f]
        fill = means.proportions.get(f, {}).get("yes", 0.0)
        out[f] = np.where(np.isnan(x), fill, x)
    return out


def predict(model: RiskModel, record: PatientRecord) -> PredictionOutcome:
    """Strategy-appropriate prediction plus the model metadata echo."""
    risk = predict_record(model, record)
    return PredictionOutcome(
        risk=risk,
        strategy=model.strategy,
        n=model.meta.n,
        cohorts=model.meta.cohorts,
        pattern=model.meta.pattern,
    )


# ---------------------------------------------------------------------------
# model (de)serialization


def model_to_json(model: RiskModel) -> dict:
    obj: dict = {
        "schema_version": "1",
        "strategy": model.strategy,
        "n": model.meta.n,
        "cohorts": list(model.meta.cohorts),
        "pattern": model.meta.pattern,
        "dropped": [list(d) for d in model.meta.dropped],
        "warnings": list(model.meta.warnings),
    }
    if model.terms is not None:
        obj["terms"] = [t.to_json() for t in model.terms]
        obj["coefficients"] = [float(c) for c in model.coefficients]
        obj["se"] = None if model.se is None else [float(s) for s in model.se]
    if model.meta.trace is not None:
        obj["trace"] = [dict(t) for t in model.meta.trace]
    if model.meta.per_imputation is not None:
        obj["per_imputation"] = [dict(d) for d in model.meta.per_imputation]
    if model.members is not None:
        obj["members"] = [model_to_json(m) for m in model.members]
    if model.means is not None:
        obj["means"] = model.means.to_json()
    return obj


def model_from_json(obj: Mapping) -> RiskModel:
    meta = FitMeta(
        n=int(obj["n"]),
        cohorts=tuple(obj["cohorts"]),
        pattern=obj.get("pattern"),
        dropped=tuple((str(a), str(b)) for a, b in obj.get("dropped", [])),
        warnings=tuple(obj.get("warnings", [])),
        trace=tuple(obj["trace"]) if obj.get("trace") is not None else None,
        per_imputation=(
            tuple(obj["per_imputation"]) if obj.get("per_imputation") is not None else None
        ),
    )
    terms = None
    coefficients = None
    se = None
    if "terms" in obj:
        terms = tuple(term_from_json(t) for t in obj["terms"])
        coefficients = np.asarray(obj["coefficients"], dtype=float)
        se = None if obj.get("se") is None else np.asarray(obj["se"], dtype=float)
    members = None
    if obj.get("members") is not None:
        members = tuple(model_from_json(m) for m in obj["members"])
    means = None
    if obj.get("means") is not None:
        means = TrainingMeans.from_json(obj["means"])
    return RiskModel(
        strategy=obj["strategy"],
        meta=meta,
        terms=terms,
        coefficients=coefficients,
        se=se,
        members=members,
        means=means,
    )
