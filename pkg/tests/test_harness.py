import numpy as np
import pytest

from helpers import make_record, small_dataset

from pcrisk.data import MultiCohortDataset
from pcrisk.errors import DataValidationError
from pcrisk.harness import (
    collect_predictions,
    external_validate,
    fit_pattern_with_fallback,
    loco_cv,
    method_comparison,
    resolve_strategies,
)
from pcrisk.serialize import canonical_json
from pcrisk.simulate import CohortSpec, GeneratorConfig, default_coefficients, generate_cohorts

FAST_IMPUTE = {"m": 3, "cycles": 2, "donors": 5}
CHEAP = ("available_cases", "categorization")


def _train_valid(seed=61, n=500):
    coefs = default_coefficients()
    coefs["intercept"] = -1.0
    cfg = GeneratorConfig(
        cohorts=(
            CohortSpec(name="t1", n=n, intercept_offset=0.1),
            CohortSpec(name="t2", n=n),
            CohortSpec(name="t3", n=n, intercept_offset=-0.1),
            CohortSpec(name="v", n=n, role="validation"),
        ),
        coefficients=coefs,
        seed=seed,
    )
    ds = generate_cohorts(cfg)
    train = MultiCohortDataset(r for r in ds if r.cohort_id != "v")
    valid = ds.cohort("v")
    return train, valid


def test_resolve_strategies():
    assert resolve_strategies("all") == resolve_strategies(None)
    assert resolve_strategies(["imputation", "imputation"]) == ("imputation",)
    with pytest.raises(DataValidationError):
        resolve_strategies(["nope"])
    with pytest.raises(DataValidationError):
        resolve_strategies([])


def test_fully_observed_validation_fits_single_pattern_model():
    train, valid = _train_valid()
    report = external_validate(train, valid, CHEAP, seed=1)
    r = report.results["available_cases"]
    assert r.status == "ok"
    assert r.n_models == 1  # single observed pattern: 1023
    assert report.results["categorization"].n_models == 1


def test_report_contains_every_requested_strategy_once():
    train, valid = _train_valid()
    report = external_validate(
        train, valid, "all", seed=2, imputation_config=FAST_IMPUTE
    )
    assert sorted(report.results) == sorted(
        ["available_cases", "iterative_bic", "cohort_ensemble",
         "categorization", "missing_indicator", "imputation"]
    )
    for r in report.results.values():
        assert r.status == "ok"
        assert r.auc is not None and r.auc > 0.5


def test_overlapping_cohorts_rejected():
    train, _ = _train_valid()
    with pytest.raises(DataValidationError, match="overlap"):
        external_validate(train, train, CHEAP, seed=0)


def test_poisoned_outcome_canary_leaves_predictions_bit_identical():
    train, valid = _train_valid(seed=67)
    from dataclasses import replace

    poisoned = MultiCohortDataset(replace(r, outcome=1 - r.outcome) for r in valid)
    _, preds = external_validate(
        train, valid, CHEAP, seed=5, capture_predictions=True
    )
    _, preds_poisoned = external_validate(
        train, poisoned, CHEAP, seed=5, capture_predictions=True
    )
    for s in CHEAP:
        assert np.array_equal(preds[s], preds_poisoned[s])


def test_metrics_change_with_outcomes_but_predictions_do_not():
    train, valid = _train_valid(seed=71)
    from dataclasses import replace

    poisoned = MultiCohortDataset(replace(r, outcome=1 - r.outcome) for r in valid)
    a = external_validate(train, valid, CHEAP, seed=9)
    b = external_validate(train, poisoned, CHEAP, seed=9)
    assert a.results["available_cases"].auc != b.results["available_cases"].auc


def test_fallback_drops_highest_missing_rate_factor():
    # training: volume collected for only 8 records -> full pattern unfittable,
    # fallback must drop volume (the highest-missing factor) and succeed
    rng = np.random.default_rng(3)
    records = []
    for i in range(300):
        records.append(
            make_record(
                cohort_id="t1",
                age=55 + (i % 20),
                psa=3.0 + (i % 10),
                outcome=int(rng.random() < 0.3),
                volume=40.0 + i if i < 4 else None,  # 4 rows < columns + 1
                dre="abnormal" if i % 4 == 0 else "normal",
            )
        )
    train = MultiCohortDataset(records)
    rates = {"volume": 0.97, "dre": 0.0}
    model, used, reason = fit_pattern_with_fallback(
        "available_cases", train, 3, rates=rates, seed=0
    )
    assert used == 1  # dre kept, volume dropped
    assert reason is not None and "insufficient" in reason


def test_fallback_records_surface_in_report():
    rng = np.random.default_rng(5)
    train_records = []
    for i in range(300):
        train_records.append(
            make_record(
                cohort_id="t1",
                age=55 + (i % 20),
                psa=3.0 + (i % 10),
                outcome=int(rng.random() < 0.3),
                volume=40.0 + i if i < 8 else None,
                dre="abnormal" if i % 4 == 0 else "normal",
            )
        )
    valid_records = [
        make_record(
            cohort_id="v",
            age=60 + (i % 15),
            psa=4.0 + (i % 8),
            outcome=int(rng.random() < 0.35),
            volume=35.0 + i,
            dre="normal",
        )
        for i in range(60)
    ]
    report = external_validate(
        MultiCohortDataset(train_records),
        MultiCohortDataset(valid_records),
        ["available_cases"],
        seed=1,
    )
    r = report.results["available_cases"]
    assert r.status == "ok"
    assert r.fallback_records == 60
    assert any("fell back" in w for w in r.warnings)


def test_reports_identical_across_runs_with_same_seed():
    train, valid = _train_valid(seed=73)
    a = external_validate(train, valid, "all", seed=17, imputation_config=FAST_IMPUTE)
    b = external_validate(train, valid, "all", seed=17, imputation_config=FAST_IMPUTE)
    assert canonical_json(a.to_json()) == canonical_json(b.to_json())


# ---------------------------------------------------------------------------
# leave-one-cohort-out


def test_loco_grid_shape_and_medians():
    train, _ = _train_valid(seed=79)
    report = loco_cv(train, CHEAP, seed=3)
    assert report.cohorts == ("t1", "t2", "t3")
    assert set(report.cells) == set(CHEAP)
    for s in CHEAP:
        assert set(report.cells[s]) == {"t1", "t2", "t3"}
    summary = report.summary()
    for s in CHEAP:
        cells = [report.cells[s][c].auc for c in report.cohorts]
        assert summary[s]["auc_median"] == pytest.approx(float(np.median(cells)), abs=1e-12)


def test_loco_needs_two_cohorts():
    ds = small_dataset(n_cohorts=1)
    with pytest.raises(DataValidationError):
        loco_cv(ds, CHEAP, seed=0)


def test_loco_fold_excludes_exactly_one_cohort():
    train, _ = _train_valid(seed=83)
    report = loco_cv(train, ["available_cases"], seed=4)
    for cohort in report.cohorts:
        expected = train.without_cohort(cohort).fingerprint()
        assert report.fold_training_fingerprints[cohort] == expected


def test_loco_identical_cohorts_give_identical_metrics():
    base = small_dataset(n_cohorts=1, n_per_cohort=500, seed=87)
    from dataclasses import replace

    mirrored = [replace(r, cohort_id="b") for r in base]
    ds = MultiCohortDataset([*base.records, *mirrored])
    report = loco_cv(ds, ["available_cases"], seed=5)
    a, b = report.cells["available_cases"]["c1"], report.cells["available_cases"]["b"]
    assert a.auc == pytest.approx(b.auc, abs=1e-12)
    assert a.cil_pct == pytest.approx(b.cil_pct, abs=1e-9)


def test_loco_single_class_fold_marked_failed():
    rng = np.random.default_rng(12)
    records = [
        make_record(cohort_id=c, age=float(60 + (i % 20)), psa=4.0 + (i % 9),
                    outcome=int(rng.random() < 0.4), volume=30.0 + i, dre="normal")
        for c in ("good1", "good2")
        for i in range(80)
    ]
    # held-out cohort with no positive outcomes: AUC undefined on that fold
    records += [
        make_record(cohort_id="allneg", age=62.0 + (i % 10), psa=5.0 + (i % 7),
                    outcome=0, volume=35.0 + i, dre="normal")
        for i in range(40)
    ]
    ds = MultiCohortDataset(records)
    report = loco_cv(ds, ["available_cases"], seed=6)
    assert report.cells["available_cases"]["allneg"].status == "failed"
    assert report.cells["available_cases"]["good1"].status == "ok"
    assert report.cells["available_cases"]["good2"].status == "ok"
    summary = report.summary()
    assert summary["available_cases"]["folds_failed"] == 1


# ---------------------------------------------------------------------------
# method comparison


def test_comparison_matrix_symmetric_unit_diagonal():
    train, valid = _train_valid(seed=89)
    comp = method_comparison(
        train, valid, ["available_cases", "categorization", "missing_indicator"], seed=7
    )
    for a in comp.strategies:
        assert comp.correlations[a][a] == 1.0
        for b in comp.strategies:
            assert comp.correlations[a][b] == comp.correlations[b][a]  # exact


def test_comparison_fully_observed_ac_equals_missing_indicator():
    train, valid = _train_valid(seed=91)
    comp = method_comparison(
        train, valid, ["available_cases", "missing_indicator"], seed=8
    )
    assert comp.correlations["available_cases"]["missing_indicator"] >= 1.0 - 1e-6


def test_comparison_cases_predicted_higher_than_non_cases():
    train, valid = _train_valid(seed=93)
    comp = method_comparison(
        train, valid, list(CHEAP), seed=9
    )
    for s in CHEAP:
        assert comp.summaries[s]["cases"]["mean"] > comp.summaries[s]["non_cases"]["mean"]


def test_collect_predictions_pattern_memoization():
    train, valid = _train_valid(seed=97)
    sp = collect_predictions(train, valid, "available_cases", seed=11)
    assert sp.n_models == 1
    assert len(sp.predictions) == len(valid)
    assert np.all((sp.predictions > 0) & (sp.predictions < 1))
