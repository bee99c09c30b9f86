import math

import numpy as np
import pytest

from helpers import small_config

from pcrisk.data import pooled_missing_rates, serialize_cohort_csv
from pcrisk.errors import DataValidationError, MissingValueError
from pcrisk.factors import OPTIONAL_FACTORS
from pcrisk.simulate import (
    CohortMissingness,
    CohortSpec,
    GeneratorConfig,
    MarRule,
    MissingnessPlan,
    apply_missingness,
    calibrate_base_intercept,
    default_coefficients,
    generate_cohorts,
    pbcg_like_preset,
    true_risk,
)


def _null_config(n=10_000, seed=1):
    coefs = {k: 0.0 for k in default_coefficients()}
    return GeneratorConfig(
        cohorts=(CohortSpec(name="c1", n=n),), coefficients=coefs, seed=seed
    )


def test_null_model_prevalence_is_half():
    ds = generate_cohorts(_null_config())
    assert ds.prevalence() == pytest.approx(0.5, abs=0.015)


def test_same_seed_identical_datasets():
    cfg = small_config(seed=77)
    a = generate_cohorts(cfg)
    b = generate_cohorts(cfg)
    assert a.records == b.records
    assert serialize_cohort_csv(a) == serialize_cohort_csv(b)


def test_different_seed_differs():
    a = generate_cohorts(small_config(seed=1))
    b = generate_cohorts(small_config(seed=2))
    assert a.records != b.records


def test_preset_prevalences_match_targets(preset_train, preset_valid):
    # intercepts were frozen from the bisection calibrator against these targets
    assert preset_train.prevalence() == pytest.approx(0.28, abs=0.02)
    assert preset_valid.prevalence() == pytest.approx(0.32, abs=0.03)
    assert len(preset_train) == 12703
    assert len(preset_valid) == 5540
    assert len(preset_train.cohort_ids) == 10


def test_preset_systematic_missingness_structure(preset_train, preset_valid):
    rates = pooled_missing_rates(preset_train)
    assert rates["volume"] > 0.3  # several cohorts omit volume entirely
    # extended family history omitted jointly
    profile_cols = preset_train.cohort("c04").columns()
    assert np.isnan(profile_cols["fh_pca_second"]).all()
    assert np.isnan(profile_cols["fh_breast_first"]).all()
    # validation cohort mirrors the systematic omissions
    vcols = preset_valid.columns()
    assert np.isnan(vcols["volume"]).all()
    assert np.isnan(vcols["fh_pca_second"]).all()
    # exactly three training cohorts collect everything
    full = [
        c for c, prof in
        ((c, preset_train.cohort(c)) for c in preset_train.cohort_ids)
        if not any(np.isnan(prof.columns()[f]).all() for f in OPTIONAL_FACTORS)
    ]
    assert len(full) == 3


def test_calibrate_base_intercept_hits_target():
    cfg = small_config(n_per_cohort=2000, seed=5, intercept=0.0)
    b0 = calibrate_base_intercept(cfg, 0.35)
    coefs = dict(cfg.coefficients)
    coefs["intercept"] = b0
    cfg2 = GeneratorConfig(cohorts=cfg.cohorts, coefficients=coefs, seed=99)
    ds = generate_cohorts(cfg2)
    assert ds.prevalence() == pytest.approx(0.35, abs=0.02)


# ---------------------------------------------------------------------------
# true_risk


def test_true_risk_null_model():
    cfg = _null_config(n=10)
    ds = generate_cohorts(cfg)
    assert true_risk(cfg, ds[0]) == 0.5


def test_true_risk_intercept_only():
    coefs = {k: 0.0 for k in default_coefficients()}
    coefs["intercept"] = -2.0
    cfg = GeneratorConfig(cohorts=(CohortSpec(name="c1", n=10),), coefficients=coefs, seed=3)
    ds = generate_cohorts(cfg)
    assert true_risk(cfg, ds[0]) == pytest.approx(1.0 / (1.0 + math.exp(2.0)), abs=1e-12)
    assert true_risk(cfg, ds[0]) == pytest.approx(0.11920292202211755, abs=1e-12)


def test_true_risk_psa_doubling_multiplies_odds():
    from dataclasses import replace

    cfg = small_config(seed=8)
    ds = generate_cohorts(cfg)
    r = ds[0]
    r2 = replace(r, psa=2 * r.psa)
    p1, p2 = true_risk(cfg, r), true_risk(cfg, r2)
    odds = lambda p: p / (1 - p)
    assert odds(p2) / odds(p1) == pytest.approx(2.38, rel=1e-9)


def test_true_risk_requires_complete_record():
    from dataclasses import replace

    cfg = small_config(seed=8)
    ds = generate_cohorts(cfg)
    with pytest.raises(MissingValueError):
        true_risk(cfg, replace(ds[0], volume=None))


# ---------------------------------------------------------------------------
# missingness


def test_omission_makes_factor_fully_missing():
    ds = generate_cohorts(small_config(seed=4))
    plan = MissingnessPlan(per_cohort={"c1": CohortMissingness(omit=("volume",))})
    out = apply_missingness(ds, plan, seed=1)
    cols = out.cohort("c1").columns()
    assert np.isnan(cols["volume"]).all()
    assert not np.isnan(out.cohort("c2").columns()["volume"]).any()


def test_mcar_rate_is_respected():
    cfg = GeneratorConfig(
        cohorts=(CohortSpec(name="c1", n=10_000),),
        coefficients=default_coefficients(),
        seed=6,
    )
    ds = generate_cohorts(cfg)
    plan = MissingnessPlan(per_cohort={"c1": CohortMissingness(mcar={"dre": 0.3})})
    out = apply_missingness(ds, plan, seed=2)
    rate = float(np.isnan(out.columns()["dre"]).mean())
    assert rate == pytest.approx(0.3, abs=0.02)


def test_empty_plan_is_identity():
    ds = generate_cohorts(small_config(seed=10))
    assert apply_missingness(ds, MissingnessPlan(), seed=1) is ds


def test_missingness_never_touches_retained_values():
    ds = generate_cohorts(small_config(seed=13))
    plan = MissingnessPlan(
        per_cohort={"c1": CohortMissingness(omit=("dre",), mcar={"volume": 0.5})}
    )
    out = apply_missingness(ds, plan, seed=4)
    for before, after in zip(ds, out):
        assert after.psa == before.psa and after.age == before.age
        assert after.outcome == before.outcome
        for f in OPTIONAL_FACTORS:
            v = getattr(after, f)
            if v is not None:
                assert v == getattr(before, f)


def test_missingness_rejects_mandatory_targets():
    with pytest.raises(DataValidationError):
        CohortMissingness(omit=("psa",))
    with pytest.raises(DataValidationError):
        CohortMissingness(mcar={"age": 0.1})
    with pytest.raises(DataValidationError):
        MarRule(factor="volume", predictor="volume", slope=1.0)


def test_mar_rule_direction():
    cfg = GeneratorConfig(
        cohorts=(CohortSpec(name="c1", n=20_000),),
        coefficients=default_coefficients(),
        seed=21,
    )
    ds = generate_cohorts(cfg)
    plan = MissingnessPlan(
        per_cohort={
            "c1": CohortMissingness(
                mar=(MarRule(factor="volume", predictor="outcome", slope=2.0, intercept=-2.0),)
            )
        }
    )
    out = apply_missingness(ds, plan, seed=3)
    cols = out.columns()
    miss = np.isnan(cols["volume"])
    y = cols["outcome"]
    rate_pos = float(miss[y == 1].mean())
    rate_neg = float(miss[y == 0].mean())
    # sigmoid(0) = 0.5 for cases vs sigmoid(-2) ~ 0.12 for non-cases
    assert rate_pos == pytest.approx(0.5, abs=0.03)
    assert rate_neg == pytest.approx(0.119, abs=0.02)


def test_plan_for_unknown_cohort_errors():
    ds = generate_cohorts(small_config(seed=1))
    plan = MissingnessPlan(per_cohort={"nope": CohortMissingness(omit=("dre",))})
    with pytest.raises(DataValidationError):
        apply_missingness(ds, plan, seed=0)


def test_config_validation():
    with pytest.raises(DataValidationError):
        CohortSpec(name="x", n=0)
    with pytest.raises(DataValidationError):
        CohortSpec(name="x", n=5, age_sd=0.0)
    with pytest.raises(DataValidationError):
        CohortSpec(name="x", n=5, prevalence={"dre": 1.5})
    with pytest.raises(DataValidationError):
        GeneratorConfig(cohorts=(), coefficients=default_coefficients())
    with pytest.raises(DataValidationError):
        GeneratorConfig(
            cohorts=(CohortSpec(name="a", n=1), CohortSpec(name="a", n=1)),
            coefficients=default_coefficients(),
        )


def test_preset_round_trips_through_config_dict():
    from pcrisk.simulate import config_from_dict, config_to_dict

    preset = pbcg_like_preset(seed=123)
    again = config_from_dict(config_to_dict(preset))
    assert again.config == preset.config
    assert again.plan == preset.plan
