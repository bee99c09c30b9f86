"""Fit all six missing-data strategies and compare their answers for one patient.

Three strategies are tailored to the patient's available-factor pattern
(available cases, iterative BIC, cohort ensemble); three are single pooled
models that absorb missingness structurally (categorization, missing
indicator, chained-equation imputation).
"""

import numpy as np

from pcrisk.data import PatientRecord, observed_pattern
from pcrisk.simulate import simulate_preset
from pcrisk.strategies import (
    fit_available_cases,
    fit_categorization,
    fit_cohort_ensemble,
    fit_imputation,
    fit_iterative_bic,
    fit_missing_indicator,
    predict_record,
)

SEED = 20260810
train, _ = simulate_preset(seed=SEED)

# a clinic patient with PSA, age, an abnormal DRE and a prior negative biopsy,
# and nothing else measured
patient = PatientRecord(
    cohort_id="clinic", age=66.0, psa=7.2, outcome=0,
    dre="abnormal", prior_biopsy=1,
)
pattern = observed_pattern(patient)
print(f"patient pattern mask: {pattern} (dre + prior_biopsy)\n")

models = {
    "available_cases": fit_available_cases(train, pattern),
    "iterative_bic": fit_iterative_bic(train, pattern),
    "cohort_ensemble": fit_cohort_ensemble(train, pattern),
    "categorization": fit_categorization(train),
    "missing_indicator": fit_missing_indicator(train),
    "imputation": fit_imputation(train, m=10, cycles=5, seed=SEED),
}

print(f"{'strategy':<20}{'risk':>8}{'n':>8}{'cohorts':>9}")
for name, model in models.items():
    risk = predict_record(model, patient)
    print(f"{name:<20}{risk:>8.3f}{model.meta.n:>8}{len(model.meta.cohorts):>9}")

print("\navailable-cases odds ratios for this pattern:")
ac = models["available_cases"]
print(f"{'term':<22}{'OR':>7}{'95% CI':>18}")
for term, coef, se in zip(ac.terms, ac.coefficients, ac.se):
    lo, hi = np.exp(coef - 1.96 * se), np.exp(coef + 1.96 * se)
    print(f"{term.name:<22}{np.exp(coef):>7.2f}   ({lo:6.2f}, {hi:6.2f})")

print("\niterative-BIC selection trace (used set shrinks, rows grow):")
for step in models["iterative_bic"].meta.trace:
    print(f"  used={step['used']} n={step['n']} -> selected={step['selected']}")
