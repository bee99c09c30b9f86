"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np

from pcrisk.data import MultiCohortDataset, PatientRecord
from pcrisk.factors import BINARY_FACTORS
from pcrisk.simulate import (
    CohortSpec,
    GeneratorConfig,
    default_coefficients,
    generate_cohorts,
)


def make_record(
    cohort_id="c1",
    age=65.0,
    psa=8.0,
    outcome=0,
    dre="normal",
    volume=40.0,
    **binaries,
) -> PatientRecord:
    kwargs = {f: binaries.pop(f, 0) for f in BINARY_FACTORS}
    if binaries:
        raise TypeError(f"unknown factors: {sorted(binaries)}")
    return PatientRecord(
        cohort_id=cohort_id,
        age=age,
        psa=psa,
        outcome=outcome,
        dre=dre,
        volume=volume,
        **kwargs,
    )


def sparse_record(cohort_id="c1", age=65.0, psa=8.0, outcome=0, **present) -> PatientRecord:
    """Record with every optional factor missing unless passed explicitly."""
    return PatientRecord(cohort_id=cohort_id, age=age, psa=psa, outcome=outcome, **present)


def small_config(
    n_cohorts=3, n_per_cohort=400, seed=7, intercept=-1.0, offsets=None
) -> GeneratorConfig:
    coefs = default_coefficients()
    coefs["intercept"] = intercept
    offsets = offsets or [0.2, 0.0, -0.2][:n_cohorts]
    cohorts = tuple(
        CohortSpec(name=f"c{i+1}", n=n_per_cohort, intercept_offset=offsets[i % len(offsets)])
        for i in range(n_cohorts)
    )
    return GeneratorConfig(cohorts=cohorts, coefficients=coefs, seed=seed)


def small_dataset(**kwargs) -> MultiCohortDataset:
    return generate_cohorts(small_config(**kwargs))


def random_logistic_problem(rng: np.random.Generator, n: int, p: int):
    """Well-behaved random design (leading intercept) and 0/1 outcomes."""
    X = np.column_stack([np.ones(n), rng.normal(size=(n, p - 1))])
    beta = rng.uniform(-1.0, 1.0, size=p)
    eta = X @ beta
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
    return X, y
