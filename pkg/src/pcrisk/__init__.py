"""Multi-cohort prostate-cancer risk modeling with systematically missing risk factors.

Subpackages: data (records/CSV), simulate (synthetic cohorts), glm (logistic
engine), strategies (the six missing-data strategies), impute (chained
equations), metrics (AUC/CIL/calibration), harness (validation experiments),
bank (the 1,024-pattern model bank), service (HTTP API), cli (entry point).
"""

__version__ = "0.1.0"

from .data import (  # noqa: F401
    MultiCohortDataset,
    PatientRecord,
    cohort_missing_profile,
    observed_pattern,
    parse_cohort_csv,
    serialize_cohort_csv,
)
from .factors import FULL_MASK, OPTIONAL_FACTORS, factors_from_mask, mask_from_factors  # noqa: F401
