"""Walk through the synthetic multi-cohort generator.

Generates the default 11-cohort preset (10 training cohorts + 1 held-out
validation cohort), then shows what makes it interesting: heterogeneous
sizes and baseline risks, and cohort-systematic missingness where some
sites never collected some risk factors at all.
"""

import numpy as np

from pcrisk.data import cohort_missing_profile, pooled_missing_rates
from pcrisk.factors import OPTIONAL_FACTORS
from pcrisk.simulate import pbcg_like_preset, simulate_preset, true_risk

SEED = 20260810

train, valid = simulate_preset(seed=SEED)
print(f"training: {len(train)} records in {len(train.cohort_ids)} cohorts")
print(f"validation: {len(valid)} records in cohort {valid.cohort_ids[0]!r}\n")

print(f"{'cohort':<8}{'n':>7}{'prevalence':>12}")
for cid, records in train.by_cohort().items():
    prev = float(np.mean([r.outcome for r in records]))
    print(f"{cid:<8}{len(records):>7}{prev:>12.3f}")
print(f"{'pooled':<8}{len(train):>7}{train.prevalence():>12.3f}")
print(f"{'val':<8}{len(valid):>7}{valid.prevalence():>12.3f}\n")

print("per-cohort missing fraction (1.00 = never collected):")
profile = cohort_missing_profile(train)
header = "cohort  " + "".join(f"{f[:7]:>9}" for f in OPTIONAL_FACTORS)
print(header)
for cid, row in profile.items():
    print(f"{cid:<8}" + "".join(f"{row[f]:>9.2f}" for f in OPTIONAL_FACTORS))
print("pooled  " + "".join(f"{pooled_missing_rates(train)[f]:>9.2f}" for f in OPTIONAL_FACTORS))

# the generator knows each record's true risk, which the test suite uses as
# a recovery oracle
preset = pbcg_like_preset(seed=SEED)
from pcrisk.simulate import generate_cohorts  # noqa: E402

fully_observed = generate_cohorts(preset.config)
r = fully_observed[0]
print(f"\nexample record from {r.cohort_id}: age {r.age:.0f}, psa {r.psa:.1f}, "
      f"volume {r.volume:.0f}, dre {r.dre}")
print(f"true model risk: {true_risk(preset.config, r):.3f}, outcome drawn: {r.outcome}")
