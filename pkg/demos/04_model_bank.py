"""Build the 1,024-pattern model bank and route patients through it.

Every subset of the ten optional risk factors gets its own pooled
available-cases model; an end-user record is routed to the model matching
exactly the factors it carries, so "unknown" never has to be guessed as "no".
"""

import numpy as np

from pcrisk.bank import build_bank, inspect_entry, load_bank, lookup, save_bank
from pcrisk.data import PatientRecord
from pcrisk.simulate import simulate_preset

SEED = 20260810
train, _ = simulate_preset(seed=SEED)

print("fitting 1,024 pattern models...")
bank = build_bank(train)
print(f"fittable: {bank.fittable_count()}/1024, training n={bank.training_n}")

ns = sorted(e.n for e in bank.entries.values() if e.fittable)
print(f"complete-case sizes: min={ns[0]}, median={int(np.median(ns))}, max={ns[-1]}\n")

blob = save_bank(bank)
bank = load_bank(blob)  # byte-identical round trip
print(f"serialized bank: {len(blob)/1024:.0f} KiB\n")

# a what-if walk: the same patient, adding one factor at a time
base = dict(cohort_id="clinic", age=66.0, psa=7.2, outcome=0)
steps = [
    ("psa + age only", {}),
    ("+ abnormal DRE", {"dre": "abnormal"}),
    ("+ prior negative biopsy", {"dre": "abnormal", "prior_biopsy": 1}),
    ("+ volume 52 cc", {"dre": "abnormal", "prior_biopsy": 1, "volume": 52.0}),
    ("+ first-degree family history",
     {"dre": "abnormal", "prior_biopsy": 1, "volume": 52.0, "fh_pca_first": 1}),
]
print(f"{'available information':<32}{'pattern':>8}{'model n':>9}{'risk':>8}")
for label, extra in steps:
    result = lookup(bank, PatientRecord(**base, **extra))
    print(f"{label:<32}{result.pattern:>8}{result.n:>9}{result.risk:>8.3f}")

print("\nsmallest model (psa + age, every training record):")
info = inspect_entry(bank, 0)
for row in info["terms"]:
    print(f"  {row['term']:<12} OR {row['odds_ratio']:.2f} "
          f"({row['ci_low']:.2f}, {row['ci_high']:.2f})")
