import json

import numpy as np
import pytest

from helpers import make_record, small_dataset, sparse_record

from pcrisk.bank import (
    BANK_FORMAT_VERSION,
    build_bank,
    inspect_entry,
    load_bank,
    lookup,
    save_bank,
)
from pcrisk.data import MultiCohortDataset, observed_pattern
from pcrisk.errors import BankLoadError
from pcrisk.factors import FULL_MASK, PATTERN_COUNT, factors_from_mask
from pcrisk.simulate import CohortMissingness, MissingnessPlan, apply_missingness
from pcrisk.strategies import fit_available_cases, predict_record


@pytest.fixture(scope="module")
def train_ds():
    ds = small_dataset(n_per_cohort=500, seed=101)
    plan = MissingnessPlan(
        per_cohort={
            "c1": CohortMissingness(omit=("volume",)),
            "c2": CohortMissingness(mcar={"dre": 0.15, "fh_pca_second": 0.2}),
        }
    )
    return apply_missingness(ds, plan, seed=102)


@pytest.fixture(scope="module")
def bank(train_ds):
    return build_bank(train_ds)


def test_bank_has_exactly_1024_entries(bank):
    assert set(bank.entries) == set(range(PATTERN_COUNT))
    assert len(bank.entries) == 1024


def test_mask_zero_uses_full_training_size(bank, train_ds):
    entry = bank.entries[0]
    assert entry.fittable
    assert entry.n == len(train_ds)


def test_nested_pattern_monotonicity(bank):
    rng = np.random.default_rng(7)
    for _ in range(100):
        b = int(rng.integers(0, PATTERN_COUNT))
        # random strict subset of b
        a = b & int(rng.integers(0, PATTERN_COUNT))
        assert bank.entries[a].n >= bank.entries[b].n or not bank.entries[b].fittable


def test_lookup_psa_age_only(bank):
    result = lookup(bank, sparse_record())
    assert result.pattern == 0
    assert not result.fallback
    assert 0.0 < result.risk < 1.0
    assert result.n == bank.training_n


def test_lookup_matches_direct_refit(bank, train_ds):
    rng = np.random.default_rng(11)
    checked = 0
    for _ in range(60):
        mask = int(rng.integers(0, PATTERN_COUNT))
        if not bank.entries[mask].fittable:
            continue
        model = fit_available_cases(train_ds, mask)
        kwargs = {}
        for f in factors_from_mask(mask):
            if f == "dre":
                kwargs["dre"] = "abnormal" if rng.random() < 0.3 else "normal"
            elif f == "volume":
                kwargs["volume"] = float(rng.uniform(15, 90))
            else:
                kwargs[f] = int(rng.random() < 0.4)
        record = sparse_record(age=float(rng.uniform(45, 85)),
                               psa=float(rng.uniform(0.5, 40)), **kwargs)
        assert observed_pattern(record) == mask
        result = lookup(bank, record)
        assert result.pattern == mask
        assert result.risk == pytest.approx(predict_record(model, record), abs=1e-10)
        checked += 1
        if checked >= 20:
            break
    assert checked >= 20


def test_lookup_full_record_uses_mask_1023_or_falls_back(bank):
    record = make_record(dre="abnormal", volume=42.0)
    result = lookup(bank, record)
    assert result.requested_pattern == FULL_MASK
    if bank.entries[FULL_MASK].fittable:
        assert result.pattern == FULL_MASK and not result.fallback
    else:
        assert result.fallback and result.pattern != FULL_MASK
        assert result.warnings


def test_unfittable_entries_are_marked_and_fall_back():
    # tiny training set: most multi-factor patterns cannot be fitted
    rng = np.random.default_rng(3)
    records = [
        make_record(
            age=float(55 + i), psa=float(3 + i % 11), outcome=int(rng.random() < 0.4),
            # full pattern has 13 columns; 5 complete rows cannot support it
            volume=None if i % 8 else 30.0 + i, dre="normal" if i % 3 else "abnormal",
        )
        for i in range(40)
    ]
    ds = MultiCohortDataset(records)
    bank_small = build_bank(ds)
    assert set(bank_small.entries) == set(range(PATTERN_COUNT))
    assert not bank_small.entries[FULL_MASK].fittable
    assert bank_small.entries[FULL_MASK].reason
    assert bank_small.entries[0].fittable  # always fittable by schema
    result = lookup(bank_small, make_record(volume=35.0))
    assert result.fallback
    assert result.pattern != FULL_MASK


def test_inspect_entry_summary(bank):
    info = inspect_entry(bank, 0)
    assert info["fittable"]
    assert info["n"] == bank.training_n
    names = [row["term"] for row in info["terms"]]
    assert names == ["intercept", "age", "log2(psa)"]
    for row in info["terms"]:
        assert row["ci_low"] <= row["odds_ratio"] <= row["ci_high"]
        assert 0.0 <= row["p_value"] <= 1.0


# ---------------------------------------------------------------------------
# persistence


def test_save_load_save_byte_identical(bank):
    blob = save_bank(bank)
    again = load_bank(blob)
    assert save_bank(again) == blob


def test_loaded_bank_predicts_identically(bank):
    again = load_bank(save_bank(bank))
    for record in (sparse_record(), make_record(volume=50.0), sparse_record(dre="abnormal")):
        assert lookup(again, record).risk == lookup(bank, record).risk


def test_truncated_file_rejected(bank):
    blob = save_bank(bank)
    with pytest.raises(BankLoadError):
        load_bank(blob[: len(blob) // 2])


def test_version_mismatch_names_both_versions(bank):
    blob = save_bank(bank).decode()
    doc = json.loads(blob)
    doc["format"] = "pcrisk-bank/999"
    with pytest.raises(BankLoadError) as err:
        load_bank(json.dumps(doc))
    assert "pcrisk-bank/999" in str(err.value)
    assert BANK_FORMAT_VERSION in str(err.value)


def test_wrong_entry_count_rejected(bank):
    doc = json.loads(save_bank(bank).decode())
    del doc["payload"]["entries"]["17"]
    from pcrisk.serialize import canonical_json, sha256_hex

    doc["checksum"] = sha256_hex(canonical_json(doc["payload"]))
    with pytest.raises(BankLoadError, match="1024"):
        load_bank(json.dumps(doc))


def test_single_bit_corruption_rejected(bank):
    blob = bytearray(save_bank(bank))
    rng = np.random.default_rng(13)
    for _ in range(40):
        corrupted = bytearray(blob)
        pos = int(rng.integers(0, len(corrupted)))
        bit = 1 << int(rng.integers(0, 8))
        corrupted[pos] ^= bit
        if bytes(corrupted) == bytes(blob):
            continue
        with pytest.raises(BankLoadError):
            load_bank(bytes(corrupted))
