import pytest

from pcrisk.errors import DataValidationError
from pcrisk.factors import (
    BINARY_FACTORS,
    FULL_MASK,
    OPTIONAL_FACTORS,
    PATTERN_COUNT,
    bit_of,
    factors_from_mask,
    mask_from_factors,
    validate_mask,
)


def test_factor_counts():
    assert len(OPTIONAL_FACTORS) == 10
    assert len(BINARY_FACTORS) == 8
    assert FULL_MASK == 1023
    assert PATTERN_COUNT == 1024


def test_canonical_bit_order():
    assert bit_of("dre") == 0
    assert bit_of("volume") == 1
    assert bit_of("prior_biopsy") == 2
    assert bit_of("fh_breast_first") == 9


def test_mask_from_factor_names():
    assert mask_from_factors([]) == 0
    assert mask_from_factors(["dre", "volume"]) == 3
    assert mask_from_factors(OPTIONAL_FACTORS) == 1023


def test_mask_factor_bijection_exhaustive():
    seen = set()
    for mask in range(PATTERN_COUNT):
        names = factors_from_mask(mask)
        assert mask_from_factors(names) == mask
        assert names not in seen
        seen.add(names)
    assert len(seen) == PATTERN_COUNT


def test_mask_validation_errors():
    with pytest.raises(DataValidationError):
        validate_mask(-1)
    with pytest.raises(DataValidationError):
        validate_mask(1024)
    with pytest.raises(DataValidationError):
        bit_of("psa")
    with pytest.raises(DataValidationError):
        mask_from_factors(["nonexistent"])
