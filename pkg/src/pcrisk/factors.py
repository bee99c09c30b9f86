"""Risk-factor schema and pattern-mask arithmetic.

Twelve factors describe one prostate biopsy. PSA and age are mandatory and
never missing; the remaining ten are optional. The ten optional factors have
a canonical bit order (bit 0 = dre ... bit 9 = fh_breast_first) used for the
pattern masks that key tailored models.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DataValidationError

FACTOR_ORDER: tuple[str, ...] = (
    "psa",
    "age",
    "dre",
    "volume",
    "prior_biopsy",
    "five_ari",
    "prior_psa_screen",
    "african_ancestry",
    "hispanic",
    "fh_pca_first",
    "fh_pca_second",
    "fh_breast_first",
)

MANDATORY_FACTORS: tuple[str, ...] = ("psa", "age")
OPTIONAL_FACTORS: tuple[str, ...] = FACTOR_ORDER[2:]
# Optional binary yes/no factors (everything but the continuous volume and
# the categorical dre).
BINARY_FACTORS: tuple[str, ...] = tuple(
    f for f in OPTIONAL_FACTORS if f not in ("dre", "volume")
)

FULL_MASK = (1 << len(OPTIONAL_FACTORS)) - 1  # 1023
PATTERN_COUNT = FULL_MASK + 1  # 1024

_BIT: dict[str, int] = {f: i for i, f in enumerate(OPTIONAL_FACTORS)}

DRE_LEVELS: tuple[str, str] = ("normal", "abnormal")

AGE_MIN = 18.0
AGE_MAX = 120.0


@dataclass(frozen=True)
class FactorDef:
    """Static metadata for one risk factor (drives validation and the API schema)."""

    name: str
    kind: str  # "continuous" | "categorical" | "binary"
    mandatory: bool
    label: str
    unit: str | None = None
    levels: tuple[str, ...] | None = None
    minimum: float | None = None
    maximum: float | None = None


FACTOR_DEFS: dict[str, FactorDef] = {
    "psa": FactorDef("psa", "continuous", True, "PSA", "ng/mL", minimum=0.0),
    "age": FactorDef("age", "continuous", True, "Age", "years", minimum=AGE_MIN, maximum=AGE_MAX),
    "dre": FactorDef("dre", "categorical", False, "Digital rectal exam", levels=DRE_LEVELS),
    "volume": FactorDef("volume", "continuous", False, "Prostate volume", "cc", minimum=0.0),
    "prior_biopsy": FactorDef("prior_biopsy", "binary", False, "Prior negative biopsy"),
    "five_ari": FactorDef("five_ari", "binary", False, "5-ARI use"),
    "prior_psa_screen": FactorDef("prior_psa_screen", "binary", False, "Prior PSA screen"),
    "african_ancestry": FactorDef("african_ancestry", "binary", False, "African ancestry"),
    "hispanic": FactorDef("hispanic", "binary", False, "Hispanic ethnicity"),
    "fh_pca_first": FactorDef(
        "fh_pca_first", "binary", False, "First-degree prostate cancer family history"
    ),
    "fh_pca_second": FactorDef(
        "fh_pca_second", "binary", False, "Second-degree prostate cancer family history"
    ),
    "fh_breast_first": FactorDef(
        "fh_breast_first", "binary", False, "First-degree breast cancer family history"
    ),
}


def bit_of(factor: str) -> int:
    """Canonical bit index of an optional factor."""
    try:
        return _BIT[factor]
    except KeyError:
        raise DataValidationError(f"not an optional factor: {factor!r}") from None


def validate_mask(mask: int) -> int:
    if not isinstance(mask, int) or not (0 <= mask <= FULL_MASK):
        raise DataValidationError(f"pattern mask must be an integer in [0, {FULL_MASK}], got {mask!r}")
    return mask


def mask_from_factors(names) -> int:
    """Pattern mask for a collection of optional-factor names."""
    mask = 0
    for name in names:
        mask |= 1 << bit_of(name)
    return mask


def factors_from_mask(mask: int) -> tuple[str, ...]:
    """Optional factors present in a mask, in canonical bit order."""
    validate_mask(mask)
    return tuple(f for i, f in enumerate(OPTIONAL_FACTORS) if mask >> i & 1)
