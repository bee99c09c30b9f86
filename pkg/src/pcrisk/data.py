"""Patient records, multi-cohort datasets, and the cohort CSV format.

The CSV interchange format is UTF-8, comma-separated, with the exact header

    cohort,age,psa,dre,volume,prior_biopsy,five_ari,prior_psa_screen,\
african_ancestry,hispanic,fh_pca_first,fh_pca_second,fh_breast_first,outcome

Missing optional values are an empty field or the literal ``NA`` (both accepted
on read, ``NA`` written). Lines starting with ``#`` before the header are
treated as comments (the CLI uses them for provenance) and skipped.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import DataValidationError
from .factors import (
    AGE_MAX,
    AGE_MIN,
    BINARY_FACTORS,
    DRE_LEVELS,
    FACTOR_ORDER,
    OPTIONAL_FACTORS,
    bit_of,
)
from .serialize import format_float, sha256_hex

CSV_FIELDS: tuple[str, ...] = (
    "cohort",
    "age",
    "psa",
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
    "outcome",
)
CSV_HEADER = ",".join(CSV_FIELDS)

_MISSING_TOKENS = ("", "NA")


@dataclass(frozen=True)
class PatientRecord:
    """One biopsy: cohort id, 12 risk-factor slots, binary outcome.

    psa and age are mandatory; the ten optional factors are ``None`` when
    missing. dre is stored as its category ("normal"/"abnormal"), the other
    optional binaries as 0/1 integers.
    """

    cohort_id: str
    age: float
    psa: float
    outcome: int
    dre: str | None = None
    volume: float | None = None
    prior_biopsy: int | None = None
    five_ari: int | None = None
    prior_psa_screen: int | None = None
    african_ancestry: int | None = None
    hispanic: int | None = None
    fh_pca_first: int | None = None
    fh_pca_second: int | None = None
    fh_breast_first: int | None = None

    def __post_init__(self):
        if not self.cohort_id:
            raise DataValidationError("cohort id must be non-empty")
        if not (self.psa > 0):
            raise DataValidationError(f"psa must be > 0, got {self.psa}")
        if not (AGE_MIN <= self.age <= AGE_MAX):
            raise DataValidationError(f"age must be in [{AGE_MIN:.0f}, {AGE_MAX:.0f}], got {self.age}")
        if self.outcome not in (0, 1):
            raise DataValidationError(f"outcome must be 0 or 1, got {self.outcome!r}")
        if self.dre is not None and self.dre not in DRE_LEVELS:
            raise DataValidationError(f"dre must be one of {DRE_LEVELS}, got {self.dre!r}")
        if self.volume is not None and not (self.volume > 0):
            raise DataValidationError(f"volume must be > 0 when present, got {self.volume}")
        for f in BINARY_FACTORS:
            v = getattr(self, f)
            if v is not None and v not in (0, 1):
                raise DataValidationError(f"{f} must be 0 or 1 when present, got {v!r}")

    def observed(self, factor: str) -> bool:
        if factor in ("psa", "age"):
            return True
        return getattr(self, factor) is not None

    def value(self, factor: str) -> float | None:
        """Numeric encoding of a factor: raw psa/age/volume, dre abnormal=1, binaries 0/1."""
        v = getattr(self, factor)
        if v is None:
            return None
        if factor == "dre":
            return 1.0 if v == "abnormal" else 0.0
        return float(v)

    def to_vals(self) -> dict[str, float | None]:
        return {f: self.value(f) for f in FACTOR_ORDER}


def observed_pattern(record: PatientRecord) -> int:
    """Pattern mask with bit i set iff optional factor i has a value."""
    mask = 0
    for f in OPTIONAL_FACTORS:
        if getattr(record, f) is not None:
            mask |= 1 << bit_of(f)
    return mask


class MultiCohortDataset:
    """Immutable ordered collection of PatientRecords grouped by cohort id.

    Row order is preserved; cohorts appear in first-appearance order. The
    columnar views used by the numeric code are built lazily and cached, so
    datasets are cheap to pass around and safe to share.
    """

    __slots__ = ("records", "_cache")

    def __init__(self, records: Iterable[PatientRecord]):
        object.__setattr__(self, "records", tuple(records))
        object.__setattr__(self, "_cache", {})

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[PatientRecord]:
        return iter(self.records)

    def __getitem__(self, i: int) -> PatientRecord:
        return self.records[i]

    @property
    def cohort_ids(self) -> tuple[str, ...]:
        if "cohort_ids" not in self._cache:
            seen: dict[str, None] = {}
            for r in self.records:
                seen.setdefault(r.cohort_id, None)
            self._cache["cohort_ids"] = tuple(seen)
        return self._cache["cohort_ids"]

    def by_cohort(self) -> dict[str, tuple[PatientRecord, ...]]:
        if "by_cohort" not in self._cache:
            groups: dict[str, list[PatientRecord]] = {c: [] for c in self.cohort_ids}
            for r in self.records:
                groups[r.cohort_id].append(r)
            self._cache["by_cohort"] = {c: tuple(rs) for c, rs in groups.items()}
        return self._cache["by_cohort"]

    def cohort(self, cohort_id: str) -> "MultiCohortDataset":
        groups = self.by_cohort()
        if cohort_id not in groups:
            raise DataValidationError(f"unknown cohort: {cohort_id!r}")
        key = ("cohort", cohort_id)
        if key not in self._cache:
            self._cache[key] = MultiCohortDataset(groups[cohort_id])
        return self._cache[key]

    def without_cohort(self, cohort_id: str) -> "MultiCohortDataset":
        if cohort_id not in self.by_cohort():
            raise DataValidationError(f"unknown cohort: {cohort_id!r}")
        key = ("without", cohort_id)
        if key not in self._cache:
            self._cache[key] = MultiCohortDataset(
                r for r in self.records if r.cohort_id != cohort_id
            )
        return self._cache[key]

    def subset(self, row_mask: np.ndarray) -> "MultiCohortDataset":
        return MultiCohortDataset(r for r, keep in zip(self.records, row_mask) if keep)

    def columns(self) -> dict[str, np.ndarray]:
        """Column-major float view: one array per factor (NaN = missing) plus outcome/cohort codes."""
        if "columns" not in self._cache:
            n = len(self.records)
            cols: dict[str, np.ndarray] = {f: np.full(n, np.nan) for f in FACTOR_ORDER}
            outcome = np.empty(n)
            code_of = {c: i for i, c in enumerate(self.cohort_ids)}
            codes = np.empty(n, dtype=np.int64)
            for i, r in enumerate(self.records):
                for f in FACTOR_ORDER:
                    v = r.value(f)
                    if v is not None:
                        cols[f][i] = v
                outcome[i] = r.outcome
                codes[i] = code_of[r.cohort_id]
            cols["outcome"] = outcome
            cols["cohort_code"] = codes
            for a in cols.values():
                a.setflags(write=False)
            self._cache["columns"] = cols
        return self._cache["columns"]

    def observed_masks(self) -> np.ndarray:
        """Per-record observed-pattern masks as uint16."""
        if "observed_masks" not in self._cache:
            cols = self.columns()
            masks = np.zeros(len(self.records), dtype=np.uint16)
            for f in OPTIONAL_FACTORS:
                masks |= (~np.isnan(cols[f])).astype(np.uint16) << bit_of(f)
            masks.setflags(write=False)
            self._cache["observed_masks"] = masks
        return self._cache["observed_masks"]

    def prevalence(self) -> float:
        return float(np.mean(self.columns()["outcome"]))

    def fingerprint(self) -> str:
        """sha256 of the canonical CSV serialization."""
        if "fingerprint" not in self._cache:
            self._cache["fingerprint"] = sha256_hex(serialize_cohort_csv(self))
        return self._cache["fingerprint"]


def _parse_continuous(raw: str, name: str, row: int) -> float:
    try:
        return float(raw)
    except ValueError:
        raise DataValidationError(f"row {row}: non-numeric value for {name}: {raw!r}") from None


def _parse_binary(raw: str, name: str, row: int) -> int:
    if raw not in ("0", "1"):
        raise DataValidationError(f"row {row}: {name} must be 0, 1, NA or empty, got {raw!r}")
    return int(raw)


def parse_cohort_csv(text: str | bytes) -> MultiCohortDataset:
    """Parse the cohort CSV format; rejects malformed rows with their row number.

    Row numbers count data rows starting at 1 (the header is row 0).
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    lines = text.splitlines()
    start = 0
    while start < len(lines) and lines[start].startswith("#"):
        start += 1
    if start >= len(lines):
        raise DataValidationError("malformed header: no header row found")
    if lines[start] != CSV_HEADER:
        raise DataValidationError(
            f"malformed header: expected {CSV_HEADER!r}, got {lines[start]!r}"
        )
    reader = csv.reader(io.StringIO("\n".join(lines[start + 1:])))
    records: list[PatientRecord] = []
    for row_num, row in enumerate(reader, start=1):
        if not row:
            continue
        if len(row) != len(CSV_FIELDS):
            raise DataValidationError(
                f"row {row_num}: expected {len(CSV_FIELDS)} fields, got {len(row)}"
            )
        vals = dict(zip(CSV_FIELDS, row))
        for mandatory in ("age", "psa", "outcome"):
            if vals[mandatory] in _MISSING_TOKENS:
                raise DataValidationError(f"row {row_num}: mandatory factor missing: {mandatory}")
        if not vals["cohort"]:
            raise DataValidationError(f"row {row_num}: cohort id must be non-empty")
        age = _parse_continuous(vals["age"], "age", row_num)
        psa = _parse_continuous(vals["psa"], "psa", row_num)
        if vals["outcome"] not in ("0", "1"):
            raise DataValidationError(
                f"row {row_num}: outcome must be 0 or 1, got {vals['outcome']!r}"
            )
        kwargs: dict = {
            "cohort_id": vals["cohort"],
            "age": age,
            "psa": psa,
            "outcome": int(vals["outcome"]),
        }
        raw_dre = vals["dre"]
        if raw_dre not in _MISSING_TOKENS:
            if raw_dre not in DRE_LEVELS:
                raise DataValidationError(
                    f"row {row_num}: dre must be one of {DRE_LEVELS}, NA or empty, got {raw_dre!r}"
                )
            kwargs["dre"] = raw_dre
        raw_vol = vals["volume"]
        if raw_vol not in _MISSING_TOKENS:
            kwargs["volume"] = _parse_continuous(raw_vol, "volume", row_num)
        for f in BINARY_FACTORS:
            raw = vals[f]
            if raw not in _MISSING_TOKENS:
                kwargs[f] = _parse_binary(raw, f, row_num)
        try:
            records.append(PatientRecord(**kwargs))
        except DataValidationError as exc:
            raise DataValidationError(f"row {row_num}: {exc}") from None
    return MultiCohortDataset(records)


def serialize_cohort_csv(dataset: MultiCohortDataset) -> str:
    """Canonical CSV text: exact header, NA for missing, shortest round-trip floats."""
    out = [CSV_HEADER]
    for r in dataset:
        fields = [
            r.cohort_id,
            format_float(r.age),
            format_float(r.psa),
            r.dre if r.dre is not None else "NA",
            format_float(r.volume) if r.volume is not None else "NA",
        ]
        for f in BINARY_FACTORS:
            v = getattr(r, f)
            fields.append(str(v) if v is not None else "NA")
        fields.append(str(r.outcome))
        out.append(",".join(fields))
    return "\n".join(out) + "\n"


def cohort_missing_profile(dataset: MultiCohortDataset) -> dict[str, dict[str, float]]:
    """Per-cohort, per-factor missing fraction; psa/age are always 0.0."""
    if len(dataset) == 0:
        raise DataValidationError("cannot profile an empty dataset")
    profile: dict[str, dict[str, float]] = {}
    for cohort_id, records in dataset.by_cohort().items():
        size = len(records)
        entry = {"psa": 0.0, "age": 0.0}
        for f in OPTIONAL_FACTORS:
            missing = sum(1 for r in records if getattr(r, f) is None)
            entry[f] = missing / size
        profile[cohort_id] = entry
    return profile


def pooled_missing_rates(dataset: MultiCohortDataset) -> dict[str, float]:
    """Missing fraction per optional factor over the whole (pooled) dataset."""
    if len(dataset) == 0:
        raise DataValidationError("cannot profile an empty dataset")
    cols = dataset.columns()
    return {f: float(np.mean(np.isnan(cols[f]))) for f in OPTIONAL_FACTORS}
