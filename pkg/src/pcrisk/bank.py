"""The 1,024-entry available-cases model bank behind the end-user tool.

One entry per optional-factor subset (pattern mask 0..1023), each an
available-cases fit or an explicit unfittable marker. Persistence is a
canonical JSON document with a version header and a sha256 checksum over the
payload, so round-trips are byte-identical and any corruption is rejected.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .data import MultiCohortDataset, PatientRecord, observed_pattern, pooled_missing_rates
from .errors import BankError, BankLoadError, FitError
from .factors import OPTIONAL_FACTORS, PATTERN_COUNT, factors_from_mask
from .glm import Term, sigmoid, term_from_json
from .impute import TrainingMeans, compute_training_means
from .serialize import canonical_json, sha256_hex
from .strategies import fit_available_cases

BANK_FORMAT_VERSION = "pcrisk-bank/1"


@dataclass(frozen=True)
class BankEntry:
    pattern: int
    fittable: bool
    terms: tuple[Term, ...] | None = None
    coefficients: tuple[float, ...] | None = None
    se: tuple[float, ...] | None = None
    n: int = 0
    cohorts: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()
    reason: str | None = None

    def to_json(self) -> dict:
        if not self.fittable:
            return {"fittable": False, "reason": self.reason}
        return {
            "fittable": True,
            "terms": [t.to_json() for t in self.terms],
            "coefficients": list(self.coefficients),
            "se": list(self.se) if self.se is not None else None,
            "n": self.n,
            "cohorts": list(self.cohorts),
            "warnings": list(self.warnings),
        }

    @staticmethod
    def from_json(pattern: int, obj: Mapping) -> "BankEntry":
        if not obj.get("fittable", False):
            return BankEntry(pattern=pattern, fittable=False, reason=obj.get("reason"))
        return BankEntry(
            pattern=pattern,
            fittable=True,
            terms=tuple(term_from_json(t) for t in obj["terms"]),
            coefficients=tuple(float(c) for c in obj["coefficients"]),
            se=tuple(float(s) for s in obj["se"]) if obj.get("se") is not None else None,
            n=int(obj["n"]),
            cohorts=tuple(obj["cohorts"]),
            warnings=tuple(obj.get("warnings", ())),
        )

    def predict(self, record: PatientRecord) -> float:
        if not self.fittable:
            raise BankError(f"pattern {self.pattern} is not fittable")
        vals = record.to_vals()
        row = np.array([t.value(vals) for t in self.terms])
        return float(sigmoid(float(np.dot(np.asarray(self.coefficients), row))))


@dataclass(frozen=True)
class ModelBank:
    format_version: str
    factor_order: tuple[str, ...]
    training_fingerprint: str
    training_n: int
    missing_rates: Mapping[str, float]
    means: TrainingMeans
    entries: Mapping[int, BankEntry] = field(repr=False)
    provenance: Mapping | None = None  # producing command line + seed

    def __post_init__(self):
        if set(self.entries) != set(range(PATTERN_COUNT)):
            raise BankError(f"bank must hold exactly {PATTERN_COUNT} entries")

    def entry(self, pattern: int) -> BankEntry:
        return self.entries[pattern]

    def fittable_count(self) -> int:
        return sum(1 for e in self.entries.values() if e.fittable)


@dataclass(frozen=True)
class LookupResult:
    risk: float
    requested_pattern: int
    pattern: int
    fallback: bool
    n: int
    cohorts: tuple[str, ...]
    warnings: tuple[str, ...]


def build_bank(
    training: MultiCohortDataset, *, provenance: Mapping | None = None, **fit_kwargs
) -> ModelBank:
    """Fit the available-cases model for every mask; unfittable masks get
    explicit markers (mask 0 is always fittable by schema)."""
    entries: dict[int, BankEntry] = {}
    for mask in range(PATTERN_COUNT):
        try:
            model = fit_available_cases(training, mask, **fit_kwargs)
            entries[mask] = BankEntry(
                pattern=mask,
                fittable=True,
                terms=model.terms,
                coefficients=tuple(float(c) for c in model.coefficients),
                se=tuple(float(s) for s in model.se) if model.se is not None else None,
                n=model.meta.n,
                cohorts=model.meta.cohorts,
                warnings=model.meta.warnings,
            )
        except FitError as exc:
            entries[mask] = BankEntry(pattern=mask, fittable=False, reason=str(exc))
    return ModelBank(
        format_version=BANK_FORMAT_VERSION,
        factor_order=OPTIONAL_FACTORS,
        training_fingerprint=training.fingerprint(),
        training_n=len(training),
        missing_rates=pooled_missing_rates(training),
        means=compute_training_means(training),
        entries=entries,
        provenance=provenance,
    )


def lookup(bank: ModelBank, record: PatientRecord) -> LookupResult:
    """Route a record to its observed pattern's model; fall back along the
    greedy highest-missing-rate factor drops when the entry is unfittable."""
    requested = observed_pattern(record)
    mask = requested
    warnings: list[str] = []
    while not bank.entries[mask].fittable:
        drop = max(
            factors_from_mask(mask),
            key=lambda f: (bank.missing_rates.get(f, 0.0), OPTIONAL_FACTORS.index(f)),
        )
        mask &= ~(1 << OPTIONAL_FACTORS.index(drop))
        warnings.append(f"dropped {drop}: pattern unfittable in training data")
    entry = bank.entries[mask]
    return LookupResult(
        risk=entry.predict(record),
        requested_pattern=requested,
        pattern=mask,
        fallback=mask != requested,
        n=entry.n,
        cohorts=entry.cohorts,
        warnings=tuple(warnings),
    )


def inspect_entry(bank: ModelBank, pattern: int) -> dict:
    """Odds-ratio style summary of one bank entry (for `bank inspect`)."""
    entry = bank.entries[pattern]
    if not entry.fittable:
        return {"pattern": pattern, "fittable": False, "reason": entry.reason}
    rows = []
    for term, coef, se in zip(entry.terms, entry.coefficients, entry.se or ()):
        z = coef / se if se > 0 else float("inf")
        rows.append(
            {
                "term": term.name,
                "odds_ratio": math.exp(coef),
                "ci_low": math.exp(coef - 1.96 * se),
                "ci_high": math.exp(coef + 1.96 * se),
                "p_value": math.erfc(abs(z) / math.sqrt(2.0)),
            }
        )
    return {
        "pattern": pattern,
        "fittable": True,
        "factors": list(factors_from_mask(pattern)),
        "n": entry.n,
        "cohorts": list(entry.cohorts),
        "terms": rows,
    }


# ---------------------------------------------------------------------------
# persistence


def _payload(bank: ModelBank) -> dict:
    return {
        "factor_order": list(bank.factor_order),
        "training_fingerprint": bank.training_fingerprint,
        "training_n": bank.training_n,
        "missing_rates": dict(bank.missing_rates),
        "means": bank.means.to_json(),
        "provenance": dict(bank.provenance) if bank.provenance is not None else None,
        "entries": {str(mask): bank.entries[mask].to_json() for mask in range(PATTERN_COUNT)},
    }


def save_bank(bank: ModelBank) -> bytes:
    """Canonical single-document serialization; byte-identical round-trips."""
    payload = _payload(bank)
    checksum = sha256_hex(canonical_json(payload))
    doc = {"format": bank.format_version, "checksum": checksum, "payload": payload}
    return canonical_json(doc).encode("utf-8")


def load_bank(data: bytes | str) -> ModelBank:
    try:
        if isinstance(data, bytes):
            data = data.decode("utf-8", errors="strict")
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise BankLoadError(f"corrupt bank file (checksum cannot be verified): {exc}") from None
    if not isinstance(doc, dict) or "format" not in doc:
        raise BankLoadError("corrupt bank file: missing format header")
    if doc["format"] != BANK_FORMAT_VERSION:
        raise BankLoadError(
            f"bank format version mismatch: file has {doc['format']!r}, "
            f"this build reads {BANK_FORMAT_VERSION!r}"
        )
    payload = doc.get("payload")
    if not isinstance(payload, dict):
        raise BankLoadError("corrupt bank file: missing payload")
    checksum = sha256_hex(canonical_json(payload))
    if checksum != doc.get("checksum"):
        raise BankLoadError("bank checksum mismatch: file is corrupted")
    entries_obj = payload.get("entries", {})
    if len(entries_obj) != PATTERN_COUNT:
        raise BankLoadError(
            f"bank must hold exactly {PATTERN_COUNT} entries, found {len(entries_obj)}"
        )
    entries: dict[int, BankEntry] = {}
    for key, obj in entries_obj.items():
        mask = int(key)
        entries[mask] = BankEntry.from_json(mask, obj)
    if set(entries) != set(range(PATTERN_COUNT)):
        raise BankLoadError("bank entry keys must cover 0..1023 exactly once")
    return ModelBank(
        format_version=doc["format"],
        factor_order=tuple(payload["factor_order"]),
        training_fingerprint=payload["training_fingerprint"],
        training_n=int(payload["training_n"]),
        missing_rates={k: float(v) for k, v in payload["missing_rates"].items()},
        means=TrainingMeans.from_json(payload["means"]),
        entries=entries,
        provenance=payload.get("provenance"),
    )


def save_bank_file(bank: ModelBank, path: str | Path) -> None:
    Path(path).write_bytes(save_bank(bank))


def load_bank_file(path: str | Path) -> ModelBank:
    p = Path(path)
    if not p.exists():
        raise BankLoadError(f"bank file not found: {p}")
    return load_bank(p.read_bytes())
