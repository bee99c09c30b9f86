"""Synthetic multi-cohort biopsy data with a known true risk model.

Cohorts differ in size, covariate distributions and baseline risk (intercept
offsets); systematic missingness is applied afterwards by a MissingnessPlan
(whole-factor omission per cohort, per-factor MCAR rates, optional MAR rules
driven by always-observed fields). Generation is a pure function of
(config, seed): cohort i uses numpy's SeedSequence([seed, i]).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .data import MultiCohortDataset, PatientRecord
from .errors import DataValidationError, MissingValueError
from .factors import AGE_MAX, AGE_MIN, BINARY_FACTORS, OPTIONAL_FACTORS
from .glm import sigmoid

# Encoded model terms of the generator's true model, in order.
COEF_TERMS: tuple[str, ...] = ("age", "log2_psa", "log2_volume", "dre", *BINARY_FACTORS)

# Default per-term odds ratios for the true model (age per year, psa and
# volume per doubling, the rest yes-vs-no).
DEFAULT_TRUE_ODDS_RATIOS: dict[str, float] = {
    "age": 1.07,
    "log2_psa": 2.38,
    "log2_volume": 0.25,
    "dre": 1.95,
    "prior_biopsy": 0.32,
    "five_ari": 0.96,
    "prior_psa_screen": 0.71,
    "african_ancestry": 0.68,
    "hispanic": 1.08,
    "fh_pca_first": 1.93,
    "fh_pca_second": 1.30,
    "fh_breast_first": 1.15,
}

DEFAULT_PREVALENCES: dict[str, float] = {
    "dre": 0.17,
    "prior_biopsy": 0.25,
    "five_ari": 0.08,
    "prior_psa_screen": 0.65,
    "african_ancestry": 0.12,
    "hispanic": 0.08,
    "fh_pca_first": 0.17,
    "fh_pca_second": 0.12,
    "fh_breast_first": 0.12,
}


def default_coefficients() -> dict[str, float]:
    """log-odds coefficients from the default odds ratios (intercept 0)."""
    coefs = {"intercept": 0.0}
    coefs.update({k: math.log(v) for k, v in DEFAULT_TRUE_ODDS_RATIOS.items()})
    return coefs


@dataclass(frozen=True)
class CohortSpec:
    """One cohort's size, covariate distributions and baseline-risk offset."""

    name: str
    n: int
    role: str = "train"  # "train" | "validation"
    intercept_offset: float = 0.0
    age_mean: float = 64.0
    age_sd: float = 7.5
    log2_psa_mean: float = 2.6
    log2_psa_sd: float = 0.8
    log2_volume_mean: float = 5.45
    log2_volume_sd: float = 0.55
    prevalence: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_PREVALENCES))
    coefficient_overrides: Mapping[str, float] | None = None

    def __post_init__(self):
        if self.n < 1:
            raise DataValidationError(f"cohort {self.name!r}: size must be >= 1")
        if self.role not in ("train", "validation"):
            raise DataValidationError(f"cohort {self.name!r}: unknown role {self.role!r}")
        for sd in (self.age_sd, self.log2_psa_sd, self.log2_volume_sd):
            if not sd > 0:
                raise DataValidationError(f"cohort {self.name!r}: sds must be > 0")
        for k in ("dre", *BINARY_FACTORS):
            p = self.prevalence.get(k)
            if p is None or not (0.0 <= p <= 1.0):
                raise DataValidationError(
                    f"cohort {self.name!r}: prevalence for {k} must be in [0,1]"
                )


@dataclass(frozen=True)
class GeneratorConfig:
    cohorts: tuple[CohortSpec, ...]
    coefficients: Mapping[str, float] = field(default_factory=default_coefficients)
    seed: int = 0

    def __post_init__(self):
        if not self.cohorts:
            raise DataValidationError("config needs at least one cohort")
        if len({c.name for c in self.cohorts}) != len(self.cohorts):
            raise DataValidationError("cohort names must be unique")
        if self.seed < 0:
            raise DataValidationError("seed must be non-negative")
        missing = [t for t in ("intercept", *COEF_TERMS) if t not in self.coefficients]
        if missing:
            raise DataValidationError(f"coefficients missing terms: {missing}")

    def cohort(self, name: str) -> CohortSpec:
        for c in self.cohorts:
            if c.name == name:
                return c
        raise DataValidationError(f"unknown cohort {name!r}")

    def cohort_coefficients(self, spec: CohortSpec) -> dict[str, float]:
        coefs = dict(self.coefficients)
        if spec.coefficient_overrides:
            coefs.update(spec.coefficient_overrides)
        return coefs

    def training_cohorts(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.cohorts if c.role == "train")

    def validation_cohorts(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.cohorts if c.role == "validation")


def _cohort_rng(seed: int, index: int) -> np.random.Generator:
    # fixed derivation rule: cohort index mixed into the seed via SeedSequence
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def generate_cohorts(cfg: GeneratorConfig) -> MultiCohortDataset:
    """Draw fully observed cohorts; outcome ~ Bernoulli(sigmoid(offset + beta.x))."""
    records: list[PatientRecord] = []
    for idx, spec in enumerate(cfg.cohorts):
        rng = _cohort_rng(cfg.seed, idx)
        n = spec.n
        age = np.clip(rng.normal(spec.age_mean, spec.age_sd, n), AGE_MIN, AGE_MAX)
        log2_psa = rng.normal(spec.log2_psa_mean, spec.log2_psa_sd, n)
        log2_vol = rng.normal(spec.log2_volume_mean, spec.log2_volume_sd, n)
        dre = (rng.random(n) < spec.prevalence["dre"]).astype(float)
        binaries = {
            f: (rng.random(n) < spec.prevalence[f]).astype(float) for f in BINARY_FACTORS
        }
        coefs = cfg.cohort_coefficients(spec)
        eta = (
            coefs["intercept"]
            + spec.intercept_offset
            + coefs["age"] * age
            + coefs["log2_psa"] * log2_psa
            + coefs["log2_volume"] * log2_vol
            + coefs["dre"] * dre
        )
        for f in BINARY_FACTORS:
            eta = eta + coefs[f] * binaries[f]
        outcome = (rng.random(n) < sigmoid(eta)).astype(int)
        psa = np.exp2(log2_psa)
        volume = np.exp2(log2_vol)
        for i in range(n):
            records.append(
                PatientRecord(
                    cohort_id=spec.name,
                    age=float(age[i]),
                    psa=float(psa[i]),
                    outcome=int(outcome[i]),
                    dre="abnormal" if dre[i] else "normal",
                    volume=float(volume[i]),
                    **{f: int(binaries[f][i]) for f in BINARY_FACTORS},
                )
            )
    return MultiCohortDataset(records)


def true_risk(cfg: GeneratorConfig, record: PatientRecord) -> float:
    """The generator's own risk for a fully observed record (oracle for tests)."""
    spec = cfg.cohort(record.cohort_id)
    coefs = cfg.cohort_coefficients(spec)
    vals = record.to_vals()
    for f in OPTIONAL_FACTORS:
        if vals[f] is None:
            raise MissingValueError(f"true_risk needs a fully observed record; {f} is missing")
    eta = (
        coefs["intercept"]
        + spec.intercept_offset
        + coefs["age"] * vals["age"]
        + coefs["log2_psa"] * math.log2(vals["psa"])
        + coefs["log2_volume"] * math.log2(vals["volume"])
        + coefs["dre"] * vals["dre"]
    )
    for f in BINARY_FACTORS:
        eta += coefs[f] * vals[f]
    return float(sigmoid(eta))


# ---------------------------------------------------------------------------
# missingness


@dataclass(frozen=True)
class MarRule:
    """Missingness of `factor` depends on an always-observed predictor:
    P(missing) = sigmoid(intercept + slope * predictor_value)."""

    factor: str
    predictor: str  # psa | age | outcome
    slope: float
    intercept: float = 0.0

    def __post_init__(self):
        if self.predictor not in ("psa", "age", "outcome"):
            raise DataValidationError(
                f"MAR rules may only reference psa/age/outcome, got {self.predictor!r}"
            )


@dataclass(frozen=True)
class CohortMissingness:
    omit: tuple[str, ...] = ()
    mcar: Mapping[str, float] = field(default_factory=dict)
    mar: tuple[MarRule, ...] = ()

    def __post_init__(self):
        for f in (*self.omit, *self.mcar, *(r.factor for r in self.mar)):
            if f not in OPTIONAL_FACTORS:
                raise DataValidationError(
                    f"missingness may only target optional factors, got {f!r}"
                )
        for f, rate in self.mcar.items():
            if not (0.0 <= rate < 1.0):
                raise DataValidationError(f"MCAR rate for {f} must be in [0,1), got {rate}")


@dataclass(frozen=True)
class MissingnessPlan:
    per_cohort: Mapping[str, CohortMissingness] = field(default_factory=dict)


def apply_missingness(
    dataset: MultiCohortDataset, plan: MissingnessPlan, seed: int
) -> MultiCohortDataset:
    """Delete optional-factor values per plan; observed values are never altered
    and psa/age/outcome are untouchable by construction."""
    if not plan.per_cohort:
        return dataset
    for cid in plan.per_cohort:
        if cid not in dataset.by_cohort():
            raise DataValidationError(f"plan references unknown cohort {cid!r}")
    new_records = list(dataset.records)
    cohort_index = {c: i for i, c in enumerate(dataset.cohort_ids)}
    groups = dataset.by_cohort()
    positions: dict[str, list[int]] = {c: [] for c in dataset.cohort_ids}
    for i, r in enumerate(dataset.records):
        positions[r.cohort_id].append(i)
    for cid, rules in plan.per_cohort.items():
        rng = _cohort_rng(seed, cohort_index[cid])
        idxs = positions[cid]
        n = len(idxs)
        records = groups[cid]
        delete: dict[str, np.ndarray] = {}
        for f in OPTIONAL_FACTORS:  # fixed factor order keeps draws reproducible
            mask = np.zeros(n, dtype=bool)
            if f in rules.omit:
                mask[:] = True
            rate = rules.mcar.get(f)
            if rate:
                mask |= rng.random(n) < rate
            for rule in rules.mar:
                if rule.factor != f:
                    continue
                pred = np.array(
                    [getattr(r, rule.predictor) if rule.predictor != "outcome" else r.outcome
                     for r in records],
                    dtype=float,
                )
                p_miss = sigmoid(rule.intercept + rule.slope * pred)
                mask |= rng.random(n) < p_miss
            if mask.any():
                delete[f] = mask
        if not delete:
            continue
        for j, i in enumerate(idxs):
            kill = {f: None for f, mask in delete.items() if mask[j]}
            if kill:
                new_records[i] = replace(new_records[i], **kill)
    return MultiCohortDataset(new_records)


# ---------------------------------------------------------------------------
# intercept calibration and the default preset


def calibrate_base_intercept(
    cfg: GeneratorConfig,
    target_prevalence: float,
    *,
    cohorts: Sequence[str] | None = None,
    tol: float = 1e-3,
    mc_seed: int = 911,
) -> float:
    """Bisection on the shared intercept until the Monte-Carlo pooled prevalence
    over the chosen cohorts hits the target. Returns the calibrated intercept."""
    names = tuple(cohorts) if cohorts is not None else tuple(c.name for c in cfg.cohorts)
    specs = [c for c in cfg.cohorts if c.name in names]
    if not specs:
        raise DataValidationError("no cohorts selected for calibration")

    rng = np.random.default_rng(mc_seed)
    etas = []
    weights = []
    for spec in specs:
        m = 40_000
        coefs = cfg.cohort_coefficients(spec)
        age = np.clip(rng.normal(spec.age_mean, spec.age_sd, m), AGE_MIN, AGE_MAX)
        # linear predictor without the shared intercept (the bisection variable)
        eta = (
            spec.intercept_offset
            + coefs["age"] * age
            + coefs["log2_psa"] * rng.normal(spec.log2_psa_mean, spec.log2_psa_sd, m)
            + coefs["log2_volume"] * rng.normal(spec.log2_volume_mean, spec.log2_volume_sd, m)
            + coefs["dre"] * (rng.random(m) < spec.prevalence["dre"])
        )
        for f in BINARY_FACTORS:
            eta = eta + coefs[f] * (rng.random(m) < spec.prevalence[f])
        etas.append(eta)
        weights.append(spec.n)
    weights = np.asarray(weights, dtype=float)
    weights /= weights.sum()

    def prevalence(b0: float) -> float:
        return float(sum(w * np.mean(sigmoid(e + b0)) for w, e in zip(weights, etas)))

    lo, hi = -30.0, 30.0
    for _ in range(80):
        mid = (lo + hi) / 2.0
        if prevalence(mid) < target_prevalence:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol / 10:
            break
    return (lo + hi) / 2.0


# Cohort layout loosely shaped like a 10-training + 1-validation collaborative
# group: training totals 12,703 records, the held-out cohort 5,540 at a higher
# baseline risk. Intercepts below were frozen from calibrate_base_intercept
# (targets: pooled training prevalence 0.28, validation prevalence 0.32).
PRESET_BASE_INTERCEPT = -0.09049415588378906
PRESET_VALIDATION_OFFSET = 0.2875

_PRESET_TRAIN = [
    # name, n, offset, age_mean, l2psa_mean, l2vol_mean, dre_prev
    ("c01", 2441, 0.42, 63.0, 2.45, 5.40, 0.15),
    ("c02", 2234, 0.25, 64.5, 2.55, 5.45, 0.17),
    ("c03", 1984, 0.12, 65.0, 2.75, 5.50, 0.20),
    ("c04", 1678, 0.05, 63.5, 2.60, 5.42, 0.16),
    ("c05", 1304, -0.05, 66.0, 2.70, 5.52, 0.18),
    ("c06", 980, -0.15, 62.5, 2.50, 5.38, 0.14),
    ("c07", 778, -0.25, 64.0, 2.65, 5.48, 0.19),
    ("c08", 590, -0.35, 65.5, 2.80, 5.55, 0.21),
    ("c09", 471, -0.45, 63.0, 2.40, 5.44, 0.13),
    ("c10", 243, -0.55, 66.5, 2.85, 5.58, 0.22),
]

_PRESET_OMISSIONS: dict[str, tuple[str, ...]] = {
    "c02": ("volume",),
    "c04": ("prior_psa_screen", "fh_pca_second", "fh_breast_first"),
    "c05": ("volume", "prior_psa_screen"),
    "c06": ("fh_pca_second", "fh_breast_first"),
    "c08": ("five_ari", "prior_psa_screen"),
    "c09": ("volume", "fh_pca_second", "fh_breast_first", "hispanic"),
    "c10": ("volume", "prior_psa_screen", "five_ari"),
    "val": ("volume", "fh_pca_second", "fh_breast_first"),
}

_PRESET_MCAR: dict[str, dict[str, float]] = {
    "c01": {"volume": 0.12, "dre": 0.03},
    "c02": {"dre": 0.05},
    "c03": {"volume": 0.18},
    "c04": {"volume": 0.10},
    "c05": {"dre": 0.04},
    "c06": {"volume": 0.15, "dre": 0.02},
    "c07": {"volume": 0.08},
    "c08": {"volume": 0.20},
    "c09": {"dre": 0.06},
    "c10": {"dre": 0.05},
    "val": {"dre": 0.03},
}


@dataclass(frozen=True)
class SimulationPreset:
    config: GeneratorConfig
    plan: MissingnessPlan


def pbcg_like_preset(seed: int = 20260810) -> SimulationPreset:
    """Default 11-cohort preset: heterogeneous sizes/distributions/baselines,
    three training cohorts collect every factor, several omit volume, the
    extended family-history pair is always omitted jointly."""
    coefs = default_coefficients()
    coefs["intercept"] = PRESET_BASE_INTERCEPT
    cohorts = []
    for name, n, off, age_m, psa_m, vol_m, dre_p in _PRESET_TRAIN:
        prev = dict(DEFAULT_PREVALENCES)
        prev["dre"] = dre_p
        cohorts.append(
            CohortSpec(
                name=name,
                n=n,
                role="train",
                intercept_offset=off,
                age_mean=age_m,
                log2_psa_mean=psa_m,
                log2_volume_mean=vol_m,
                prevalence=prev,
            )
        )
    cohorts.append(
        CohortSpec(
            name="val",
            n=5540,
            role="validation",
            intercept_offset=PRESET_VALIDATION_OFFSET,
            age_mean=64.5,
            log2_psa_mean=2.65,
            log2_volume_mean=5.46,
            prevalence=dict(DEFAULT_PREVALENCES),
        )
    )
    plan = MissingnessPlan(
        per_cohort={
            cid: CohortMissingness(
                omit=_PRESET_OMISSIONS.get(cid, ()),
                mcar=_PRESET_MCAR.get(cid, {}),
            )
            for cid in sorted(set(_PRESET_OMISSIONS) | set(_PRESET_MCAR))
        }
    )
    return SimulationPreset(
        config=GeneratorConfig(cohorts=tuple(cohorts), coefficients=coefs, seed=seed),
        plan=plan,
    )


def simulate_preset(seed: int = 20260810) -> tuple[MultiCohortDataset, MultiCohortDataset]:
    """Generate the default preset and split it into (training, validation)."""
    preset = pbcg_like_preset(seed)
    full = generate_cohorts(preset.config)
    observed = apply_missingness(full, preset.plan, seed)
    train_ids = set(preset.config.training_cohorts())
    train = MultiCohortDataset(r for r in observed if r.cohort_id in train_ids)
    valid = MultiCohortDataset(r for r in observed if r.cohort_id not in train_ids)
    return train, valid


# ---------------------------------------------------------------------------
# config (de)serialization for the CLI


def config_to_dict(preset: SimulationPreset) -> dict:
    cfg = preset.config
    return {
        "seed": cfg.seed,
        "coefficients": dict(cfg.coefficients),
        "cohorts": [
            {
                "name": c.name,
                "n": c.n,
                "role": c.role,
                "intercept_offset": c.intercept_offset,
                "age_mean": c.age_mean,
                "age_sd": c.age_sd,
                "log2_psa_mean": c.log2_psa_mean,
                "log2_psa_sd": c.log2_psa_sd,
                "log2_volume_mean": c.log2_volume_mean,
                "log2_volume_sd": c.log2_volume_sd,
                "prevalence": dict(c.prevalence),
                "omit": list(preset.plan.per_cohort.get(c.name, CohortMissingness()).omit),
                "mcar": dict(preset.plan.per_cohort.get(c.name, CohortMissingness()).mcar),
                "mar": [
                    {
                        "factor": r.factor,
                        "predictor": r.predictor,
                        "slope": r.slope,
                        "intercept": r.intercept,
                    }
                    for r in preset.plan.per_cohort.get(c.name, CohortMissingness()).mar
                ],
            }
            for c in cfg.cohorts
        ],
    }


def config_from_dict(obj: Mapping) -> SimulationPreset:
    try:
        cohorts = []
        per_cohort: dict[str, CohortMissingness] = {}
        for c in obj["cohorts"]:
            cohorts.append(
                CohortSpec(
                    name=c["name"],
                    n=int(c["n"]),
                    role=c.get("role", "train"),
                    intercept_offset=float(c.get("intercept_offset", 0.0)),
                    age_mean=float(c.get("age_mean", 64.0)),
                    age_sd=float(c.get("age_sd", 7.5)),
                    log2_psa_mean=float(c.get("log2_psa_mean", 2.6)),
                    log2_psa_sd=float(c.get("log2_psa_sd", 0.8)),
                    log2_volume_mean=float(c.get("log2_volume_mean", 5.45)),
                    log2_volume_sd=float(c.get("log2_volume_sd", 0.55)),
                    prevalence={**DEFAULT_PREVALENCES, **c.get("prevalence", {})},
                )
            )
            rules = CohortMissingness(
                omit=tuple(c.get("omit", ())),
                mcar=dict(c.get("mcar", {})),
                mar=tuple(
                    MarRule(
                        factor=r["factor"],
                        predictor=r["predictor"],
                        slope=float(r["slope"]),
                        intercept=float(r.get("intercept", 0.0)),
                    )
                    for r in c.get("mar", ())
                ),
            )
            if rules.omit or rules.mcar or rules.mar:
                per_cohort[c["name"]] = rules
        coefficients = {**default_coefficients(), **obj.get("coefficients", {})}
        cfg = GeneratorConfig(
            cohorts=tuple(cohorts), coefficients=coefficients, seed=int(obj.get("seed", 0))
        )
        return SimulationPreset(config=cfg, plan=MissingnessPlan(per_cohort=per_cohort))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataValidationError(f"invalid generator config: {exc}") from None
