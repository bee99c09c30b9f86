"""Logistic-regression engine: design encoding, IRLS fitting, BIC, Wald tables.

Terms are small immutable objects that know how to evaluate themselves both
per-record (a ``vals`` mapping of factor -> float or None) and vectorized
(column arrays with NaN for missing). A model's encoding is an ordered tuple
of terms with exactly one leading intercept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import FitError, MissingValueError, SeparationError
from .factors import BINARY_FACTORS

Columns = Mapping[str, np.ndarray]
Vals = Mapping[str, "float | None"]

TRANSFORMS = ("identity", "log2")

# ---------------------------------------------------------------------------
# numerics


def sigmoid(x):
    """Numerically stable logistic function for scalars or arrays."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def _bernoulli_loglik(eta: np.ndarray, y: np.ndarray) -> float:
    # y*eta - log(1 + e^eta), stabilized through logaddexp; no clipping anywhere
    return float(np.sum(y * eta) - np.sum(np.logaddexp(0.0, eta)))


def log_likelihood(coefficients: np.ndarray, design: np.ndarray, outcomes: np.ndarray) -> float:
    """Bernoulli log-likelihood at the given coefficients."""
    coefficients = np.asarray(coefficients, dtype=float)
    design = np.asarray(design, dtype=float)
    outcomes = np.asarray(outcomes, dtype=float)
    if design.shape[0] != outcomes.shape[0] or design.shape[1] != coefficients.shape[0]:
        raise FitError("dimension mismatch between design, outcomes and coefficients")
    return _bernoulli_loglik(design @ coefficients, outcomes)


def normal_sf2(z: float) -> float:
    """Two-sided tail probability of a standard normal."""
    return math.erfc(abs(z) / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# terms


def _transform_scalar(x: float, transform: str) -> float:
    return math.log2(x) if transform == "log2" else float(x)


def _transform_array(x: np.ndarray, transform: str) -> np.ndarray:
    return np.log2(x) if transform == "log2" else np.asarray(x, dtype=float)


def _require_column(cols: Columns, factor: str) -> np.ndarray:
    x = cols[factor]
    bad = np.isnan(x)
    if bad.any():
        i = int(np.argmax(bad))
        raise MissingValueError(f"record {i} is missing required factor '{factor}'")
    return x


def _require_scalar(vals: Vals, factor: str) -> float:
    v = vals.get(factor)
    if v is None:
        raise MissingValueError(f"record is missing required factor '{factor}'")
    return float(v)


@dataclass(frozen=True)
class Intercept:
    @property
    def name(self) -> str:
        return "intercept"

    requires: tuple[str, ...] = ()

    def value(self, vals: Vals) -> float:
        return 1.0

    def column(self, cols: Columns, n: int) -> np.ndarray:
        return np.ones(n)

    def to_json(self) -> dict:
        return {"type": "intercept"}


@dataclass(frozen=True)
class Continuous:
    """transform(factor); the record must have the value."""

    factor: str
    transform: str = "identity"

    @property
    def name(self) -> str:
        return self.factor if self.transform == "identity" else f"{self.transform}({self.factor})"

    @property
    def requires(self) -> tuple[str, ...]:
        return (self.factor,)

    def value(self, vals: Vals) -> float:
        return _transform_scalar(_require_scalar(vals, self.factor), self.transform)

    def column(self, cols: Columns, n: int) -> np.ndarray:
        return _transform_array(_require_column(cols, self.factor), self.transform)

    def to_json(self) -> dict:
        return {"type": "continuous", "factor": self.factor, "transform": self.transform}


@dataclass(frozen=True)
class Binary:
    """0/1 main effect (dre abnormal=1). Fractional values pass through,
    which is what prediction-time mean imputation relies on."""

    factor: str

    @property
    def name(self) -> str:
        return f"{self.factor}=abnormal" if self.factor == "dre" else f"{self.factor}=yes"

    @property
    def requires(self) -> tuple[str, ...]:
        return (self.factor,)

    def value(self, vals: Vals) -> float:
        return _require_scalar(vals, self.factor)

    def column(self, cols: Columns, n: int) -> np.ndarray:
        return _require_column(cols, self.factor).astype(float)

    def to_json(self) -> dict:
        return {"type": "binary", "factor": self.factor}


@dataclass(frozen=True)
class MissingIndicator:
    """1 when the factor is missing, else 0. Never requires a value."""

    factor: str

    @property
    def name(self) -> str:
        return f"missing({self.factor})"

    requires: tuple[str, ...] = ()

    def value(self, vals: Vals) -> float:
        return 1.0 if vals.get(self.factor) is None else 0.0

    def column(self, cols: Columns, n: int) -> np.ndarray:
        return np.isnan(cols[self.factor]).astype(float)

    def to_json(self) -> dict:
        return {"type": "missing_indicator", "factor": self.factor}


@dataclass(frozen=True)
class GatedContinuous:
    """transform(value) when observed, 0 when missing.

    Together with MissingIndicator this spans an observed-slope plus
    missing-offset basis; the literal indicator-times-value product would be
    collinear for any constant fill and cannot evaluate log2(missing).
    """

    factor: str
    transform: str = "identity"

    @property
    def name(self) -> str:
        return f"observed_{self.transform}({self.factor})"

    requires: tuple[str, ...] = ()

    def value(self, vals: Vals) -> float:
        v = vals.get(self.factor)
        return 0.0 if v is None else _transform_scalar(v, self.transform)

    def column(self, cols: Columns, n: int) -> np.ndarray:
        x = cols[self.factor]
        miss = np.isnan(x)
        safe = np.where(miss, 1.0, x)
        return np.where(miss, 0.0, _transform_array(safe, self.transform))

    def to_json(self) -> dict:
        return {"type": "gated_continuous", "factor": self.factor, "transform": self.transform}


# Categorical schemes used by the categorization / missing-indicator models.
# "volume": bins <30 (ref) / [30,50] / >50 / missing
# "fh_combo": the two extended family-history factors combined into one
#   5-level classification (none/second-only/breast-only/both/missing)
#   encoded additively: second-degree present, breast present, missing.
# any other scheme name is the factor itself with levels {ref, yes|abnormal, missing}.
VOLUME_BIN_LOW = 30.0
VOLUME_BIN_HIGH = 50.0


@dataclass(frozen=True)
class Categorical:
    scheme: str
    level: str

    @property
    def name(self) -> str:
        return f"{self.scheme}:{self.level}"

    requires: tuple[str, ...] = ()

    def value(self, vals: Vals) -> float:
        s, lvl = self.scheme, self.level
        if s == "volume":
            v = vals.get("volume")
            if lvl == "missing":
                return 1.0 if v is None else 0.0
            if v is None:
                return 0.0
            if lvl == "30to50":
                return 1.0 if VOLUME_BIN_LOW <= v <= VOLUME_BIN_HIGH else 0.0
            if lvl == "gt50":
                return 1.0 if v > VOLUME_BIN_HIGH else 0.0
            raise FitError(f"unknown volume level {lvl!r}")
        if s == "fh_combo":
            a = vals.get("fh_pca_second")
            b = vals.get("fh_breast_first")
            missing = a is None or b is None
            if lvl == "missing":
                return 1.0 if missing else 0.0
            if missing:
                return 0.0
            if lvl == "pca_second":
                return 1.0 if a == 1 else 0.0
            if lvl == "breast_first":
                return 1.0 if b == 1 else 0.0
            raise FitError(f"unknown fh_combo level {lvl!r}")
        v = vals.get(s)
        if lvl == "missing":
            return 1.0 if v is None else 0.0
        return 1.0 if (v is not None and v == 1) else 0.0

    def column(self, cols: Columns, n: int) -> np.ndarray:
        s, lvl = self.scheme, self.level
        if s == "volume":
            v = cols["volume"]
            miss = np.isnan(v)
            if lvl == "missing":
                return miss.astype(float)
            safe = np.where(miss, 0.0, v)
            if lvl == "30to50":
                return (~miss & (safe >= VOLUME_BIN_LOW) & (safe <= VOLUME_BIN_HIGH)).astype(float)
            if lvl == "gt50":
                return (~miss & (safe > VOLUME_BIN_HIGH)).astype(float)
            raise FitError(f"unknown volume level {lvl!r}")
        if s == "fh_combo":
            a, b = cols["fh_pca_second"], cols["fh_breast_first"]
            miss = np.isnan(a) | np.isnan(b)
            if lvl == "missing":
                return miss.astype(float)
            sa = np.where(miss, 0.0, a)
            sb = np.where(miss, 0.0, b)
            if lvl == "pca_second":
                return (~miss & (sa == 1)).astype(float)
            if lvl == "breast_first":
                return (~miss & (sb == 1)).astype(float)
            raise FitError(f"unknown fh_combo level {lvl!r}")
        x = cols[s]
        miss = np.isnan(x)
        if lvl == "missing":
            return miss.astype(float)
        safe = np.where(miss, 0.0, x)
        return (~miss & (safe == 1)).astype(float)

    def to_json(self) -> dict:
        return {"type": "categorical", "scheme": self.scheme, "level": self.level}


@dataclass(frozen=True)
class Product:
    """Two-way interaction; operands must appear earlier in the term list."""

    a: "Term"
    b: "Term"

    @property
    def name(self) -> str:
        return f"{self.a.name}*{self.b.name}"

    @property
    def requires(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(self.a.requires + self.b.requires))

    def value(self, vals: Vals) -> float:
        return self.a.value(vals) * self.b.value(vals)

    def column(self, cols: Columns, n: int) -> np.ndarray:
        return self.a.column(cols, n) * self.b.column(cols, n)

    def to_json(self) -> dict:
        return {"type": "product", "a": self.a.to_json(), "b": self.b.to_json()}


Term = Intercept | Continuous | Binary | MissingIndicator | GatedContinuous | Categorical | Product


def term_from_json(obj: dict) -> Term:
    t = obj["type"]
    if t == "intercept":
        return Intercept()
    if t == "continuous":
        return Continuous(obj["factor"], obj["transform"])
    if t == "binary":
        return Binary(obj["factor"])
    if t == "missing_indicator":
        return MissingIndicator(obj["factor"])
    if t == "gated_continuous":
        return GatedContinuous(obj["factor"], obj["transform"])
    if t == "categorical":
        return Categorical(obj["scheme"], obj["level"])
    if t == "product":
        return Product(term_from_json(obj["a"]), term_from_json(obj["b"]))
    raise FitError(f"unknown term type {t!r}")


def main_effect(factor: str) -> Term:
    """Canonical main-effect term for a factor: log2 for psa/volume, identity
    age, 0/1 for dre and the binary factors."""
    if factor == "psa":
        return Continuous("psa", "log2")
    if factor == "age":
        return Continuous("age", "identity")
    if factor == "volume":
        return Continuous("volume", "log2")
    if factor == "dre" or factor in BINARY_FACTORS:
        return Binary(factor)
    raise FitError(f"unknown factor {factor!r}")


def validate_spec(terms: Sequence[Term]) -> None:
    """Encoding invariants: one leading intercept; psa/volume log2, age identity;
    products reference earlier terms."""
    if not terms or not isinstance(terms[0], Intercept):
        raise FitError("encoding must start with the intercept")
    if sum(isinstance(t, Intercept) for t in terms) != 1:
        raise FitError("encoding must contain exactly one intercept")
    seen: set[str] = set()
    for t in terms:
        if isinstance(t, Continuous):
            if t.transform not in TRANSFORMS:
                raise FitError(f"unknown transform {t.transform!r}")
            if t.factor == "psa" and t.transform != "log2":
                raise FitError("psa must enter as log2(psa)")
            if t.factor == "volume" and t.transform != "log2":
                raise FitError("continuous volume must enter as log2(volume)")
            if t.factor == "age" and t.transform != "identity":
                raise FitError("age must enter untransformed")
        if isinstance(t, Product):
            if t.a.name not in seen or t.b.name not in seen:
                raise FitError(f"product term {t.name!r} references terms not listed earlier")
        seen.add(t.name)


# ---------------------------------------------------------------------------
# design encoding


@dataclass(frozen=True)
class Design:
    X: np.ndarray
    y: np.ndarray | None
    terms: tuple[Term, ...]
    dropped: tuple[tuple[str, str], ...]  # (term name, reason)


def as_columns(data) -> tuple[Columns, int]:
    """Accept a dataset or a plain column mapping; return (columns, n)."""
    if hasattr(data, "columns"):
        cols = data.columns()
        return cols, len(data)
    cols = dict(data)
    n = len(next(iter(cols.values())))
    return cols, n


def encode_design(data, terms: Sequence[Term], *, require_outcome: bool = True) -> Design:
    """Build the design matrix, dropping degenerate columns.

    Non-intercept columns that are constant, or exact duplicates of an earlier
    retained column, are removed and reported in ``dropped``.
    """
    validate_spec(terms)
    cols, n = as_columns(data)
    y = None
    if require_outcome:
        y = np.asarray(cols["outcome"], dtype=float)
    kept_terms: list[Term] = [terms[0]]
    kept_cols: list[np.ndarray] = [terms[0].column(cols, n)]
    dropped: list[tuple[str, str]] = []
    for t in terms[1:]:
        c = t.column(cols, n)
        if n > 0 and c.max() == c.min():
            dropped.append((t.name, "constant"))
            continue
        if any(np.array_equal(c, prev) for prev in kept_cols[1:]):
            dropped.append((t.name, "duplicate"))
            continue
        kept_terms.append(t)
        kept_cols.append(c)
    X = np.column_stack(kept_cols) if kept_cols else np.empty((n, 0))
    return Design(X=X, y=y, terms=tuple(kept_terms), dropped=tuple(dropped))


def term_matrix(data, terms: Sequence[Term]) -> np.ndarray:
    """Evaluate an already-retained term list (no drops) into an n x p matrix."""
    cols, n = as_columns(data)
    return np.column_stack([t.column(cols, n) for t in terms])


# ---------------------------------------------------------------------------
# fitting


@dataclass
class LogisticFit:
    coefficients: np.ndarray
    covariance: np.ndarray
    log_likelihood: float
    n: int
    iterations: int
    converged: bool
    deviance_trace: tuple[float, ...] = ()
    dropped: tuple[tuple[str, str], ...] = ()

    @property
    def deviance(self) -> float:
        return -2.0 * self.log_likelihood

    def standard_errors(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))


def fit_logistic(
    design: np.ndarray,
    outcomes: np.ndarray,
    *,
    max_iter: int = 100,
    tol: float = 1e-8,
    ridge: float = 0.0,
) -> LogisticFit:
    """Maximum-likelihood logistic fit by Newton/IRLS with step-halving.

    Iterates until max|delta beta| < tol or the objective change drops below
    1e-10, then takes a few polishing Newton steps so the score vanishes at
    the returned optimum. With ridge > 0 the objective is penalized by
    ridge/2 * ||beta||^2 over non-intercept coefficients and the reported
    covariance is the inverse of the penalized negative Hessian.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(outcomes, dtype=float)
    if X.ndim != 2:
        raise FitError("design must be a 2-d array")
    n, p = X.shape
    if y.shape != (n,):
        raise FitError("outcomes length must match design rows")
    if not np.all((y == 0) | (y == 1)):
        raise FitError("outcomes must be 0/1")
    if n < p:
        raise FitError(f"need at least as many rows ({n}) as columns ({p})")

    # ridge never penalizes a leading all-ones intercept column
    pen_mask = np.ones(p)
    if p and np.all(X[:, 0] == 1.0):
        pen_mask[0] = 0.0
    pen_diag = ridge * pen_mask

    def objective(beta: np.ndarray, eta: np.ndarray) -> float:
        f = _bernoulli_loglik(eta, y)
        if ridge:
            f -= 0.5 * float(pen_diag @ (beta * beta))
        return f

    beta = np.zeros(p)
    if p and pen_mask[0] == 0.0:
        ybar = min(max(float(np.mean(y)), 1.0 / (n + 1)), n / (n + 1))
        beta[0] = math.log(ybar / (1.0 - ybar))
    eta = X @ beta
    f0 = objective(beta, eta)
    trace = [-2.0 * _bernoulli_loglik(eta, y)]
    converged = False
    iterations = 0

    def newton_direction(beta: np.ndarray, eta: np.ndarray) -> np.ndarray:
        pr = sigmoid(eta)
        g = X.T @ (y - pr) - pen_diag * beta
        w = pr * (1.0 - pr)
        H = (X * w[:, None]).T @ X
        if ridge:
            H = H + np.diag(pen_diag)
        try:
            return np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            if ridge == 0.0:
                raise SeparationError(
                    "singular Hessian (collinear design or separation); retry with ridge > 0"
                ) from None
            raise FitError("singular penalized Hessian") from None

    for iterations in range(1, max_iter + 1):
        if ridge == 0.0 and f0 / max(n, 1) > -1e-10:
            raise SeparationError(
                "perfect separation: the maximum-likelihood estimate does not exist; "
                "retry with ridge > 0"
            )
        delta = newton_direction(beta, eta)
        step = 1.0
        accepted = False
        for _ in range(11):  # full step + up to 10 halvings
            cand = beta + step * delta
            eta_c = X @ cand
            f_c = objective(cand, eta_c)
            if f_c >= f0:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = True  # no ascent direction improves: numerical optimum
            break
        max_step = float(np.max(np.abs(step * delta))) if p else 0.0
        gain = f_c - f0
        beta, eta, f0 = cand, eta_c, f_c
        trace.append(-2.0 * _bernoulli_loglik(eta, y))
        if max_step < tol or gain < 1e-10:
            converged = True
            break

    if converged and ridge == 0.0 and f0 / max(n, 1) > -1e-10:
        raise SeparationError(
            "perfect separation: the maximum-likelihood estimate does not exist; "
            "retry with ridge > 0"
        )

    # polish: drive the score toward machine zero (quadratic convergence makes
    # one or two full steps enough); never accept an objective decrease
    if converged:
        for _ in range(5):
            pr = sigmoid(eta)
            g = X.T @ (y - pr) - pen_diag * beta
            if float(np.max(np.abs(g))) <= 1e-7:
                break
            try:
                delta = newton_direction(beta, eta)
            except FitError:
                break
            cand = beta + delta
            eta_c = X @ cand
            f_c = objective(cand, eta_c)
            if f_c < f0:
                break
            beta, eta, f0 = cand, eta_c, f_c
            trace.append(-2.0 * _bernoulli_loglik(eta, y))

    pr = sigmoid(eta)
    w = pr * (1.0 - pr)
    H = (X * w[:, None]).T @ X
    if ridge:
        H = H + np.diag(pen_diag)
    try:
        cov = np.linalg.inv(H)
        cov = (cov + cov.T) / 2.0
    except np.linalg.LinAlgError:
        cov = np.full((p, p), np.nan)
    return LogisticFit(
        coefficients=beta,
        covariance=cov,
        log_likelihood=_bernoulli_loglik(eta, y),
        n=n,
        iterations=iterations,
        converged=converged,
        deviance_trace=tuple(trace),
    )


def fit_design(data, terms: Sequence[Term], **fit_kwargs) -> tuple[LogisticFit, Design]:
    """Encode and fit in one step; the fit records the dropped columns."""
    design = encode_design(data, terms)
    fit = fit_logistic(design.X, design.y, **fit_kwargs)
    fit.dropped = design.dropped
    return fit, design


# ---------------------------------------------------------------------------
# scoring, prediction, inference


def bic_score(log_lik: float, k: int, n: int, *, conventional: bool = False) -> float:
    """Model-selection score; the default form is log L - k*log(n), larger is
    better, with k the non-intercept covariate count. ``conventional=True``
    returns -2 log L + k*log(n) (smaller is better) for comparison output."""
    if n < 1:
        raise FitError("sample size must be >= 1")
    if k < 0:
        raise FitError("covariate count must be >= 0")
    if conventional:
        return -2.0 * log_lik + k * math.log(n)
    return log_lik - k * math.log(n)


def predict_risk(coefficients: np.ndarray, terms: Sequence[Term], vals: Vals) -> float:
    """sigmoid(beta . row) for one record's vals mapping."""
    row = np.array([t.value(vals) for t in terms])
    return float(sigmoid(float(np.dot(coefficients, row))))


def predict_matrix(coefficients: np.ndarray, terms: Sequence[Term], data) -> np.ndarray:
    """Vectorized predicted risks for every row of a dataset/columns mapping."""
    X = term_matrix(data, terms)
    return sigmoid(X @ np.asarray(coefficients, dtype=float))


def wald_summary(fit: LogisticFit, terms: Sequence[Term]) -> list[dict]:
    """Per-term odds ratio, 95% CI and two-sided p-value from the Wald statistic."""
    if not fit.converged:
        raise FitError("Wald summary requires a converged fit")
    se = fit.standard_errors()
    rows = []
    for term, b, s in zip(terms, fit.coefficients, se):
        if s > 0:
            z = b / s
            p = normal_sf2(z)
        else:
            z = math.inf if b != 0 else 0.0
            p = 0.0 if b != 0 else 1.0
        rows.append(
            {
                "term": term.name,
                "coefficient": float(b),
                "se": float(s),
                "odds_ratio": math.exp(b),
                "ci_low": math.exp(b - 1.96 * s),
                "ci_high": math.exp(b + 1.96 * s),
                "p_value": p,
            }
        )
    return rows
