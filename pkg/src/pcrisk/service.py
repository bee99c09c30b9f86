"""HTTP service exposing bank-backed predictions and metadata.

Stateless endpoints over an immutable loaded bank:

* ``POST /predict``  — route a request to its pattern's model and predict.
* ``GET /bank/meta`` — bank fingerprint, factor schema, pattern-size summary.
* ``GET /health``    — liveness plus bank-loaded status.

Optional factors are tri-state: absent (or null) means "not available" and
routes to a different model than an explicit "no"/"normal" value.
"""

from __future__ import annotations

from typing import Literal

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field, ValidationError

from .bank import ModelBank, lookup
from .data import PatientRecord
from .errors import DataValidationError
from .factors import AGE_MAX, AGE_MIN, BINARY_FACTORS, FACTOR_DEFS, FACTOR_ORDER, PATTERN_COUNT

SERVICE_SCHEMA_VERSION = "1"


class PredictRequest(BaseModel):
    model_config = {"extra": "forbid"}

    psa: float = Field(gt=0, description="ng/mL")
    age: float = Field(ge=AGE_MIN, le=AGE_MAX, description="years")
    dre: Literal["normal", "abnormal"] | None = None
    volume: float | None = Field(default=None, gt=0, description="cc")
    prior_biopsy: int | None = Field(default=None, ge=0, le=1)
    five_ari: int | None = Field(default=None, ge=0, le=1)
    prior_psa_screen: int | None = Field(default=None, ge=0, le=1)
    african_ancestry: int | None = Field(default=None, ge=0, le=1)
    hispanic: int | None = Field(default=None, ge=0, le=1)
    fh_pca_first: int | None = Field(default=None, ge=0, le=1)
    fh_pca_second: int | None = Field(default=None, ge=0, le=1)
    fh_breast_first: int | None = Field(default=None, ge=0, le=1)

    def to_record(self) -> PatientRecord:
        return PatientRecord(
            cohort_id="request",
            age=self.age,
            psa=self.psa,
            outcome=0,  # placeholder; prediction never reads it
            dre=self.dre,
            volume=self.volume,
            **{f: getattr(self, f) for f in BINARY_FACTORS},
        )


def _validation_error_body(exc: RequestValidationError | ValidationError) -> dict:
    fields = []
    for err in exc.errors():
        loc = [str(p) for p in err.get("loc", ()) if p != "body"]
        fields.append({"field": ".".join(loc) or "body", "message": err.get("msg", "invalid")})
    return {"error": {"type": "validation", "fields": fields}}


def create_app(bank: ModelBank | None, *, cors_origin: str | None = None) -> FastAPI:
    """Build the service around an already-loaded (immutable) bank."""
    app = FastAPI(title="pcrisk service", version=SERVICE_SCHEMA_VERSION)
    if cors_origin:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=[cors_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )
    app.state.bank = bank

    @app.exception_handler(RequestValidationError)
    async def _on_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422, content=_validation_error_body(exc))

    def _bank_or_none() -> ModelBank | None:
        return app.state.bank

    @app.get("/health")
    async def health():
        loaded = _bank_or_none() is not None
        return {"status": "ok" if loaded else "degraded",
                "bank": "loaded" if loaded else "missing"}

    @app.get("/bank/meta")
    async def bank_meta():
        bank = _bank_or_none()
        if bank is None:
            return JSONResponse(
                status_code=503,
                content={"error": {"type": "bank_unavailable",
                                   "message": "no model bank loaded"}},
            )
        ns = sorted(e.n for e in bank.entries.values() if e.fittable)
        factors = []
        for name in FACTOR_ORDER:
            d = FACTOR_DEFS[name]
            factors.append(
                {
                    "name": d.name,
                    "kind": d.kind,
                    "mandatory": d.mandatory,
                    "label": d.label,
                    "unit": d.unit,
                    "levels": list(d.levels) if d.levels else None,
                    "minimum": d.minimum,
                    "maximum": d.maximum,
                }
            )
        return {
            "schema_version": SERVICE_SCHEMA_VERSION,
            "fingerprint": bank.training_fingerprint,
            "format": bank.format_version,
            "factors": factors,
            "pattern_count": PATTERN_COUNT,
            "fittable_count": bank.fittable_count(),
            "training_n": bank.training_n,
            "n_summary": {
                "min": ns[0],
                "q25": int(np.percentile(ns, 25)),
                "median": int(np.percentile(ns, 50)),
                "q75": int(np.percentile(ns, 75)),
                "max": ns[-1],
            },
        }

    @app.post("/predict")
    async def predict(request: PredictRequest):
        bank = _bank_or_none()
        if bank is None:
            return JSONResponse(
                status_code=503,
                content={"error": {"type": "bank_unavailable",
                                   "message": "no model bank loaded"}},
            )
        try:
            record = request.to_record()
        except DataValidationError as exc:
            return JSONResponse(
                status_code=422,
                content={"error": {"type": "validation",
                                   "fields": [{"field": "body", "message": str(exc)}]}},
            )
        result = lookup(bank, record)
        return {
            "status": "ok",
            "risk": result.risk,
            "pattern": result.pattern,
            "requested_pattern": result.requested_pattern,
            "fallback": result.fallback,
            "substituted_pattern": result.pattern if result.fallback else None,
            "n": result.n,
            "cohorts": len(result.cohorts),
            "model_version": bank.training_fingerprint,
            "warnings": list(result.warnings),
        }

    return app
