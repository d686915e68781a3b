"""Request/response models for the HTTP service.

Domain payloads that already have a versioned dict form (chains, pricing
models, calibration reports, recovery results) travel as plain JSON objects
and are validated by their own from_dict constructors; pydantic validates the
envelopes around them.
"""

from __future__ import annotations

from dataclasses import replace
from datetime import date
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from ..calibrate import FitConfig


class FitConfigIn(BaseModel):
    """Optional overrides on the route's base fit configuration."""

    seed: Optional[int] = None
    sigma0: Optional[float] = None
    population: Optional[int] = None
    max_generations: Optional[int] = None
    max_evaluations: Optional[int] = None
    restarts: Optional[int] = None
    target_rel_residual: Optional[float] = None
    max_rel_rms: Optional[float] = None

    def resolve(self, base: FitConfig) -> FitConfig:
        overrides = {k: v for k, v in self.model_dump().items() if v is not None}
        return replace(base, **overrides) if overrides else base


class IngestRequest(BaseModel):
    csv: str
    quote_date: Optional[date] = None
    expiry: Optional[date] = None
    min_volume: int = 1


class IngestResponse(BaseModel):
    chains: List[dict]
    rejects: List[dict]
    n_rows: int


class CalibrateM1Request(BaseModel):
    chain: dict
    degree: Optional[int] = None
    degrees: Optional[List[int]] = None
    config: Optional[FitConfigIn] = None


class CalibrateM2Request(BaseModel):
    chains: List[dict]
    strike: float
    degree: Optional[int] = None
    degrees: Optional[List[int]] = None
    config: Optional[FitConfigIn] = None


class CalibrationResponse(BaseModel):
    model: dict
    report: dict
    warnings: List[str] = Field(default_factory=list)


class BaselineFitRequest(BaseModel):
    chain: dict
    degree: int = 4


class BaselineFitResponse(BaseModel):
    model: dict
    skipped_strikes: List[float]


class PredictRequest(BaseModel):
    models: Dict[str, dict]
    chains: List[dict]


class PredictResponse(BaseModel):
    records: List[dict]


class ErrorsByDateRequest(BaseModel):
    records: List[dict]


class ErrorsByStrikeRequest(BaseModel):
    records: List[dict]
    start: Optional[date] = None
    end: Optional[date] = None


class ErrorTableResponse(BaseModel):
    rows: List[dict]


class SurfaceRequest(BaseModel):
    model: dict
    maturities: List[float]
    strikes: List[float]
    forward: float
    discounts: Optional[Dict[float, float]] = None
    chains: List[dict] = Field(default_factory=list)
    extend_horizon: Optional[float] = None


class SurfaceResponse(BaseModel):
    points: List[dict]
    dropped: int


class SmileShiftRequest(BaseModel):
    chain: dict
    shifts: List[float]
    degree: Optional[int] = 3
    config: Optional[FitConfigIn] = None
    model: Optional[dict] = None


class SmileShiftResponse(BaseModel):
    model: dict
    report: Optional[dict] = None
    curves: List[dict]


class SimulateRequest(BaseModel):
    model: dict
    n_steps: int
    horizon: float
    n_paths: int = 1
    seed: int = 0


class SimulateResponse(BaseModel):
    times: List[float]
    paths: List[dict]
    seed: int


class RecoverRequest(BaseModel):
    times: List[float]
    price: List[float]
    brownian: Optional[List[float]] = None
    horizon: float
    n_max: int = 4
    s1_window: Optional[int] = None
    head_fraction: float = 0.02


class PriceRequest(BaseModel):
    model: dict
    t: float = 0.0
    x: Optional[float] = None
    spot: Optional[float] = None
    strikes: List[float]


class PriceResponse(BaseModel):
    prices: List[float]
    x: float


class BenchmarkRequest(BaseModel):
    seed: int = 0
    sphere_budget: int = 2000
    rosenbrock_budget: int = 100_000


class BenchmarkResponse(BaseModel):
    problems: List[dict]
