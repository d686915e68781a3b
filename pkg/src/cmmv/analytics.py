"""Analytics over calibrated models: prediction-error tables, implied-vol
surfaces from a single calibration, the smile-shift study, and model
persistence.

Predictions are cash prices: the latent state is read off the observed
underlying date by date (x_t = psi_t(S_t)), the option is priced there in
forward value, and the chain's discount factor converts to cash for
comparison with observed mids. Relative errors of grouped tables divide the
mean absolute error by the mean observed price, which stays stable when
individual deep out-of-the-money mids sit near zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .baseline import SmileModel, ss_price
from .calibrate import CalibrationReport, FitConfig, m1_calibrate
from .core import CmmvModel, invert_ft
from .errors import CmmvError, NoImpliedVolError, OutOfHorizonError, SchemaMismatchError
from .marketdata import OptionChain
from .pricing import _call_kernel_strikes, call_price, implied_vol

MODEL_SCHEMA = "cmmv-pricing-model-v1"
CMMV_METHODS = ("m1", "m2")


# ---------------------------------------------------------------------------
# model wrapper + persistence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PricingModel:
    """A calibrated pricing model tagged with its method.

    method "m1"/"m2" carries a CmmvModel, "ss" a SmileModel; the tag rides
    along through prediction tables and persisted files so downstream
    analytics can group by method.
    """

    method: str
    cmmv: Optional[CmmvModel] = None
    smile: Optional[SmileModel] = None

    def __post_init__(self):
        if self.method in CMMV_METHODS:
            if self.cmmv is None or self.smile is not None:
                raise ValueError(f"method {self.method!r} requires exactly a CmmvModel")
        elif self.method == "ss":
            if self.smile is None or self.cmmv is not None:
                raise ValueError("method 'ss' requires exactly a SmileModel")
        else:
            raise ValueError(f"unknown method {self.method!r}")

    def to_dict(self) -> dict:
        payload = self.smile.to_dict() if self.method == "ss" else self.cmmv.to_dict()
        return {"schema": MODEL_SCHEMA, "method": self.method, "payload": payload}

    @classmethod
    def from_dict(cls, data: dict) -> "PricingModel":
        if not isinstance(data, dict) or data.get("schema") != MODEL_SCHEMA:
            raise SchemaMismatchError(
                "not a pricing-model artifact",
                expected=MODEL_SCHEMA,
                found=data.get("schema") if isinstance(data, dict) else type(data).__name__,
            )
        method = data.get("method")
        try:
            if method == "ss":
                return cls(method="ss", smile=SmileModel.from_dict(data["payload"]))
            if method in CMMV_METHODS:
                return cls(method=method, cmmv=CmmvModel.from_dict(data["payload"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaMismatchError("malformed pricing-model payload", reason=str(exc))
        raise SchemaMismatchError("unknown pricing-model method", method=method)


def save_model(model: PricingModel, path: Union[str, Path]) -> None:
    """Write the model as JSON at full float precision (round-trip exact)."""
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n")


def load_model(path: Union[str, Path]) -> PricingModel:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaMismatchError("unreadable pricing-model file", reason=str(exc))
    return PricingModel.from_dict(data)


# ---------------------------------------------------------------------------
# prediction table
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PredictionRecord:
    """One (model, date, strike) prediction against the observed cash mid."""

    model: str
    quote_date: date
    strike: float
    observed: float
    predicted: Optional[float]
    abs_error: Optional[float]
    rel_error: Optional[float]   # abs/observed, only when observed > 0
    note: str = ""


def _record(model: str, chain: OptionChain, i: int, predicted: Optional[float], note: str = "") -> PredictionRecord:
    obs = float(chain.call_mids[i])
    if predicted is None:
        return PredictionRecord(model, chain.quote_date, float(chain.strikes[i]), obs, None, None, None, note)
    err = abs(predicted - obs)
    rel = err / obs if obs > 0 else None
    return PredictionRecord(model, chain.quote_date, float(chain.strikes[i]), obs, float(predicted), err, rel, note)


def predict(
    models: Union[PricingModel, Mapping[str, PricingModel]],
    chains: Sequence[OptionChain],
) -> List[PredictionRecord]:
    """Cross-product prediction table: every model on every (date, strike).

    CMMV models invert the per-date underlying for the latent state and price
    the whole strike row from it; Sticky-Strike reprices with its frozen
    smile. Dates a model cannot handle (state inversion failure, date outside
    its horizon) produce rows with the failure note instead of aborting.
    """
    if isinstance(models, PricingModel):
        models = {models.method: models}
    records: List[PredictionRecord] = []
    for chain in sorted(chains, key=lambda c: c.quote_date):
        tau = chain.days_to_expiry / 365.0
        for name, pm in models.items():
            if pm.method == "ss":
                for i, k in enumerate(chain.strikes):
                    price = ss_price(pm.smile, chain.forward, float(k), tau, chain.discount)
                    records.append(_record(name, chain, i, price))
                continue
            m = pm.cmmv
            t = m.horizon - float(chain.days_to_expiry)
            try:
                if t < 0.0:
                    raise OutOfHorizonError(
                        "chain maturity exceeds the model horizon",
                        days_to_expiry=chain.days_to_expiry,
                        horizon=m.horizon,
                    )
                x = invert_ft(m, t, chain.forward)
                cash = chain.discount * call_price(m, t, x, chain.strikes)
            except CmmvError as exc:
                for i in range(chain.strikes.size):
                    records.append(_record(name, chain, i, None, note=str(exc)))
                continue
            for i in range(chain.strikes.size):
                records.append(_record(name, chain, i, float(cash[i])))
    return records


@dataclass(frozen=True)
class DateErrorRow:
    model: str
    quote_date: date
    n: int
    n_failed: int
    mean_abs: Optional[float]
    mean_rel: Optional[float]


@dataclass(frozen=True)
class StrikeErrorRow:
    model: str
    strike: float
    n: int
    n_failed: int
    mean_abs: Optional[float]
    mean_rel: Optional[float]


def _grouped(records, key):
    groups: Dict[tuple, List[PredictionRecord]] = {}
    for r in records:
        groups.setdefault((r.model, key(r)), []).append(r)
    out = []
    for (model, k), rows in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        ok = [r for r in rows if r.abs_error is not None]
        mean_abs = float(np.mean([r.abs_error for r in ok])) if ok else None
        obs = float(np.mean([r.observed for r in ok])) if ok else 0.0
        mean_rel = (mean_abs / obs) if ok and obs > 0 else None
        out.append((model, k, len(rows), len(rows) - len(ok), mean_abs, mean_rel))
    return out


def error_by_date(records: Sequence[PredictionRecord]) -> List[DateErrorRow]:
    """Strike-averaged absolute and relative errors per (model, date)."""
    if not records:
        raise ValueError("empty prediction table")
    return [DateErrorRow(*row) for row in _grouped(records, lambda r: r.quote_date)]


def error_by_strike(
    records: Sequence[PredictionRecord],
    start: Optional[date] = None,
    end: Optional[date] = None,
) -> List[StrikeErrorRow]:
    """Date-averaged errors per (model, strike), optionally on a date window."""
    if not records:
        raise ValueError("empty prediction table")
    kept = [
        r
        for r in records
        if (start is None or r.quote_date >= start) and (end is None or r.quote_date <= end)
    ]
    if not kept:
        raise ValueError("date window excludes every record")
    return [StrikeErrorRow(*row) for row in _grouped(kept, lambda r: r.strike)]


# ---------------------------------------------------------------------------
# vol surface
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SurfacePoint:
    strike: float
    maturity_days: float
    predicted_vol: float
    observed_vol: Optional[float] = None


def vol_surface(
    model: Union[PricingModel, CmmvModel],
    maturities: Sequence[float],
    strikes: Sequence[float],
    forward: float,
    discounts: Optional[Mapping[float, float]] = None,
    chains: Sequence[OptionChain] = (),
    extend_horizon: Optional[float] = None,
) -> Tuple[List[SurfacePoint], int]:
    """Implied-vol surface from one calibrated map and today's forward.

    A maturity u prices as E[(f_u(x0 + sqrt(u) Z) - K)^+] with x0 the state
    backed out of the forward, so the whole surface comes from the single
    calibration. Maturities beyond the model horizon require an explicit
    extend_horizon T' >= max maturity, which re-reads the fitted terminal map
    as the time-T' map of the same family. Strikes whose model price violates
    the static bounds carry no implied vol and are dropped (counted).
    Observed vols are joined from chains matching on (days to expiry, strike).
    """
    m = model.cmmv if isinstance(model, PricingModel) else model
    if m is None:
        raise ValueError("vol_surface needs a CMMV model")
    maturities = [float(u) for u in maturities]
    if not maturities or min(maturities) <= 0:
        raise ValueError("maturities must be positive")
    if extend_horizon is not None:
        if extend_horizon < max(maturities):
            raise ValueError("extend_horizon must cover the largest maturity")
        m = CmmvModel(m.terminal, float(extend_horizon))
    elif max(maturities) > m.horizon:
        raise OutOfHorizonError(
            "maturity beyond the calibrated horizon; pass extend_horizon to re-anchor",
            max_maturity=max(maturities),
            horizon=m.horizon,
        )
    strikes = np.asarray(strikes, dtype=float)
    discounts = dict(discounts or {})
    x0 = invert_ft(m, 0.0, float(forward))

    observed: Dict[Tuple[float, float], float] = {}
    for chain in chains:
        u = float(chain.days_to_expiry)
        for k, cash in zip(chain.strikes, chain.call_mids):
            try:
                observed[(u, float(k))] = implied_vol(
                    float(cash), chain.forward, float(k), u / 365.0, chain.discount
                )
            except (NoImpliedVolError, ValueError):
                continue

    points: List[SurfacePoint] = []
    dropped = 0
    for u in maturities:
        df = float(discounts.get(u, 1.0))
        cash = df * _call_kernel_strikes(m.coeffs_at(u), u, x0, strikes)
        for k, price in zip(strikes, cash):
            try:
                vol = implied_vol(float(price), float(forward), float(k), u / 365.0, df)
            except NoImpliedVolError:
                dropped += 1
                continue
            points.append(SurfacePoint(float(k), u, vol, observed.get((u, float(k)))))
    return points, dropped


# ---------------------------------------------------------------------------
# smile shift
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShiftCurve:
    shift: float
    forward: float
    strikes: np.ndarray = field(repr=False)
    vols: np.ndarray = field(repr=False)
    min_strike: Optional[float]
    dropped: int
    error: Optional[str] = None


@dataclass
class SmileShiftStudy:
    model: CmmvModel
    report: Optional[CalibrationReport]
    curves: List[ShiftCurve]


def _min_location(strikes: np.ndarray, vols: np.ndarray) -> float:
    """Vertex of the parabola through the argmin and its neighbors."""
    i = int(np.argmin(vols))
    if i == 0 or i == strikes.size - 1:
        return float(strikes[i])
    x0, x1, x2 = strikes[i - 1 : i + 2]
    y0, y1, y2 = vols[i - 1 : i + 2]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / denom
    if a <= 0:
        return float(strikes[i])
    return float(-b / (2.0 * a))


def smile_shift(
    chain: OptionChain,
    shifts: Sequence[float],
    degree: Optional[int] = 3,
    config: Optional[FitConfig] = None,
    model: Optional[CmmvModel] = None,
) -> SmileShiftStudy:
    """Implied-vol curves at counterfactually shifted spots from one fitted map.

    The map is fitted once on the base chain (the strike-curve fit does not
    involve the spot); each shift then moves the underlying, backs out the
    shifted state, and reprices every strike. All curves are quoted in the
    base chain's basis (its regressed forward and discount): the shifts are
    counterfactual, so no shifted parity regression exists, and a common
    quoting basis is what makes minimum-location displacement comparable
    across curves. Each curve records the location of its vol minimum
    (parabola-refined) so smile-direction analysis is one sign check. Shifts
    whose state cannot be computed carry the error per curve.
    """
    report = None
    if model is None:
        model, report = m1_calibrate(chain, degree=degree, config=config)
    t = model.horizon - float(chain.days_to_expiry)
    tau = chain.days_to_expiry / 365.0
    curves: List[ShiftCurve] = []
    for shift in shifts:
        f_shift = chain.forward + float(shift)
        try:
            x = invert_ft(model, t, f_shift)
            cash = chain.discount * call_price(model, t, x, chain.strikes)
        except CmmvError as exc:
            curves.append(
                ShiftCurve(float(shift), f_shift, np.array([]), np.array([]), None, 0, str(exc))
            )
            continue
        ks, vols = [], []
        dropped = 0
        for k, price in zip(chain.strikes, cash):
            try:
                vols.append(implied_vol(float(price), chain.forward, float(k), tau, chain.discount))
                ks.append(float(k))
            except NoImpliedVolError:
                dropped += 1
        ks = np.asarray(ks)
        vols = np.asarray(vols)
        min_k = _min_location(ks, vols) if ks.size >= 1 else None
        curves.append(ShiftCurve(float(shift), f_shift, ks, vols, min_k, dropped))
    return SmileShiftStudy(model=model, report=report, curves=curves)
