"""HTTP service exposing the calibration/pricing pipeline.

Stateless: every request carries its inputs (chains, models) and gets full
artifacts back; persistence lives with the caller. Package exceptions map to
422 with a kind tag (data / calibration / usage) so clients can translate
failures into exit codes without parsing messages.
"""

from __future__ import annotations

import io
from datetime import date
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..analytics import (
    PredictionRecord,
    PricingModel,
    error_by_date,
    error_by_strike,
    predict,
    smile_shift,
    vol_surface,
)
from ..baseline import fit_smile
from ..calibrate import (
    DEFAULT_DEGREES,
    FitConfig,
    build_m2_dataset,
    m1_calibrate,
    m2_calibrate,
    select_degree,
)
from ..core import invert_ft
from ..errors import CalibrationError, CmmvError, DataError
from ..marketdata import OptionChain, build_chain, chain_pairs, parse_chain
from ..optimizer import CmaEsConfig, minimize
from ..pricing import call_price, put_price
from ..simulate import PathGrid, recover, simulate_paths
from . import schemas

M2_BASE_CONFIG = FitConfig(max_rel_rms=0.5, target_rel_residual=1e-13)
MAX_SIMULATED_VALUES = 2_000_000


def _cmmv_payload(model_dict: dict) -> PricingModel:
    pm = PricingModel.from_dict(model_dict)
    if pm.cmmv is None:
        raise ValueError(f"route needs a CMMV model, got method {pm.method!r}")
    return pm


def _record_to_dict(r: PredictionRecord) -> dict:
    return {
        "model": r.model,
        "quote_date": r.quote_date.isoformat(),
        "strike": r.strike,
        "observed": r.observed,
        "predicted": r.predicted,
        "abs_error": r.abs_error,
        "rel_error": r.rel_error,
        "note": r.note,
    }


def _record_from_dict(d: dict) -> PredictionRecord:
    return PredictionRecord(
        model=d["model"],
        quote_date=date.fromisoformat(d["quote_date"]),
        strike=float(d["strike"]),
        observed=float(d["observed"]),
        predicted=None if d.get("predicted") is None else float(d["predicted"]),
        abs_error=None if d.get("abs_error") is None else float(d["abs_error"]),
        rel_error=None if d.get("rel_error") is None else float(d["rel_error"]),
        note=d.get("note", ""),
    )


def _iso(value) -> Optional[str]:
    return value.isoformat() if isinstance(value, date) else value


def create_app() -> FastAPI:
    app = FastAPI(title="cmmv", version=__version__)

    def _error_response(kind: str, exc: Exception) -> JSONResponse:
        detail = {"kind": kind, "message": str(exc)}
        diagnostics = getattr(exc, "diagnostics", None)
        if diagnostics:
            detail["diagnostics"] = {k: repr(v) for k, v in diagnostics.items()}
        return JSONResponse(status_code=422, content={"detail": detail})

    @app.exception_handler(DataError)
    async def _data_error(request: Request, exc: DataError):
        return _error_response("data", exc)

    @app.exception_handler(CalibrationError)
    async def _calibration_error(request: Request, exc: CalibrationError):
        return _error_response("calibration", exc)

    @app.exception_handler(CmmvError)
    async def _usage_error(request: Request, exc: CmmvError):
        return _error_response("usage", exc)

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return _error_response("usage", exc)

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/chains/ingest", response_model=schemas.IngestResponse)
    def ingest(req: schemas.IngestRequest) -> schemas.IngestResponse:
        report = parse_chain(io.StringIO(req.csv))
        pairs = chain_pairs(report.rows)
        if req.quote_date is not None:
            pairs = [p for p in pairs if p[0] == req.quote_date]
        if req.expiry is not None:
            pairs = [p for p in pairs if p[1] == req.expiry]
        chains = [
            build_chain(report.rows, qd, ex, min_volume=req.min_volume).to_dict()
            for qd, ex in pairs
        ]
        rejects = [
            {"line_no": r.line_no, "reason": r.reason, "raw": {k: _iso(v) for k, v in r.raw.items()}}
            for r in report.rejects
        ]
        return schemas.IngestResponse(chains=chains, rejects=rejects, n_rows=len(report.rows))

    @app.post("/calibrate/m1", response_model=schemas.CalibrationResponse)
    def calibrate_m1(req: schemas.CalibrateM1Request) -> schemas.CalibrationResponse:
        chain = OptionChain.from_dict(req.chain)
        config = req.config.resolve(FitConfig()) if req.config else None
        model, report = m1_calibrate(
            chain,
            degree=req.degree,
            degrees=tuple(req.degrees) if req.degrees else DEFAULT_DEGREES,
            config=config,
        )
        return schemas.CalibrationResponse(
            model=PricingModel(method="m1", cmmv=model).to_dict(),
            report=report.to_dict(),
            warnings=list(report.warnings),
        )

    @app.post("/calibrate/m2", response_model=schemas.CalibrationResponse)
    def calibrate_m2(req: schemas.CalibrateM2Request) -> schemas.CalibrationResponse:
        chains = [OptionChain.from_dict(c) for c in req.chains]
        data, warnings = build_m2_dataset(chains, req.strike)
        config = req.config.resolve(M2_BASE_CONFIG) if req.config else M2_BASE_CONFIG
        degree = req.degree
        selection = None
        if degree is None:
            selection = select_degree(
                "m2",
                data,
                degrees=tuple(req.degrees) if req.degrees else DEFAULT_DEGREES,
                config=config,
            )
            degree = selection.degree
        model, report = m2_calibrate(data, degree, config)
        if selection is not None:
            report.split = dict(selection.split)
            report.split["scores"] = {str(k): v for k, v in selection.scores.items()}
            report.split["failures"] = {str(k): v for k, v in selection.failures.items()}
        report.warnings.extend(warnings)
        return schemas.CalibrationResponse(
            model=PricingModel(method="m2", cmmv=model).to_dict(),
            report=report.to_dict(),
            warnings=list(report.warnings),
        )

    @app.post("/baseline/fit", response_model=schemas.BaselineFitResponse)
    def baseline_fit(req: schemas.BaselineFitRequest) -> schemas.BaselineFitResponse:
        chain = OptionChain.from_dict(req.chain)
        smile, skipped = fit_smile(chain, degree=req.degree)
        return schemas.BaselineFitResponse(
            model=PricingModel(method="ss", smile=smile).to_dict(),
            skipped_strikes=skipped,
        )

    @app.post("/predict", response_model=schemas.PredictResponse)
    def predict_route(req: schemas.PredictRequest) -> schemas.PredictResponse:
        models = {name: PricingModel.from_dict(d) for name, d in req.models.items()}
        chains = [OptionChain.from_dict(c) for c in req.chains]
        records = predict(models, chains)
        return schemas.PredictResponse(records=[_record_to_dict(r) for r in records])

    @app.post("/errors/by-date", response_model=schemas.ErrorTableResponse)
    def errors_by_date(req: schemas.ErrorsByDateRequest) -> schemas.ErrorTableResponse:
        records = [_record_from_dict(d) for d in req.records]
        rows = [
            {
                "model": r.model,
                "quote_date": r.quote_date.isoformat(),
                "n": r.n,
                "n_failed": r.n_failed,
                "mean_abs": r.mean_abs,
                "mean_rel": r.mean_rel,
            }
            for r in error_by_date(records)
        ]
        return schemas.ErrorTableResponse(rows=rows)

    @app.post("/errors/by-strike", response_model=schemas.ErrorTableResponse)
    def errors_by_strike(req: schemas.ErrorsByStrikeRequest) -> schemas.ErrorTableResponse:
        records = [_record_from_dict(d) for d in req.records]
        rows = [
            {
                "model": r.model,
                "strike": r.strike,
                "n": r.n,
                "n_failed": r.n_failed,
                "mean_abs": r.mean_abs,
                "mean_rel": r.mean_rel,
            }
            for r in error_by_strike(records, start=req.start, end=req.end)
        ]
        return schemas.ErrorTableResponse(rows=rows)

    @app.post("/surface", response_model=schemas.SurfaceResponse)
    def surface(req: schemas.SurfaceRequest) -> schemas.SurfaceResponse:
        pm = _cmmv_payload(req.model)
        chains = [OptionChain.from_dict(c) for c in req.chains]
        points, dropped = vol_surface(
            pm,
            req.maturities,
            req.strikes,
            forward=req.forward,
            discounts=req.discounts,
            chains=chains,
            extend_horizon=req.extend_horizon,
        )
        return schemas.SurfaceResponse(
            points=[
                {
                    "strike": p.strike,
                    "maturity_days": p.maturity_days,
                    "predicted_vol": p.predicted_vol,
                    "observed_vol": p.observed_vol,
                }
                for p in points
            ],
            dropped=dropped,
        )

    @app.post("/smile-shift", response_model=schemas.SmileShiftResponse)
    def smile_shift_route(req: schemas.SmileShiftRequest) -> schemas.SmileShiftResponse:
        chain = OptionChain.from_dict(req.chain)
        method = "m1"
        model = None
        if req.model is not None:
            pm = _cmmv_payload(req.model)
            model, method = pm.cmmv, pm.method
        config = req.config.resolve(FitConfig()) if req.config else None
        study = smile_shift(chain, req.shifts, degree=req.degree, config=config, model=model)
        curves = [
            {
                "shift": c.shift,
                "forward": c.forward,
                "strikes": list(c.strikes),
                "vols": list(c.vols),
                "min_strike": c.min_strike,
                "dropped": c.dropped,
                "error": c.error,
            }
            for c in study.curves
        ]
        return schemas.SmileShiftResponse(
            model=PricingModel(method=method, cmmv=study.model).to_dict(),
            report=study.report.to_dict() if study.report else None,
            curves=curves,
        )

    @app.post("/simulate", response_model=schemas.SimulateResponse)
    def simulate(req: schemas.SimulateRequest) -> schemas.SimulateResponse:
        pm = _cmmv_payload(req.model)
        total = req.n_paths * (req.n_steps + 1)
        if total > MAX_SIMULATED_VALUES:
            raise ValueError(
                f"simulation of {total} grid values exceeds the {MAX_SIMULATED_VALUES} response cap"
            )
        paths = simulate_paths(pm.cmmv, req.n_steps, req.horizon, n_paths=req.n_paths, seed=req.seed)
        return schemas.SimulateResponse(
            times=list(paths[0].times),
            paths=[{"brownian": list(p.brownian), "price": list(p.price)} for p in paths],
            seed=req.seed,
        )

    @app.post("/recover")
    def recover_route(req: schemas.RecoverRequest) -> dict:
        times = np.asarray(req.times, dtype=float)
        brownian = (
            np.asarray(req.brownian, dtype=float)
            if req.brownian is not None
            else np.zeros_like(times)
        )
        path = PathGrid(times=times, brownian=brownian, price=np.asarray(req.price, dtype=float), seed=0)
        result = recover(
            path,
            req.horizon,
            n_max=req.n_max,
            s1_window=req.s1_window,
            head_fraction=req.head_fraction,
        )
        return result.to_dict()

    @app.post("/price/call", response_model=schemas.PriceResponse)
    def price_call(req: schemas.PriceRequest) -> schemas.PriceResponse:
        return _price(req, put=False)

    @app.post("/price/put", response_model=schemas.PriceResponse)
    def price_put(req: schemas.PriceRequest) -> schemas.PriceResponse:
        return _price(req, put=True)

    def _price(req: schemas.PriceRequest, put: bool) -> schemas.PriceResponse:
        pm = _cmmv_payload(req.model)
        if (req.x is None) == (req.spot is None):
            raise ValueError("pass exactly one of x (latent state) or spot")
        x = req.x if req.x is not None else invert_ft(pm.cmmv, req.t, req.spot)
        kernel = put_price if put else call_price
        prices = kernel(pm.cmmv, req.t, float(x), np.asarray(req.strikes, dtype=float))
        return schemas.PriceResponse(prices=[float(p) for p in np.atleast_1d(prices)], x=float(x))

    @app.post("/optimizer/benchmark", response_model=schemas.BenchmarkResponse)
    def benchmark(req: schemas.BenchmarkRequest) -> schemas.BenchmarkResponse:
        def sphere(z: np.ndarray) -> float:
            return float(z @ z)

        def rosenbrock(z: np.ndarray) -> float:
            return float(np.sum(100.0 * (z[1:] - z[:-1] ** 2) ** 2 + (1.0 - z[:-1]) ** 2))

        problems = []
        for name, fn, dim, x0, budget, target in (
            ("sphere", sphere, 10, np.ones(10), req.sphere_budget, 1e-10),
            ("rosenbrock", rosenbrock, 5, np.zeros(5), req.rosenbrock_budget, 1e-6),
        ):
            config = CmaEsConfig(dimension=dim, seed=req.seed, target_value=target)
            config = CmaEsConfig(
                dimension=dim,
                seed=req.seed,
                target_value=target,
                max_generations=max(1, budget // config.population),
            )
            result = minimize(fn, x0, config)
            problems.append(
                {
                    "name": name,
                    "dimension": dim,
                    "budget": budget,
                    "evaluations": result.evaluations,
                    "best_value": result.best_value,
                    "target": target,
                    "reached": bool(result.best_value < target),
                    "seed": req.seed,
                }
            )
        return schemas.BenchmarkResponse(problems=problems)

    return app
