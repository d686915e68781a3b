"""Calibration of the terminal map from option data.

Two routes:

M1 (one chain, many strikes): differentiate the forward-value call curve in
strike; 1 + dC/dK is the terminal CDF, so xi_K = sqrt(T) * Phi^{-1}(1 + slope)
and the pairs (xi_K, K) sit on the graph of f_T. Fit an increasing polynomial
through them by weighted least squares.

M2 (one strike, many dates): given per-date underlying and option prices,
solve f_t(x_t) = S_t for the latent state, price the option there, and
minimize the squared pricing error over the increasing-polynomial class with
CMA-ES; non-invertible candidates are penalized with +inf so the optimizer
never leaves the admissible set.

Both fits run in normalized coordinates (data-driven affine seed, per-degree
coefficient scales) so one step-size works across index scales, and both
report residuals, the optimizer trace, and the split used for degree
selection by cross-validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import ndtri

from .core import (
    CmmvModel,
    IncreasingPolynomial,
    heat_table,
    invert_increasing,
    poly_from_squares,
    polyval_asc,
)
from .errors import (
    CmmvError,
    FitFailedError,
    FlatRegionError,
    InsufficientDataError,
    InvalidParameterizationError,
)
from .marketdata import OptionChain
from .optimizer import CmaEsConfig, GenerationRecord, MinimizeResult, minimize
from .pricing import _call_kernel_states

SLOPE_CLAMP = 1e-9  # slopes kept inside [-1 + clamp, -clamp]
DEFAULT_DEGREES = (1, 3, 5, 7)
NEAR_TIE_REL = 0.10  # held-out scores within 10% of the best count as tied


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuantilePoint:
    """One graph point (xi_K, K) of the terminal map, with its fit weight."""

    xi: float
    strike: float
    weight: float = 1.0


@dataclass(eq=False)
class M2Dataset:
    """Per-date forward-value observations of the underlying and one call."""

    times: np.ndarray   # days since the first observation, strictly increasing
    stock: np.ndarray   # forward-value underlying S_{t_i}
    option: np.ndarray  # forward-value call mids C_{t_i}
    strike: float
    horizon: float      # days from the first observation to expiry

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        s = np.asarray(self.stock, dtype=float)
        c = np.asarray(self.option, dtype=float)
        if not (t.size == s.size == c.size):
            raise InsufficientDataError("times/stock/option must have equal length")
        if t.size == 0:
            raise InsufficientDataError("empty M2 dataset")
        if np.any(np.diff(t) <= 0):
            raise InsufficientDataError("times must be strictly increasing")
        if t[0] < 0 or t[-1] >= self.horizon:
            raise InsufficientDataError("times must satisfy 0 <= t < horizon")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(c)) and np.all(np.isfinite(t))):
            raise InsufficientDataError("non-finite entries in M2 dataset")
        self.times, self.stock, self.option = t, s, c

    def __len__(self) -> int:
        return int(self.times.size)

    def slice(self, idx) -> "M2Dataset":
        return M2Dataset(self.times[idx], self.stock[idx], self.option[idx], self.strike, self.horizon)


@dataclass(frozen=True)
class FitConfig:
    """Knobs shared by the two calibration routes."""

    seed: int = 0
    sigma0: float = 0.3
    population: Optional[int] = None
    max_generations: Optional[int] = None    # per CMA run
    max_evaluations: int = 50_000            # M2 total budget across restarts
    restarts: int = 3                        # restarts from alternate seeds
    target_rel_residual: float = 1e-9        # stop when rms falls below this x scale
    max_rel_rms: float = 0.05                # fit-failed threshold (relative rms)


@dataclass
class CalibrationReport:
    method: str
    degree: int
    horizon: float
    constant: float
    p: List[float]
    q: List[float]
    coefficients: List[float]
    residual_rms: float
    objective: float
    n_points: int
    termination: str
    evaluations: int
    trace: List[GenerationRecord] = field(default_factory=list)
    restarts: Optional[List[dict]] = None
    split: Optional[dict] = None
    warnings: List[str] = field(default_factory=list)
    residuals: Optional[List[float]] = None

    def to_dict(self) -> dict:
        return {
            "schema": "cmmv-calibration-report-v1",
            "method": self.method,
            "degree": self.degree,
            "horizon_days": self.horizon,
            "constant": self.constant,
            "p": self.p,
            "q": self.q,
            "coefficients": self.coefficients,
            "residual_rms": self.residual_rms,
            "objective": self.objective,
            "n_points": self.n_points,
            "termination": self.termination,
            "evaluations": self.evaluations,
            "trace": [
                {
                    "generation": r.generation,
                    "evaluations": r.evaluations,
                    "best_value": r.best_value,
                    "sigma": r.sigma,
                }
                for r in self.trace
            ],
            "restarts": self.restarts,
            "split": self.split,
            "warnings": self.warnings,
            "residuals": self.residuals,
        }


# ---------------------------------------------------------------------------
# M1: slopes -> quantile points -> weighted fit
# ---------------------------------------------------------------------------


def m1_slopes(chain: OptionChain) -> np.ndarray:
    """dC/dK of the forward-value call curve on the chain's strike grid.

    Quadratic-exact central differences on the (possibly non-uniform) grid,
    one-sided quadratic at the ends; clamped into the open slope interval and
    then monotonized (running max of the CDF values 1 + slope) so the implied
    terminal CDF is nondecreasing.
    """
    k = chain.strikes
    c = chain.forward_calls
    if k.size < 3:
        raise InsufficientDataError("need >= 3 strikes for slope estimates", n=int(k.size))

    def edge(i0, i1, i2):
        # derivative at k[i0] of the parabola through the three edge points
        return (
            c[i0] * (2 * k[i0] - k[i1] - k[i2]) / ((k[i0] - k[i1]) * (k[i0] - k[i2]))
            + c[i1] * (k[i0] - k[i2]) / ((k[i1] - k[i0]) * (k[i1] - k[i2]))
            + c[i2] * (k[i0] - k[i1]) / ((k[i2] - k[i0]) * (k[i2] - k[i1]))
        )

    slopes = np.empty(k.size)
    slopes[0] = edge(0, 1, 2)
    slopes[-1] = edge(-1, -2, -3)
    hl = k[1:-1] - k[:-2]
    hr = k[2:] - k[1:-1]
    slopes[1:-1] = (hl**2 * c[2:] - hr**2 * c[:-2] + (hr**2 - hl**2) * c[1:-1]) / (hl * hr * (hl + hr))
    slopes = np.clip(slopes, -1.0 + SLOPE_CLAMP, -SLOPE_CLAMP)
    cdf = np.maximum.accumulate(1.0 + slopes)
    return cdf - 1.0


def m1_xi(
    strikes: Sequence[float], slopes: Sequence[float], horizon: float
) -> Tuple[List[QuantilePoint], int]:
    """Quantile-map slopes into graph points (xi_K, K).

    Slopes saturated at the clamp bounds carry no quantile information and
    are dropped; the count of drops is returned. Weights are the local strike
    gap (min of the two adjacent gaps among survivors), compensating
    non-uniform grids.
    """
    k = np.asarray(strikes, dtype=float)
    s = np.asarray(slopes, dtype=float)
    if k.size != s.size:
        raise InsufficientDataError("strikes and slopes must align")
    keep = (s > -1.0 + SLOPE_CLAMP) & (s < -SLOPE_CLAMP)
    dropped = int((~keep).sum())
    k, s = k[keep], s[keep]
    if k.size == 0:
        return [], dropped
    xi = math.sqrt(horizon) * ndtri(1.0 + s)
    if k.size == 1:
        weights = np.ones(1)
    else:
        gaps = np.diff(k)
        weights = np.empty(k.size)
        weights[0] = gaps[0]
        weights[-1] = gaps[-1]
        if k.size > 2:
            weights[1:-1] = np.minimum(gaps[:-1], gaps[1:])
    points = [QuantilePoint(float(x), float(kk), float(w)) for x, kk, w in zip(xi, k, weights)]
    return points, dropped


def _decode_params(theta: np.ndarray, degree: int) -> IncreasingPolynomial:
    n = (degree - 1) // 2
    return poly_from_squares(theta[0], theta[1 : n + 2], theta[n + 2 : 2 * n + 2])


def _fit_dimensions(degree: int) -> int:
    if degree < 1 or degree % 2 == 0:
        raise ValueError(f"degree must be odd and >= 1, got {degree}")
    return degree + 1


def _coefficient_scales(degree: int, slope: float, x_scale: float) -> np.ndarray:
    """Per-parameter scales: the constant moves prices by the one-x_scale
    swing, p_j and q_j by sqrt(slope)/x_scale^j (so unit z-moves are
    comparable)."""
    n = (degree - 1) // 2
    dim = degree + 1
    scales = np.empty(dim)
    scales[0] = max(slope * x_scale, 1e-12)
    root = math.sqrt(slope)
    for j in range(n + 1):
        scales[1 + j] = root / x_scale**j
    for j in range(n):
        scales[n + 2 + j] = root / x_scale**j
    return scales


def _restart_starts(z0: np.ndarray, degree: int, restarts: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Seed schedule: the affine seed, its Q-heavy twin (the derivative's
    constant carried by Q instead of P, the other branch of the P/Q
    symmetry), then random perturbations."""
    n = (degree - 1) // 2
    starts = [z0]
    if restarts >= 2 and n >= 1:
        zq = z0.copy()
        zq[n + 2] = z0[1]
        zq[1] = 0.0
        starts.append(zq)
    while len(starts) < restarts:
        starts.append(z0 + rng.normal(0.0, 0.5, size=z0.size))
    return starts


def _minimize_restarts(objective, starts, cfg: FitConfig, target: float, per_run: int):
    best: Optional[MinimizeResult] = None
    infos: List[dict] = []
    spent = 0
    for r, start in enumerate(starts):
        cma = CmaEsConfig(
            dimension=start.size,
            population=cfg.population,
            sigma0=cfg.sigma0,
            max_generations=per_run,
            target_value=target,
            seed=cfg.seed + 7919 * r,
        )
        res = minimize(objective, start, cma)
        spent += res.evaluations
        infos.append(
            {
                "restart": r,
                "best_value": res.best_value,
                "evaluations": res.evaluations,
                "termination": res.termination,
            }
        )
        if best is None or res.best_value < best.best_value:
            best = res
        if best.best_value <= target or spent >= cfg.max_evaluations:
            break
    return best, infos, spent


def m1_fit(
    points: Sequence[QuantilePoint],
    degree: int,
    horizon: float,
    config: Optional[FitConfig] = None,
) -> Tuple[CmmvModel, CalibrationReport]:
    """Weighted least squares of an increasing polynomial through (xi, K).

    CMA-ES in normalized coordinates: the affine seed comes from the
    two-point slope of the data, coefficient j is scaled by the xi-range to
    the j-th power. Monotonicity holds by construction; a residual RMS above
    max_rel_rms of the strike scale raises fit-failed.
    """
    cfg = config or FitConfig()
    dim = _fit_dimensions(degree)
    n = (degree - 1) // 2
    if len(points) < degree + 2:
        raise InsufficientDataError(
            "not enough quantile points for the requested degree",
            n_points=len(points),
            degree=degree,
        )
    xi = np.array([pt.xi for pt in points])
    kk = np.array([pt.strike for pt in points])
    w = np.array([pt.weight for pt in points])
    order = np.argsort(kk, kind="stable")
    xi, kk, w = xi[order], kk[order], w[order]
    wsum = float(w.sum())
    k_scale = float(np.mean(np.abs(kk))) or 1.0

    span = float(xi[-1] - xi[0])
    if span <= 0:
        raise FitFailedError("quantile points are degenerate (no xi spread)")
    a0 = (kk[-1] - kk[0]) / span
    if a0 <= 0:
        raise FitFailedError("strikes not increasing in xi")
    c0 = float(np.mean(kk) - a0 * np.mean(xi))
    x_scale = max(0.5 * span, 1e-12)
    scales = _coefficient_scales(degree, a0, x_scale)

    def objective(z: np.ndarray) -> float:
        theta = z * scales
        try:
            poly = _decode_params(theta, degree)
        except InvalidParameterizationError:
            return float("inf")
        r = polyval_asc(poly.coefficients, xi) - kk
        return float((w * r * r).sum() / wsum)

    z0 = np.zeros(dim)
    z0[0] = c0 / scales[0]
    z0[1] = math.sqrt(a0) / scales[1]
    target = (cfg.target_rel_residual * k_scale) ** 2
    rng = np.random.default_rng(cfg.seed)
    starts = _restart_starts(z0, degree, cfg.restarts, rng)
    res, infos, spent = _minimize_restarts(objective, starts, cfg, target, cfg.max_generations or 600)
    rms = math.sqrt(max(res.best_value, 0.0))
    if not math.isfinite(res.best_value) or rms > cfg.max_rel_rms * k_scale:
        raise FitFailedError(
            "M1 fit stalled above the residual threshold",
            rms=rms,
            threshold=cfg.max_rel_rms * k_scale,
            restarts=infos,
        )
    poly = _decode_params(res.best_x * scales, degree)
    model = CmmvModel(poly, horizon)
    resid = polyval_asc(poly.coefficients, xi) - kk
    report = CalibrationReport(
        method="m1",
        degree=degree,
        horizon=horizon,
        constant=poly.constant,
        p=list(poly.p),
        q=list(poly.q),
        coefficients=list(poly.coefficients),
        residual_rms=rms,
        objective=res.best_value,
        n_points=len(points),
        termination=res.termination,
        evaluations=spent,
        trace=res.history,
        restarts=infos,
        residuals=list(resid),
    )
    return model, report


# ---------------------------------------------------------------------------
# M2: latent state + pricing error
# ---------------------------------------------------------------------------


class _M2Evaluator:
    """Precomputes per-dataset quantities so one objective call is a few
    vector operations: variance powers for the heat table and the strike."""

    def __init__(self, data: M2Dataset):
        self.data = data
        self.v = data.horizon - data.times  # > 0 by the dataset invariant

    def residuals(self, poly: IncreasingPolynomial) -> np.ndarray:
        data = self.data
        coeffs = poly.coefficients
        table = heat_table(coeffs)
        powers = self.v[None, :] ** np.arange(table.shape[1])[:, None]
        x = invert_increasing(table @ powers, data.stock)
        return _call_kernel_states(coeffs, self.v, x, data.strike) - data.option

    def __call__(self, poly: IncreasingPolynomial) -> float:
        with np.errstate(all="ignore"):
            try:
                resid = self.residuals(poly)
            except FlatRegionError:
                return float("inf")
            out = float(resid @ resid)
        return out if math.isfinite(out) else float("inf")


def m2_objective(
    params: Union[IncreasingPolynomial, Tuple[float, Sequence[float], Sequence[float]]],
    data: M2Dataset,
) -> float:
    """Sum of squared option-pricing errors for one candidate terminal map.

    The latent Brownian states solve f_t(x_t) = S_t date by date; candidates
    that cannot be inverted on the needed range (numerically flat anywhere
    the data lives) score +inf, which is the monotonicity penalty.
    """
    if not isinstance(params, IncreasingPolynomial):
        try:
            constant, p, q = params
            params = poly_from_squares(constant, p, q)
        except (InvalidParameterizationError, ValueError, TypeError):
            return float("inf")
    return _M2Evaluator(data)(params)


def m2_calibrate(
    data: M2Dataset,
    degree: int,
    config: Optional[FitConfig] = None,
) -> Tuple[CmmvModel, CalibrationReport]:
    """CMA-ES minimization of the M2 objective with restarts.

    Three restarts from perturbed affine seeds share the evaluation budget;
    a restart that already reaches the target residual short-circuits the
    rest. Fit-failed only when every restart ends badly (non-finite best or
    relative RMS above max_rel_rms).
    """
    cfg = config or FitConfig(max_rel_rms=0.5, target_rel_residual=1e-13)
    dim = _fit_dimensions(degree)
    if len(data) < 10:
        raise InsufficientDataError("M2 needs >= 10 observations", n=len(data))

    b0 = float(data.stock[0])
    dt = np.diff(data.times)
    ds = np.diff(data.stock)
    a0 = float(np.std(ds / np.sqrt(dt), ddof=1)) if len(data) > 2 else 0.0
    if not (math.isfinite(a0) and a0 > 0):
        a0 = 1e-4 * max(abs(b0), 1.0)
    x_scale = math.sqrt(data.horizon)
    scales = _coefficient_scales(degree, a0, x_scale)

    evaluator = _M2Evaluator(data)

    def objective(z: np.ndarray) -> float:
        try:
            poly = _decode_params(z * scales, degree)
        except InvalidParameterizationError:
            return float("inf")
        return evaluator(poly)

    z0 = np.zeros(dim)
    z0[0] = b0 / scales[0]
    z0[1] = math.sqrt(a0) / scales[1]

    c_scale = float(np.mean(np.abs(data.option))) or 1.0
    target = len(data) * (cfg.target_rel_residual * c_scale) ** 2
    probe = CmaEsConfig(dimension=dim, population=cfg.population, sigma0=cfg.sigma0)
    per_run = cfg.max_generations or max(1, cfg.max_evaluations // (cfg.restarts * probe.population))
    rng = np.random.default_rng(cfg.seed)
    starts = _restart_starts(z0, degree, cfg.restarts, rng)
    best, restart_info, spent = _minimize_restarts(objective, starts, cfg, target, per_run)

    rms = math.sqrt(max(best.best_value, 0.0) / len(data))
    if not math.isfinite(best.best_value) or rms > cfg.max_rel_rms * c_scale:
        raise FitFailedError(
            "all M2 restarts stalled above the residual threshold",
            rms=rms,
            threshold=cfg.max_rel_rms * c_scale,
            restarts=restart_info,
        )
    poly = _decode_params(best.best_x * scales, degree)
    model = CmmvModel(poly, data.horizon)
    per_date = evaluator.residuals(poly)
    report = CalibrationReport(
        method="m2",
        degree=degree,
        horizon=data.horizon,
        constant=poly.constant,
        p=list(poly.p),
        q=list(poly.q),
        coefficients=list(poly.coefficients),
        residual_rms=rms,
        objective=best.best_value,
        n_points=len(data),
        termination=best.termination,
        evaluations=spent,
        trace=best.history,
        restarts=restart_info,
        residuals=list(per_date),
    )
    return model, report


# ---------------------------------------------------------------------------
# degree selection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DegreeSelection:
    degree: int
    scores: Dict[int, float]
    failures: Dict[int, str]
    split: dict


def chronological_split(data: M2Dataset, train_fraction: float = 0.3) -> Tuple[M2Dataset, M2Dataset]:
    """Earliest train_fraction of observations for training, rest for test."""
    n_train = max(2, int(math.ceil(train_fraction * len(data))))
    if n_train >= len(data):
        raise InsufficientDataError("split leaves no test observations", n=len(data))
    return data.slice(slice(0, n_train)), data.slice(slice(n_train, None))


def select_degree(
    method: str,
    data,
    horizon: Optional[float] = None,
    degrees: Sequence[int] = DEFAULT_DEGREES,
    train_fraction: Optional[float] = None,
    split_seed: int = 0,
    config: Optional[FitConfig] = None,
) -> DegreeSelection:
    """Cross-validated degree choice; exact score ties go to the lower degree.

    M1: `data` is the quantile-point list, split at random into 70/30
    train/test strikes (fixed seed). M2: `data` is an M2Dataset, split
    chronologically with the earliest 30% training. Degrees whose fit fails
    or whose training set is too small are disqualified, not fatal; if all
    degrees fail the selection fails.
    """
    scores: Dict[int, float] = {}
    failures: Dict[int, str] = {}
    cfg = config or FitConfig()
    if method == "m1":
        points = list(data)
        frac = 0.7 if train_fraction is None else train_fraction
        rng = np.random.default_rng(split_seed)
        perm = rng.permutation(len(points))
        n_train = max(2, int(round(frac * len(points))))
        train_idx = np.sort(perm[:n_train])
        test_idx = np.sort(perm[n_train:])
        if test_idx.size == 0:
            raise InsufficientDataError("split leaves no test points", n=len(points))
        train = [points[i] for i in train_idx]
        test = [points[i] for i in test_idx]
        split = {"method": "random", "train_fraction": frac, "seed": split_seed, "n_train": len(train), "n_test": len(test)}
        xi_t = np.array([pt.xi for pt in test])
        k_t = np.array([pt.strike for pt in test])
        w_t = np.array([pt.weight for pt in test])
        score_scale = float(np.mean(np.abs(k_t))) or 1.0
        for deg in degrees:
            if len(train) < deg + 2:
                failures[deg] = "too few training points"
                continue
            try:
                model, _ = m1_fit(train, deg, horizon if horizon is not None else 1.0, config)
            except CmmvError as exc:
                failures[deg] = str(exc)
                continue
            r = polyval_asc(model.terminal.coefficients, xi_t) - k_t
            scores[deg] = float((w_t * r * r).sum() / w_t.sum())
    elif method == "m2":
        frac = 0.3 if train_fraction is None else train_fraction
        train, test = chronological_split(data, frac)
        split = {"method": "chronological", "train_fraction": frac, "n_train": len(train), "n_test": len(test)}
        score_scale = float(np.mean(np.abs(test.option))) or 1.0
        for deg in degrees:
            if len(train) < max(deg + 2, 10):
                failures[deg] = "too few training observations"
                continue
            try:
                model, _ = m2_calibrate(train, deg, config)
            except CmmvError as exc:
                failures[deg] = str(exc)
                continue
            scores[deg] = m2_objective(model.terminal, test) / len(test)
    else:
        raise ValueError(f"method must be 'm1' or 'm2', got {method!r}")

    if not scores:
        raise FitFailedError("every candidate degree failed", failures=failures)
    # Near-tie parsimony: scores within 10% of the best (or jointly at the
    # optimizer's numerical floor) are tied, and ties go to the lower degree.
    best_score = min(scores.values())
    floor = (10.0 * cfg.target_rel_residual * score_scale) ** 2
    band = best_score + max(NEAR_TIE_REL * best_score, floor)
    best_deg = min(deg for deg, sc in scores.items() if sc <= band)
    return DegreeSelection(degree=best_deg, scores=scores, failures=failures, split=split)


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------


def m1_calibrate(
    chain: OptionChain,
    degree: Optional[int] = None,
    degrees: Sequence[int] = DEFAULT_DEGREES,
    config: Optional[FitConfig] = None,
) -> Tuple[CmmvModel, CalibrationReport]:
    """Full M1 pipeline on one chain; degree cross-validated when not given."""
    horizon = float(chain.days_to_expiry)
    if horizon <= 0:
        raise InsufficientDataError("chain is at or past expiry", days=chain.days_to_expiry)
    slopes = m1_slopes(chain)
    points, dropped = m1_xi(chain.strikes, slopes, horizon)
    selection = None
    if degree is None:
        selection = select_degree("m1", points, horizon=horizon, degrees=degrees, config=config)
        degree = selection.degree
    model, report = m1_fit(points, degree, horizon, config)
    if dropped:
        report.warnings.append(f"{dropped} saturated slope points dropped")
    if selection is not None:
        report.split = selection.split
        report.split["scores"] = {str(k): v for k, v in selection.scores.items()}
        report.split["failures"] = {str(k): v for k, v in selection.failures.items()}
    return model, report


def build_m2_dataset(chains: Sequence[OptionChain], strike: float) -> Tuple[M2Dataset, List[str]]:
    """Assemble the (S_t, C_t(K)) series from per-date chains.

    Times are measured from the earliest chain; its days-to-expiry is the
    horizon. Dates missing the strike (or sitting at expiry) are skipped with
    a warning so sparse trading does not kill the series.
    """
    if not chains:
        raise InsufficientDataError("no chains supplied")
    chains = sorted(chains, key=lambda c: c.quote_date)
    horizon = float(chains[0].days_to_expiry)
    times, stock, option = [], [], []
    warnings: List[str] = []
    for ch in chains:
        t = horizon - float(ch.days_to_expiry)
        if ch.days_to_expiry <= 0:
            warnings.append(f"{ch.quote_date}: at expiry, skipped")
            continue
        hits = np.where(np.isclose(ch.strikes, strike, rtol=0, atol=1e-6))[0]
        if hits.size == 0:
            warnings.append(f"{ch.quote_date}: strike {strike} not quoted, skipped")
            continue
        times.append(t)
        stock.append(float(ch.forward))
        option.append(float(ch.forward_calls[hits[0]]))
    if len(times) < 2:
        raise InsufficientDataError("fewer than 2 usable observations", usable=len(times))
    data = M2Dataset(np.array(times), np.array(stock), np.array(option), float(strike), horizon)
    return data, warnings
