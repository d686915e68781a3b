"""Path simulation and the continuous-time recovery harness, discretized.

The recovery chain: quadratic variation of the price gives S^1 (the local
volatility along the path), integrating dS/S^1 rebuilds the Brownian driver,
and covariations against it peel off higher derivative processes S^n one
order at a time. Their values near t=0 estimate the derivatives of f_0 at
the origin, whose factorial-scaled values are the Hermite coefficients of
the whole surface.

Everything here is a windowed discrete estimator: the continuous statements
are exact only in the limit, so each operation exposes its window and the
tests pin convergence rates instead of identities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import CmmvModel, HermiteExpansion, _polyval_cols, heat_table
from .errors import OutOfHorizonError

S1_FLOOR = 1e-12
DEFAULT_N_MAX = 4
DEFAULT_HEAD_FRACTION = 0.02
# Per recursion level (n=2,3,4,...), lag and slope window as multiples of the
# S^1 window. Lags must outpace the accumulated smoothing span of the previous
# level or its increments decorrelate from the Brownian ones.
LAG_FACTORS = (3, 20, 75)
WINDOW_FACTORS = (15, 450, 450)
RESPONSE_FLOOR = 0.2


@dataclass(frozen=True, eq=False)
class PathGrid:
    """One simulated path on a uniform grid."""

    times: np.ndarray
    brownian: np.ndarray
    price: np.ndarray
    seed: int

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.size < 2:
            raise ValueError("grid needs at least 2 points")
        steps = np.diff(t)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise ValueError("grid must be uniform")
        if self.brownian[0] != 0.0:
            raise ValueError("Brownian path must start at 0")
        if not (t.size == self.brownian.size == self.price.size):
            raise ValueError("times/brownian/price must align")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def n_steps(self) -> int:
        return self.times.size - 1


def _coeff_matrix(model: CmmvModel, times: np.ndarray) -> np.ndarray:
    table = heat_table(model.terminal.coefficients)
    v = model.horizon - times
    powers = v[None, :] ** np.arange(table.shape[1])[:, None]
    return table @ powers


def simulate_paths(
    model: CmmvModel,
    n_steps: int,
    horizon: float,
    n_paths: int = 1,
    seed: int = 0,
) -> List[PathGrid]:
    """Exact-increment Brownian paths on [0, horizon], priced through f_t.

    horizon is the last observation time t1 and must sit strictly before the
    model's expiry. Each path draws from its own counter-based stream keyed
    by (seed, path index), so path k is reproducible in isolation.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if not 0.0 < horizon < model.horizon:
        raise OutOfHorizonError(
            "observation horizon must lie inside the model horizon",
            horizon=horizon,
            model_horizon=model.horizon,
        )
    times = np.linspace(0.0, horizon, n_steps + 1)
    dt = horizon / n_steps
    cmat = _coeff_matrix(model, times)
    out = []
    for i in range(n_paths):
        rng = np.random.Generator(np.random.Philox(key=np.array([seed, i], dtype=np.uint64)))
        b = np.empty(n_steps + 1)
        b[0] = 0.0
        np.cumsum(rng.normal(0.0, math.sqrt(dt), size=n_steps), out=b[1:])
        out.append(PathGrid(times=times, brownian=b, price=_polyval_cols(cmat, b), seed=seed))
    return out


def quadratic_variation(series: np.ndarray) -> np.ndarray:
    """Running sum of squared increments, starting at 0."""
    series = np.asarray(series, dtype=float)
    if series.size < 2:
        raise ValueError("need >= 2 points")
    out = np.empty(series.size)
    out[0] = 0.0
    np.cumsum(np.diff(series) ** 2, out=out[1:])
    return out


def covariation(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Running sum of increment cross-products, starting at 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 2:
        raise ValueError("series must align with >= 2 points")
    out = np.empty(x.size)
    out[0] = 0.0
    np.cumsum(np.diff(x) * np.diff(y), out=out[1:])
    return out


def _local_slope(series: np.ndarray, dt: float, window: int) -> np.ndarray:
    """Symmetric-difference slope over +-window//2 steps, clipped at the ends."""
    if window < 2:
        raise ValueError("window must span >= 2 steps")
    m = series.size - 1
    h = max(window // 2, 1)
    idx = np.arange(m + 1)
    lo = np.clip(idx - h, 0, m)
    hi = np.clip(idx + h, 0, m)
    return (series[hi] - series[lo]) / ((hi - lo) * dt)


def default_s1_window(n_steps: int) -> int:
    return max(3, 2 * (n_steps // 1000) + 1)


def recover_s1(
    path: PathGrid, window: Optional[int] = None, qv: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """S^1 along the path: square root of the local QV slope.

    Discretization noise can push the local slope negative; those points are
    floored at 1e-12 and flagged. Passing a qv series overrides the
    discrete quadratic variation (exact-oracle injection).
    """
    w = window or default_s1_window(path.n_steps)
    if qv is None:
        qv = quadratic_variation(path.price)
    slope = _local_slope(np.asarray(qv, dtype=float), path.dt, w)
    floored = slope < S1_FLOOR**2
    s1 = np.sqrt(np.maximum(slope, S1_FLOOR**2))
    return s1, floored


def recover_brownian(path: PathGrid, s1: np.ndarray) -> np.ndarray:
    """Left-endpoint Riemann-Stieltjes sum of dS / S^1, started at 0."""
    s1 = np.asarray(s1, dtype=float)
    if s1.size != path.price.size:
        raise ValueError("s1 must align with the path")
    out = np.empty(s1.size)
    out[0] = 0.0
    np.cumsum(np.diff(path.price) / s1[:-1], out=out[1:])
    return out


def _window_bounds(size: int, window: int) -> Tuple[np.ndarray, np.ndarray]:
    idx = np.arange(size)
    h = max(window // 2, 1)
    return np.clip(idx - h, 0, size - 1), np.clip(idx + h, 0, size - 1)


def _running(x: np.ndarray) -> np.ndarray:
    out = np.empty(x.size + 1)
    out[0] = 0.0
    np.cumsum(x, out=out[1:])
    return out


def _lag_regression_slope(
    prev: np.ndarray, b_hat: np.ndarray, lag: int, window: int
) -> np.ndarray:
    """Windowed slope of the lag-increment covariation of prev against the
    realized lag-increment QV of b_hat (d<prev,B>/d<B,B> rather than /dt;
    identical in the limit, but the realized denominator cancels the chi^2
    fluctuation of the Brownian increments)."""
    n = min(prev.size, b_hat.size)
    lag = min(lag, n - 2)
    d_prev = prev[lag:n] - prev[: n - lag]
    d_b = b_hat[lag:n] - b_hat[: n - lag]
    num = _running(d_prev * d_b)
    den = _running(d_b * d_b)
    lo, hi = _window_bounds(num.size, window)
    dd = den[hi] - den[lo]
    dd = np.where(dd <= 0.0, 1.0, dd)
    return (num[hi] - num[lo]) / dd


def _box_mean(x: np.ndarray, window: int) -> np.ndarray:
    c = _running(x)
    lo, hi = _window_bounds(x.size, window)
    return (c[hi + 1] - c[lo]) / (hi + 1 - lo)


def _kernel_advance(kernel: np.ndarray, b_hat: np.ndarray, lag: int, window: int) -> np.ndarray:
    """Push the effective state-location kernel through one recursion level:
    the windowed estimator reads the previous series at the (lag increment)^2
    weighted midpoints of its windows."""
    n = min(kernel.size, b_hat.size)
    lag = min(lag, n - 2)
    d_b = b_hat[lag:n] - b_hat[: n - lag]
    mid = 0.5 * (kernel[lag:n] + kernel[: n - lag])
    wgt = d_b * d_b
    num = _running(wgt * mid)
    den = _running(wgt)
    lo, hi = _window_bounds(num.size, window)
    dd = den[hi] - den[lo]
    dd = np.where(dd <= 0.0, 1.0, dd)
    return (num[hi] - num[lo]) / dd


def _safe_response(rho: np.ndarray) -> np.ndarray:
    # A transfer factor near zero means the window cannot resolve this level;
    # floor its magnitude so the division stays tame.
    sign = np.where(rho < 0.0, -1.0, 1.0)
    return sign * np.maximum(np.abs(rho), RESPONSE_FLOOR)


def recover_sn(
    path: PathGrid,
    b_hat: np.ndarray,
    prev_series: np.ndarray,
    window: int,
    lag: int = 1,
    response: Optional[np.ndarray] = None,
    cov: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Next derivative process: local slope of the discrete covariation of
    the previous one with the recovered Brownian path.

    Increments are taken at `lag` steps: the previous series is itself a
    windowed estimate, and only increments longer than its smoothing span
    still respond to the Brownian ones. The slope is measured against the
    realized lag-QV of b_hat, and an optional `response` series divides out
    the attenuation left by that smoothing (the driver computes it by pushing
    b_hat through the same window functional). No positivity flooring: higher
    derivatives may legitimately be negative. Passing an exact covariation
    series bypasses all of this and takes its plain time slope.
    """
    if cov is not None:
        return _local_slope(np.asarray(cov, dtype=float), path.dt, window)
    slope = _lag_regression_slope(
        np.asarray(prev_series, dtype=float), np.asarray(b_hat, dtype=float), lag, window
    )
    if response is not None:
        slope = slope / _safe_response(np.asarray(response, dtype=float)[: slope.size])
    return slope


def recover_f(estimates: Sequence[float], horizon: float) -> HermiteExpansion:
    """Truncated Hermite reconstruction from derivative estimates at (0, 0)."""
    est = np.asarray(estimates, dtype=float)
    facts = np.array([math.factorial(k) for k in range(est.size)], dtype=float)
    return HermiteExpansion(est / facts, horizon)


@dataclass
class RecoveryResult:
    expansion: HermiteExpansion
    estimates: List[float]
    s1_floored: int
    s1_window: int
    lags: List[int]
    windows: List[int]
    head_fraction: float
    series: List[np.ndarray] = field(repr=False, default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema": "cmmv-recovery-v1",
            "estimates": self.estimates,
            "alphas": [float(a) for a in self.expansion.alphas],
            "horizon_days": self.expansion.horizon,
            "s1_floored": self.s1_floored,
            "s1_window": self.s1_window,
            "lags": self.lags,
            "windows": self.windows,
            "head_fraction": self.head_fraction,
        }


def _level_schedule(s1w: int, n_max: int, size: int) -> Tuple[List[int], List[int]]:
    lags, wins = [], []
    lag_f, win_f = list(LAG_FACTORS), list(WINDOW_FACTORS)
    while len(lag_f) < n_max - 1:
        lag_f.append(lag_f[-1] * 4)
        win_f.append(win_f[-1])
    for k in range(n_max - 1):
        lags.append(max(1, min(lag_f[k] * s1w, size - 2)))
        wins.append(max(3, min(win_f[k] * s1w, size)))
    return lags, wins


def recover(
    path: PathGrid,
    horizon: float,
    n_max: int = DEFAULT_N_MAX,
    s1_window: Optional[int] = None,
    head_fraction: float = DEFAULT_HEAD_FRACTION,
) -> RecoveryResult:
    """Full discretized recovery: S^1..S^n_max, then Hermite reconstruction.

    Derivative-at-origin estimates average each S^k over the head of its
    grid (t near 0, where B_t is still near 0). horizon is the expiry of the
    reconstructed surface, not the observation window. Each level divides by
    the measured window transfer factor of the previous level's smoothing,
    obtained by pushing b_hat itself through the same functional.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    s1w = s1_window or default_s1_window(path.n_steps)
    size = path.n_steps + 1
    lags, windows = _level_schedule(s1w, n_max, size)

    s1, floored = recover_s1(path, s1w)
    b_hat = recover_brownian(path, s1)
    series = [s1]
    kernel = _box_mean(b_hat, s1w)
    for lag, win in zip(lags, windows):
        rho = recover_sn(path, b_hat, kernel, win, lag=lag)
        series.append(recover_sn(path, b_hat, series[-1], win, lag=lag, response=rho))
        kernel = _kernel_advance(kernel, b_hat, lag, win)

    def head_mean(x: np.ndarray) -> float:
        return float(np.mean(x[: max(int(head_fraction * x.size), 1)]))

    estimates = [float(path.price[0])]
    estimates.extend(head_mean(s) for s in series)
    return RecoveryResult(
        expansion=recover_f(estimates, horizon),
        estimates=estimates,
        s1_floored=int(floored.sum()),
        s1_window=s1w,
        lags=lags,
        windows=windows,
        head_fraction=head_fraction,
        series=series,
    )
