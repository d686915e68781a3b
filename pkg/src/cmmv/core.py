"""Model core: increasing polynomial maps evolved under the heat kernel.

The price process is modelled as S_t = f_t(B_t) with B a Brownian motion
(variance-time measured in calendar days) and f_t a family of increasing maps
pinned at the horizon T by a terminal polynomial f_T. The martingale property
forces the family to solve the time-reversed heat equation

    d/dt f_t + 1/2 d^2/dx^2 f_t = 0,

i.e. f_t is the Gaussian smoothing of f_T with variance T - t. For polynomial
f_T the smoothing is closed form: writing f_T(x) = sum_k a_k x^k,

    f_t(x) = E[f_T(x + sqrt(v) Z)],  v = T - t,  Z ~ N(0,1)

is again a polynomial whose coefficients are polynomials in v with Gaussian
even-moment weights. Everything here works on ascending coefficient vectors.

Monotonicity of f_T is guaranteed structurally: the derivative is parameterized
as a sum of two squares, f_T' = P^2 + Q^2 with deg Q < deg P, which is
nonnegative everywhere, makes deg f_T odd, and covers exactly the polynomials
that are nonnegative on the whole line (scaled Fejer-Riesz form). Gaussian
smoothing preserves monotonicity, so every f_t in the family is increasing too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import (
    FlatRegionError,
    InvalidParameterizationError,
    OutOfHorizonError,
)

ArrayLike = Union[float, Sequence[float], np.ndarray]

# Bracketed inversion targets |f(x) - y| <= INVERT_TOL_ABS + INVERT_TOL_REL*|y|.
INVERT_TOL_ABS = 1e-10
INVERT_TOL_REL = 1e-12


# ---------------------------------------------------------------------------
# polynomial helpers (ascending coefficients throughout)
# ---------------------------------------------------------------------------


def _trim(coeffs: ArrayLike) -> np.ndarray:
    """Float array with exact trailing zeros removed; may come back empty."""
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if c.ndim != 1:
        raise ValueError("coefficient array must be one-dimensional")
    nz = np.nonzero(c)[0]
    return c[: nz[-1] + 1].copy() if nz.size else c[:0].copy()


def polyval_asc(coeffs: np.ndarray, x: ArrayLike):
    """Evaluate an ascending-coefficient polynomial at scalar or array x."""
    return npoly.polyval(x, coeffs)


def polyder_asc(coeffs: np.ndarray) -> np.ndarray:
    """Ascending coefficients of the derivative."""
    if len(coeffs) <= 1:
        return np.zeros(1)
    return coeffs[1:] * np.arange(1, len(coeffs))


def _polyval_cols(cmat: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Horner over a coefficient matrix: column i evaluated at x[i]."""
    y = np.broadcast_to(cmat[-1], x.shape).astype(float)
    for row in cmat[-2::-1]:
        y = y * x + row
    return y


def _double_factorial_odd(j: int) -> float:
    """(2j-1)!! = E[Z^(2j)] for Z ~ N(0,1); equals 1 for j = 0."""
    out = 1.0
    for m in range(1, 2 * j, 2):
        out *= m
    return out


def heat_table(coeffs: np.ndarray) -> np.ndarray:
    """Table A with b_i(v) = sum_j A[i, j] v^j the smoothed coefficients.

    Row i collects the contributions of a_{i+2j} through the even Gaussian
    moments: A[i, j] = a_{i+2j} * C(i+2j, i) * (2j-1)!!. Evaluating the rows
    at v = T - t gives the coefficient vector of f_t in O(d^2) once the table
    is built, and differentiating in v is a polynomial operation, which is what
    the heat-equation checks and the time-derivative hooks use.
    """
    c = np.asarray(coeffs, dtype=float)
    d = len(c) - 1
    ncol = d // 2 + 1
    table = np.zeros((d + 1, ncol))
    for i in range(d + 1):
        for j in range((d - i) // 2 + 1):
            table[i, j] = c[i + 2 * j] * math.comb(i + 2 * j, i) * _double_factorial_odd(j)
    return table


def heat_evolve(coeffs: ArrayLike, v: float) -> np.ndarray:
    """Coefficients of the Gaussian smoothing by variance v.

    Exact polynomial identity, valid for any real v; negative v undoes the
    smoothing (this is how the Hermite route reconstructs earlier maps).
    """
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    table = heat_table(c)
    return table @ (float(v) ** np.arange(table.shape[1]))


# ---------------------------------------------------------------------------
# increasing terminal polynomial
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class IncreasingPolynomial:
    """Odd-degree polynomial with derivative P^2 + Q^2, hence nondecreasing.

    Parameters are the integrating constant and the ascending coefficients of
    P and Q. Q may be empty (or all zeros); P must have a nonzero leading
    coefficient after trimming and strictly dominate Q in degree. The expanded
    map is strictly increasing unless P and Q share a real root, where the
    derivative touches zero at an isolated point.
    """

    constant: float
    p: np.ndarray
    q: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        p = _trim(self.p)
        q = _trim(self.q)
        if not math.isfinite(self.constant):
            raise InvalidParameterizationError("constant must be finite")
        if p.size == 0:
            raise InvalidParameterizationError("P must have a nonzero coefficient")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
            raise InvalidParameterizationError("coefficients must be finite")
        if q.size >= p.size:
            raise InvalidParameterizationError(
                "deg Q must be strictly less than deg P",
                deg_p=int(p.size - 1),
                deg_q=int(q.size - 1),
            )
        deriv = np.convolve(p, p)
        if q.size:
            qq = np.convolve(q, q)
            deriv[: qq.size] += qq
        coeffs = np.concatenate(([self.constant], deriv / np.arange(1, deriv.size + 1)))
        for name, value in (("p", p), ("q", q), ("derivative_coefficients", deriv), ("coefficients", coeffs)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x: ArrayLike):
        return polyval_asc(self.coefficients, x)


def poly_from_squares(constant: float, p: ArrayLike, q: ArrayLike = ()) -> IncreasingPolynomial:
    """Build the increasing polynomial with f' = P^2 + Q^2 and f(0) = constant."""
    return IncreasingPolynomial(float(constant), np.asarray(p, dtype=float), np.asarray(q, dtype=float))


# ---------------------------------------------------------------------------
# the model: terminal map plus horizon
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CmmvModel:
    """Terminal increasing map and variance-time horizon T (calendar days).

    The full family f_t, 0 <= t <= T, is derived from the terminal map by heat
    evolution with variance v = T - t; the moment table is precomputed once so
    per-date coefficient lookups are a dot product.
    """

    terminal: IncreasingPolynomial
    horizon: float

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise InvalidParameterizationError("horizon must be a positive finite number of days")
        table = heat_table(self.terminal.coefficients)
        table.setflags(write=False)
        object.__setattr__(self, "_table", table)

    def _check_time(self, t: float) -> float:
        t = float(t)
        if not math.isfinite(t) or t < 0.0:
            raise ValueError(f"time must be finite and nonnegative, got {t}")
        if t > self.horizon:
            raise OutOfHorizonError(
                f"time {t} beyond model horizon {self.horizon}", t=t, horizon=self.horizon
            )
        return t

    def coeffs_at(self, t: float) -> np.ndarray:
        """Ascending coefficients of f_t."""
        t = self._check_time(t)
        v = self.horizon - t
        return self._table @ (v ** np.arange(self._table.shape[1]))

    def ddt_coeffs_at(self, t: float) -> np.ndarray:
        """Ascending coefficients of (d/dt) f_t, i.e. minus the v-derivative."""
        t = self._check_time(t)
        v = self.horizon - t
        j = np.arange(self._table.shape[1])
        powers = np.concatenate(([0.0], v ** j[:-1])) if j.size > 1 else np.zeros(1)
        return -(self._table @ (j * powers))

    def deriv_coeffs_at(self, t: float) -> np.ndarray:
        return polyder_asc(self.coeffs_at(t))

    def to_dict(self) -> dict:
        return {
            "schema": "cmmv-model-v1",
            "horizon_days": self.horizon,
            "constant": self.terminal.constant,
            "p": list(self.terminal.p),
            "q": list(self.terminal.q),
            "f_coeffs": list(self.terminal.coefficients),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "CmmvModel":
        from .errors import SchemaMismatchError

        if not isinstance(payload, dict) or payload.get("schema") != "cmmv-model-v1":
            raise SchemaMismatchError(
                "expected a cmmv-model-v1 payload", found=payload.get("schema") if isinstance(payload, dict) else None
            )
        try:
            terminal = poly_from_squares(payload["constant"], payload["p"], payload.get("q", ()))
            model = cls(terminal, float(payload["horizon_days"]))
        except KeyError as exc:
            raise SchemaMismatchError(f"model payload missing field {exc}") from exc
        stored = payload.get("f_coeffs")
        if stored is not None and not np.allclose(
            stored, terminal.coefficients, rtol=1e-12, atol=1e-12 * max(1.0, float(np.max(np.abs(terminal.coefficients))))
        ):
            raise SchemaMismatchError("f_coeffs inconsistent with (constant, p, q)")
        return model


# ---------------------------------------------------------------------------
# evaluation / inversion
# ---------------------------------------------------------------------------


def eval_ft(model: CmmvModel, t: float, x: ArrayLike):
    """f_t(x) for scalar or array x."""
    out = polyval_asc(model.coeffs_at(t), x)
    return float(out) if np.isscalar(x) or np.ndim(x) == 0 else out


def deriv_ft(model: CmmvModel, t: float, x: ArrayLike):
    """Spatial derivative f_t'(x); strictly positive wherever P, Q share no root."""
    out = polyval_asc(model.deriv_coeffs_at(t), x)
    return float(out) if np.isscalar(x) or np.ndim(x) == 0 else out


def invert_increasing(
    coeffs: np.ndarray,
    targets: ArrayLike,
    tol_abs: float = INVERT_TOL_ABS,
    tol_rel: float = INVERT_TOL_REL,
) -> np.ndarray:
    """Solve f(x) = y for an increasing polynomial, vectorized over targets.

    `coeffs` is either a single ascending coefficient vector shared by all
    targets or a matrix whose column i is the polynomial for targets[i].
    Bracket by geometric expansion from 0, bisect to float resolution, then a
    short Newton polish; the residual is verified against the tolerance and a
    flat-region error is raised when the map cannot be bracketed or the
    residual cannot be met (derivative collapsing at the root).
    """
    y = np.atleast_1d(np.asarray(targets, dtype=float))
    cmat = np.asarray(coeffs, dtype=float)
    if cmat.ndim == 1:
        cmat = cmat[:, None]
    if cmat.shape[1] not in (1, y.size):
        raise ValueError("coefficient matrix does not match target vector")
    if cmat.shape[0] < 2 or not np.any(cmat[1:]):
        raise FlatRegionError("constant map cannot be inverted")
    cmat = np.broadcast_to(cmat, (cmat.shape[0], y.size))
    dmat = cmat[1:] * np.arange(1, cmat.shape[0])[:, None]

    def g(x):
        return _polyval_cols(cmat, x) - y

    g0 = g(np.zeros(y.size))
    lo = np.zeros(y.size)
    hi = np.zeros(y.size)
    right = g0 < 0.0
    bracketed = g0 == 0.0
    step = np.ones(y.size)
    for _ in range(1200):
        rem = ~bracketed
        if not rem.any():
            break
        cand = np.where(right, step, -step)
        gc = g(cand)
        hit = rem & (np.where(right, gc >= 0.0, gc <= 0.0))
        miss = rem & ~hit
        hi = np.where(hit & right, cand, hi)
        lo = np.where(hit & ~right, cand, lo)
        lo = np.where(miss & right, cand, lo)
        hi = np.where(miss & ~right, cand, hi)
        bracketed |= hit
        step = np.where(miss, step * 2.0, step)
        if step.max() > 1e300:
            break
    if not bracketed.all():
        raise FlatRegionError(
            "targets could not be bracketed; map is numerically flat",
            n_failed=int((~bracketed).sum()),
        )

    for _ in range(110):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        lo = np.where(gm < 0.0, mid, lo)
        hi = np.where(gm > 0.0, mid, hi)
        exact = gm == 0.0
        lo = np.where(exact, mid, lo)
        hi = np.where(exact, mid, hi)
        if np.all(hi - lo <= 1e-15 * np.maximum(1.0, np.abs(lo))):
            break
    x = 0.5 * (lo + hi)

    for _ in range(3):
        gx = g(x)
        dx = _polyval_cols(dmat, x)
        stepn = np.where(dx != 0.0, gx / np.where(dx != 0.0, dx, 1.0), 0.0)
        x = x - stepn

    resid = np.abs(g(x))
    tol = tol_abs + tol_rel * np.abs(y)
    if np.any(resid > tol):
        raise FlatRegionError(
            "inversion residual above tolerance (derivative flat at the root)",
            worst_residual=float(resid.max()),
            tolerance=float(tol[np.argmax(resid)]),
        )
    return x


def invert_ft(model: CmmvModel, t: float, price: ArrayLike):
    """State x with f_t(x) = price; scalar in, scalar out."""
    x = invert_increasing(model.coeffs_at(t), price)
    return float(x[0]) if np.isscalar(price) or np.ndim(price) == 0 else x


def local_vol(model: CmmvModel, t: float, price: ArrayLike):
    """Diffusion coefficient in price space: f_t'(f_t^{-1}(price))."""
    coeffs = model.coeffs_at(t)
    x = invert_increasing(coeffs, price)
    out = polyval_asc(polyder_asc(coeffs), x)
    return float(out[0]) if np.isscalar(price) or np.ndim(price) == 0 else out


# ---------------------------------------------------------------------------
# Hermite expansion
# ---------------------------------------------------------------------------


def hermite_phi(n: int, x: ArrayLike, t: float):
    """Heat polynomial phi_n(x, t) = t^{n/2} He_n(x / sqrt t).

    Computed by the recurrence phi_{k+1} = x phi_k - k t phi_{k-1}, which keeps
    the t = 0 case (phi_n = x^n) exact. Each phi_n solves the time-reversed
    heat equation, so expansions in phi automatically stay in the model family.
    """
    if n < 0:
        raise ValueError("order must be nonnegative")
    if t < 0:
        raise ValueError("t must be nonnegative")
    xs = np.asarray(x, dtype=float)
    prev = np.ones_like(xs)
    if n == 0:
        out = prev
    else:
        cur = xs.copy()
        for k in range(1, n):
            prev, cur = cur, xs * cur - k * t * prev
        out = cur
    return float(out) if np.ndim(x) == 0 else out


@dataclass(frozen=True, eq=False)
class HermiteExpansion:
    """Coefficients alpha_k = f_0^{(k)}(0) / k! of the heat-polynomial series.

    Reconstructs any member of the family via f_t(x) = sum_k alpha_k phi_k(x, t);
    for polynomial terminal maps the series is finite and exact (no remainder).
    """

    alphas: np.ndarray
    horizon: float

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alphas, dtype=float))
        a.setflags(write=False)
        object.__setattr__(self, "alphas", a)

    def reconstruct(self, x: ArrayLike, t: float):
        xs = np.asarray(x, dtype=float)
        prev = np.ones_like(xs)
        total = self.alphas[0] * prev
        if self.alphas.size > 1:
            cur = xs.copy()
            total = total + self.alphas[1] * cur
            for k in range(1, self.alphas.size - 1):
                prev, cur = cur, xs * cur - k * float(t) * prev
                total = total + self.alphas[k + 1] * cur
        return float(total) if np.ndim(x) == 0 else total


def hermite_expand(model: CmmvModel) -> HermiteExpansion:
    """Exact heat-polynomial coefficients of the model.

    The ascending coefficients of f_0 are precisely f_0^{(k)}(0)/k!, so the
    expansion is read off the fully-smoothed map with no extra work.
    """
    return HermiteExpansion(model.coeffs_at(0.0), model.horizon)
