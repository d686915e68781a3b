"""Sticky-Strike reference model.

Implied vols are read off one chain at t=0, summarized by a least-squares
polynomial smile sigma(K), and then frozen: every later date prices strike K
with Black-Scholes at the t=0 vol. The smile is fitted in a centered/scaled
strike coordinate for conditioning and extrapolated flat outside the fitted
strike domain so polynomial wings cannot explode.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, NamedTuple, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import InsufficientDataError, NoImpliedVolError, SchemaMismatchError
from .marketdata import OptionChain
from .pricing import bs_call, implied_vol

VOL_FLOOR = 1e-4
DAYS_PER_YEAR = 365.0


class SmileVol(NamedTuple):
    vol: float
    extrapolated: bool


@dataclass(frozen=True, eq=False)
class SmileModel:
    """Polynomial t=0 smile with flat extrapolation outside the fit domain."""

    coefficients: np.ndarray  # ascending, in the scaled coordinate
    center: float
    scale: float
    strike_domain: Tuple[float, float]
    residual_rms: float
    vol_floor: float = VOL_FLOOR

    def vol_at(self, strike: float) -> SmileVol:
        lo, hi = self.strike_domain
        clamped = min(max(strike, lo), hi)
        u = (clamped - self.center) / self.scale
        vol = float(npoly.polyval(u, self.coefficients))
        return SmileVol(max(vol, self.vol_floor), not lo <= strike <= hi)

    def __call__(self, strike: float) -> float:
        return self.vol_at(strike).vol

    def to_dict(self) -> dict:
        return {
            "schema": "cmmv-smile-v1",
            "coefficients": [float(c) for c in self.coefficients],
            "center": self.center,
            "scale": self.scale,
            "strike_domain": [self.strike_domain[0], self.strike_domain[1]],
            "residual_rms": self.residual_rms,
            "vol_floor": self.vol_floor,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SmileModel":
        if payload.get("schema") != "cmmv-smile-v1":
            raise SchemaMismatchError(
                "not a smile payload", schema=payload.get("schema")
            )
        return cls(
            coefficients=np.asarray(payload["coefficients"], dtype=float),
            center=float(payload["center"]),
            scale=float(payload["scale"]),
            strike_domain=(float(payload["strike_domain"][0]), float(payload["strike_domain"][1])),
            residual_rms=float(payload["residual_rms"]),
            vol_floor=float(payload.get("vol_floor", VOL_FLOOR)),
        )


def fit_smile(chain: OptionChain, degree: int = 4) -> Tuple[SmileModel, List[float]]:
    """Least-squares sigma(K) through the chain's implied vols.

    Strikes whose mids admit no implied vol (outside static bounds) are
    skipped; at least degree+2 must survive. Returns the model and the list
    of skipped strikes.
    """
    if degree < 0:
        raise ValueError("degree must be >= 0")
    tau = chain.days_to_expiry / DAYS_PER_YEAR
    vols = []
    kept = []
    skipped: List[float] = []
    for k, fcall in zip(chain.strikes, chain.forward_calls):
        try:
            iv = implied_vol(fcall * chain.discount, chain.forward, float(k), tau, chain.discount)
        except NoImpliedVolError:
            skipped.append(float(k))
            continue
        kept.append(float(k))
        vols.append(iv)
    if len(kept) < degree + 2:
        raise InsufficientDataError(
            "not enough strikes with valid implied vols",
            usable=len(kept),
            needed=degree + 2,
        )
    kk = np.asarray(kept)
    vv = np.asarray(vols)
    center = 0.5 * (kk[0] + kk[-1])
    scale = max(0.5 * (kk[-1] - kk[0]), 1e-12)
    u = (kk - center) / scale
    coeffs = npoly.polyfit(u, vv, degree)
    rms = float(np.sqrt(np.mean((npoly.polyval(u, coeffs) - vv) ** 2)))
    model = SmileModel(
        coefficients=coeffs,
        center=center,
        scale=scale,
        strike_domain=(float(kk[0]), float(kk[-1])),
        residual_rms=rms,
    )
    return model, skipped


def ss_price(
    smile: SmileModel, forward: float, strike: float, tau_years: float, discount: float = 1.0
) -> float:
    """Cash call price at the frozen t=0 vol for this strike.

    tau <= 0 degenerates to discounted intrinsic value.
    """
    if tau_years <= 0.0:
        return discount * max(forward - strike, 0.0)
    return bs_call(forward, strike, tau_years, smile(strike), discount)
