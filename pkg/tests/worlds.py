"""Synthetic market worlds shared across the test suite.

A truth model at index scale (forward near 2100, 184-day horizon) generates
chains the way the data pipeline expects them: cash call/put mids consistent
with a per-date discount factor and forward, assembled into the CSV layout
the ingestion layer parses. Tests then recover the truth and compare.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from datetime import date, timedelta
from typing import List, Optional, Sequence

import numpy as np

from cmmv.core import CmmvModel, eval_ft, poly_from_squares
from cmmv.marketdata import OptionChain, build_chain, parse_chain
from cmmv.pricing import call_price

QUOTE_DATE0 = date(2016, 7, 20)
EXPIRY = date(2017, 1, 20)  # 184 calendar days after QUOTE_DATE0


def truth_cubic(constant: float = 2100.0, p=(5.2, -0.05), q=(1.0,), horizon: float = 184.0) -> CmmvModel:
    """Mildly skewed cubic at index scale; the default truth for round trips."""
    return CmmvModel(poly_from_squares(constant, p, q), horizon)


def default_strikes(n: int = 96, lo: float = 1200.0, hi: float = 2600.0) -> np.ndarray:
    return np.linspace(lo, hi, n)


def brownian_path(n_days: int, seed: int = 0) -> np.ndarray:
    """Daily Brownian values B_0..B_n with day-unit variance."""
    rng = np.random.default_rng(seed)
    return np.concatenate(([0.0], np.cumsum(rng.standard_normal(n_days))))


def discount_at(days_to_expiry: int, rate: float = 0.02) -> float:
    return math.exp(-rate * days_to_expiry / 365.0)


@dataclass
class SyntheticQuotes:
    """One quote date's worth of consistent cash quotes."""

    quote_date: date
    expiry: date
    strikes: np.ndarray
    call_mids: np.ndarray
    put_mids: np.ndarray
    discount: float
    forward: float


def quotes_at(
    model: CmmvModel,
    t: float,
    x: float,
    strikes: Sequence[float],
    quote_date: date,
    expiry: date,
    rate: float = 0.02,
    noise: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> SyntheticQuotes:
    strikes = np.asarray(strikes, dtype=float)
    df = discount_at((expiry - quote_date).days, rate)
    forward = eval_ft(model, t, x)
    fv_calls = call_price(model, t, x, strikes)
    call_mids = df * fv_calls
    put_mids = call_mids - df * (forward - strikes)
    if noise > 0.0:
        if rng is None:
            rng = np.random.default_rng(0)
        call_mids = call_mids * (1.0 + noise * rng.standard_normal(strikes.size))
        put_mids = put_mids * (1.0 + noise * rng.standard_normal(strikes.size))
    return SyntheticQuotes(
        quote_date=quote_date,
        expiry=expiry,
        strikes=strikes,
        call_mids=call_mids,
        put_mids=put_mids,
        discount=df,
        forward=forward,
    )


def quotes_to_csv(quote_sets: Sequence[SyntheticQuotes], spread: float = 0.0, volume: int = 100) -> str:
    """Render quote sets as the ingestion CSV (with an ignored extra column)."""
    buf = io.StringIO()
    buf.write("quote_date,expiry,type,strike,bid,ask,volume,delta\n")
    for qs in quote_sets:
        for side, mids in (("C", qs.call_mids), ("P", qs.put_mids)):
            for k, m in zip(qs.strikes, mids):
                half = 0.5 * spread * abs(m)
                bid = max(m - half, 0.0)
                ask = m + half
                buf.write(
                    f"{qs.quote_date.isoformat()},{qs.expiry.isoformat()},{side},"
                    f"{k:.10g},{bid:.12g},{ask:.12g},{volume},0.5\n"
                )
    return buf.getvalue()


def chain_from_quotes(qs: SyntheticQuotes, min_volume: int = 1) -> OptionChain:
    report = parse_chain(io.StringIO(quotes_to_csv([qs])))
    assert not report.rejects
    return build_chain(report.rows, qs.quote_date, qs.expiry, min_volume=min_volume)


def world_chains(
    model: CmmvModel,
    strikes: Sequence[float],
    n_days: int,
    path_seed: int = 0,
    rate: float = 0.02,
    noise: float = 0.0,
    noise_seed: int = 1,
    stride: int = 1,
) -> List[OptionChain]:
    """Chains along one simulated daily Brownian path, t = 0, stride, 2*stride, ...

    The model horizon must be n_days so that the last chain sits at expiry
    minus zero days; chains are built through the full CSV + parity pipeline.
    """
    b = brownian_path(n_days, seed=path_seed)
    rng = np.random.default_rng(noise_seed)
    chains = []
    for i in range(0, n_days + 1, stride):
        t = float(i)
        if t >= model.horizon:
            break
        qd = QUOTE_DATE0 + timedelta(days=i)
        expiry = QUOTE_DATE0 + timedelta(days=int(model.horizon))
        qs = quotes_at(model, t, b[i], strikes, qd, expiry, rate=rate, noise=noise, rng=rng)
        chains.append(chain_from_quotes(qs))
    return chains
