"""Option-chain ingestion and put-call-parity normalization.

Quotes come in as CSV rows (quote_date, expiry, type, strike, bid, ask,
volume). Per (quote_date, expiry) pair the discount factor and forward are
regressed from parity, C - P = DF*F - DF*K, using only the option quotes
themselves: the underlying print times are unknown, so no external spot
series is trusted. Call mids are then divided by DF into forward-value units,
which is what the calibration layer consumes (1 + dC/dK is then a bona fide
CDF value). Strikes whose forward-value call leaves the static no-arbitrage
band [max(F-K,0), F] by more than 0.5% of F are dropped with a count.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DataError, InsufficientDataError, ParityRegressionError

REQUIRED_COLUMNS = ("quote_date", "expiry", "type", "strike", "bid", "ask", "volume")
ARBITRAGE_SLACK = 0.005  # band slack as a fraction of the forward


@dataclass(frozen=True)
class RawQuoteRow:
    quote_date: date
    expiry: date
    strike: float
    side: str  # "C" or "P"
    bid: float
    ask: float
    volume: int


@dataclass(frozen=True)
class RejectedRow:
    line_no: int
    reason: str
    raw: dict


@dataclass
class ParseReport:
    rows: List[RawQuoteRow]
    rejects: List[RejectedRow]


@dataclass(frozen=True)
class ParityFit:
    discount: float
    forward: float
    r_squared: float
    n_strikes: int


@dataclass(eq=False)
class OptionChain:
    """One quote date / expiry pair, cleaned and parity-normalized."""

    quote_date: date
    expiry: date
    days_to_expiry: int
    strikes: np.ndarray       # strictly increasing, strikes with a call quote
    call_mids: np.ndarray     # cash mids aligned with strikes
    put_mids: np.ndarray      # aligned, NaN where the put side is missing
    discount: float
    forward: float
    parity_r2: float
    forward_calls: np.ndarray  # call_mids / discount
    dropped: int = 0           # strikes removed by the arbitrage band

    def to_dict(self) -> dict:
        return {
            "schema": "cmmv-chain-v1",
            "quote_date": self.quote_date.isoformat(),
            "expiry": self.expiry.isoformat(),
            "days_to_expiry": self.days_to_expiry,
            "strikes": list(self.strikes),
            "call_mids": list(self.call_mids),
            "put_mids": [None if math.isnan(p) else p for p in self.put_mids],
            "discount": self.discount,
            "forward": self.forward,
            "parity_r2": self.parity_r2,
            "forward_calls": list(self.forward_calls),
            "dropped": self.dropped,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "OptionChain":
        from .errors import SchemaMismatchError

        if not isinstance(payload, dict) or payload.get("schema") != "cmmv-chain-v1":
            raise SchemaMismatchError("expected a cmmv-chain-v1 payload")
        return cls(
            quote_date=date.fromisoformat(payload["quote_date"]),
            expiry=date.fromisoformat(payload["expiry"]),
            days_to_expiry=int(payload["days_to_expiry"]),
            strikes=np.asarray(payload["strikes"], dtype=float),
            call_mids=np.asarray(payload["call_mids"], dtype=float),
            put_mids=np.array([np.nan if p is None else p for p in payload["put_mids"]], dtype=float),
            discount=float(payload["discount"]),
            forward=float(payload["forward"]),
            parity_r2=float(payload["parity_r2"]),
            forward_calls=np.asarray(payload["forward_calls"], dtype=float),
            dropped=int(payload.get("dropped", 0)),
        )


def mid(bid: float, ask: float) -> float:
    """Quote midpoint (bid+ask)/2; requires ask >= bid >= 0."""
    if not (0.0 <= bid <= ask):
        raise DataError("mid requires 0 <= bid <= ask", bid=bid, ask=ask)
    return 0.5 * (bid + ask)


def parse_chain(source: Union[str, Path, io.TextIOBase]) -> ParseReport:
    """Read quote rows from CSV; malformed rows are itemized, never dropped silently.

    The header must contain the required columns; extra columns are ignored.
    """
    if isinstance(source, (str, Path)):
        try:
            handle = open(source, "r", newline="")
        except OSError as exc:
            raise DataError(f"cannot read quote file: {exc}") from exc
        close = True
    else:
        handle, close = source, False
    try:
        reader = csv.DictReader(handle)
        header = reader.fieldnames
        if header is None:
            raise DataError("quote file is empty (no header)")
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise DataError(f"quote file header missing columns: {missing}", header=list(header))
        rows: List[RawQuoteRow] = []
        rejects: List[RejectedRow] = []
        for line_no, rec in enumerate(reader, start=2):
            try:
                rows.append(_parse_row(rec))
            except (ValueError, TypeError) as exc:
                rejects.append(RejectedRow(line_no=line_no, reason=str(exc), raw=dict(rec)))
        return ParseReport(rows=rows, rejects=rejects)
    finally:
        if close:
            handle.close()


def _parse_row(rec: dict) -> RawQuoteRow:
    qd = date.fromisoformat((rec["quote_date"] or "").strip())
    ex = date.fromisoformat((rec["expiry"] or "").strip())
    side = (rec["type"] or "").strip().upper()
    if side not in ("C", "P"):
        raise ValueError(f"type must be C or P, got {rec['type']!r}")
    strike = float(rec["strike"])
    if not (math.isfinite(strike) and strike > 0):
        raise ValueError(f"strike must be finite and positive, got {rec['strike']!r}")
    bid = float(rec["bid"])
    ask = float(rec["ask"])
    if not (math.isfinite(bid) and math.isfinite(ask)) or bid < 0 or ask < bid:
        raise ValueError(f"need ask >= bid >= 0, got bid={rec['bid']!r} ask={rec['ask']!r}")
    volume = int(rec["volume"])
    if volume < 0:
        raise ValueError(f"volume must be >= 0, got {rec['volume']!r}")
    if ex < qd:
        raise ValueError(f"expiry {ex} before quote date {qd}")
    return RawQuoteRow(quote_date=qd, expiry=ex, strike=strike, side=side, bid=bid, ask=ask, volume=volume)


def pcp_regress(strikes: Sequence[float], call_mids: Sequence[float], put_mids: Sequence[float]) -> ParityFit:
    """OLS of C - P on K: slope = -DF, intercept = DF*F.

    Exact on parity-consistent inputs. Fails when the implied discount leaves
    (0, 1.1] or the fit explains less than 99% of the variance, both signs of
    stale or mismatched quotes.
    """
    k = np.asarray(strikes, dtype=float)
    y = np.asarray(call_mids, dtype=float) - np.asarray(put_mids, dtype=float)
    if k.size != y.size:
        raise DataError("strike/quote arrays must align")
    if k.size < 2:
        raise InsufficientDataError("parity regression needs >= 2 matched strikes", n=int(k.size))
    if np.unique(k).size < 2:
        raise InsufficientDataError("parity regression needs >= 2 distinct strikes")
    kbar, ybar = k.mean(), y.mean()
    skk = float(np.sum((k - kbar) ** 2))
    sky = float(np.sum((k - kbar) * (y - ybar)))
    slope = sky / skk
    intercept = ybar - slope * kbar
    resid = y - (intercept + slope * k)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - ybar) ** 2))
    r2 = 1.0 if ss_tot == 0.0 and ss_res <= 1e-20 else 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    discount = -slope
    if not (0.0 < discount <= 1.1):
        raise ParityRegressionError(
            "implied discount outside (0, 1.1]", discount=discount, r_squared=r2
        )
    forward = intercept / discount
    if not (math.isfinite(forward) and forward > 0):
        raise ParityRegressionError("implied forward not positive", forward=forward)
    if r2 < 0.99:
        raise ParityRegressionError(
            "parity fit explains too little variance", r_squared=r2, discount=discount, forward=forward
        )
    return ParityFit(discount=discount, forward=forward, r_squared=r2, n_strikes=int(k.size))


def build_chain(
    rows: Iterable[RawQuoteRow],
    quote_date: date,
    expiry: date,
    min_volume: int = 1,
) -> OptionChain:
    """Assemble the cleaned chain for one (quote_date, expiry) pair.

    Volume filter, mids (duplicate quotes averaged), parity regression on
    strikes quoted on both sides, forward-value normalization, then the
    arbitrage-band drop. Strikes come out strictly increasing.
    """
    calls: dict = {}
    puts: dict = {}
    for row in rows:
        if row.quote_date != quote_date or row.expiry != expiry or row.volume < min_volume:
            continue
        target = calls if row.side == "C" else puts
        target.setdefault(row.strike, []).append(mid(row.bid, row.ask))
    if not calls:
        raise InsufficientDataError(
            "no call quotes after filtering", quote_date=str(quote_date), expiry=str(expiry)
        )
    call_mid = {k: float(np.mean(v)) for k, v in calls.items()}
    put_mid = {k: float(np.mean(v)) for k, v in puts.items()}
    both = sorted(set(call_mid) & set(put_mid))
    if len(both) < 2:
        raise InsufficientDataError(
            "parity regression needs >= 2 strikes quoted on both sides", matched=len(both)
        )
    fit = pcp_regress(both, [call_mid[k] for k in both], [put_mid[k] for k in both])

    strikes = np.array(sorted(call_mid))
    cmids = np.array([call_mid[k] for k in strikes])
    pmids = np.array([put_mid.get(k, np.nan) for k in strikes])
    fcalls = cmids / fit.discount

    lower = np.maximum(fit.forward - strikes, 0.0) - ARBITRAGE_SLACK * fit.forward
    upper = fit.forward + ARBITRAGE_SLACK * fit.forward
    keep = (fcalls >= lower) & (fcalls <= upper)
    dropped = int((~keep).sum())
    if keep.sum() == 0:
        raise InsufficientDataError("all strikes dropped by the arbitrage band", dropped=dropped)

    return OptionChain(
        quote_date=quote_date,
        expiry=expiry,
        days_to_expiry=(expiry - quote_date).days,
        strikes=strikes[keep],
        call_mids=cmids[keep],
        put_mids=pmids[keep],
        discount=fit.discount,
        forward=fit.forward,
        parity_r2=fit.r_squared,
        forward_calls=fcalls[keep],
        dropped=dropped,
    )


def chain_pairs(rows: Iterable[RawQuoteRow]) -> List[Tuple[date, date]]:
    """Distinct (quote_date, expiry) pairs present, sorted."""
    return sorted({(r.quote_date, r.expiry) for r in rows})
