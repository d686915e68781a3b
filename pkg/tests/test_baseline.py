"""Sticky-Strike baseline: smile fit, frozen-vol pricing, persistence."""

from datetime import date

import numpy as np
import pytest

from cmmv.baseline import SmileModel, fit_smile, ss_price
from cmmv.errors import InsufficientDataError, SchemaMismatchError
from cmmv.marketdata import OptionChain
from cmmv.pricing import bs_call, implied_vol

QD = date(2016, 7, 20)
EXP = date(2017, 1, 20)
DAYS = (EXP - QD).days
TAU = DAYS / 365.0
DF = 0.99
F = 2124.0


def chain_with_vols(strikes, vol_fn):
    strikes = np.asarray(strikes, dtype=float)
    vols = np.array([vol_fn(k) for k in strikes])
    calls = np.array([bs_call(F, k, TAU, v, DF) for k, v in zip(strikes, vols)])
    puts = calls - DF * (F - strikes)
    return OptionChain(
        quote_date=QD,
        expiry=EXP,
        days_to_expiry=DAYS,
        strikes=strikes,
        call_mids=calls,
        put_mids=puts,
        discount=DF,
        forward=F,
        parity_r2=1.0,
        forward_calls=calls / DF,
        dropped=0,
    )


class TestFitSmile:
    def test_flat_vol_world(self):
        chain = chain_with_vols(np.linspace(1700, 2600, 40), lambda k: 0.2)
        smile, skipped = fit_smile(chain, degree=4)
        assert skipped == []
        for k in np.linspace(1700, 2600, 101):
            assert smile(k) == pytest.approx(0.2, abs=1e-6)
        assert np.all(np.abs(smile.coefficients[1:]) < 1e-6)
        assert smile.residual_rms < 1e-7

    def test_quadratic_smile_exact(self):
        vol_fn = lambda k: 0.2 + 3e-8 * (k - 2000.0) ** 2
        chain = chain_with_vols(np.linspace(1700, 2600, 40), vol_fn)
        smile, _ = fit_smile(chain, degree=2)
        for k in np.linspace(1700, 2600, 101):
            assert smile(k) == pytest.approx(vol_fn(k), abs=1e-8)

    def test_degree_default_is_4(self):
        chain = chain_with_vols(np.linspace(1700, 2600, 40), lambda k: 0.2)
        smile, _ = fit_smile(chain)
        assert smile.coefficients.size == 5

    def test_too_few_strikes(self):
        chain = chain_with_vols(np.linspace(1900, 2300, 4), lambda k: 0.2)
        with pytest.raises(InsufficientDataError):
            fit_smile(chain, degree=4)

    def test_unpriceable_strikes_skipped(self):
        # a deep-ITM quote at intrinsic value admits no implied vol
        chain = chain_with_vols(np.linspace(1700, 2600, 40), lambda k: 0.2)
        bad = chain.call_mids.copy()
        bad[0] = DF * (F - chain.strikes[0])
        chain = OptionChain(
            quote_date=chain.quote_date,
            expiry=chain.expiry,
            days_to_expiry=chain.days_to_expiry,
            strikes=chain.strikes,
            call_mids=bad,
            put_mids=chain.put_mids,
            discount=DF,
            forward=F,
            parity_r2=1.0,
            forward_calls=bad / DF,
            dropped=0,
        )
        smile, skipped = fit_smile(chain, degree=4)
        assert skipped == [chain.strikes[0]]
        assert smile.strike_domain[0] == chain.strikes[1]

    def test_domain_and_flag(self):
        chain = chain_with_vols(np.linspace(1700, 2600, 40), lambda k: 0.2)
        smile, _ = fit_smile(chain, degree=4)
        assert smile.strike_domain == (1700.0, 2600.0)
        inside = smile.vol_at(2000.0)
        assert not inside.extrapolated
        below = smile.vol_at(1500.0)
        assert below.extrapolated
        assert below.vol == pytest.approx(smile(1700.0), rel=1e-12)
        above = smile.vol_at(3000.0)
        assert above.extrapolated
        assert above.vol == pytest.approx(smile(2600.0), rel=1e-12)

    def test_vol_floor(self):
        smile = SmileModel(
            coefficients=np.array([-0.5]),
            center=2000.0,
            scale=500.0,
            strike_domain=(1500.0, 2500.0),
            residual_rms=0.0,
        )
        assert smile(2000.0) == smile.vol_floor


class TestSsPrice:
    def setup_method(self):
        self.smile, _ = fit_smile(
            chain_with_vols(np.linspace(1700, 2600, 40), lambda k: 0.2 + 1e-8 * (k - 2100.0) ** 2),
            degree=2,
        )

    def test_matches_bs_at_fit_date(self):
        for k in (1800.0, 2100.0, 2400.0):
            expected = bs_call(F, k, TAU, self.smile(k), DF)
            assert ss_price(self.smile, F, k, TAU, DF) == pytest.approx(expected, rel=1e-12)

    def test_intrinsic_at_expiry(self):
        assert ss_price(self.smile, F, 2000.0, 0.0, DF) == pytest.approx(DF * (F - 2000.0), abs=1e-8)
        assert ss_price(self.smile, F, 2300.0, 0.0, DF) == 0.0
        assert ss_price(self.smile, F, 2000.0, 1e-12, DF) == pytest.approx(DF * (F - 2000.0), abs=1e-8)

    def test_sticky_strike_invariant(self):
        # the defining property: implied vol of the SS price at strike K is
        # the same on every later date, whatever the forward does
        k = 2200.0
        frozen = self.smile(k)
        for days_left, f_t in ((150, 2050.0), (90, 2124.0), (30, 2350.0), (5, 2199.0)):
            tau = days_left / 365.0
            df_t = 0.995
            price = ss_price(self.smile, f_t, k, tau, df_t)
            iv = implied_vol(price, f_t, k, tau, df_t)
            assert iv == pytest.approx(frozen, abs=1e-8)


class TestPersistence:
    def test_round_trip(self):
        smile, _ = fit_smile(
            chain_with_vols(np.linspace(1700, 2600, 40), lambda k: 0.2 + 1e-8 * (k - 2100.0) ** 2),
            degree=4,
        )
        clone = SmileModel.from_dict(smile.to_dict())
        for k in (1500.0, 1900.0, 2600.0, 2800.0):
            assert clone.vol_at(k) == smile.vol_at(k)

    def test_schema_mismatch(self):
        with pytest.raises(SchemaMismatchError):
            SmileModel.from_dict({"schema": "cmmv-model-v1"})
