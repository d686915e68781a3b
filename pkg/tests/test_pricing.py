"""Pricing tests.

Independent oracles, fixed before implementation:
  * Bachelier: for f_T = b + a x the call is a*s*(phi(d) + d*Phi(d)) with
    s = sqrt(T-t), d = (b + a x - K)/(a s). Coded inline from scipy.
  * Cubic at zero strike: f_T = x^3 + x, x=0, t=0, K=0 gives
    E[(Z^3 + Z)^+] = phi(0) * (2 sigma^3 + sigma), sigma = sqrt(T)
    (hand integration: int_0^inf w^3 phi dw = 2 phi(0), int_0^inf w phi dw = phi(0)).
  * Digital payoff mean = 1 - Phi(psi_T(K)/sqrt(T)).
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.stats import norm

from cmmv.core import CmmvModel, eval_ft, invert_ft, poly_from_squares
from cmmv.errors import NoImpliedVolError, OutOfHorizonError
from cmmv.pricing import (
    CallSpec,
    VolPoint,
    _call_kernel_states,
    bs_call,
    call_price,
    implied_vol,
    mc_price,
    monotone_price_in_x,
    put_price,
)


def bachelier_call(a: float, b: float, t: float, horizon: float, x: float, strike: float) -> float:
    s = a * math.sqrt(horizon - t)
    d = (b + a * x - strike) / s
    return s * (norm.pdf(d) + d * norm.cdf(d))


def bachelier_model(a: float, b: float, horizon: float = 184.0) -> CmmvModel:
    return CmmvModel(poly_from_squares(b, [math.sqrt(a)]), horizon)


def cubic_model(constant=2100.0, p=(5.2, -0.05), q=(1.0,), horizon=184.0) -> CmmvModel:
    return CmmvModel(poly_from_squares(constant, p, q), horizon)


class TestCallPrice:
    def test_bachelier_oracle(self):
        a, b = 29.0, 2100.0
        m = bachelier_model(a, b)
        for t, x, k in [(0.0, 0.0, 2100.0), (50.0, 1.5, 2000.0), (170.0, -3.0, 2300.0), (0.0, 2.0, 1500.0)]:
            got = call_price(m, t, x, k)
            want = bachelier_call(a, b, t, m.horizon, x, k)
            assert got == pytest.approx(want, rel=1e-8)

    def test_cubic_zero_strike_closed_form(self):
        m = CmmvModel(poly_from_squares(0.0, [0.0, math.sqrt(3.0)], [1.0]), 184.0)
        sigma = math.sqrt(184.0)
        want = norm.pdf(0.0) * (2 * sigma**3 + sigma)
        # strike must sit strictly inside the kink band for the analytic split
        got = call_price(m, 0.0, 0.0, 1e-9)
        assert got == pytest.approx(want, rel=1e-7)

    def test_deep_itm_equals_forward_minus_strike(self):
        m = cubic_model()
        k = eval_ft(m, m.horizon, -8.0 * math.sqrt(m.horizon))
        x = 0.5
        got = call_price(m, 0.0, x, k)
        want = eval_ft(m, 0.0, x) - k
        assert got == pytest.approx(want, rel=1e-6)

    def test_expiry_payoff_exact(self):
        m = cubic_model()
        x = 1.2
        fx = eval_ft(m, m.horizon, x)
        assert call_price(m, m.horizon, x, fx - 10.0) == fx - (fx - 10.0)
        assert call_price(m, m.horizon, x, fx + 10.0) == 0.0

    def test_out_of_horizon(self):
        m = cubic_model()
        with pytest.raises(OutOfHorizonError):
            call_price(m, m.horizon + 1.0, 0.0, 2100.0)

    def test_monte_carlo_cross_check(self):
        m = cubic_model()
        for k in (1900.0, 2100.0, 2350.0):
            price = call_price(m, 0.0, 0.0, k)
            mc, se = mc_price(m, lambda s, k=k: np.maximum(s - k, 0.0), 0.0, 0.0, 400_000, seed=12)
            assert abs(price - mc) < 3 * se

    def test_vectorized_strikes_match_scalar(self):
        m = cubic_model()
        ks = np.linspace(1500.0, 2700.0, 25)
        vec = call_price(m, 30.0, 0.7, ks)
        sc = np.array([call_price(m, 30.0, 0.7, float(k)) for k in ks])
        np.testing.assert_allclose(vec, sc, rtol=1e-12, atol=1e-12)

    def test_state_batch_matches_scalar(self):
        m = cubic_model()
        ts = np.array([0.0, 60.0, 150.0, 184.0])
        xs = np.array([-2.0, 0.0, 1.5, 3.0])
        k = 2100.0
        batch = _call_kernel_states(m.terminal.coefficients, m.horizon - ts, xs, k)
        sc = np.array([call_price(m, float(t), float(x), k) for t, x in zip(ts, xs)])
        np.testing.assert_allclose(batch, sc, rtol=1e-12, atol=1e-12)

    def test_convex_and_nonincreasing_in_strike(self):
        m = cubic_model()
        ks = np.linspace(1400.0, 2900.0, 61)
        c = call_price(m, 20.0, 0.3, ks)
        slopes = np.diff(c) / np.diff(ks)
        assert np.all(slopes <= 1e-12)
        assert np.all(slopes >= -1.0 - 1e-12)
        assert np.all(np.diff(c, 2) >= -1e-8)

    def test_dominates_intrinsic(self):
        m = cubic_model()
        for x in (-3.0, 0.0, 2.0):
            k = 2050.0
            assert call_price(m, 40.0, x, k) >= max(eval_ft(m, 40.0, x) - k, 0.0) - 1e-12

    def test_tower_property(self):
        # conditional expectation of the later price equals the earlier price
        m = cubic_model()
        t1, t2, k, x = 10.0, 120.0, 2150.0, 0.4
        z, w = np.polynomial.hermite.hermgauss(96)
        zs = math.sqrt(2.0) * z
        ws = w / math.sqrt(math.pi)
        inner = np.array(
            [call_price(m, t2, x + math.sqrt(t2 - t1) * zi, k) for zi in zs]
        )
        assert inner @ ws == pytest.approx(call_price(m, t1, x, k), rel=1e-8)

    def test_node_doubling_converged(self):
        m = cubic_model()
        for x in (-3.0 * math.sqrt(184.0), 0.0, 2.5 * math.sqrt(184.0)):
            k = 2200.0
            p64 = call_price(m, 30.0, x, k, n_nodes=64)
            p128 = call_price(m, 30.0, x, k, n_nodes=128)
            assert p128 == pytest.approx(p64, rel=1e-9)


class TestPutPrice:
    def test_atm_forward_symmetry(self):
        m = cubic_model()
        t, x = 45.0, 0.8
        k = eval_ft(m, t, x)
        assert put_price(m, t, x, k) == pytest.approx(call_price(m, t, x, k), rel=1e-12)

    def test_small_strike_worthless(self):
        m = cubic_model()
        k = eval_ft(m, m.horizon, -8.0 * math.sqrt(m.horizon))
        assert put_price(m, 0.0, 0.0, k) == pytest.approx(0.0, abs=1e-8)

    def test_bachelier_put_oracle(self):
        a, b = 29.0, 2100.0
        m = bachelier_model(a, b)
        t, x, k = 60.0, -1.0, 2200.0
        call = bachelier_call(a, b, t, m.horizon, x, k)
        want = call - (b + a * x - k)
        assert put_price(m, t, x, k) == pytest.approx(want, rel=1e-8)


class TestMonotoneInX:
    def test_bachelier_no_violation(self):
        m = bachelier_model(29.0, 2100.0)
        assert monotone_price_in_x(m, 30.0, 2100.0) <= 0.0 + 1e-10

    def test_cubic_grid(self):
        m = cubic_model()
        assert monotone_price_in_x(m, 92.0, 2100.0) <= 1e-10

    def test_expiry_payoff(self):
        m = cubic_model()
        assert monotone_price_in_x(m, m.horizon, 2100.0) <= 1e-10


class TestImpliedVol:
    def test_round_trip_unit_scale(self):
        price = bs_call(100.0, 100.0, 1.0, 0.2)
        assert implied_vol(price, 100.0, 100.0, 1.0) == pytest.approx(0.2, abs=1e-8)

    def test_round_trip_index_scale(self):
        tau = 184.0 / 365.0
        price = bs_call(2100.0, 2100.0, tau, 0.15, 0.99)
        assert implied_vol(price, 2100.0, 2100.0, tau, 0.99) == pytest.approx(0.15, abs=1e-8)

    def test_round_trip_sweep(self):
        for k in (1700.0, 2000.0, 2300.0):
            for vol in (0.08, 0.2, 0.6):
                tau = 0.4
                price = bs_call(2100.0, k, tau, vol, 0.97)
                assert implied_vol(price, 2100.0, k, tau, 0.97) == pytest.approx(vol, abs=1e-8)

    def test_bounds_rejected(self):
        with pytest.raises(NoImpliedVolError):
            implied_vol(0.0, 100.0, 120.0, 1.0)  # at lower bound (OTM)
        with pytest.raises(NoImpliedVolError):
            implied_vol(5.0, 100.0, 80.0, 1.0)  # below intrinsic 20
        with pytest.raises(NoImpliedVolError):
            implied_vol(100.0, 100.0, 80.0, 1.0)  # at upper bound

    def test_reprice_tolerance(self):
        price = bs_call(2100.0, 1900.0, 0.5, 0.22, 0.995)
        vol = implied_vol(price, 2100.0, 1900.0, 0.5, 0.995)
        assert abs(bs_call(2100.0, 1900.0, 0.5, vol, 0.995) - price) <= 1e-10 * 2100.0


class TestMonteCarlo:
    def test_constant_payoff(self):
        m = cubic_model()
        mean, se = mc_price(m, lambda s: np.ones_like(s), 0.0, 0.0, 1000, seed=1)
        assert mean == 1.0
        assert se == 0.0

    def test_digital_quantile_identity(self):
        m = cubic_model()
        k = 2200.0
        want = 1.0 - norm.cdf(invert_ft(m, m.horizon, k) / math.sqrt(m.horizon))
        mean, se = mc_price(m, lambda s: (s > k).astype(float), 0.0, 0.0, 500_000, seed=7)
        assert abs(mean - want) < 3 * se

    def test_seed_reproducible(self):
        m = cubic_model()
        a = mc_price(m, lambda s: np.maximum(s - 2100.0, 0.0), 0.0, 0.0, 50_000, seed=3)
        b = mc_price(m, lambda s: np.maximum(s - 2100.0, 0.0), 0.0, 0.0, 50_000, seed=3)
        assert a == b

    def test_path_mode_prices_call(self):
        m = cubic_model()
        k = 2100.0
        want = call_price(m, 0.0, 0.0, k)
        mean, se = mc_price(
            m,
            lambda times, paths: np.maximum(paths[:, -1] - k, 0.0),
            0.0,
            0.0,
            40_000,
            seed=5,
            path=True,
            n_steps=128,
        )
        # Euler discretization bias stacked on the MC band
        assert abs(mean - want) < 3 * se + 0.02 * want

    def test_n_paths_validated(self):
        with pytest.raises(ValueError):
            mc_price(cubic_model(), lambda s: s, 0.0, 0.0, 0, seed=1)


class TestSpecTypes:
    def test_call_spec_validation(self):
        CallSpec(strike=2100.0, expiry=184.0)
        with pytest.raises(ValueError):
            CallSpec(strike=-1.0, expiry=184.0)

    def test_vol_point_validation(self):
        VolPoint(strike=2100.0, maturity_days=30.0, implied_vol=0.2)
        with pytest.raises(ValueError):
            VolPoint(strike=2100.0, maturity_days=30.0, implied_vol=-0.1)
