"""Core model tests.

Oracles used here were fixed before the implementation:
  * Gaussian smoothing of monomials by variance v (hand integration):
        x^2 -> x^2 + v
        x^3 -> x^3 + 3 v x
        x^4 -> x^4 + 6 v x^2 + 3 v^2
  * heat polynomials (hand expansion):
        phi_2(x,t) = x^2 - t
        phi_3(x,t) = x^3 - 3 t x
        phi_4(x,t) = x^4 - 6 t x^2 + 3 t^2
  * affine map c + a x smooths to itself, inverts to (y - c)/a, local slope a.
A 5e5-draw Monte Carlo average cross-checks the smoothing formula end to end.
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmmv.core import (
    CmmvModel,
    HermiteExpansion,
    IncreasingPolynomial,
    eval_ft,
    deriv_ft,
    heat_evolve,
    hermite_expand,
    hermite_phi,
    invert_ft,
    invert_increasing,
    local_vol,
    poly_from_squares,
)
from cmmv.errors import (
    FlatRegionError,
    InvalidParameterizationError,
    OutOfHorizonError,
    SchemaMismatchError,
)


def cubic_model(constant=2100.0, p=(5.2, -0.05), q=(1.0,), horizon=184.0) -> CmmvModel:
    return CmmvModel(poly_from_squares(constant, p, q), horizon)


# ---------------------------------------------------------------------------
# heat evolution
# ---------------------------------------------------------------------------


class TestHeatEvolve:
    def test_square_gains_variance(self):
        out = heat_evolve([0.0, 0.0, 1.0], 2.5)
        np.testing.assert_allclose(out, [2.5, 0.0, 1.0], atol=1e-15)

    def test_cube_gains_linear_term(self):
        out = heat_evolve([0.0, 0.0, 0.0, 1.0], 0.7)
        np.testing.assert_allclose(out, [0.0, 3 * 0.7, 0.0, 1.0], atol=1e-15)

    def test_quartic(self):
        v = 1.3
        out = heat_evolve([0.0, 0.0, 0.0, 0.0, 1.0], v)
        np.testing.assert_allclose(out, [3 * v**2, 0.0, 6 * v, 0.0, 1.0], rtol=1e-14)

    def test_affine_invariant(self):
        out = heat_evolve([4.0, 2.0], 9.0)
        np.testing.assert_allclose(out, [4.0, 2.0], atol=0)

    def test_zero_variance_identity(self):
        c = np.array([1.0, -2.0, 3.0, 0.5])
        np.testing.assert_array_equal(heat_evolve(c, 0.0), c)

    def test_semigroup(self):
        rng = np.random.default_rng(7)
        c = rng.normal(size=8)
        a = heat_evolve(heat_evolve(c, 1.7), 2.6)
        b = heat_evolve(c, 4.3)
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)

    def test_negative_variance_inverts(self):
        c = np.random.default_rng(3).normal(size=6)
        back = heat_evolve(heat_evolve(c, 3.1), -3.1)
        np.testing.assert_allclose(back, c, rtol=1e-10, atol=1e-12)

    def test_monte_carlo_cross_check(self):
        # E[f(x + sqrt(v) Z)] estimated directly from draws.
        coeffs = np.array([1.0, -0.5, 0.25, 0.1, 0.02])
        v, x = 1.8, 0.6
        z = np.random.default_rng(42).standard_normal(500_000)
        samples = np.polynomial.polynomial.polyval(x + np.sqrt(v) * z, coeffs)
        mc, se = samples.mean(), samples.std(ddof=1) / np.sqrt(samples.size)
        exact = np.polynomial.polynomial.polyval(x, heat_evolve(coeffs, v))
        assert abs(mc - exact) < 4 * se


# ---------------------------------------------------------------------------
# parameterization
# ---------------------------------------------------------------------------


class TestIncreasingPolynomial:
    def test_expansion_linear(self):
        f = poly_from_squares(2100.0, [3.0])
        np.testing.assert_allclose(f.coefficients, [2100.0, 9.0])
        assert f.degree == 1

    def test_expansion_cubic(self):
        # P = 1 + 2x, Q = 3: f' = 9 + (1 + 2x)^2 = 10 + 4x + 4x^2
        f = poly_from_squares(-1.0, [1.0, 2.0], [3.0])
        np.testing.assert_allclose(f.derivative_coefficients, [10.0, 4.0, 4.0])
        np.testing.assert_allclose(f.coefficients, [-1.0, 10.0, 2.0, 4.0 / 3.0])

    def test_odd_degree(self):
        for p_len in (1, 2, 3, 4):
            f = poly_from_squares(0.0, np.arange(1, p_len + 1, dtype=float))
            assert f.degree == 2 * (p_len - 1) + 1
            assert f.degree % 2 == 1

    def test_empty_p_rejected(self):
        with pytest.raises(InvalidParameterizationError):
            poly_from_squares(0.0, [])
        with pytest.raises(InvalidParameterizationError):
            poly_from_squares(0.0, [0.0, 0.0])

    def test_q_degree_must_be_lower(self):
        with pytest.raises(InvalidParameterizationError):
            poly_from_squares(0.0, [1.0], [1.0])
        with pytest.raises(InvalidParameterizationError):
            poly_from_squares(0.0, [1.0, 2.0], [0.0, 0.0, 3.0])

    def test_nonfinite_rejected(self):
        with pytest.raises(InvalidParameterizationError):
            poly_from_squares(np.nan, [1.0])
        with pytest.raises(InvalidParameterizationError):
            poly_from_squares(0.0, [np.inf])

    def test_trailing_zeros_trimmed(self):
        f = poly_from_squares(1.0, [2.0, 3.0, 0.0], [1.0, 0.0])
        assert f.p.tolist() == [2.0, 3.0]
        assert f.q.tolist() == [1.0]
        assert f.degree == 3

    @given(
        c=st.floats(-1e3, 1e3),
        p=st.lists(st.floats(-3, 3), min_size=1, max_size=4).filter(lambda v: any(abs(x) > 1e-3 for x in v)),
        q=st.lists(st.floats(-3, 3), min_size=0, max_size=3),
    )
    @settings(max_examples=150, deadline=None)
    def test_always_nondecreasing(self, c, p, q):
        if len(p) == 0 or (p[-1] == 0 and all(x == 0 for x in p)):
            return
        q = q[: max(0, len(p) - 1)]
        try:
            f = poly_from_squares(c, p, q)
        except InvalidParameterizationError:
            return
        xs = np.linspace(-20, 20, 301)
        vals = f(xs)
        assert np.all(np.diff(vals) >= -1e-9 * np.maximum(1.0, np.abs(vals[:-1])))


# ---------------------------------------------------------------------------
# model family
# ---------------------------------------------------------------------------


class TestCmmvModel:
    def test_terminal_slice_is_terminal(self):
        m = cubic_model()
        np.testing.assert_allclose(m.coeffs_at(m.horizon), m.terminal.coefficients, atol=0)

    def test_heat_equation_residual(self):
        # d/dt f + 1/2 d2/dx2 f = 0 via two independent coefficient routes.
        m = cubic_model()
        rng = np.random.default_rng(11)
        for t in rng.uniform(0, m.horizon, size=12):
            c = m.coeffs_at(t)
            d2 = np.polynomial.polynomial.polyder(c, 2)
            resid = m.ddt_coeffs_at(t) + 0.5 * np.concatenate((d2, np.zeros(len(c) - len(d2))))
            scale = max(1.0, float(np.max(np.abs(c))))
            assert np.max(np.abs(resid)) < 1e-12 * scale

    def test_martingale_mean(self):
        # E[f_T(x + sqrt(T - t) Z)] = f_t(x): smoothing the terminal slice
        # by the remaining variance reproduces the earlier slice.
        m = cubic_model()
        t = 63.0
        c_back = heat_evolve(m.terminal.coefficients, m.horizon - t)
        np.testing.assert_allclose(c_back, m.coeffs_at(t), rtol=1e-12)

    def test_out_of_horizon(self):
        m = cubic_model()
        with pytest.raises(OutOfHorizonError):
            m.coeffs_at(m.horizon + 1e-6)
        with pytest.raises(ValueError):
            m.coeffs_at(-0.5)

    def test_bad_horizon(self):
        with pytest.raises(InvalidParameterizationError):
            CmmvModel(poly_from_squares(0.0, [1.0]), 0.0)

    def test_eval_shapes(self):
        m = cubic_model()
        assert isinstance(eval_ft(m, 10.0, 0.5), float)
        out = eval_ft(m, 10.0, np.array([0.0, 1.0, 2.0]))
        assert out.shape == (3,)
        assert np.all(np.diff(out) > 0)

    def test_roundtrip_dict(self):
        m = cubic_model()
        m2 = CmmvModel.from_dict(m.to_dict())
        assert m2.horizon == m.horizon
        assert m2.terminal.constant == m.terminal.constant
        np.testing.assert_array_equal(m2.terminal.p, m.terminal.p)
        np.testing.assert_array_equal(m2.terminal.q, m.terminal.q)
        np.testing.assert_array_equal(m2.terminal.coefficients, m.terminal.coefficients)

    def test_from_dict_rejects_bad_schema(self):
        with pytest.raises(SchemaMismatchError):
            CmmvModel.from_dict({"horizon_days": 10})
        good = cubic_model().to_dict()
        good["f_coeffs"][1] += 1.0
        with pytest.raises(SchemaMismatchError):
            CmmvModel.from_dict(good)


# ---------------------------------------------------------------------------
# inversion
# ---------------------------------------------------------------------------


class TestInversion:
    def test_affine_exact(self):
        m = CmmvModel(poly_from_squares(2100.0, [np.sqrt(29.0)]), 184.0)
        # f(x) = 2100 + 29 x
        assert invert_ft(m, 0.0, 2100.0) == pytest.approx(0.0, abs=1e-12)
        assert invert_ft(m, 50.0, 2100.0 + 29.0 * 3.25) == pytest.approx(3.25, rel=1e-12)

    def test_roundtrip_over_state_range(self):
        m = cubic_model()
        for t in (0.0, 92.0, 184.0):
            span = 4.0 * np.sqrt(m.horizon)
            xs = np.linspace(-span, span, 41)
            ys = eval_ft(m, t, xs)
            back = invert_ft(m, t, ys)
            np.testing.assert_allclose(back, xs, atol=1e-8)

    def test_residual_tolerance(self):
        m = cubic_model()
        y = 1891.25
        x = invert_ft(m, 30.0, y)
        assert abs(eval_ft(m, 30.0, x) - y) <= 1e-10 + 1e-12 * abs(y)

    def test_matrix_columns(self):
        m = cubic_model()
        ts = np.array([0.0, 45.0, 120.0])
        cmat = np.stack([m.coeffs_at(t) for t in ts], axis=1)
        xs = np.array([-3.0, 0.5, 7.0])
        ys = np.array([eval_ft(m, t, x) for t, x in zip(ts, xs)])
        np.testing.assert_allclose(invert_increasing(cmat, ys), xs, atol=1e-9)

    def test_flat_region_error(self):
        with pytest.raises(FlatRegionError):
            invert_increasing(np.array([5.0]), 7.0)

    def test_local_vol_affine(self):
        m = CmmvModel(poly_from_squares(2100.0, [np.sqrt(29.0)]), 184.0)
        assert local_vol(m, 17.0, 2000.0) == pytest.approx(29.0, rel=1e-12)

    def test_local_vol_matches_derivative(self):
        m = cubic_model()
        x0 = 1.75
        price = eval_ft(m, 60.0, x0)
        assert local_vol(m, 60.0, price) == pytest.approx(deriv_ft(m, 60.0, x0), rel=1e-9)


# ---------------------------------------------------------------------------
# heat polynomials + expansion
# ---------------------------------------------------------------------------


class TestHermite:
    def test_low_orders(self):
        x, t = 1.5, 2.0
        assert hermite_phi(0, x, t) == 1.0
        assert hermite_phi(1, x, t) == x
        assert hermite_phi(2, x, t) == pytest.approx(x**2 - t, abs=1e-14)
        assert hermite_phi(3, x, t) == pytest.approx(x**3 - 3 * t * x, abs=1e-14)
        assert hermite_phi(4, 2.0, 0.5) == pytest.approx(16.0 - 12.0 + 0.75, abs=1e-13)

    def test_zero_time_is_monomial(self):
        xs = np.linspace(-2, 2, 9)
        for n in range(6):
            np.testing.assert_allclose(hermite_phi(n, xs, 0.0), xs**n, atol=0)

    def test_heat_property_finite_difference(self):
        # d/dt phi_n approximately equals -1/2 d2/dx2 phi_n.
        n, x, t = 5, 0.8, 1.7
        h = 1e-5
        dt = (hermite_phi(n, x, t + h) - hermite_phi(n, x, t - h)) / (2 * h)
        dxx = (hermite_phi(n, x + h, t) - 2 * hermite_phi(n, x, t) + hermite_phi(n, x - h, t)) / h**2
        assert dt == pytest.approx(-0.5 * dxx, rel=1e-5, abs=1e-5)

    def test_expand_matches_eval(self):
        m = cubic_model()
        exp = hermite_expand(m)
        assert exp.alphas.size == m.terminal.degree + 1
        rng = np.random.default_rng(5)
        xs = rng.uniform(-40, 40, size=50)
        for t in (0.0, 50.0, 184.0):
            direct = eval_ft(m, t, xs)
            series = exp.reconstruct(xs, t)
            np.testing.assert_allclose(series, direct, rtol=1e-10)

    def test_expansion_of_quintic(self):
        m = CmmvModel(poly_from_squares(10.0, [1.0, 0.2, 0.05], [0.3, 0.1]), 3.0)
        exp = hermite_expand(m)
        xs = np.linspace(-4, 4, 17)
        for t in (0.0, 1.1, 3.0):
            np.testing.assert_allclose(exp.reconstruct(xs, t), eval_ft(m, t, xs), rtol=1e-10)

    def test_reconstruct_scalar(self):
        exp = HermiteExpansion(np.array([2.0, 3.0, 4.0]), 5.0)
        # 2 + 3x + 4(x^2 - t) at x=1, t=2: 2 + 3 + 4*(1-2) = 1
        assert exp.reconstruct(1.0, 2.0) == pytest.approx(1.0, abs=1e-14)
