import time
import numpy as np
import sys

sys.path.insert(0, "tests")
import worlds
from scipy.special import ndtr
from cmmv.calibrate import (FitConfig, M2Dataset, build_m2_dataset, chronological_split,
                            m1_calibrate, m1_fit, m1_slopes, m1_xi, m2_calibrate,
                            m2_objective, select_degree, QuantilePoint)
from cmmv.core import invert_increasing, heat_table, polyval_asc, poly_from_squares
from cmmv.pricing import call_price

T = 184.0
sq = np.sqrt(T)
MILD = worlds.truth_cubic()
tc = MILD.terminal.coefficients

def inv_terminal(model, s):
    table = heat_table(model.terminal.coefficients)
    cols = table[:, :1] * np.ones((1, np.size(s)))
    return invert_increasing(cols, np.atleast_1d(np.asarray(s, dtype=float)))

# 1) slope oracle on strikes 1200..2600 step 25
strikes = np.arange(1200.0, 2600.0 + 1, 25.0)
chain = worlds.chain_from_quotes(worlds.quotes_at(MILD, 0.0, 0.0, strikes, worlds.QUOTE_DATE0, worlds.EXPIRY))
slopes = m1_slopes(chain)
xi_true = inv_terminal(MILD, strikes)
analytic = ndtr(xi_true / sq) - 1.0
err = np.abs(slopes - analytic)
print("1) slope err: interior max %.2e  ends %.2e %.2e  overall %.2e (bound 2e-3)" % (
    err[1:-1].max(), err[0], err[-1], err.max()))

# 2) xi graph within 2e-2*sqrt(T)
points, dropped = m1_xi(chain.strikes, slopes, T)
xi_est = np.array([pt.xi for pt in points])
kk = np.array([pt.strike for pt in points])
gerr = np.max(np.abs(xi_est - inv_terminal(MILD, kk)))
print("2) xi graph err %.4f vs bound %.4f, dropped %d" % (gerr, 2e-2 * sq, dropped))

# 3) m1_fit exact cubic f = x^3/3 + x (T=1)
# f' = x^2 + 1: P=(0,1), Q=(1,)
f3 = poly_from_squares(0.0, (0.0, 1.0), (1.0,))
c3 = f3.coefficients
xi = np.linspace(-2.5, 2.5, 25)
pts = [QuantilePoint(float(x), float(polyval_asc(c3, x)), 1.0) for x in xi]
t0 = time.time()
m3, r3 = m1_fit(pts, 3, 1.0)
rv = np.linalg.norm(np.asarray(m3.terminal.coefficients) - c3) / np.linalg.norm(c3)
print("3) exact cubic: relvec %.2e rms %.2e evals %d %.1fs  coeffs %s" % (
    rv, r3.residual_rms, r3.evaluations, time.time() - t0, np.array2string(np.asarray(m3.terminal.coefficients), precision=6)))

# 4) m1_fit affine truth, degree 3
pts_a = [QuantilePoint(float(x), 5.0 + 2.0 * float(x), 1.0) for x in xi]
t0 = time.time()
ma, ra = m1_fit(pts_a, 3, 1.0)
ca = np.zeros(4)
ca[: len(ma.terminal.coefficients)] = ma.terminal.coefficients
print("4) affine deg3: a2 %.2e a3 %.2e rms %.2e %.1fs" % (abs(ca[2]), abs(ca[3]), ra.residual_rms, time.time() - t0))

# 5) m1_calibrate mild chain deg 3
t0 = time.time()
m5, r5 = m1_calibrate(chain, degree=3)
rv5 = np.linalg.norm(np.asarray(m5.terminal.coefficients) - tc) / np.linalg.norm(tc)
print("5) m1_calibrate: relvec %.2e rms %.3f evals %d %.1fs" % (rv5, r5.residual_rms, r5.evaluations, time.time() - t0))

# 6) select_degree m1, cubic truth
t0 = time.time()
sel = select_degree("m1", points, horizon=T)
print("6) m1 select cubic: degree %d scores %s %.0fs" % (
    sel.degree, {d: "%.3g" % v for d, v in sel.scores.items()}, time.time() - t0))

# 7) select_degree m1, affine truth with xi noise
rng = np.random.default_rng(3)
pts_n = [QuantilePoint(float(x + 0.01 * rng.standard_normal()), 5.0 + 2.0 * float(x), 1.0) for x in np.linspace(-2.5, 2.5, 40)]
t0 = time.time()
sel7 = select_degree("m1", pts_n, horizon=1.0)
print("7) m1 select affine+noise: degree %d scores %s %.0fs" % (
    sel7.degree, {d: "%.3g" % v for d, v in sel7.scores.items()}, time.time() - t0))

# W2 world for M2
p0, p1 = 5.2, -0.15
cw = 2100.0 - p0 * p1 * T
W2 = worlds.truth_cubic(constant=cw, p=(p0, p1), q=(1.0,), horizon=T)
K = 2100.0

def build(n_obs, noise=0.0, noise_seed=7):
    path = worlds.brownian_path(max(n_obs, 64), seed=25)
    times = np.arange(n_obs, dtype=float)
    stock = np.array([worlds.eval_ft(W2, t, x) for t, x in zip(times, path)])
    option = np.array([call_price(W2, float(t), float(x), K) for t, x in zip(times, path)])
    if noise:
        rng = np.random.default_rng(noise_seed)
        option = option * (1.0 + noise * rng.standard_normal(n_obs))
    return M2Dataset(times, stock, option, K, T), path

# 8) reduced-budget noise OOS
data64, path = build(64, noise=5e-4)
train = data64.slice(slice(0, 44))
for budget, restarts in ((15000, 2), (20000, 3)):
    t0 = time.time()
    mn, rn = m2_calibrate(train, 3, FitConfig(max_evaluations=budget, restarts=restarts,
                                              max_rel_rms=0.5, target_rel_residual=1e-13))
    oos_t = np.arange(44, 64, dtype=float)
    oos_stock = np.array([worlds.eval_ft(W2, t, x) for t, x in zip(oos_t, path[44:64])])
    oos_clean = np.array([call_price(W2, float(t), float(x), K) for t, x in zip(oos_t, path[44:64])])
    from cmmv.core import invert_ft
    xh = np.array([invert_ft(mn, float(t), float(s)) for t, s in zip(oos_t, oos_stock)])
    pred = np.array([call_price(mn, float(t), float(x), K) for t, x in zip(oos_t, xh)])
    rel = float(np.sqrt(np.mean((pred - oos_clean) ** 2))) / float(np.mean(np.abs(oos_clean)))
    print("8) noise oos budget %d/r%d: rel %.3e vs 1e-3  evals %d %.0fs" % (
        budget, restarts, rel, rn.evaluations, time.time() - t0))

# 9) select_degree m2, cubic truth, degrees (1,3), trimmed budget
data44, _ = build(44)
t0 = time.time()
sel9 = select_degree("m2", data44, degrees=(1, 3),
                     config=FitConfig(max_evaluations=12000, restarts=2, max_rel_rms=0.5,
                                      target_rel_residual=1e-13))
print("9) m2 select: degree %d scores %s %.0fs" % (
    sel9.degree, {d: "%.3g" % v for d, v in sel9.scores.items()}, time.time() - t0))

# 10) split-sum invariance + objective scale
obj_full = m2_objective(W2.terminal, data44)
a = data44.slice(slice(0, 20)); b = data44.slice(slice(20, None))
print("10) split-sum: full %.6e halves %.6e equal %s" % (
    obj_full, m2_objective(W2.terminal, a) + m2_objective(W2.terminal, b),
    obj_full == m2_objective(W2.terminal, a) + m2_objective(W2.terminal, b)))

# 11) FitFailedError timing: garbage data, small budget
rngg = np.random.default_rng(0)
garbage = M2Dataset(np.arange(12, dtype=float), 2100 + 50 * rngg.standard_normal(12),
                    np.abs(200 + 500 * rngg.standard_normal(12)), K, T)
t0 = time.time()
try:
    m2_calibrate(garbage, 3, FitConfig(max_evaluations=2000, restarts=1, max_rel_rms=1e-6))
    print("11) no failure raised!")
except Exception as exc:
    print("11) %s in %.0fs" % (type(exc).__name__, time.time() - t0))
