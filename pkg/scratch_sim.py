import time
import numpy as np
import sys

sys.path.insert(0, "tests")
import worlds
from cmmv.core import polyval_asc, polyder_asc
from cmmv.simulate import (
    PathGrid, simulate_paths, quadratic_variation, covariation,
    recover_s1, recover_brownian, recover_sn, recover_f, recover,
    default_s1_window,
)

T = 184.0

# Bachelier world: f_t(x) = 100 + 2 x (heat invariant)
bach = worlds.truth_cubic(constant=100.0, p=(np.sqrt(2.0),), q=(), horizon=T)

# cubic world for recovery: f_T = x^3 + x  => p = (1, ?) need f' = 3x^2 + 1 = P^2 + Q^2
# P = sqrt(3) x + 0? P^2 = 3x^2, Q = 1: p=(0, sqrt3), q=(1,)
cub = worlds.truth_cubic(constant=0.0, p=(0.0, np.sqrt(3.0)), q=(1.0,), horizon=T)
print("cubic terminal:", cub.terminal.coefficients)

t0 = time.time()
paths = simulate_paths(bach, n_steps=1000, horizon=1.0, n_paths=2000, seed=3)
term = np.array([p.price[-1] for p in paths])
print("bachelier terminal: mean %.4f (exp depends on f_1 const) std %.4f vs 2*1=2 | %.1fs" % (
    term.mean(), term.std(ddof=1), time.time() - t0))

# variance check: terminal price = f_1(B_1); f_1 is affine (heat invariant) slope 2
# => Var = 4 * 1.0
var = term.var(ddof=1)
n = len(term)
lo = var * (n - 1) / np.percentile(np.random.default_rng(0).chisquare(n - 1, 200000), 99.5)
print("sample var %.4f expect 4.0, ratio %.4f" % (var, var / 4.0))

# QV of the Brownian component
pg = simulate_paths(bach, n_steps=100000, horizon=10.0, seed=11)[0]
qv = quadratic_variation(pg.brownian)
print("B QV at end: %.4f expect 10.0" % qv[-1])
qvs = quadratic_variation(pg.price)
print("S QV at end: %.4f expect 40.0" % qvs[-1])

# recover_s1 on Bachelier: S1 = 2 everywhere
s1, fl = recover_s1(pg, window=501)
print("bachelier s1: mean %.4f rel rmse %.4f floored %d" % (
    s1.mean(), np.sqrt(np.mean((s1 / 2.0 - 1) ** 2)), fl.sum()))

bhat = recover_brownian(pg, np.full_like(s1, 2.0))
print("bachelier bhat exact: max|err| %.3e" % np.max(np.abs(bhat - pg.brownian)))

# cubic world recovery at m = 1e5, horizon 1.0
t0 = time.time()
pg = simulate_paths(cub, n_steps=100000, horizon=1.0, seed=5)[0]
w = default_s1_window(100000)
print("default windows: s1 %d cov %d" % (w, 20 * (w - 1) + 1))
res = recover(pg, horizon=1.0)
print("estimates:", res.estimates, "| truth f0 derivs at 0?")
# truth: f_0 coefficients
b0 = polyval_asc(cub.terminal.coefficients, 0.0)
c0 = polyval_asc(np.array([0.0, 1.0]), 0.0)
from cmmv.core import heat_table
tbl = heat_table(cub.terminal.coefficients)
v = np.array([1.0, 183.0, 183.0 ** 2, 183.0 ** 3])  # t=1? horizon for recovery... careful
# f at time t where recovery happens: recover() maps to f_{horizon}? estimates approximate f at t=0 of pathgrid
vfull = np.array([1.0, 184.0 - 183.0])
# f_t with t in path-time: path t=0 equals model t=0 -> v = 184
vv = np.array([184.0 ** k for k in range(4)])
coef0 = tbl @ vv
d1 = polyder_asc(coef0)
d2 = polyder_asc(d1)
d3 = polyder_asc(d2)
print("truth f0(0) %.4f f0'(0) %.4f f0''(0) %.4f f0'''(0) %.4f" % (
    polyval_asc(coef0, 0.0), polyval_asc(d1, 0.0), polyval_asc(d2, 0.0), polyval_asc(d3, 0.0)))
print("recover wall %.1fs" % (time.time() - t0))
print("s1_floored:", res.s1_floored.sum())

# QV slope: E[(QV_hat(1) - t)] ~ m^{-1/2} for Brownian path
t0 = time.time()
errs = []
ms = [1000, 10000, 100000]
for m in ms:
    acc = []
    for seed in range(8):
        p = simulate_paths(bach, n_steps=m, horizon=1.0, seed=100 + seed)[0]
        q = quadratic_variation(p.brownian)
        acc.append(abs(q[-1] - 1.0))
    errs.append(np.mean(acc))
sl = np.polyfit(np.log(ms), np.log(errs), 1)[0]
print("QV err slope: %.3f (expect -0.5)  %.1fs" % (sl, time.time() - t0))
