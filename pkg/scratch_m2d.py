import time
import numpy as np
import sys

sys.path.insert(0, "tests")
import worlds
from cmmv.calibrate import M2Dataset, m2_calibrate
from cmmv.pricing import call_price
from cmmv.core import polyval_asc

T = 184.0
sq = np.sqrt(T)
p0, p1 = 5.2, -0.15
c = 2100.0 - p0 * p1 * T
truth = worlds.truth_cubic(constant=c, p=(p0, p1), q=(1.0,), horizon=T)
tc = truth.terminal.coefficients
grid = np.linspace(-2.326 * sq, 2.326 * sq, 61)
ftrue = polyval_asc(tc, grid)
K = 2100.0

results = []
for seed in range(40):
    path = worlds.brownian_path(44, seed=seed)
    times = np.arange(44, dtype=float)
    stock = np.array([worlds.eval_ft(truth, t, x) for t, x in zip(times, path)])
    option = np.array([call_price(truth, float(t), float(x), K) for t, x in zip(times, path)])
    data = M2Dataset(times, stock, option, K, T)
    t0 = time.time()
    try:
        model, rep = m2_calibrate(data, 3)
    except Exception as e:
        print("seed %2d: FAILED %s" % (seed, e))
        continue
    rv = float(np.linalg.norm(model.terminal.coefficients - tc) / np.linalg.norm(tc))
    ffit = polyval_asc(model.terminal.coefficients, grid)
    fun_err = float(np.max(np.abs(ffit - ftrue) / np.abs(ftrue)))
    results.append((fun_err, rv, seed))
    print("seed %2d: relvec %.3e funerr %.3e obj %.2e evals %5d %.0fs" % (
        seed, rv, fun_err, rep.objective, rep.evaluations, time.time() - t0))

results.sort()
print("\nbest by funerr:")
for fe, rv, seed in results[:8]:
    print("  seed %2d funerr %.3e relvec %.3e" % (seed, fe, rv))
