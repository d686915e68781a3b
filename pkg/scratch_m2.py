import time
import numpy as np
import sys

sys.path.insert(0, "tests")
import worlds
from cmmv.calibrate import FitConfig, M2Dataset, m2_calibrate
from cmmv.pricing import call_price
from cmmv.core import polyval_asc

truth = worlds.truth_cubic()
K = 2100.0
T = truth.horizon
sq = np.sqrt(T)

def relvec(fit, ref):
    fit = np.asarray(fit); ref = np.asarray(ref)
    return float(np.linalg.norm(fit - ref) / np.linalg.norm(ref))

def world(seed, n_obs=44, stride=1):
    n_days = n_obs * stride
    path = worlds.brownian_path(n_days, seed=seed)
    times = np.arange(0, n_obs * stride, stride, dtype=float)
    idx = np.arange(0, n_obs * stride, stride)
    stock = np.array([worlds.eval_ft(truth, float(t), path[i]) for t, i in zip(times, idx)])
    option = np.array([call_price(truth, float(t), float(path[i]), K) for t, i in zip(times, idx)])
    return M2Dataset(times, stock, option, K, T), path[idx]

grid = np.linspace(-2.326 * sq, 2.326 * sq, 41)
ftrue = polyval_asc(truth.terminal.coefficients, grid)

for stride in (1, 4):
    for seed in (3, 5, 11, 17):
        data, xs = world(seed, stride=stride)
        t0 = time.time()
        model, rep = m2_calibrate(data, 3)
        rv = relvec(model.terminal.coefficients, truth.terminal.coefficients)
        ffit = polyval_asc(model.terminal.coefficients, grid)
        fun_err = float(np.max(np.abs(ffit - ftrue) / np.abs(ftrue)))
        print("stride %d seed %2d: relvec %.3e dconst %8.2f funerr %.3e obj %.2e evals %5d %.0fs xr [%.1f, %.1f]" % (
            stride, seed, rv, abs(model.terminal.coefficients[0] - 2100.0), fun_err,
            rep.objective, rep.evaluations, time.time() - t0, xs.min(), xs.max()))
