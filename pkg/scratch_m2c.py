import time
import numpy as np
import sys

sys.path.insert(0, "tests")
import worlds
from cmmv.calibrate import FitConfig, M2Dataset, m2_calibrate
from cmmv.pricing import call_price
from cmmv.core import polyval_asc

T = 184.0
sq = np.sqrt(T)
truth = worlds.truth_cubic()
tc = truth.terminal.coefficients
grid = np.linspace(-2.326 * sq, 2.326 * sq, 61)
ftrue = polyval_asc(tc, grid)

def relvec(fit, ref):
    fit = np.asarray(fit); ref = np.asarray(ref)
    return float(np.linalg.norm(fit - ref) / np.linalg.norm(ref))

for n_obs in (98, 130):
    for seed in (3, 5, 11, 17):
        path = worlds.brownian_path(n_obs, seed=seed)
        times = np.arange(n_obs, dtype=float)
        K = 2100.0
        stock = np.array([worlds.eval_ft(truth, t, x) for t, x in zip(times, path[:n_obs])])
        option = np.array([call_price(truth, float(t), float(x), K) for t, x in zip(times, path[:n_obs])])
        data = M2Dataset(times, stock, option, K, T)
        t0 = time.time()
        model, rep = m2_calibrate(data, 3)
        rv = relvec(model.terminal.coefficients, tc)
        ffit = polyval_asc(model.terminal.coefficients, grid)
        fun_err = float(np.max(np.abs(ffit - ftrue) / np.abs(ftrue)))
        print("n %3d seed %2d: relvec %.3e funerr %.3e obj %.2e evals %5d %.0fs xr [%.1f, %.1f]" % (
            n_obs, seed, rv, fun_err, rep.objective, rep.evaluations, time.time() - t0,
            path[:n_obs].min(), path[:n_obs].max()))
