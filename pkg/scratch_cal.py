import time
import numpy as np
import sys

sys.path.insert(0, "tests")
import worlds
from cmmv.calibrate import (
    FitConfig,
    M2Dataset,
    m1_calibrate,
    m1_fit,
    m1_slopes,
    m1_xi,
    m2_calibrate,
    m2_objective,
    select_degree,
    QuantilePoint,
)
from cmmv.pricing import call_price
from scipy.special import ndtr

truth = worlds.truth_cubic()
strikes = worlds.default_strikes()
chain = worlds.chain_from_quotes(worlds.quotes_at(truth, 0.0, 0.0, strikes, worlds.QUOTE_DATE0, worlds.EXPIRY))
T = truth.horizon

def relvec(fit, ref):
    fit = np.asarray(fit); ref = np.asarray(ref)
    return float(np.linalg.norm(fit - ref) / np.linalg.norm(ref))

# --- M1 exact-point fit (spec-style example) ---
xi = np.linspace(-2.0, 2.0, 25)
f = xi**3 / 3.0 + xi
pts = [QuantilePoint(float(x), float(k), 1.0) for x, k in zip(xi, f)]
t0 = time.time()
model, rep = m1_fit(pts, 3, 1.0)
truth_c = np.array([0.0, 1.0, 0.0, 1.0 / 3.0])
print("m1_fit exact: rms", rep.residual_rms, "coeffs", model.terminal.coefficients,
      "relvec", relvec(model.terminal.coefficients, truth_c),
      "evals", rep.evaluations, "term", rep.termination, "%.2fs" % (time.time() - t0))

# --- M1 full pipeline on noiseless chain, fixed degree 3 ---
t0 = time.time()
model3, rep3 = m1_calibrate(chain, degree=3)
print("m1 chain deg3: rms %.4g relvec %.3e evals %d %.2fs" % (
      rep3.residual_rms, relvec(model3.terminal.coefficients, truth.terminal.coefficients),
      rep3.evaluations, time.time() - t0))

# --- M1 degree selection ---
t0 = time.time()
pts_chain, dropped = m1_xi(chain.strikes, m1_slopes(chain), T)
sel = select_degree("m1", pts_chain, horizon=T)
print("m1 select:", sel.degree, {k: float(f"{v:.4g}") for k, v in sel.scores.items()}, "%.2fs" % (time.time() - t0))

# affine truth -> 1
aff = worlds.truth_cubic(constant=2100.0, p=(5.3,), q=(), horizon=184.0)
chain_aff = worlds.chain_from_quotes(worlds.quotes_at(aff, 0.0, 0.0, strikes, worlds.QUOTE_DATE0, worlds.EXPIRY))
pts_aff, _ = m1_xi(chain_aff.strikes, m1_slopes(chain_aff), T)
sel_aff = select_degree("m1", pts_aff, horizon=T)
print("m1 select affine:", sel_aff.degree, {k: float(f"{v:.4g}") for k, v in sel_aff.scores.items()})

# --- M2 round trips across path seeds ---
K = 2100.0
for seed in (3, 5, 11):
    path = worlds.brownian_path(64, seed=seed)
    times = np.arange(44, dtype=float)
    stock = np.array([worlds.eval_ft(truth, t, x) for t, x in zip(times, path[:44])])
    option = np.array([call_price(truth, float(t), float(x), K) for t, x in zip(times, path[:44])])
    data = M2Dataset(times, stock, option, K, truth.horizon)
    t0 = time.time()
    m2model, m2rep = m2_calibrate(data, 3)
    dt = time.time() - t0
    rv = relvec(m2model.terminal.coefficients, truth.terminal.coefficients)
    dc = abs(m2model.terminal.coefficients[0] - 2100.0)
    print("m2 seed %d: obj %.3e rms %.3e relvec %.3e dconst %.2f evals %d term %s %.1fs x-range [%.1f, %.1f]" % (
        seed, m2rep.objective, m2rep.residual_rms, rv, dc, m2rep.evaluations, m2rep.termination, dt,
        path[:44].min(), path[:44].max()))

# --- M2 degree selection, reduced budget ---
path = worlds.brownian_path(64, seed=3)
data_long = M2Dataset(np.arange(64, dtype=float),
                      np.array([worlds.eval_ft(truth, float(t), x) for t, x in zip(np.arange(64.0), path)]),
                      np.array([call_price(truth, float(t), float(x), K) for t, x in zip(np.arange(64.0), path)]),
                      K, truth.horizon)
t0 = time.time()
sel2 = select_degree("m2", data_long, degrees=(1, 3, 5), config=FitConfig(max_evaluations=30000, restarts=2, max_rel_rms=0.5, target_rel_residual=1e-12))
print("m2 select:", sel2.degree, {k: float(f"{v:.3e}") for k, v in sel2.scores.items()}, sel2.failures, "%.2fs" % (time.time() - t0))
