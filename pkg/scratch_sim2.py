import time
import numpy as np
import sys

sys.path.insert(0, "tests")
import worlds
from cmmv.core import polyval_asc, polyder_asc, heat_table
from cmmv.simulate import (
    simulate_paths, covariation, recover_s1, recover_brownian, recover_sn,
    default_s1_window, _local_slope,
)

cub = worlds.truth_cubic(constant=0.0, p=(0.0, np.sqrt(3.0)), q=(1.0,), horizon=184.0)
m = 10 ** 6
pg = simulate_paths(cub, n_steps=m, horizon=1.0, seed=0)[0]
dt = pg.dt
v = 184.0 - pg.times
# truth series
fp = 1.0 + 3.0 * v  # f'_t(x) = 3x^2 + (1+3v)
s1_true = 3.0 * pg.brownian ** 2 + fp
s2_true = 6.0 * pg.brownian
s3_true = np.full(m + 1, 6.0)

head = slice(0, int(0.02 * (m + 1)))

# (a) outer estimator with TRUE inputs
w2 = 20 * (default_s1_window(m) - 1) + 1
bhat = pg.brownian  # exact B
s2_est = recover_sn(pg, bhat, s1_true, w2)
s3_est = recover_sn(pg, bhat, s2_true, w2)
print("true-input S2 head: est %.3f truth %.3f" % (s2_est[head].mean(), s2_true[head].mean()))
print("true-input S3 head: est %.3f truth 6.0" % s3_est[head].mean())
# chain: S3 from estimated-from-true-S1 S2 series (no projection)
s3_chain = recover_sn(pg, bhat, s2_est, w2)
print("chained (no proj) S3 head: %.3f" % s3_chain[head].mean())


def project_on_state(series, state, k):
    """Local linear regression of series on state, evaluated at each state value."""
    order = np.argsort(state, kind="stable")
    xs = state[order]
    ys = series[order]
    npts = xs.size
    idx = np.arange(npts)
    lo = np.clip(idx - k, 0, npts - 1)
    hi = np.clip(idx + k, 0, npts - 1)
    cx = np.concatenate([[0.0], np.cumsum(xs)])
    cy = np.concatenate([[0.0], np.cumsum(ys)])
    cxx = np.concatenate([[0.0], np.cumsum(xs * xs)])
    cxy = np.concatenate([[0.0], np.cumsum(xs * ys)])
    n = (hi - lo + 1).astype(float)
    sx = cx[hi + 1] - cx[lo]
    sy = cy[hi + 1] - cy[lo]
    sxx = cxx[hi + 1] - cxx[lo]
    sxy = cxy[hi + 1] - cxy[lo]
    det = n * sxx - sx * sx
    det = np.where(det <= 0, 1.0, det)
    slope = (n * sxy - sx * sy) / det
    intercept = (sy - slope * sx) / n
    fitted = intercept + slope * xs
    out = np.empty_like(fitted)
    out[order] = fitted
    return out

# (b) full chain from data with projection
t0 = time.time()
s1_hat, fl = recover_s1(pg)
bh = recover_brownian(pg, s1_hat)
for k in (2000, 10000, 30000):
    s1p = project_on_state(s1_hat, bh, k)
    print("proj S1 (k=%d): head %.2f truth %.2f | rel rmse vs true series %.4f" % (
        k, s1p[head].mean(), s1_true[head].mean(),
        np.sqrt(np.mean((s1p / s1_true - 1) ** 2))))
    for w2try in (4001, 20001, 40001):
        s2_hat = recover_sn(pg, bh, s1p, w2try)
        s2p = project_on_state(s2_hat, bh, k)
        s3_hat = recover_sn(pg, bh, s2p, w2try)
        print("   w2=%d: S2 head %.3f (truth %.3f) | S3 head %.3f (truth 6)" % (
            w2try, s2_hat[head].mean(), s2_true[head].mean(), s3_hat[head].mean()))
print("%.1fs" % (time.time() - t0))
