import numpy as np
import sys

sys.path.insert(0, "tests")
import worlds
from cmmv.simulate import simulate_paths, recover_s1, recover_brownian

T = 2.0
cub = worlds.truth_cubic(constant=0.0, p=(0.0, np.sqrt(3.0)), q=(1.0,), horizon=T)


def win_bounds(mc, win):
    ii = np.arange(mc)
    h = win // 2
    lo = np.clip(ii - h, 0, mc - 1)
    hi = np.clip(ii + h, 0, mc - 1)
    return lo, hi


def cs(x):
    out = np.empty(x.size + 1)
    out[0] = 0.0
    np.cumsum(x, out=out[1:])
    return out


def lag_time_slope(prev, bh, lag, win, dt):
    """Time-normalized local slope of overlapping lag-difference covariation."""
    d_prev = prev[lag:] - prev[:-lag]
    d_bh = bh[lag:] - bh[:-lag]
    num = cs(d_prev * d_bh / lag)
    lo, hi = win_bounds(num.size, win)
    return (num[hi] - num[lo]) / ((hi - lo) * dt)


def lag_reg_slope(prev, bh, lag, win):
    d_prev = prev[lag:] - prev[:-lag]
    d_bh = bh[lag:] - bh[:-lag]
    num = cs(d_prev * d_bh)
    den = cs(d_bh * d_bh)
    lo, hi = win_bounds(num.size, win)
    dd = den[hi] - den[lo]
    dd = np.where(dd <= 0, 1.0, dd)
    return (num[hi] - num[lo]) / dd


def state_kernel(bh, lag, win):
    """Effective state location of the level-2 window functional: realized
    (lag-increment)^2-weighted midpoint of bh over the same windows."""
    d_bh = bh[lag:] - bh[:-lag]
    mid = 0.5 * (bh[lag:] + bh[:-lag])
    wgt = d_bh * d_bh
    num = cs(wgt * mid)
    den = cs(wgt)
    lo, hi = win_bounds(num.size, win)
    dd = den[hi] - den[lo]
    dd = np.where(dd <= 0, 1.0, dd)
    return (num[hi] - num[lo]) / dd


def head(x, hf=0.02):
    return x[: max(int(hf * x.size), 2)].mean()


m = 10 ** 6
w1, L2, w2, L3, w3 = 2001, 10000, 40001, 150000, 500001
t1 = 1.9
dt = t1 / m

rows = {k: [] for k in ("C1", "C2", "D1", "D2", "rho")}
for seed in range(10):
    pg = simulate_paths(cub, n_steps=m, horizon=t1, seed=seed)[0]
    v = T - pg.times
    b = pg.brownian
    s1_true = 3.0 * b ** 2 + (1.0 + 3.0 * v)
    s1, fl = recover_s1(pg, window=w1)
    bh = recover_brownian(pg, s1)

    # C: true S1, true B
    s2_c = lag_time_slope(s1_true, b, L2, w2, dt)
    s3_c = lag_reg_slope(s2_c, b[: s2_c.size], L3, w3)
    rows["C1"].append(head(s3_c))
    vker = state_kernel(b, L2, w2)
    rho_series = lag_reg_slope(vker, b[: vker.size], L3, w3)
    rho = head(rho_series)
    rows["C2"].append(head(s3_c) / rho)
    rows["rho"].append(rho)

    # D: estimated chain
    s2_d = lag_time_slope(s1, bh, L2, w2, dt)
    s3_d = lag_reg_slope(s2_d, bh[: s2_d.size], L3, w3)
    rows["D1"].append(head(s3_d))
    vker_d = state_kernel(bh, L2, w2)
    rho_d = head(lag_reg_slope(vker_d, bh[: vker_d.size], L3, w3))
    rows["D2"].append(head(s3_d) / rho_d)

for k in ("C1", "C2", "D1", "D2", "rho"):
    a = np.array(rows[k])
    print("%s: %.3f +- %.3f" % (k, a.mean(), a.std()))
print("truth 6.0; C=ideal inputs D=full chain; 1=raw 2=response-corrected")
