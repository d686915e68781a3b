import time
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
    d_bh = bh[lag:] - bh[:-lag]
    mid = 0.5 * (bh[lag:] + bh[:-lag])
    wgt = d_bh * d_bh
    num = cs(wgt * mid)
    den = cs(wgt)
    lo, hi = win_bounds(num.size, win)
    dd = den[hi] - den[lo]
    dd = np.where(dd <= 0, 1.0, dd)
    return (num[hi] - num[lo]) / dd


def box_mean(x, win):
    c = cs(x)
    lo, hi = win_bounds(x.size, win)
    return (c[hi + 1] - c[lo]) / (hi + 1 - lo)


def head(x, hf=0.02):
    return x[: max(int(hf * x.size), 2)].mean()


def chain(pg, w1, L2, w2, L3, w3):
    s1, fl = recover_s1(pg, window=w1)
    bh = recover_brownian(pg, s1)
    # level 2 with response correction for the w1 box smoothing of S1
    s2 = lag_reg_slope(s1, bh, L2, w2)
    bh_s = box_mean(bh, w1)
    rho2 = lag_reg_slope(bh_s, bh, L2, w2)
    rho2 = np.where(np.abs(rho2) < 0.2, 1.0, rho2)
    s2c = s2 / rho2
    # level 3 with state-kernel response correction
    s3 = lag_reg_slope(s2c, bh[: s2c.size], L3, w3)
    vker = state_kernel(bh, L2, w2)
    rho3 = lag_reg_slope(vker, bh[: vker.size], L3, w3)
    rho3 = np.where(np.abs(rho3) < 0.2, 1.0, rho3)
    s3c = s3 / rho3
    return head(s1), head(s2c), head(s3c)


m = 10 ** 6
t1 = 1.9
configs = [
    (2001, 8000, 40001, 50000, 500001),
    (2001, 8000, 40001, 80000, 500001),
    (2001, 8000, 60001, 80000, 600001),
    (1001, 4000, 20001, 40000, 400001),
    (1001, 4000, 40001, 60000, 600001),
    (3001, 12000, 60001, 80000, 600001),
    (2001, 8000, 40001, 50000, 900001),
]
print("truth: S1 7.0  S2 ~0  S3 6.0")
for w1, L2, w2, L3, w3 in configs:
    t0 = time.time()
    r = []
    for seed in range(12):
        pg = simulate_paths(cub, n_steps=m, horizon=t1, seed=seed)[0]
        r.append(chain(pg, w1, L2, w2, L3, w3))
    r = np.array(r)
    print("w1=%4d L2=%5d w2=%5d L3=%6d w3=%6d: S1 %.3f+-%.3f  S2 %+.2f+-%.2f  S3 %.2f+-%.2f  %.0fs"
          % (w1, L2, w2, L3, w3, r[:, 0].mean(), r[:, 0].std(),
             r[:, 1].mean(), r[:, 1].std(), r[:, 2].mean(), r[:, 2].std(), time.time() - t0))
