import time
import numpy as np
import sys

sys.path.insert(0, "tests")
import worlds
from cmmv.simulate import simulate_paths, recover_s1, recover_brownian

T = 2.0
cub = worlds.truth_cubic(constant=0.0, p=(0.0, np.sqrt(3.0)), q=(1.0,), horizon=T)
# f_t at v: x^3 + (1+3v) x ; at t=0: f'(0)=7, f''=0, f'''=6


def coarse_slope_series(bh_sub, prev_sub, step_dt, win):
    mc = prev_sub.size
    cov = np.empty(mc)
    cov[0] = 0.0
    np.cumsum(np.diff(prev_sub) * np.diff(bh_sub), out=cov[1:])
    ii = np.arange(mc)
    h = win // 2
    lo = np.clip(ii - h, 0, mc - 1)
    hi = np.clip(ii + h, 0, mc - 1)
    return (cov[hi] - cov[lo]) / ((hi - lo) * step_dt)


def run(m, seed, w1, s2, w2, s3, w3, t1=1.0, head_frac=0.02):
    pg = simulate_paths(cub, n_steps=m, horizon=t1, seed=seed)[0]
    dt = pg.dt
    s1, fl = recover_s1(pg, window=w1)
    bh = recover_brownian(pg, s1)
    hn = max(int(head_frac * (m + 1)), 2)
    e1 = s1[:hn].mean()
    i2 = np.arange(0, m + 1, s2)
    s2c = coarse_slope_series(bh[i2], s1[i2], s2 * dt, w2)
    hn2 = max(int(head_frac * i2.size), 2)
    e2 = s2c[:hn2].mean()
    i3 = np.arange(0, i2.size, s3)
    s3c = coarse_slope_series(bh[i2][i3], s2c[i3], s2 * s3 * dt, w3)
    hn3 = max(int(head_frac * i3.size), 2)
    e3 = s3c[:hn3].mean()
    return e1, e2, e3


m = 10 ** 6
print("truth: S1 7.0  S2 ~0  S3 6.0")
for w1, s2, w2, s3, w3 in [
    (501, 2500, 21, 25, 9),
    (501, 2500, 41, 41, 9),
    (2001, 10000, 11, 11, 5),
    (2001, 10000, 21, 21, 5),
    (1001, 5000, 21, 21, 7),
    (1001, 5000, 41, 41, 5),
]:
    r = []
    t0 = time.time()
    for seed in range(8):
        r.append(run(m, seed, w1, s2, w2, s3, w3))
    r = np.array(r)
    print("w1=%4d s2=%5d w2=%2d s3=%2d w3=%d: S1 %.3f+-%.3f  S2 %.3f+-%.3f  S3 %.2f+-%.2f  %.0fs"
          % (w1, s2, w2, s3, w3, r[:, 0].mean(), r[:, 0].std(),
             r[:, 1].mean(), r[:, 1].std(), r[:, 2].mean(), r[:, 2].std(), time.time() - t0))
