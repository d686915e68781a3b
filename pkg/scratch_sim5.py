import time
import numpy as np
import sys

sys.path.insert(0, "tests")
import worlds
from cmmv.simulate import simulate_paths, recover_s1, recover_brownian

T = 2.0
cub = worlds.truth_cubic(constant=0.0, p=(0.0, np.sqrt(3.0)), q=(1.0,), horizon=T)
# truth at t=0: f'(0) = 1+3T = 7, f'' = 0, f''' = 6


def lag_cov_slope(prev, bh, lag, win, dt):
    """Slope of the overlapping lag-difference covariation of prev with bh."""
    d_prev = prev[lag:] - prev[:-lag]
    d_bh = bh[lag:] - bh[:-lag]
    c = np.empty(d_prev.size + 1)
    c[0] = 0.0
    np.cumsum(d_prev * d_bh / lag, out=c[1:])
    mc = c.size
    ii = np.arange(mc)
    h = win // 2
    lo = np.clip(ii - h, 0, mc - 1)
    hi = np.clip(ii + h, 0, mc - 1)
    slope = (c[hi] - c[lo]) / ((hi - lo) * dt)
    return slope  # length m+1-lag


def run(m, seed, w1, L2, w2, L3, w3, t1=1.9, head_frac=0.02):
    pg = simulate_paths(cub, n_steps=m, horizon=t1, seed=seed)[0]
    dt = pg.dt
    s1, fl = recover_s1(pg, window=w1)
    bh = recover_brownian(pg, s1)
    hn = max(int(head_frac * (m + 1)), 2)
    e1 = s1[:hn].mean()
    s2 = lag_cov_slope(s1, bh, L2, w2, dt)
    e2 = s2[:hn].mean()
    n2 = s2.size
    s3 = lag_cov_slope(s2, bh[:n2], L3, w3, dt)
    e3 = s3[:max(int(head_frac * s3.size), 2)].mean()
    return e1, e2, e3


m = 10 ** 6
print("truth: S1 7.0  S2 ~0  S3 6.0")
configs = [
    # w1, L2, w2, L3, w3
    (2001, 10000, 20001, 150000, 300001),
    (2001, 10000, 20001, 120000, 240001),
    (2001, 8000, 16001, 100000, 200001),
    (1001, 5000, 10001, 75000, 150001),
    (1001, 5000, 10001, 75000, 300001),
    (4001, 20000, 40001, 240000, 480001),
]
for w1, L2, w2, L3, w3 in configs:
    r = []
    t0 = time.time()
    for seed in range(8):
        r.append(run(m, seed, w1, L2, w2, L3, w3))
    r = np.array(r)
    print("w1=%4d L2=%5d w2=%5d L3=%6d w3=%6d: S1 %.3f+-%.3f  S2 %+.3f+-%.3f  S3 %.2f+-%.2f  %.0fs"
          % (w1, L2, w2, L3, w3, r[:, 0].mean(), r[:, 0].std(),
             r[:, 1].mean(), r[:, 1].std(), r[:, 2].mean(), r[:, 2].std(), time.time() - t0))
