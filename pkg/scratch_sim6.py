import time
import numpy as np
import sys

sys.path.insert(0, "tests")
import worlds
from cmmv.simulate import simulate_paths, recover_s1, recover_brownian

T = 2.0
cub = worlds.truth_cubic(constant=0.0, p=(0.0, np.sqrt(3.0)), q=(1.0,), horizon=T)


def lag_reg_slope(prev, bh, lag, win):
    """Local slope of lag-difference covariation of prev with bh, measured
    against the realized quadratic variation of bh at the same lag."""
    d_prev = prev[lag:] - prev[:-lag]
    d_bh = bh[lag:] - bh[:-lag]
    num = np.empty(d_prev.size + 1)
    num[0] = 0.0
    np.cumsum(d_prev * d_bh, out=num[1:])
    den = np.empty(d_bh.size + 1)
    den[0] = 0.0
    np.cumsum(d_bh * d_bh, out=den[1:])
    mc = num.size
    ii = np.arange(mc)
    h = win // 2
    lo = np.clip(ii - h, 0, mc - 1)
    hi = np.clip(ii + h, 0, mc - 1)
    dd = den[hi] - den[lo]
    dd = np.where(dd <= 0, 1.0, dd)
    return (num[hi] - num[lo]) / dd


def run(m, seed, w1, L2, w2, L3, w3, t1=1.9, head_frac=0.02):
    pg = simulate_paths(cub, n_steps=m, horizon=t1, seed=seed)[0]
    s1, fl = recover_s1(pg, window=w1)
    bh = recover_brownian(pg, s1)
    hn = max(int(head_frac * (m + 1)), 2)
    e1 = s1[:hn].mean()
    s2 = lag_reg_slope(s1, bh, L2, w2)
    e2 = s2[:hn].mean() if s2.size > hn else s2.mean()
    n2 = s2.size
    s3 = lag_reg_slope(s2, bh[:n2], L3, w3)
    e3 = s3[:max(int(head_frac * s3.size), 2)].mean()
    return e1, e2, e3


m = 10 ** 6
print("truth: S1 7.0  S2 ~0  S3 6.0")
configs = [
    # w1, L2, w2, L3, w3
    (2001, 10000, 40001, 150000, 500001),
    (2001, 10000, 40001, 200000, 500001),
    (1001, 5000, 20001, 100000, 500001),
    (1001, 5000, 20001, 100000, 400001),
    (2001, 10000, 80001, 300000, 600001),
    (1001, 4000, 16001, 80000, 500001),
]
for w1, L2, w2, L3, w3 in configs:
    r = []
    t0 = time.time()
    for seed in range(10):
        r.append(run(m, seed, w1, L2, w2, L3, w3))
    r = np.array(r)
    print("w1=%4d L2=%5d w2=%5d L3=%6d w3=%6d: S1 %.3f+-%.3f  S2 %+.3f+-%.3f  S3 %.2f+-%.2f  %.0fs"
          % (w1, L2, w2, L3, w3, r[:, 0].mean(), r[:, 0].std(),
             r[:, 1].mean(), r[:, 1].std(), r[:, 2].mean(), r[:, 2].std(), time.time() - t0))
