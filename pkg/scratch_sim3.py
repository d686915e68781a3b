import time
import numpy as np
import sys

sys.path.insert(0, "tests")
import worlds
from cmmv.simulate import simulate_paths, recover_s1, recover_brownian, default_s1_window

cub = worlds.truth_cubic(constant=0.0, p=(0.0, np.sqrt(3.0)), q=(1.0,), horizon=184.0)


def coarse_slope_series(bh, prev, stride, win, dt):
    """Slope of covariation of prev with bh, on a stride-coarsened grid."""
    idx = np.arange(0, prev.size, stride)
    pb = prev[idx]
    bb = bh[idx]
    mc = idx.size
    cov = np.empty(mc)
    cov[0] = 0.0
    np.cumsum(np.diff(pb) * np.diff(bb), out=cov[1:])
    ii = np.arange(mc)
    h = win // 2
    lo = np.clip(ii - h, 0, mc - 1)
    hi = np.clip(ii + h, 0, mc - 1)
    slope = (cov[hi] - cov[lo]) / ((hi - lo) * stride * dt)
    return slope, idx


def run(m, seed, w1, w2, w3, horizon=1.0, head_frac=0.02):
    pg = simulate_paths(cub, n_steps=m, horizon=horizon, seed=seed)[0]
    dt = pg.dt
    v0 = 184.0
    truth1 = 1.0 + 3.0 * v0
    s1, fl = recover_s1(pg, window=w1)
    bh = recover_brownian(pg, s1)
    hn = max(int(head_frac * (m + 1)), 2)
    e1 = s1[:hn].mean()
    # level 2: stride = w1
    s2c, idx2 = coarse_slope_series(bh, s1, w1, w2, dt)
    hn2 = max(int(head_frac * idx2.size), 2)
    e2 = s2c[:hn2].mean()
    # level 3: coarsen the level-2 series by its own smoothing scale (w2 coarse steps)
    s3c, idx3 = coarse_slope_series(bh[idx2], s2c, w2, w3, dt * w1)
    hn3 = max(int(head_frac * idx3.size), 2)
    e3 = s3c[:hn3].mean()
    # also try full-series mean for S3 (f''' is constant for a cubic, but we only
    # get to use the head in general)
    e3_full = s3c.mean()
    return e1, e2, e3, e3_full, truth1, idx2.size, idx3.size


m = 10 ** 6
for w1 in (501, 2001):
    for w2 in (11, 21, 51):
        for w3 in (5, 11):
            r = []
            t0 = time.time()
            for seed in range(6):
                e1, e2, e3, e3f, tr1, n2, n3 = run(m, seed, w1, w2, w3)
                r.append((e1, e2, e3, e3f))
            r = np.array(r)
            print("w1=%4d w2=%2d w3=%2d (n2=%d n3=%d): S1 %.1f+-%.1f (tr %.0f) S2 %.2f+-%.2f S3 %.2f+-%.2f S3full %.2f+-%.2f %.0fs"
                  % (w1, w2, w3, n2, n3, r[:, 0].mean(), r[:, 0].std(), tr1,
                     r[:, 1].mean(), r[:, 1].std(), r[:, 2].mean(), r[:, 2].std(),
                     r[:, 3].mean(), r[:, 3].std(), time.time() - t0))
