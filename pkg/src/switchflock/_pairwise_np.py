"""NumPy reference implementations of the pairwise hot loops.

Semantics here are the contract; the compiled extension mirrors them.
Family codes: 0 constant(p0), 1 rational (1+r^2)^(-p0), 2 gaussian
exp(-r^2/p0^2), 3 bump(floor=p0, radius=p1).
"""

import numpy as np


def weights_from_sq_dist(r2, fam, p0, p1):
    if fam == 0:
        return np.full(np.shape(r2), p0)
    if fam == 1:
        return (1.0 + r2) ** (-p0)
    if fam == 2:
        return np.exp(-r2 / (p0 * p0))
    if fam == 3:
        r = np.sqrt(r2)
        u = np.atleast_1d(r / p1)
        w = np.full(u.shape, p0)
        inside = u < 1.0
        ui = u[inside]
        w[inside] += (1.0 - p0) * np.exp(1.0 - 1.0 / (1.0 - ui * ui))
        return w.reshape(np.shape(r2))
    raise ValueError("unknown family code %r" % (fam,))


def coupling_deriv(x, src, scale, fam, p0, p1):
    """scale * sum_j w(|x_i - x_j|) (src_j - src_i), plus (min, max) weight.

    The min/max run over the off-diagonal weights so the caller can verify
    positivity and the declared sup norm without a second pass.
    """
    x = np.asarray(x, dtype=float)
    src = np.asarray(src, dtype=float)
    n = x.shape[0]
    diff = x[:, None, :] - x[None, :, :]
    r2 = (diff * diff).sum(-1)
    w = weights_from_sq_dist(r2, fam, p0, p1)
    off = ~np.eye(n, dtype=bool)
    wmin = float(w[off].min())
    wmax = float(w[off].max())
    w = w.copy()
    np.fill_diagonal(w, 0.0)
    deriv = scale * (w @ src - w.sum(axis=1)[:, None] * src)
    return deriv, wmin, wmax


def max_pair_distance(x):
    x = np.asarray(x, dtype=float)
    diff = x[:, None, :] - x[None, :, :]
    r = np.sqrt((diff * diff).sum(-1))
    return float(r.max())


def diameter_series(snapshots):
    """Max pairwise distance per snapshot; snapshots has shape (S, N, d)."""
    snapshots = np.asarray(snapshots, dtype=float)
    s = snapshots.shape[0]
    out = np.empty(s)
    step = max(1, int(2**22 // max(1, snapshots.shape[1] ** 2 * snapshots.shape[2])))
    for i0 in range(0, s, step):
        blk = snapshots[i0 : i0 + step]
        diff = blk[:, :, None, :] - blk[:, None, :, :]
        out[i0 : i0 + step] = np.sqrt((diff * diff).sum(-1)).max(axis=(1, 2))
    return out
