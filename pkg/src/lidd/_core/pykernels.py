"""Numpy implementations of the hot kernels.

These are the fallback used when the compiled extension (ckernels) is not
available, and the reference the extension is validated against. Both
backends implement the exact same contracts:

pearson_pairs(values, mask, min_overlap)
    Pairwise-complete Pearson correlation between every column pair.
    A pair is undefined when the joint-observation count is below
    min_overlap or either column is constant over the joint mask
    (exact comparison, the robust meaning of zero variance).

rolling_median_masked(values, mask, window)
    Centered rolling median per column over observed cells only, window
    truncated at the edges. Even-count medians average the two middle
    order statistics.

nn_chain(dist, linkage)
    Nearest-neighbor-chain agglomerative merges over a full distance
    matrix. Returns raw merge triples (slot_a, slot_b, height) in
    discovery order; the caller sorts by height and relabels nodes.
    Ties prefer the chain predecessor (required for termination), then
    the lowest slot index.
"""

import numpy as np

LINKAGE_AVERAGE = 0
LINKAGE_SINGLE = 1
LINKAGE_COMPLETE = 2


def pearson_pairs(values, mask, min_overlap):
    """Return (corr, count, defined) matrices for all column pairs.

    values: (T, N) float64, mask: (T, N) uint8. corr diagonal is fixed to
    1 and defined, regardless of the column's own observation count.
    """
    T, N = values.shape
    corr = np.zeros((N, N), dtype=np.float64)
    count = np.zeros((N, N), dtype=np.int64)
    defined = np.zeros((N, N), dtype=bool)
    obs = mask.astype(bool)
    for i in range(N):
        count[i, i] = int(obs[:, i].sum())
        corr[i, i] = 1.0
        defined[i, i] = True
    for i in range(N):
        mi = obs[:, i]
        for j in range(i + 1, N):
            joint = mi & obs[:, j]
            n = int(joint.sum())
            count[i, j] = count[j, i] = n
            if n < min_overlap or n == 0:
                continue
            x = values[joint, i]
            y = values[joint, j]
            if x[0] == x[-1] and np.all(x == x[0]):
                continue
            if y[0] == y[-1] and np.all(y == y[0]):
                continue
            dx = x - (x.sum() / n)
            dy = y - (y.sum() / n)
            sxx = np.dot(dx, dx)
            syy = np.dot(dy, dy)
            if sxx <= 0.0 or syy <= 0.0:
                continue
            r = np.dot(dx, dy) / np.sqrt(sxx * syy)
            corr[i, j] = corr[j, i] = min(1.0, max(-1.0, float(r)))
            defined[i, j] = defined[j, i] = True
    return corr, count, defined


def rolling_median_masked(values, mask, window):
    """Centered masked rolling median per column; returns (T, N) float64.

    Output is 0.0 at unobserved cells (callers keep those cells masked).
    """
    T, N = values.shape
    half = window // 2
    obs = mask.astype(bool)
    out = np.zeros((T, N), dtype=np.float64)
    # windowed view with NaN padding; sort pushes NaN to the end so the
    # median of the k observed values reads off the first k slots
    pad = np.full((half, N), np.nan)
    col = np.where(obs, values, np.nan)
    stacked = np.concatenate([pad, col, pad], axis=0)
    idx = np.arange(T)[:, None] + np.arange(window)[None, :]
    for c in range(N):
        win = np.sort(stacked[idx, c], axis=1)
        k = window - np.isnan(win).sum(axis=1)
        k = np.maximum(k, 1)  # all-NaN windows only at unobserved cells
        rows = np.arange(T)
        upper = win[rows, k // 2]
        lower = win[rows, np.maximum(k // 2 - 1, 0)]
        med = np.where(k % 2 == 1, upper, 0.5 * (lower + upper))
        out[:, c] = np.where(obs[:, c], med, 0.0)
    return out


def nn_chain(dist, linkage):
    """Raw NN-chain merges (slot_a, slot_b, height) in discovery order."""
    n = dist.shape[0]
    W = dist.astype(np.float64, copy=True)
    np.fill_diagonal(W, np.inf)
    size = np.ones(n, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    raw = np.empty((n - 1, 3), dtype=np.float64)
    chain = np.empty(n + 1, dtype=np.int64)
    clen = 0
    for k in range(n - 1):
        if clen == 0:
            chain[0] = int(np.flatnonzero(alive)[0])
            clen = 1
        while True:
            a = int(chain[clen - 1])
            prev = int(chain[clen - 2]) if clen >= 2 else -1
            row = W[a]
            c = int(np.argmin(row))
            if prev >= 0 and row[prev] == row[c]:
                c = prev
            if c == prev:
                break
            chain[clen] = c
            clen += 1
        a = int(chain[clen - 1])
        b = int(chain[clen - 2])
        clen -= 2
        height = W[a, b]
        keep, drop = (a, b) if a < b else (b, a)
        raw[k, 0] = keep
        raw[k, 1] = drop
        raw[k, 2] = height
        wa = W[a].copy()
        wb = W[b].copy()
        if linkage == LINKAGE_AVERAGE:
            new = (size[a] * wa + size[b] * wb) / (size[a] + size[b])
        elif linkage == LINKAGE_SINGLE:
            new = np.minimum(wa, wb)
        else:
            new = np.maximum(wa, wb)
        new[keep] = np.inf
        new[drop] = np.inf
        W[keep, :] = new
        W[:, keep] = new
        W[drop, :] = np.inf
        W[:, drop] = np.inf
        alive[drop] = False
        size[keep] += size[drop]
    return raw
