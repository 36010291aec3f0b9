"""Numba kernels for exact neighbour queries.

All kernels work on squared Euclidean distances accumulated coordinate by
coordinate in index order (no reassociation, no fused multiply-add), which is
what makes tree and brute-force results bit-identical.

Reference points are stored transposed, ``pts_t[t, pos]``, so the inner loop
runs over contiguous reference positions and vectorises without changing the
per-pair summation order.
"""
import os

import numba
import numpy as np
from numba import njit, prange

if "NUMBA_THREADING_LAYER" not in os.environ:
    # skip probing the TBB layer, which warns on older TBB installs
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

# brute-force tile shape: queries x reference points
TILE_Q = 16
TILE_R = 128


@njit(cache=True, inline="always")
def _lex_less(d1, i1, d2, i2):
    # order by distance, not squared distance: two squared values one ulp
    # apart can share a square root and then tie, lower index first
    if d1 == d2:
        return i1 < i2
    r1 = np.sqrt(d1)
    r2 = np.sqrt(d2)
    return r1 < r2 or (r1 == r2 and i1 < i2)


@njit(cache=True, inline="always")
def _same_root_max(s):
    """Largest squared distance with the same square root as ``s``."""
    r = np.sqrt(s)
    nxt = np.nextafter(s, np.inf)
    while np.sqrt(nxt) <= r and nxt < np.inf:
        s = nxt
        nxt = np.nextafter(s, np.inf)
    return s


@njit(cache=True, inline="always")
def _push(best_d, best_i, filled, dist, idx):
    """Insert (dist, idx) into the ascending candidate list; returns new fill."""
    kk = best_d.shape[0]
    if filled == kk:
        if not _lex_less(dist, idx, best_d[kk - 1], best_i[kk - 1]):
            return filled
        pos = kk - 1
    else:
        pos = filled
        filled += 1
    while pos > 0 and _lex_less(dist, idx, best_d[pos - 1], best_i[pos - 1]):
        best_d[pos] = best_d[pos - 1]
        best_i[pos] = best_i[pos - 1]
        pos -= 1
    best_d[pos] = dist
    best_i[pos] = idx
    return filled


@njit(cache=True, inline="always")
def _box_lb(q, lo, hi):
    acc = 0.0
    for t in range(q.shape[0]):
        v = q[t]
        if v < lo[t]:
            z = lo[t] - v
            acc += z * z
        elif v > hi[t]:
            z = v - hi[t]
            acc += z * z
    return acc


@njit(cache=True, inline="always")
def _leaf_sq(q, pts_t, start, stop, acc):
    n = stop - start
    for j in range(n):
        acc[j] = 0.0
    for t in range(pts_t.shape[0]):
        x = q[t]
        row = pts_t[t]
        for j in range(n):
            z = x - row[start + j]
            acc[j] += z * z


@njit(cache=True, inline="always")
def _tile_sq(Q, q0, nq, pts_t, r0, nr, buf):
    for a in range(nq):
        for b in range(nr):
            buf[a, b] = 0.0
    for t in range(pts_t.shape[0]):
        row = pts_t[t]
        for a in range(nq):
            x = Q[q0 + a, t]
            for b in range(nr):
                z = x - row[r0 + b]
                buf[a, b] += z * z


# ---------------------------------------------------------------- tree


@njit(cache=True, parallel=True)
def tree_knn(Q, self_idx, kk, pts_t, perm, start, stop, left, right, lo, hi, leaf_size):
    nq = Q.shape[0]
    out_d = np.full((nq, kk), np.inf)
    out_i = np.full((nq, kk), -1, dtype=np.int64)
    max_depth = 2 * (int(np.log2(max(perm.shape[0], 1))) + 4)
    for qi in prange(nq):
        q = Q[qi]
        me = self_idx[qi]
        best_d = out_d[qi]
        best_i = out_i[qi]
        filled = 0
        worst = np.inf
        acc = np.empty(leaf_size)
        stack = np.empty(max_depth, dtype=np.int64)
        stack_lb = np.empty(max_depth)
        sp = 0
        stack[0] = 0
        stack_lb[0] = 0.0
        sp = 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            if stack_lb[sp] > worst:
                continue
            if left[node] < 0:
                s = start[node]
                e = stop[node]
                _leaf_sq(q, pts_t, s, e, acc)
                for j in range(e - s):
                    idx = perm[s + j]
                    if idx == me or acc[j] > worst:
                        continue
                    filled = _push(best_d, best_i, filled, acc[j], idx)
                    if filled == kk:
                        worst = _same_root_max(best_d[kk - 1])
                continue
            a = left[node]
            b = right[node]
            lba = _box_lb(q, lo[a], hi[a])
            lbb = _box_lb(q, lo[b], hi[b])
            if lba > lbb:
                a, b = b, a
                lba, lbb = lbb, lba
            # far child below near child so the near one pops first
            if not lbb > worst:
                stack[sp] = b
                stack_lb[sp] = lbb
                sp += 1
            if not lba > worst:
                stack[sp] = a
                stack_lb[sp] = lba
                sp += 1
    return out_d, out_i


@njit(cache=True)
def node_max(values, start, stop, left, right):
    """Per-node maximum of ``values`` (given in tree position order)."""
    nn = start.shape[0]
    out = np.empty(nn)
    # children always have larger ids than their parent
    for node in range(nn - 1, -1, -1):
        if left[node] < 0:
            m = -np.inf
            for p in range(start[node], stop[node]):
                if values[p] > m:
                    m = values[p]
            out[node] = m
        else:
            out[node] = max(out[left[node]], out[right[node]])
    return out


@njit(cache=True, parallel=True)
def tree_ball_count(Q, thr, nmax, nchunks, pts_t, perm, start, stop, left, right, lo, hi, leaf_size):
    """Count, for every query, the reference balls containing it.

    ``thr[pos, c]`` is the squared-radius threshold of the reference point at
    tree position ``pos`` for radius column ``c``; column 0 must dominate the
    others (``nmax`` holds its per-node maximum). Also returns, per reference
    point (original order), how many queries fell in its ball. Queries are
    split into ``nchunks`` fixed ranges with private integer tallies.
    """
    nq = Q.shape[0]
    n = perm.shape[0]
    nc = thr.shape[1]
    qcount = np.zeros((nq, nc), dtype=np.int64)
    partial = np.zeros((nchunks, n, nc), dtype=np.int64)
    max_depth = 2 * (int(np.log2(max(n, 1))) + 4)
    per = (nq + nchunks - 1) // nchunks
    for ch in prange(nchunks):
        acc = np.empty(leaf_size)
        stack = np.empty(max_depth, dtype=np.int64)
        tally = partial[ch]
        for qi in range(ch * per, min(nq, (ch + 1) * per)):
            q = Q[qi]
            stack[0] = 0
            sp = 1
            while sp > 0:
                sp -= 1
                node = stack[sp]
                if _box_lb(q, lo[node], hi[node]) > nmax[node]:
                    continue
                if left[node] < 0:
                    s = start[node]
                    e = stop[node]
                    _leaf_sq(q, pts_t, s, e, acc)
                    for j in range(e - s):
                        v = acc[j]
                        for c in range(nc):
                            if v <= thr[s + j, c]:
                                qcount[qi, c] += 1
                                tally[perm[s + j], c] += 1
                    continue
                stack[sp] = right[node]
                stack[sp + 1] = left[node]
                sp += 2
    rcount = np.zeros((n, nc), dtype=np.int64)
    for ch in range(nchunks):
        rcount += partial[ch]
    return qcount, rcount


@njit(cache=True, parallel=True)
def tree_radius(Q, qthr, offsets, out_idx, fill, pts_t, perm, start, stop, left, right, lo, hi, leaf_size):
    """Fixed-radius search. First call with ``fill=False`` to get counts,
    then with ``fill=True`` and CSR ``offsets`` to collect identities."""
    nq = Q.shape[0]
    counts = np.zeros(nq, dtype=np.int64)
    max_depth = 2 * (int(np.log2(max(perm.shape[0], 1))) + 4)
    for qi in prange(nq):
        q = Q[qi]
        r = qthr[qi]
        acc = np.empty(leaf_size)
        stack = np.empty(max_depth, dtype=np.int64)
        stack[0] = 0
        sp = 1
        c = 0
        while sp > 0:
            sp -= 1
            node = stack[sp]
            if _box_lb(q, lo[node], hi[node]) > r:
                continue
            if left[node] < 0:
                s = start[node]
                e = stop[node]
                _leaf_sq(q, pts_t, s, e, acc)
                for j in range(e - s):
                    if acc[j] <= r:
                        if fill:
                            out_idx[offsets[qi] + c] = perm[s + j]
                        c += 1
                continue
            stack[sp] = right[node]
            stack[sp + 1] = left[node]
            sp += 2
        counts[qi] = c
    return counts


# ---------------------------------------------------------------- brute force


@njit(cache=True, parallel=True)
def brute_knn(Q, self_idx, kk, pts_t):
    nq = Q.shape[0]
    n = pts_t.shape[1]
    out_d = np.full((nq, kk), np.inf)
    out_i = np.full((nq, kk), -1, dtype=np.int64)
    ntiles = (nq + TILE_Q - 1) // TILE_Q
    for ti in prange(ntiles):
        q0 = ti * TILE_Q
        nqt = min(TILE_Q, nq - q0)
        buf = np.empty((TILE_Q, TILE_R))
        filled = np.zeros(TILE_Q, dtype=np.int64)
        worst = np.full(TILE_Q, np.inf)
        for r0 in range(0, n, TILE_R):
            nr = min(TILE_R, n - r0)
            _tile_sq(Q, q0, nqt, pts_t, r0, nr, buf)
            for a in range(nqt):
                qi = q0 + a
                me = self_idx[qi]
                bd = out_d[qi]
                bi = out_i[qi]
                f = filled[a]
                w = worst[a]
                for b in range(nr):
                    idx = r0 + b
                    v = buf[a, b]
                    if v > w or idx == me:
                        continue
                    f = _push(bd, bi, f, v, idx)
                    if f == kk:
                        w = _same_root_max(bd[kk - 1])
                filled[a] = f
                worst[a] = w
    return out_d, out_i


@njit(cache=True, parallel=True)
def brute_ball_count(Q, thr, nchunks, pts_t):
    nq = Q.shape[0]
    n = pts_t.shape[1]
    nc = thr.shape[1]
    qcount = np.zeros((nq, nc), dtype=np.int64)
    partial = np.zeros((nchunks, n, nc), dtype=np.int64)
    ntiles = (nq + TILE_Q - 1) // TILE_Q
    per = (ntiles + nchunks - 1) // nchunks
    for ch in prange(nchunks):
        buf = np.empty((TILE_Q, TILE_R))
        tally = partial[ch]
        for ti in range(ch * per, min(ntiles, (ch + 1) * per)):
            q0 = ti * TILE_Q
            nqt = min(TILE_Q, nq - q0)
            for r0 in range(0, n, TILE_R):
                nr = min(TILE_R, n - r0)
                _tile_sq(Q, q0, nqt, pts_t, r0, nr, buf)
                for a in range(nqt):
                    for b in range(nr):
                        v = buf[a, b]
                        for c in range(nc):
                            if v <= thr[r0 + b, c]:
                                qcount[q0 + a, c] += 1
                                tally[r0 + b, c] += 1
    rcount = np.zeros((n, nc), dtype=np.int64)
    for ch in range(nchunks):
        rcount += partial[ch]
    return qcount, rcount


@njit(cache=True, parallel=True)
def brute_radius(Q, qthr, offsets, out_idx, fill, pts_t):
    nq = Q.shape[0]
    n = pts_t.shape[1]
    counts = np.zeros(nq, dtype=np.int64)
    ntiles = (nq + TILE_Q - 1) // TILE_Q
    for ti in prange(ntiles):
        q0 = ti * TILE_Q
        nqt = min(TILE_Q, nq - q0)
        buf = np.empty((TILE_Q, TILE_R))
        for r0 in range(0, n, TILE_R):
            nr = min(TILE_R, n - r0)
            _tile_sq(Q, q0, nqt, pts_t, r0, nr, buf)
            for a in range(nqt):
                qi = q0 + a
                r = qthr[qi]
                for b in range(nr):
                    if buf[a, b] <= r:
                        if fill:
                            out_idx[offsets[qi] + counts[qi]] = r0 + b
                        counts[qi] += 1
    return counts
