"""numba kernels. Each function here has a twin in ``_np`` with identical results."""

import numpy as np
from numba import njit

# -- k-NN tiles -------------------------------------------------------------


@njit(cache=True)
def _precedes(d_a, i_a, d_b, i_b):
    return d_a < d_b or (d_a == d_b and i_a < i_b)


@njit(cache=True)
def knn_tile_update(tile_i, base_i, tile_j, base_j, best_d, best_i):
    n_i, dims = tile_i.shape
    n_j = tile_j.shape[0]
    kk = best_d.shape[1]
    if kk == 0:
        return
    last = kk - 1
    for a in range(n_i):
        ga = base_i + a
        for b in range(n_j):
            gb = base_j + b
            if gb == ga:
                continue
            acc = 0.0
            for c in range(dims):
                diff = tile_i[a, c] - tile_j[b, c]
                acc += diff * diff
            if not _precedes(acc, gb, best_d[a, last], best_i[a, last]):
                continue
            best_d[a, last] = acc
            best_i[a, last] = gb
            p = last
            while p > 0 and _precedes(best_d[a, p], best_i[a, p], best_d[a, p - 1], best_i[a, p - 1]):
                best_d[a, p], best_d[a, p - 1] = best_d[a, p - 1], best_d[a, p]
                best_i[a, p], best_i[a, p - 1] = best_i[a, p - 1], best_i[a, p]
                p -= 1


# -- SNN predicate ----------------------------------------------------------


@njit(cache=True)
def _similar(row_r, row_l, theta):
    k = row_r.shape[0]
    r = row_r[0]
    l = row_l[0]
    hit = False
    for m in range(k):
        if row_l[m] == r:
            hit = True
            break
    if not hit:
        return False
    hit = False
    for m in range(k):
        if row_r[m] == l:
            hit = True
            break
    if not hit:
        return False
    n = 0
    for p in range(1, k):
        v = row_r[p]
        for q in range(1, k):
            if v == row_l[q]:
                n += 1
                break
    return n > theta


@njit(cache=True)
def snn_tile_edges(knn_i, knn_j, same, theta, out):
    """Write similar pairs of (tile i rows, tile j rows) into ``out``.

    Returns (edges written, pairs evaluated). ``out`` must hold
    ``len(knn_i) * (k - 1)`` rows, the most one tile pair can emit.
    """
    n_i, k = knn_i.shape
    n_j = knn_j.shape[0]
    lo = knn_j[0, 0]
    in_a = np.zeros(n_j, dtype=np.bool_)  # in_a[b]: row j's point b is listed in row a
    n_edges = 0
    n_pairs = 0
    for a in range(n_i):
        for m in range(k):
            v = knn_i[a, m] - lo
            if 0 <= v < n_j:
                in_a[v] = True
        start = a + 1 if same else 0
        for b in range(start, n_j):
            n_pairs += 1
            if in_a[b] and _similar(knn_i[a], knn_j[b], theta):
                r = knn_i[a, 0]
                l = knn_j[b, 0]
                if r < l:
                    out[n_edges, 0] = r
                    out[n_edges, 1] = l
                else:
                    out[n_edges, 0] = l
                    out[n_edges, 1] = r
                n_edges += 1
        for m in range(k):
            v = knn_i[a, m] - lo
            if 0 <= v < n_j:
                in_a[v] = False
    return n_edges, n_pairs


# -- label closure ----------------------------------------------------------


@njit(cache=True)
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True)
def union_find_labels(parent, edges):
    for e in range(edges.shape[0]):
        ra = _find(parent, edges[e, 0])
        rb = _find(parent, edges[e, 1])
        if ra < rb:
            parent[rb] = ra
        elif rb < ra:
            parent[ra] = rb
    for x in range(parent.shape[0]):
        parent[x] = _find(parent, x)
    return parent


# -- LRU block cache --------------------------------------------------------


@njit(cache=True)
def lru_touch(block, write, frame_block, frame_stamp, frame_dirty, block_frame, state):
    # state = [clock, reads, writes]
    state[0] += 1
    f = block_frame[block]
    if f >= 0:
        frame_stamp[f] = state[0]
        if write:
            frame_dirty[f] = 1
        return
    state[1] += 1
    victim = 0
    oldest = frame_stamp[0]
    for s in range(frame_block.shape[0]):
        if frame_block[s] < 0:
            victim = s
            break
        if frame_stamp[s] < oldest:
            oldest = frame_stamp[s]
            victim = s
    old = frame_block[victim]
    if old >= 0:
        if frame_dirty[victim]:
            state[2] += 1
        block_frame[old] = -1
    frame_block[victim] = block
    frame_stamp[victim] = state[0]
    frame_dirty[victim] = 1 if write else 0
    block_frame[block] = victim


@njit(cache=True)
def lru_touch_bytes(start, stop, block_size, write, frame_block, frame_stamp, frame_dirty, block_frame, state):
    for blk in range(start // block_size, (stop - 1) // block_size + 1):
        lru_touch(blk, write, frame_block, frame_stamp, frame_dirty, block_frame, state)


@njit(cache=True)
def _touch_dedup(start, stop, block_size, write, last,
                 frame_block, frame_stamp, frame_dirty, block_frame, state):
    # A touch of the block touched immediately before is a hit that leaves
    # the LRU order unchanged; skip it unless it newly dirties the frame.
    for blk in range(start // block_size, (stop - 1) // block_size + 1):
        if blk == last[0] and (last[1] == 1 or not write):
            continue
        lru_touch(blk, write, frame_block, frame_stamp, frame_dirty, block_frame, state)
        last[0] = blk
        last[1] = 1 if write else 0


@njit(cache=True)
def traditional_knn(points, k, pts_origin, knn_origin, block_size,
                    frame_block, frame_stamp, frame_dirty, block_frame, state):
    n, dims = points.shape
    prow = dims * 8
    krow = k * 8
    knn = np.empty((n, k), dtype=np.int64)
    kk = k - 1
    best_d = np.empty(max(kk, 1))
    best_i = np.empty(max(kk, 1), dtype=np.int64)
    last = np.full(2, -1, dtype=np.int64)
    for i in range(n):
        # the trace does not depend on the data: replay it, then compute
        o = pts_origin + i * prow
        _touch_dedup(o, o + prow, block_size, False, last,
                     frame_block, frame_stamp, frame_dirty, block_frame, state)
        for j in range(n):
            if j != i:
                o = pts_origin + j * prow
                if o // block_size == last[0] and (o + prow - 1) // block_size == last[0]:
                    continue
                _touch_dedup(o, o + prow, block_size, False, last,
                             frame_block, frame_stamp, frame_dirty, block_frame, state)
        if kk == 0:
            knn[i, 0] = i
            o = knn_origin + i * krow
            _touch_dedup(o, o + krow, block_size, True, last,
                         frame_block, frame_stamp, frame_dirty, block_frame, state)
            continue
        for s in range(kk):
            best_d[s] = np.inf
            best_i[s] = n
        worst_d = np.inf
        worst_i = n
        for j in range(n):
            if j == i:
                continue
            acc = 0.0
            for c in range(dims):
                diff = points[i, c] - points[j, c]
                acc += diff * diff
            if not _precedes(acc, j, worst_d, worst_i):
                continue
            best_d[kk - 1] = acc
            best_i[kk - 1] = j
            p = kk - 1
            while p > 0 and _precedes(best_d[p], best_i[p], best_d[p - 1], best_i[p - 1]):
                best_d[p], best_d[p - 1] = best_d[p - 1], best_d[p]
                best_i[p], best_i[p - 1] = best_i[p - 1], best_i[p]
                p -= 1
            worst_d = best_d[kk - 1]
            worst_i = best_i[kk - 1]
        knn[i, 0] = i
        for s in range(kk):
            knn[i, s + 1] = best_i[s]
        o = knn_origin + i * krow
        _touch_dedup(o, o + krow, block_size, True, last,
                     frame_block, frame_stamp, frame_dirty, block_frame, state)
    return knn


@njit(cache=True)
def traditional_snn(knn, theta, knn_origin, label_origin, block_size,
                    frame_block, frame_stamp, frame_dirty, block_frame, state, out):
    n, k = knn.shape
    krow = k * 8
    last = np.full(2, -1, dtype=np.int64)
    for i in range(n):
        o = label_origin + i * 8
        _touch_dedup(o, o + 8, block_size, True, last, frame_block, frame_stamp, frame_dirty, block_frame, state)
    n_edges = 0
    # Re-touching the same (row r blocks, row l blocks) as the previous pair,
    # with nothing in between, is two hits in the same order: skipped.
    prev_r = -1
    prev_l0 = -1
    prev_l1 = -1
    in_r = np.zeros(n, dtype=np.bool_)
    for r in range(n):
        r0 = knn_origin + r * krow
        if r > 0:
            for m in range(k):
                in_r[knn[r - 1, m]] = False
        for m in range(k):
            in_r[knn[r, m]] = True
        for l in range(r + 1, n):
            l0 = knn_origin + l * krow
            lb0 = l0 // block_size
            lb1 = (l0 + krow - 1) // block_size
            if not (prev_r == r and prev_l0 == lb0 and prev_l1 == lb1):
                _touch_dedup(r0, r0 + krow, block_size, False, last,
                             frame_block, frame_stamp, frame_dirty, block_frame, state)
                _touch_dedup(l0, l0 + krow, block_size, False, last,
                             frame_block, frame_stamp, frame_dirty, block_frame, state)
                prev_r = r
                prev_l0 = lb0
                prev_l1 = lb1
            if in_r[l] and _similar(knn[r], knn[l], theta):
                o = label_origin + r * 8
                _touch_dedup(o, o + 8, block_size, True, last,
                             frame_block, frame_stamp, frame_dirty, block_frame, state)
                o = label_origin + l * 8
                _touch_dedup(o, o + 8, block_size, True, last,
                             frame_block, frame_stamp, frame_dirty, block_frame, state)
                prev_r = -1
                out[n_edges, 0] = r
                out[n_edges, 1] = l
                n_edges += 1
    return n_edges
