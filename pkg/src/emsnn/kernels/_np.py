"""Pure numpy/Python twins of the ``_jit`` kernels.

Tile kernels are vectorized. The LRU-traced baselines are inherently
sequential and run as plain Python loops here, so they are only usable
for small N on this path.
"""

import numpy as np


def _sq_dists(tile_i, tile_j):
    # Summed one coordinate at a time, same order as the scalar kernel.
    acc = np.zeros((tile_i.shape[0], tile_j.shape[0]))
    for c in range(tile_i.shape[1]):
        diff = tile_i[:, c, None] - tile_j[None, :, c]
        acc += diff * diff
    return acc


def knn_tile_update(tile_i, base_i, tile_j, base_j, best_d, best_i):
    kk = best_d.shape[1]
    if kk == 0:
        return
    n_i, n_j = tile_i.shape[0], tile_j.shape[0]
    dist = _sq_dists(tile_i, tile_j)
    ids = np.broadcast_to(np.arange(base_j, base_j + n_j, dtype=np.int64), (n_i, n_j)).copy()
    own = np.arange(base_i, base_i + n_i)[:, None]
    dist[ids == own] = np.inf
    ids[ids == own] = np.iinfo(np.int64).max
    all_d = np.concatenate([best_d, dist], axis=1)
    all_i = np.concatenate([best_i, ids], axis=1)
    order = np.lexsort((all_i, all_d), axis=-1)[:, :kk]
    best_d[:] = np.take_along_axis(all_d, order, axis=1)
    best_i[:] = np.take_along_axis(all_i, order, axis=1)


def _similar_mask(knn_i, knn_j, theta):
    r = knn_i[:, 0]
    l = knn_j[:, 0]
    r_in_l = (knn_j[None, :, :] == r[:, None, None]).any(axis=2)
    l_in_r = (knn_i[:, None, :] == l[None, :, None]).any(axis=2)
    mutual = r_in_l & l_in_r
    a, b = np.nonzero(mutual)
    shared = (knn_i[a, 1:, None] == knn_j[b, None, 1:]).sum(axis=(1, 2))
    keep = shared > theta
    return a[keep], b[keep]


def snn_tile_edges(knn_i, knn_j, same, theta, out):
    n_i, n_j = knn_i.shape[0], knn_j.shape[0]
    a, b = _similar_mask(knn_i, knn_j, theta)
    if same:
        upper = b > a
        a, b = a[upper], b[upper]
        n_pairs = n_i * (n_i - 1) // 2
    else:
        n_pairs = n_i * n_j
    # row-major order matches the scalar kernel's emission order
    r, l = knn_i[a, 0], knn_j[b, 0]
    n_edges = len(a)
    out[:n_edges, 0] = np.minimum(r, l)
    out[:n_edges, 1] = np.maximum(r, l)
    return n_edges, n_pairs


def union_find_labels(parent, edges):
    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges.tolist():
        ra, rb = find(a), find(b)
        if ra < rb:
            parent[rb] = ra
        elif rb < ra:
            parent[ra] = rb
    for x in range(parent.shape[0]):
        parent[x] = find(x)
    return parent


def lru_touch(block, write, frame_block, frame_stamp, frame_dirty, block_frame, state):
    state[0] += 1
    f = block_frame[block]
    if f >= 0:
        frame_stamp[f] = state[0]
        if write:
            frame_dirty[f] = 1
        return
    state[1] += 1
    free = np.flatnonzero(frame_block < 0)
    victim = int(free[0]) if len(free) else int(np.argmin(frame_stamp))
    old = frame_block[victim]
    if old >= 0:
        if frame_dirty[victim]:
            state[2] += 1
        block_frame[old] = -1
    frame_block[victim] = block
    frame_stamp[victim] = state[0]
    frame_dirty[victim] = 1 if write else 0
    block_frame[block] = victim


def lru_touch_bytes(start, stop, block_size, write, frame_block, frame_stamp, frame_dirty, block_frame, state):
    for blk in range(start // block_size, (stop - 1) // block_size + 1):
        lru_touch(blk, write, frame_block, frame_stamp, frame_dirty, block_frame, state)


class _Tracer:
    """Drops a touch when it repeats the block just touched; that touch is a
    guaranteed hit that leaves the LRU order unchanged (dirty bit aside)."""

    def __init__(self, block_size, lru):
        self.block_size = block_size
        self.lru = lru
        self.last = None

    def touch(self, start, stop, write):
        bs = self.block_size
        for blk in range(start // bs, (stop - 1) // bs + 1):
            key = (blk, write)
            if key == self.last or (self.last == (blk, True) and not write):
                continue
            lru_touch(blk, write, *self.lru)
            self.last = key


def traditional_knn(points, k, pts_origin, knn_origin, block_size,
                    frame_block, frame_stamp, frame_dirty, block_frame, state):
    n, dims = points.shape
    prow, krow = dims * 8, k * 8
    tr = _Tracer(block_size, (frame_block, frame_stamp, frame_dirty, block_frame, state))
    knn = np.empty((n, k), dtype=np.int64)
    ids = np.arange(n, dtype=np.int64)
    for i in range(n):
        tr.touch(pts_origin + i * prow, pts_origin + (i + 1) * prow, False)
        for j in range(n):
            if j != i:
                tr.touch(pts_origin + j * prow, pts_origin + (j + 1) * prow, False)
        dist = _sq_dists(points[i:i + 1], points)[0]
        others = ids != i
        order = np.lexsort((ids[others], dist[others]))[: k - 1]
        knn[i, 0] = i
        knn[i, 1:] = ids[others][order]
        tr.touch(knn_origin + i * krow, knn_origin + (i + 1) * krow, True)
    return knn


def traditional_snn(knn, theta, knn_origin, label_origin, block_size,
                    frame_block, frame_stamp, frame_dirty, block_frame, state, out):
    n, k = knn.shape
    krow = k * 8
    tr = _Tracer(block_size, (frame_block, frame_stamp, frame_dirty, block_frame, state))
    for i in range(n):
        tr.touch(label_origin + i * 8, label_origin + (i + 1) * 8, True)
    n_edges = 0
    for r in range(n):
        if r + 1 < n:
            a, b = _similar_mask(knn[r:r + 1], knn[r + 1:], theta)
            hits = set((b + r + 1).tolist())
        else:
            hits = set()
        for l in range(r + 1, n):
            tr.touch(knn_origin + r * krow, knn_origin + (r + 1) * krow, False)
            tr.touch(knn_origin + l * krow, knn_origin + (l + 1) * krow, False)
            if l in hits:
                tr.touch(label_origin + r * 8, label_origin + (r + 1) * 8, True)
                tr.touch(label_origin + l * 8, label_origin + (l + 1) * 8, True)
                out[n_edges, 0] = r
                out[n_edges, 1] = l
                n_edges += 1
    return n_edges
