"""Phase 1: tiled k-nearest-neighbor matrix construction over a BlockStore.

Rows have length ``k`` and include the point itself at position 0, so each
row lists ``k - 1`` true neighbors, nearest first. Equal distances are
ordered by ascending point id. Ranking uses squared distances, summed
coordinate by coordinate in index order; the oracle sums the same way, so
both agree bit for bit on ties.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .em_model import BlockStore, EmArray
from .errors import ConfigError

ELEMENT_WIDTH = 8


@dataclass(frozen=True)
class Phase1Tiling:
    t: int
    n_tiles: int
    memory_slots: int
    dims: int
    k: int


def phase1_tile_size(memory_bytes: int, dims: int, k: int, element_width: int = ELEMENT_WIDTH) -> int:
    """Points per tile so that two point tiles, a distance tile and an index tile fit.

    ``t = floor(M_slots / (2 (D + k)))``
    """
    slots = memory_bytes // element_width
    t = slots // (2 * (dims + k))
    if t < 1:
        need = 2 * (dims + k) * element_width
        raise ConfigError(
            f"phase 1 needs t = M/(2(D+k)) >= 1; with D={dims}, k={k} that is M >= {need} B "
            f"({2 * (dims + k)} slots), got {memory_bytes} B"
        )
    return t


def phase1_tiling(n: int, memory_bytes: int, dims: int, k: int, tile: int | None = None) -> Phase1Tiling:
    t_max = phase1_tile_size(memory_bytes, dims, k)
    if tile is None:
        t = t_max
    elif 1 <= tile <= t_max:
        t = tile
    else:
        raise ConfigError(f"tile size {tile} outside feasible range [1, {t_max}]")
    t = min(t, n)
    return Phase1Tiling(t, math.ceil(n / t), memory_bytes // ELEMENT_WIDTH, dims, k)


def euclidean_distance(p, q) -> float:
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape[0]} vs {q.shape[0]}")
    acc = 0.0
    for a, b in zip(p.tolist(), q.tolist()):
        acc += (a - b) * (a - b)
    return math.sqrt(acc)


def build_knn_blocked(store: BlockStore, points: EmArray, k: int, tile: int | None = None,
                      backend=None) -> tuple[EmArray, Phase1Tiling]:
    """Tiled all-pairs k-NN. Returns the on-disk matrix and the tiling used.

    For each tile i the point tile, a distance tile and the output index
    tile stay pinned while every tile j streams through; the index tile is
    written back once all j are done.
    """
    impl = backend or kernels.impl
    n, dims = points.shape
    if not 1 <= k <= n:
        raise ConfigError(f"k must be in [1, N={n}], got {k}")
    tiling = phase1_tiling(n, store.memory_budget, dims, k, tile)
    t = tiling.t
    knn = store.allocate((n, k), np.int64)
    for i in range(tiling.n_tiles):
        lo_i = i * t
        rows_i = min(t, n - lo_i)
        with store.pin_rows(points, lo_i, rows_i) as s_i, \
                store.pin_scratch((rows_i, k), np.float64, np.inf) as dist, \
                store.pin_rows(knn, lo_i, rows_i, read=False, writable=True) as out:
            best_d = dist.data[:, : k - 1]
            best_i = out.data[:, 1:]
            best_i[:] = n
            for j in range(tiling.n_tiles):
                lo_j = j * t
                if j == i:
                    impl.knn_tile_update(s_i.data, lo_i, s_i.data, lo_i, best_d, best_i)
                    continue
                with store.pin_rows(points, lo_j, min(t, n - lo_j)) as s_j:
                    impl.knn_tile_update(s_i.data, lo_i, s_j.data, lo_j, best_d, best_i)
            out.data[:, 0] = np.arange(lo_i, lo_i + rows_i)
            store.write_back(out)
    return knn, tiling


def build_knn_oracle(points, k: int) -> np.ndarray:
    """Brute force: full distance row per point, sorted by (distance, id)."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ConfigError(f"k must be in [1, N={n}], got {k}")
    ids = np.arange(n)
    out = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        d = np.zeros(n)
        for c in range(points.shape[1]):
            diff = points[i, c] - points[:, c]
            d += diff * diff
        others = ids[ids != i]
        order = np.lexsort((others, d[others]))
        out[i, 0] = i
        out[i, 1:] = others[order[: k - 1]]
    return out
