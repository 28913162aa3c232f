"""Phase 2: tiled shared-near-neighbor merging and label closure.

Two points r != l are *similar* when each appears in the other's k-NN row
and their rows share more than ``theta`` ids outside position 0. Every
similar pair becomes a merge edge; a point's final label is the smallest
id in its connected component of the edge graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
import scipy.sparse.csgraph

from . import kernels
from .em_model import BlockStore, EmArray
from .errors import ConfigError

ELEMENT_WIDTH = 8
DEFAULT_EDGE_CAP = 1 << 20


@dataclass(frozen=True)
class Phase2Tiling:
    t: int
    n_tiles: int
    memory_slots: int
    k: int


def phase2_tile_size(memory_bytes: int, k: int, element_width: int = ELEMENT_WIDTH) -> int:
    """Rows per tile for two k-NN tiles plus two label tiles: ``floor(M_slots / (2 (k + 1)))``."""
    slots = memory_bytes // element_width
    t = slots // (2 * (k + 1))
    if t < 1:
        need = 2 * (k + 1) * element_width
        raise ConfigError(
            f"phase 2 needs t = M/(2(k+1)) >= 1; with k={k} that is M >= {need} B "
            f"({2 * (k + 1)} slots), got {memory_bytes} B"
        )
    return t


def phase2_tiling(n: int, memory_bytes: int, k: int, tile: int | None = None) -> Phase2Tiling:
    t_max = phase2_tile_size(memory_bytes, k)
    if tile is None:
        t = t_max
    elif 1 <= tile <= t_max:
        t = tile
    else:
        raise ConfigError(f"tile size {tile} outside feasible range [1, {t_max}]")
    t = min(t, n)
    return Phase2Tiling(t, math.ceil(n / t), memory_bytes // ELEMENT_WIDTH, k)


def snn_similar(row_r, row_l, theta: int) -> bool:
    row_r = np.asarray(row_r)
    row_l = np.asarray(row_l)
    if row_r[0] not in row_l or row_l[0] not in row_r:
        return False
    shared = np.intersect1d(row_r[1:], row_l[1:]).size
    return shared > theta


@dataclass
class EdgeSet:
    """Merge edges, kept in RAM up to ``cap`` and spilled to the store beyond it."""

    store: BlockStore = field(repr=False)
    cap: int = DEFAULT_EDGE_CAP
    _buf: list = field(default_factory=list, repr=False)
    _buffered: int = 0
    spilled: list = field(default_factory=list)
    count: int = 0

    def add(self, edges: np.ndarray):
        if len(edges) == 0:
            return
        self._buf.append(edges.copy())
        self._buffered += len(edges)
        self.count += len(edges)
        if self._buffered > self.cap:
            self._spill()

    def _spill(self):
        chunk = np.concatenate(self._buf)
        arr = self.store.allocate(chunk.shape, np.int64)
        self.store.write_range(arr, 0, chunk)
        self.spilled.append(arr)
        self._buf, self._buffered = [], 0

    def chunks(self):
        """Yield edge arrays; spilled chunks are read back through the store."""
        for arr in self.spilled:
            yield self.store.read_range(arr, 0, arr.length).reshape(arr.shape)
        yield from self._buf

    def to_array(self) -> np.ndarray:
        parts = list(self.chunks())
        if not parts:
            return np.empty((0, 2), dtype=np.int64)
        return np.concatenate(parts)


@dataclass
class MergeResult:
    edges: EdgeSet
    tiling: Phase2Tiling
    pairs_evaluated: int
    labels: EmArray | None = None


def _literal_relabel(label_r, label_l, pairs):
    # label[r] = label[l] if label[r] > label[l] else label[l] = label[r], in emission order
    for a, b in pairs:
        if label_r[a] > label_l[b]:
            label_r[a] = label_l[b]
        else:
            label_l[b] = label_r[a]


def snn_merge_blocked(store: BlockStore, knn: EmArray, theta: int, tile: int | None = None,
                      edge_cap: int = DEFAULT_EDGE_CAP, paper_literal: bool = False,
                      backend=None) -> MergeResult:
    """Evaluate every unordered pair once over tile pairs (i, j >= i).

    A label tile is read for each tile pair that yields at least one edge
    (both label tiles when i != j). With ``paper_literal`` the pinned label
    tiles are relabelled in place with the single-pass rule and written
    back; that output is order dependent and for diagnostics only.
    """
    impl = backend or kernels.impl
    n, k = knn.shape
    if theta < 0:
        raise ConfigError("theta must be >= 0")
    tiling = phase2_tiling(n, store.memory_budget, k, tile)
    t = tiling.t
    labels = store.allocate(n, np.int64)
    store.stage(labels, np.arange(n, dtype=np.int64))
    edges = EdgeSet(store, cap=edge_cap)
    scratch = np.empty((t * max(k - 1, 1), 2), dtype=np.int64)
    pairs = 0
    for i in range(tiling.n_tiles):
        lo_i = i * t
        rows_i = min(t, n - lo_i)
        with store.pin_rows(knn, lo_i, rows_i) as knn_i:
            for j in range(i, tiling.n_tiles):
                lo_j = j * t
                rows_j = min(t, n - lo_j)
                if j == i:
                    n_e, n_p = impl.snn_tile_edges(knn_i.data, knn_i.data, True, theta, scratch)
                else:
                    with store.pin_rows(knn, lo_j, rows_j) as knn_j:
                        n_e, n_p = impl.snn_tile_edges(knn_i.data, knn_j.data, False, theta, scratch)
                pairs += n_p
                if n_e == 0:
                    continue
                found = scratch[:n_e]
                edges.add(found)
                _touch_labels(store, labels, lo_i, rows_i, lo_j, rows_j, i == j, found, paper_literal)
    return MergeResult(edges, tiling, pairs, labels if paper_literal else None)


def _touch_labels(store, labels, lo_i, rows_i, lo_j, rows_j, same, found, literal):
    kw = dict(writable=literal)
    with store.pin_range(labels, lo_i, rows_i, **kw) as lab_i:
        if same:
            if literal:
                _literal_relabel(lab_i.data, lab_i.data, found - lo_i)
                store.write_back(lab_i)
            return
        with store.pin_range(labels, lo_j, rows_j, **kw) as lab_j:
            if literal:
                # edges are (min, max) and every id in tile i is below every id in tile j
                _literal_relabel(lab_i.data, lab_j.data, np.column_stack([found[:, 0] - lo_i, found[:, 1] - lo_j]))
                store.write_back(lab_i)
                store.write_back(lab_j)


def finalize_labels(edges, n: int, backend=None) -> np.ndarray:
    """Min-id label of each point's connected component (smaller root wins)."""
    impl = backend or kernels.impl
    parent = np.arange(n, dtype=np.int64)
    if isinstance(edges, EdgeSet):
        chunks = edges.chunks()
    else:
        chunks = [np.asarray(edges, dtype=np.int64).reshape(-1, 2)]
    for chunk in chunks:
        chunk = np.ascontiguousarray(chunk, dtype=np.int64)
        if chunk.size and (chunk.min() < 0 or chunk.max() >= n):
            raise ConfigError(f"edge references a point id outside [0, {n})")
        impl.union_find_labels(parent, chunk)
    return impl.union_find_labels(parent, np.empty((0, 2), dtype=np.int64))


def snn_edges_oracle(knn, theta: int) -> np.ndarray:
    """All similar pairs by dense set algebra over an N x N membership matrix."""
    knn = np.asarray(knn, dtype=np.int64)
    n, k = knn.shape
    rows = np.repeat(np.arange(n), k - 1)
    tail = np.zeros((n, n), dtype=np.int64)
    tail[rows, knn[:, 1:].reshape(-1)] = 1
    mutual = (tail == 1) & (tail.T == 1)
    shared = tail @ tail.T
    similar = np.triu(mutual & (shared > theta), 1)
    a, b = np.nonzero(similar)
    return np.column_stack([a, b]).astype(np.int64)


def snn_oracle(knn, theta: int) -> np.ndarray:
    """In-core SNN labels, independent of the tiled path and of union-find."""
    knn = np.asarray(knn, dtype=np.int64)
    n = knn.shape[0]
    e = snn_edges_oracle(knn, theta)
    graph = scipy.sparse.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    _, comp = scipy.sparse.csgraph.connected_components(graph, directed=False)
    low = np.full(comp.max() + 1, n, dtype=np.int64)
    np.minimum.at(low, comp, np.arange(n))
    return low[comp]
