"""The traditional (untiled) SNN algorithm, charged through an LRU block cache.

The data values come from an uncharged snapshot of the store; what the
store charges is the exact block trace the untiled loops would produce:

* k-NN: for each point i, read row i, then every other row j in order,
  then write knn row i.
* SNN: write every label once (initialisation), then for each r < l read
  knn row r and knn row l, and on a similar pair write label r and label l.

Dirty frames are flushed at the end of each phase.
"""

import numpy as np

from . import kernels
from .em_model import LRU_CACHED, BlockStore, EmArray
from .errors import ConfigError


def _require_lru(store):
    if store.mode != LRU_CACHED:
        raise ConfigError("the traditional baseline runs on an lru-cached store")


def traditional_knn_lru(store: BlockStore, points: EmArray, k: int, backend=None) -> EmArray:
    impl = backend or kernels.impl
    _require_lru(store)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ConfigError(f"k must be in [1, N={n}], got {k}")
    knn = store.allocate((n, k), np.int64)
    values = store.snapshot(points)
    rows = impl.traditional_knn(values, k, points.origin, knn.origin, store.block_size, *store.lru_state())
    store.stage(knn, rows)
    store.flush()
    return knn


def traditional_snn_lru(store: BlockStore, knn: EmArray, theta: int, backend=None) -> np.ndarray:
    """Returns the (a, b) merge edges, a < b, in (a, b) lexicographic order."""
    impl = backend or kernels.impl
    _require_lru(store)
    n, k = knn.shape
    labels = store.allocate(n, np.int64)
    store.stage(labels, np.arange(n, dtype=np.int64))
    rows = store.snapshot(knn)
    out = np.empty((n * max(k - 1, 1) // 2 + 1, 2), dtype=np.int64)
    n_edges = impl.traditional_snn(rows, theta, knn.origin, labels.origin, store.block_size,
                                   *store.lru_state(), out)
    store.flush()
    return out[:n_edges].copy()
