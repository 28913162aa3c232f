"""Hot inner loops, dispatched to numba or numpy at import time.

Both ``_jit`` and ``_np`` expose the same functions with the same
in-place contracts; tests import them directly to compare the two.
"""

from .._accel import use_numba

if use_numba():
    from . import _jit as impl

    BACKEND = "numba"
else:
    from . import _np as impl

    BACKEND = "numpy"

knn_tile_update = impl.knn_tile_update
snn_tile_edges = impl.snn_tile_edges
union_find_labels = impl.union_find_labels
lru_touch = impl.lru_touch
lru_touch_bytes = impl.lru_touch_bytes
traditional_knn = impl.traditional_knn
traditional_snn = impl.traditional_snn

__all__ = [
    "BACKEND",
    "impl",
    "knn_tile_update",
    "snn_tile_edges",
    "union_find_labels",
    "lru_touch",
    "lru_touch_bytes",
    "traditional_knn",
    "traditional_snn",
]
