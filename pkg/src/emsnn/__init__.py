"""Out-of-core shared-near-neighbor clustering over a simulated block store."""

from .dataset_io import GenSpec, generate_dataset, generate_points, read_header, write_labels
from .em_model import EXPLICIT_PIN, LRU_CACHED, BlockStore, EmArray, IoCounters, PhaseMetrics, create_store
from .errors import BoundsError, BudgetError, ConfigError, EmsnnError, FormatError
from .knn_phase import build_knn_blocked, build_knn_oracle, euclidean_distance, phase1_tile_size
from .pipeline import ExecParams, RunResult, run_blocked, run_traditional
from .snn_cluster import finalize_labels, phase2_tile_size, snn_merge_blocked, snn_oracle, snn_similar

__version__ = "0.1.0"

__all__ = [
    "BlockStore", "BoundsError", "BudgetError", "ConfigError", "EXPLICIT_PIN", "EmArray", "EmsnnError",
    "ExecParams", "FormatError", "GenSpec", "IoCounters", "LRU_CACHED", "PhaseMetrics", "RunResult",
    "build_knn_blocked", "build_knn_oracle", "create_store", "euclidean_distance", "finalize_labels",
    "generate_dataset", "generate_points", "phase1_tile_size", "phase2_tile_size", "read_header",
    "run_blocked", "run_traditional", "snn_merge_blocked", "snn_oracle", "snn_similar", "write_labels",
]
