"""End-to-end runs: points in, labels and per-phase I/O metrics out."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .baseline import traditional_knn_lru, traditional_snn_lru
from .em_model import EXPLICIT_PIN, LRU_CACHED, BlockStore, PhaseMetrics
from .errors import ConfigError
from .knn_phase import build_knn_blocked
from .snn_cluster import DEFAULT_EDGE_CAP, finalize_labels, snn_merge_blocked


@dataclass(frozen=True)
class ExecParams:
    k: int
    theta: int
    memory_bytes: int
    block_bytes: int
    seed: int = 0

    def validate(self, n: int | None = None):
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.theta < 0:
            raise ConfigError("theta must be >= 0")
        if self.memory_bytes < 2 * self.block_bytes:
            raise ConfigError(f"M={self.memory_bytes} B must be at least 2B={2 * self.block_bytes} B")
        if n is not None and self.k > n:
            raise ConfigError(f"k={self.k} exceeds N={n}")


@dataclass
class RunResult:
    knn: np.ndarray
    labels: np.ndarray
    edges: np.ndarray
    phases: list[PhaseMetrics]
    tiles: dict = field(default_factory=dict)
    peak_pinned: int = 0
    pairs_evaluated: int = 0

    @property
    def total(self) -> PhaseMetrics:
        return next(p for p in self.phases if p.phase == "total")

    def phase(self, name) -> PhaseMetrics:
        return next(p for p in self.phases if p.phase == name)


def _total(phases):
    total = PhaseMetrics("total")
    for p in phases:
        total = total + p
    total.phase = "total"
    return total


def run_knn(points, params: ExecParams, *, tile=None, backing="memory", timing=False, backend=None):
    """Phase 1 alone. Returns (knn rows, metrics, tiling, peak pinned bytes)."""
    points = np.asarray(points, dtype=np.float64)
    params.validate(points.shape[0])
    with BlockStore(params.block_bytes, params.memory_bytes, EXPLICIT_PIN, backing) as store:
        pts = store.allocate(points.shape, np.float64)
        store.stage(pts, points)
        with store.measure("knn", timing) as metrics:
            knn, tiling = build_knn_blocked(store, pts, params.k, tile=tile, backend=backend)
        return store.snapshot(knn), metrics, tiling, store.counters.peak_pinned


def run_cluster(knn_rows, params: ExecParams, *, tile=None, backing="memory", edge_cap=DEFAULT_EDGE_CAP,
                paper_literal=False, timing=False, backend=None):
    """Phase 2 plus label finalization on a k-NN matrix that is already on disk.

    Returns (labels, edges, [snn metrics, finalize metrics], tiling, pairs evaluated, peak pinned).
    """
    knn_rows = np.asarray(knn_rows, dtype=np.int64)
    n = knn_rows.shape[0]
    if params.theta < 0:
        raise ConfigError("theta must be >= 0")
    with BlockStore(params.block_bytes, params.memory_bytes, EXPLICIT_PIN, backing) as store:
        knn = store.allocate(knn_rows.shape, np.int64)
        store.stage(knn, knn_rows)
        with store.measure("snn", timing) as m2:
            merged = snn_merge_blocked(store, knn, params.theta, tile=tile, edge_cap=edge_cap,
                                       paper_literal=paper_literal, backend=backend)
        with store.measure("finalize", timing) as m3:
            if paper_literal:
                labels = store.read_range(merged.labels, 0, n)
            else:
                labels = finalize_labels(merged.edges, n, backend=backend)
                out = store.allocate(n, np.int64)
                store.write_range(out, 0, labels)
        edges = merged.edges.to_array()
        return labels, edges, [m2, m3], merged.tiling, merged.pairs_evaluated, store.counters.peak_pinned


def run_blocked(points, params: ExecParams, *, tile1=None, tile2=None, backing="memory",
                edge_cap=DEFAULT_EDGE_CAP, paper_literal=False, timing=False, backend=None) -> RunResult:
    knn, m1, t1, peak1 = run_knn(points, params, tile=tile1, backing=backing, timing=timing, backend=backend)
    labels, edges, rest, t2, pairs, peak2 = run_cluster(
        knn, params, tile=tile2, backing=backing, edge_cap=edge_cap,
        paper_literal=paper_literal, timing=timing, backend=backend)
    phases = [m1] + rest
    return RunResult(knn, labels, edges, phases + [_total(phases)],
                     tiles={"phase1_t": t1.t, "phase1_tiles": t1.n_tiles,
                            "phase2_t": t2.t, "phase2_tiles": t2.n_tiles},
                     peak_pinned=max(peak1, peak2), pairs_evaluated=pairs)


def run_traditional(points, params: ExecParams, *, backing="memory", timing=False, backend=None) -> RunResult:
    points = np.asarray(points, dtype=np.float64)
    params.validate(points.shape[0])
    n = points.shape[0]
    with BlockStore(params.block_bytes, params.memory_bytes, LRU_CACHED, backing) as store:
        pts = store.allocate(points.shape, np.float64)
        store.stage(pts, points)
        with store.measure("knn", timing) as m1:
            knn = traditional_knn_lru(store, pts, params.k, backend=backend)
        with store.measure("snn", timing) as m2:
            edges = traditional_snn_lru(store, knn, params.theta, backend=backend)
        with store.measure("finalize", timing) as m3:
            labels = finalize_labels(edges, n, backend=backend)
            out = store.allocate(n, np.int64)
            store.write_range(out, 0, labels)
        knn_rows = store.snapshot(knn)
        peak = store.counters.peak_pinned
    phases = [m1, m2, m3]
    return RunResult(knn_rows, labels, edges, phases + [_total(phases)],
                     tiles={"lru_frames": params.memory_bytes // params.block_bytes},
                     peak_pinned=peak, pairs_evaluated=n * (n - 1) // 2)
