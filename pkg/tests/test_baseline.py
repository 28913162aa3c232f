import numpy as np
import pytest

from emsnn.baseline import traditional_knn_lru, traditional_snn_lru
from emsnn.dataset_io import GenSpec, generate_points
from emsnn.em_model import EXPLICIT_PIN, LRU_CACHED, BlockStore
from emsnn.errors import ConfigError
from emsnn.knn_phase import build_knn_oracle
from emsnn.pipeline import ExecParams, run_blocked, run_traditional
from emsnn.snn_cluster import snn_edges_oracle, snn_oracle

from test_em_model import RefLru


def replay_reference(points, knn_rows, theta, block, frames):
    """Untiled loops written out naively, every access fed to the OrderedDict LRU."""
    n, d = points.shape
    k = knn_rows.shape[1]
    align = lambda nbytes: -(-nbytes // block) * block  # noqa: E731
    p_org = 0
    k_org = p_org + align(n * d * 8)
    l_org = k_org + align(n * k * 8)
    ref = RefLru(frames)

    def rng(origin, row, width, write=False):
        lo = origin + row * width
        for b in range(lo // block, (lo + width - 1) // block + 1):
            ref.touch(b, write)

    for i in range(n):
        rng(p_org, i, 8 * d)
        for j in range(n):
            if j != i:
                rng(p_org, j, 8 * d)
        rng(k_org, i, 8 * k, write=True)
    ref.flush()
    phase1 = (ref.reads, ref.writes)

    edges = {tuple(e) for e in snn_edges_oracle(knn_rows, theta).tolist()}
    for i in range(n):
        rng(l_org, i, 8, write=True)
    for r in range(n):
        for l in range(r + 1, n):
            rng(k_org, r, 8 * k)
            rng(k_org, l, 8 * k)
            if (r, l) in edges:
                rng(l_org, r, 8, write=True)
                rng(l_org, l, 8, write=True)
    ref.flush()
    return phase1, (ref.reads - phase1[0], ref.writes - phase1[1])


@pytest.mark.parametrize("n, d, k, theta, block, frames", [
    (30, 3, 4, 1, 64, 4), (41, 2, 5, 0, 64, 3), (25, 8, 6, 2, 128, 6), (60, 1, 3, 0, 64, 64)])
def test_counters_equal_naive_replay(backend, n, d, k, theta, block, frames):
    pts = generate_points(GenSpec(n, d, 3, 3.0, box=(-10, 10), seed=n))
    knn_ref = build_knn_oracle(pts, k)
    want1, want2 = replay_reference(pts, knn_ref, theta, block, frames)

    store = BlockStore(block, block * frames, LRU_CACHED)
    arr = store.allocate(pts.shape, np.float64)
    store.stage(arr, pts)
    knn = traditional_knn_lru(store, arr, k, backend=backend)
    got1 = (store.counters.block_reads, store.counters.block_writes)
    edges = traditional_snn_lru(store, knn, theta, backend=backend)
    got2 = (store.counters.block_reads - got1[0], store.counters.block_writes - got1[1])

    assert np.array_equal(store.snapshot(knn), knn_ref)
    assert sorted(map(tuple, edges.tolist())) == sorted(map(tuple, snn_edges_oracle(knn_ref, theta).tolist()))
    assert got1 == want1
    assert got2 == want2
    assert store.counters.peak_pinned <= block * frames


def test_labels_equal_blocked():
    pts = generate_points(GenSpec(300, 4, 5, 3.0, seed=12))
    params = ExecParams(8, 2, 4096, 256)
    trad = run_traditional(pts, params)
    blk = run_blocked(pts, params)
    assert np.array_equal(trad.labels, blk.labels)
    assert np.array_equal(trad.labels, snn_oracle(build_knn_oracle(pts, 8), 2))
    assert np.array_equal(trad.knn, blk.knn)


def test_everything_fits_is_one_cold_scan():
    pts = generate_points(GenSpec(50, 2, seed=2))
    params = ExecParams(4, 1, 1 << 16, 64)
    res = run_traditional(pts, params)
    knn = res.phase("knn")
    assert knn.block_reads == -(-50 * 2 * 8 // 64) + -(-50 * 4 * 8 // 64)
    assert knn.block_writes == -(-50 * 4 * 8 // 64)


def test_requires_lru_store():
    store = BlockStore(64, 1024, EXPLICIT_PIN)
    arr = store.allocate((4, 1), np.float64)
    with pytest.raises(ConfigError):
        traditional_knn_lru(store, arr, 2)
