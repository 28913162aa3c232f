import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emsnn.dataset_io import GenSpec, generate_points
from emsnn.em_model import BlockStore
from emsnn.errors import ConfigError
from emsnn.knn_phase import build_knn_oracle
from emsnn.snn_cluster import EdgeSet, finalize_labels, phase2_tile_size, snn_edges_oracle, snn_merge_blocked, \
    snn_oracle, snn_similar

FOUR_KNN = np.array([[0, 1, 2], [1, 0, 2], [2, 1, 0], [3, 2, 1]])


def set_edges(knn, theta):
    """Reference edge list with Python sets, one pair at a time."""
    rows = [list(r) for r in np.asarray(knn).tolist()]
    out = []
    for r, l in itertools.combinations(range(len(rows)), 2):
        if l in rows[r][1:] and r in rows[l][1:] and len(set(rows[r][1:]) & set(rows[l][1:])) > theta:
            out.append((r, l))
    return out


def merge(knn, theta, memory=1 << 16, block=64, tile=None, edge_cap=1 << 20, literal=False, backend=None):
    knn = np.asarray(knn, dtype=np.int64)
    store = BlockStore(block, memory)
    arr = store.allocate(knn.shape, np.int64)
    store.stage(arr, knn)
    res = snn_merge_blocked(store, arr, theta, tile=tile, edge_cap=edge_cap, paper_literal=literal,
                            backend=backend)
    return res, store, arr


def edge_set(edges):
    return sorted(map(tuple, np.asarray(edges).reshape(-1, 2).tolist()))


def random_knn(seed, n, k, dims=3, clusters=3):
    pts = generate_points(GenSpec(n, dims, clusters, 4.0, box=(-20, 20), seed=seed))
    return build_knn_oracle(pts, k)


def test_tile_size_examples():
    assert phase2_tile_size(1600 * 8, 15) == 50
    assert phase2_tile_size(2 * 17 * 8, 16) == 1
    with pytest.raises(ConfigError, match="M >= 272 B"):
        phase2_tile_size(2 * 17 * 8 - 1, 16)


def test_similar_examples():
    assert snn_similar([0, 1, 2], [1, 0, 2], 0)
    assert not snn_similar([0, 1, 2], [1, 0, 2], 1)
    assert not snn_similar([3, 2, 1], [2, 1, 0], 0)  # 3 absent from row 2
    assert snn_similar([0, 5, 6, 7], [5, 0, 6, 7], 1)
    assert not snn_similar([0, 5, 6, 7], [5, 0, 6, 7], 2)


def test_four_point_merge(backend):
    res, *_ = merge(FOUR_KNN, 0, backend=backend)
    assert edge_set(res.edges.to_array()) == [(0, 1), (0, 2), (1, 2)]
    assert finalize_labels(res.edges, 4, backend=backend).tolist() == [0, 0, 0, 3]
    assert snn_oracle(FOUR_KNN, 0).tolist() == [0, 0, 0, 3]


def test_theta_at_least_k_minus_one_gives_singletons():
    knn = random_knn(1, 50, 6)
    for theta in (5, 6, 20):
        res, *_ = merge(knn, theta)
        assert res.edges.count == 0
        assert finalize_labels(res.edges, 50).tolist() == list(range(50))


def test_single_point():
    res, store, _ = merge([[0]], 0)
    assert res.edges.count == 0 and res.pairs_evaluated == 0
    assert finalize_labels(res.edges, 1).tolist() == [0]


def test_finalize_examples(backend):
    assert finalize_labels([], 3, backend=backend).tolist() == [0, 1, 2]
    assert finalize_labels([(3, 4), (1, 4), (0, 2)], 6, backend=backend).tolist() == [0, 1, 0, 1, 1, 5]
    assert finalize_labels([(4, 5), (3, 4), (2, 3)], 6, backend=backend).tolist() == [0, 1, 2, 2, 2, 2]
    with pytest.raises(ConfigError):
        finalize_labels([(0, 7)], 3, backend=backend)


def test_identical_points_one_cluster():
    # with k = N every row holds every point, so all pairs are mutual and share k-2 ids
    knn = build_knn_oracle(np.zeros((6, 2)), 6)
    assert len(set_edges(knn, 0)) == 15
    assert finalize_labels(merge(knn, 0)[0].edges, 6).tolist() == [0] * 6


def test_identical_points_k_below_n():
    # id tie-break gives everyone the same low ids; points 4.. are in nobody's row
    knn = build_knn_oracle(np.zeros((12, 2)), 4)
    labels = finalize_labels(merge(knn, 0)[0].edges, 12)
    assert labels.tolist() == [0, 0, 0, 0] + list(range(4, 12))
    assert np.array_equal(labels, snn_oracle(knn, 0))


def test_negative_theta_rejected():
    with pytest.raises(ConfigError):
        merge(FOUR_KNN, -1)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(2, 70), k=st.integers(2, 7),
       theta=st.integers(0, 5), tile=st.integers(1, 70))
def test_edges_and_labels_match_oracles(seed, n, k, theta, tile):
    k = min(k, n)
    knn = random_knn(seed, n, k)
    ref = set_edges(knn, theta)
    assert edge_set(snn_edges_oracle(knn, theta)) == ref
    res, *_ = merge(knn, theta, tile=min(tile, phase2_tile_size(1 << 16, k)))
    assert edge_set(res.edges.to_array()) == ref
    assert res.pairs_evaluated == n * (n - 1) // 2
    labels = finalize_labels(res.edges, n)
    assert np.array_equal(labels, snn_oracle(knn, theta))
    # canonical: every label is the smallest member of its cluster
    for lab in set(labels.tolist()):
        assert lab == np.flatnonzero(labels == lab).min()


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(2, 40), k=st.integers(2, 6), theta=st.integers(0, 4))
def test_similarity_symmetric(seed, n, k, theta):
    knn = random_knn(seed, n, min(k, n))
    for r, l in itertools.combinations(range(n), 2):
        assert snn_similar(knn[r], knn[l], theta) == snn_similar(knn[l], knn[r], theta)


def test_tiling_invariance(backend):
    knn = random_knn(5, 90, 6)
    ref = finalize_labels(merge(knn, 1)[0].edges, 90)
    for tile in (1, 2, 7, 30, 89, 90):
        res, *_ = merge(knn, 1, tile=tile, backend=backend)
        assert np.array_equal(finalize_labels(res.edges, 90), ref)


def test_theta_monotone():
    knn = random_knn(6, 120, 8)
    counts = []
    prev = None
    for theta in range(8):
        labels = finalize_labels(merge(knn, theta)[0].edges, 120)
        counts.append(len(set(labels.tolist())))
        if prev is not None:
            # a larger theta can only split clusters
            for lab in set(labels.tolist()):
                assert len(set(prev[labels == lab].tolist())) == 1
        prev = labels
    assert counts == sorted(counts)


def touched(origin, start, stop, block):
    return (origin + stop - 1) // block - (origin + start) // block + 1


@pytest.mark.parametrize("n, k, theta, memory, block", [
    (100, 6, 1, 2048, 64), (250, 8, 2, 4096, 256), (64, 4, 0, 640, 64)])
def test_io_matches_tile_schedule(n, k, theta, memory, block):
    knn = random_knn(n, n, k)
    res, store, arr = merge(knn, theta, memory=memory, block=block)
    t, nt = res.tiling.t, res.tiling.n_tiles
    tiles = [(i * t, min(t, n - i * t)) for i in range(nt)]
    krow = lambda i: touched(arr.origin, tiles[i][0] * 8 * k, sum(tiles[i]) * 8 * k, block)  # noqa: E731
    # label table is allocated directly after the k-NN matrix, block aligned
    lab_origin = arr.origin + -(-arr.nbytes // block) * block
    lrow = lambda i: touched(lab_origin, tiles[i][0] * 8, sum(tiles[i]) * 8, block)  # noqa: E731
    tile_of = lambda p: p // t  # noqa: E731
    hit = {(tile_of(a), tile_of(b)) for a, b in set_edges(knn, theta)}
    reads = sum(krow(i) for i in range(nt))
    reads += sum(krow(j) for i in range(nt) for j in range(i + 1, nt))
    reads += sum(lrow(i) + (lrow(j) if i != j else 0) for i, j in hit)
    assert store.counters.block_reads == reads
    assert store.counters.block_writes == 0
    bound = nt * nt * -(-(t * 8 * (k + 1)) // block)
    assert reads <= 4 * bound
    assert store.counters.peak_pinned <= memory


def test_edge_spill_is_charged_and_lossless():
    knn = random_knn(3, 150, 8)
    small, s_store, _ = merge(knn, 1, edge_cap=4)
    big, b_store, _ = merge(knn, 1)
    assert small.edges.spilled and not big.edges.spilled
    assert edge_set(small.edges.to_array()) == edge_set(big.edges.to_array())
    assert s_store.counters.block_writes > 0 and b_store.counters.block_writes == 0
    before = s_store.counters.block_reads
    assert np.array_equal(finalize_labels(small.edges, 150), finalize_labels(big.edges, 150))
    assert s_store.counters.block_reads > before


def test_edgeset_roundtrip():
    store = BlockStore(64, 1024)
    es = EdgeSet(store, cap=3)
    es.add(np.array([[0, 1], [1, 2]]))
    es.add(np.array([[2, 3], [3, 4]]))
    es.add(np.array([[5, 6]]))
    assert es.count == 5 and len(es.spilled) == 1
    assert edge_set(es.to_array()) == [(0, 1), (1, 2), (2, 3), (3, 4), (5, 6)]


def test_literal_mode_runs_and_writes_back():
    res, store, _ = merge(FOUR_KNN, 0, literal=True, tile=1)
    assert res.labels is not None
    assert store.snapshot(res.labels).tolist() == [0, 0, 0, 3]
    assert store.counters.block_writes > 0
