import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from emsnn.dataset_io import (HEADER_SIZE, DatasetHeader, GenSpec, KnnHeader, generate_dataset,
                              generate_points, read_header, read_knn, read_labels, read_points,
                              splitmix64, write_knn, write_labels, write_metrics, write_points)
from emsnn.em_model import PhaseMetrics
from emsnn.errors import ConfigError, FormatError


def test_zero_spread_single_cluster_gives_identical_points():
    pts = generate_points(GenSpec(4, 3, n_clusters=1, spread=0.0, seed=9))
    assert pts.shape == (4, 3)
    assert (pts == pts[0]).all()
    assert ((pts >= -100) & (pts < 100)).all()


def test_same_seed_same_bytes(tmp_path):
    spec = GenSpec(500, 7, 3, 2.0, seed=42)
    a = generate_dataset(spec, tmp_path / "a.emsnn").read_bytes()
    b = generate_dataset(spec, tmp_path / "b.emsnn").read_bytes()
    assert a == b


@pytest.mark.parametrize("s1, s2", [(0, 1), (1, 2), (2, 3), (7, 8), (42, 43), (100, 1000),
                                    (12345, 54321), (2**63, 2**63 + 1)])
def test_different_seeds_differ(s1, s2):
    a = generate_points(GenSpec(50, 4, 2, seed=s1))
    b = generate_points(GenSpec(50, 4, 2, seed=s2))
    assert not np.array_equal(a, b)


def test_smaller_n_is_prefix():
    big = generate_points(GenSpec(300, 5, 4, 3.0, seed=11))
    small = generate_points(GenSpec(120, 5, 4, 3.0, seed=11))
    assert np.array_equal(big[:120], small)


def test_generator_statistics():
    pts = generate_points(GenSpec(20000, 2, 1, 1.0, box=(0.0, 0.0), seed=3))
    assert abs(pts.mean()) < 0.03
    assert abs(pts.std() - 1.0) < 0.03


def test_splitmix_reference_value():
    # first output of the published splitmix64 with state 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF


def test_payload_size(tmp_path):
    path = generate_dataset(GenSpec(10_000, 64, seed=1), tmp_path / "big.emsnn")
    header = read_header(path)
    assert header == DatasetHeader(10_000, 64)
    assert header.payload_bytes == 5_120_000
    assert path.stat().st_size == HEADER_SIZE + 5_120_000


def test_bad_magic(tmp_path):
    path = write_points(np.zeros((3, 2)), tmp_path / "x.emsnn")
    raw = bytearray(path.read_bytes())
    raw[:6] = b"XXXXXX"
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="magic"):
        read_points(path)


def test_truncated_payload(tmp_path):
    path = write_points(np.zeros((3, 2)), tmp_path / "x.emsnn")
    path.write_bytes(path.read_bytes()[:-1])
    with pytest.raises(FormatError, match="payload"):
        read_header(path)
    path.write_bytes(b"EMS")
    with pytest.raises(FormatError):
        read_header(path)


def test_zero_rows_rejected(tmp_path):
    import struct
    path = tmp_path / "z.emsnn"
    path.write_bytes(struct.pack("<6sQI2s", b"EMSNN1", 0, 3, b"f8"))
    with pytest.raises(FormatError):
        read_header(path)


def test_labels_format(tmp_path):
    path = write_labels([0, 0, 0, 3], tmp_path / "l.labels.csv")
    assert path.read_text() == "0,0\n1,0\n2,0\n3,3\n"
    assert read_labels(path).tolist() == [0, 0, 0, 3]
    assert write_labels([0], tmp_path / "one.labels.csv").read_text() == "0,0\n"
    with pytest.raises(ConfigError):
        write_labels([], tmp_path / "e.labels.csv")


def test_knn_file_invariants(tmp_path):
    good = np.array([[0, 1], [1, 0], [2, 1]])
    path = write_knn(good, tmp_path / "k.emknn")
    assert read_header(path) == KnnHeader(3, 2)
    assert np.array_equal(read_knn(path), good)
    for bad in ([[0, 1], [0, 1], [2, 1]], [[0, 0], [1, 0], [2, 1]], [[0, 3], [1, 0], [2, 1]]):
        p = write_knn(np.array(bad), tmp_path / "bad.emknn")
        with pytest.raises(FormatError):
            read_knn(p)
    with pytest.raises(FormatError):
        read_points(path)


def test_metrics_csv(tmp_path):
    path = write_metrics([PhaseMetrics("knn", 3, 1, 3 * 64, 64)], tmp_path / "m.metrics.csv")
    assert path.read_text() == ("phase,block_reads,block_writes,bytes_read,bytes_written,elapsed_ms\n"
                                "knn,3,1,192,64,0.000\n")


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 20), st.integers(1, 6)),
              elements=st.floats(allow_nan=False, width=64)))
def test_points_round_trip(tmp_path_factory, pts):
    path = write_points(pts, tmp_path_factory.mktemp("rt") / "p.emsnn")
    assert read_points(path).tobytes() == pts.tobytes()


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.integers(1, 6), st.integers(0, 2**32))
def test_knn_round_trip(tmp_path_factory, n, k, seed):
    k = min(k, n)
    rng = np.random.default_rng(seed)
    rows = [np.concatenate(([i], rng.permutation(np.delete(np.arange(n), i))[: k - 1])) for i in range(n)]
    knn = np.array(rows, dtype=np.int64)
    path = write_knn(knn, tmp_path_factory.mktemp("rt") / "k.emknn")
    assert np.array_equal(read_knn(path), knn)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 10**9), min_size=1, max_size=50))
def test_labels_round_trip(tmp_path_factory, labels):
    path = write_labels(labels, tmp_path_factory.mktemp("rt") / "x.labels.csv")
    assert read_labels(path).tolist() == labels


def test_genspec_validation():
    for spec in (GenSpec(0, 2), GenSpec(2, 0), GenSpec(2, 2, 0), GenSpec(2, 2, spread=-1.0),
                 GenSpec(2, 2, box=(1.0, 0.0))):
        with pytest.raises(ConfigError):
            generate_points(spec)
