"""Simulated external memory: a disk of fixed-size blocks plus a bounded RAM.

A :class:`BlockStore` owns one backing region (a bytearray or a real file)
and hands out block-aligned :class:`EmArray` slices of it. Algorithms move
data between disk and RAM only through the store, which charges every
block transfer to its :class:`IoCounters`.

Two access disciplines are supported:

``explicit-pin``
    The caller pins element ranges (tiles) and unpins them when done.
    The total pinned bytes may never exceed the memory budget; a pin that
    would do so raises :class:`~emsnn.errors.BudgetError`.
``lru-cached``
    Element accesses go through an LRU cache of ``memory_budget // block_size``
    block frames. Misses cost one read, evicting a dirty frame costs one write.
"""

from __future__ import annotations

import os
import tempfile
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import BoundsError, BudgetError, ConfigError

EXPLICIT_PIN = "explicit-pin"
LRU_CACHED = "lru-cached"
MODES = (EXPLICIT_PIN, LRU_CACHED)

TMPDIR_ENV = "EMSNN_TMPDIR"


@dataclass
class IoCounters:
    block_reads: int = 0
    block_writes: int = 0
    bytes_read: int = 0
    bytes_written: int = 0
    peak_pinned: int = 0

    def copy(self) -> "IoCounters":
        return IoCounters(**asdict(self))

    def as_tuple(self):
        return (self.block_reads, self.block_writes, self.bytes_read, self.bytes_written, self.peak_pinned)

    @property
    def transfers(self) -> int:
        return self.block_reads + self.block_writes


@dataclass
class PhaseMetrics:
    """Counter deltas for one named phase of a run."""

    phase: str
    block_reads: int = 0
    block_writes: int = 0
    bytes_read: int = 0
    bytes_written: int = 0
    elapsed_ms: float = 0.0
    peak_pinned: int = 0

    @property
    def transfers(self) -> int:
        return self.block_reads + self.block_writes

    def __add__(self, other: "PhaseMetrics") -> "PhaseMetrics":
        return PhaseMetrics(
            phase=self.phase,
            block_reads=self.block_reads + other.block_reads,
            block_writes=self.block_writes + other.block_writes,
            bytes_read=self.bytes_read + other.bytes_read,
            bytes_written=self.bytes_written + other.bytes_written,
            elapsed_ms=self.elapsed_ms + other.elapsed_ms,
            peak_pinned=max(self.peak_pinned, other.peak_pinned),
        )


@dataclass(frozen=True)
class EmArray:
    """A typed, block-aligned region of a store. ``shape[0]`` rows of ``shape[1:]``."""

    store: "BlockStore" = field(repr=False, compare=False)
    dtype: np.dtype
    shape: tuple
    origin: int

    @property
    def element_width(self) -> int:
        return self.dtype.itemsize

    @property
    def length(self) -> int:
        return int(np.prod(self.shape))

    @property
    def row_elements(self) -> int:
        return int(np.prod(self.shape[1:])) if len(self.shape) > 1 else 1

    @property
    def nbytes(self) -> int:
        return self.length * self.element_width


@dataclass
class PinnedView:
    """Resident copy of an element range. Use as a context manager to unpin."""

    store: "BlockStore" = field(repr=False)
    array: EmArray | None
    first: int
    count: int
    data: np.ndarray
    writable: bool
    pinned_bytes: int
    released: bool = False

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.store.unpin(self)


class _MemoryBacking:
    def __init__(self):
        self.buf = bytearray()

    def ensure(self, size):
        if len(self.buf) < size:
            self.buf.extend(bytes(size - len(self.buf)))

    def read(self, offset, n):
        return bytes(self.buf[offset:offset + n])

    def write(self, offset, data):
        self.buf[offset:offset + len(data)] = data

    def close(self):
        pass


class _FileBacking:
    """Raw little-endian bytes, no header."""

    def __init__(self, path: Path | None):
        if path is None:
            tmpdir = os.environ.get(TMPDIR_ENV) or None
            fd, name = tempfile.mkstemp(prefix="emsnn-", suffix=".store", dir=tmpdir)
            self.path = Path(name)
            self.owned = True
        else:
            self.path = Path(path)
            fd = os.open(self.path, os.O_RDWR | os.O_CREAT | os.O_TRUNC, 0o644)
            self.owned = False
        self.fd = fd
        self.size = 0

    def ensure(self, size):
        if size > self.size:
            os.ftruncate(self.fd, size)
            self.size = size

    def read(self, offset, n):
        data = os.pread(self.fd, n, offset)
        if len(data) != n:
            raise OSError(f"short read at {offset} from {self.path}")
        return data

    def write(self, offset, data):
        view = memoryview(data)
        while len(view):
            written = os.pwrite(self.fd, view, offset)
            view = view[written:]
            offset += written

    def close(self):
        if self.fd is not None:
            os.close(self.fd)
            self.fd = None
            if self.owned:
                self.path.unlink(missing_ok=True)


class BlockStore:
    """Block disk + bounded RAM with exact transfer counting."""

    def __init__(self, block_size: int, memory_budget: int, mode: str = EXPLICIT_PIN, backing="memory"):
        if block_size <= 0:
            raise ConfigError(f"block size must be positive, got {block_size}")
        if memory_budget < 2 * block_size:
            raise ConfigError(
                f"memory budget {memory_budget} B is smaller than two blocks of {block_size} B"
            )
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
        self.block_size = int(block_size)
        self.memory_budget = int(memory_budget)
        self.mode = mode
        if backing == "memory":
            self._backing = _MemoryBacking()
        elif backing == "file":
            self._backing = _FileBacking(None)
        else:
            self._backing = _FileBacking(Path(backing))
        self.backing_kind = "memory" if backing == "memory" else "file"
        self.counters = IoCounters()
        self.pinned = 0
        self._phase_peak = 0
        self._end = 0
        self.frames = self.memory_budget // self.block_size
        self._frame_block = np.full(self.frames, -1, dtype=np.int64)
        self._frame_stamp = np.zeros(self.frames, dtype=np.int64)
        self._frame_dirty = np.zeros(self.frames, dtype=np.uint8)
        self._block_frame = np.full(0, -1, dtype=np.int64)
        self._lru = np.zeros(3, dtype=np.int64)  # clock, reads, writes
        self._lru_seen = (0, 0)

    # -- lifecycle ---------------------------------------------------------

    def close(self):
        self._backing.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @property
    def n_blocks(self) -> int:
        return self._end // self.block_size

    def allocate(self, shape, dtype) -> EmArray:
        """Reserve a zero-filled, block-aligned array. Costs no I/O."""
        shape = (int(shape),) if np.isscalar(shape) else tuple(int(s) for s in shape)
        arr = EmArray(self, np.dtype(dtype).newbyteorder("<"), shape, self._end)
        size = arr.nbytes
        blocks = max(1, -(-size // self.block_size))
        self._end += blocks * self.block_size
        self._backing.ensure(self._end)
        grow = self.n_blocks - len(self._block_frame)
        if grow > 0:
            self._block_frame = np.concatenate([self._block_frame, np.full(grow, -1, dtype=np.int64)])
        return arr

    def stage(self, array: EmArray, values) -> None:
        """Place initial contents on disk without charging I/O (input already resident on disk)."""
        values = np.ascontiguousarray(values, dtype=array.dtype).reshape(array.shape)
        self._backing.write(array.origin, values.tobytes())

    def snapshot(self, array: EmArray) -> np.ndarray:
        """Uncharged full read, for exporting results and for tests."""
        raw = self._backing.read(array.origin, array.nbytes)
        return np.frombuffer(raw, dtype=array.dtype).reshape(array.shape).copy()

    # -- accounting --------------------------------------------------------

    def _blocks_spanned(self, array: EmArray, first: int, count: int) -> int:
        if count == 0:
            return 0
        w = array.element_width
        start = array.origin + first * w
        stop = start + count * w
        return (stop - 1) // self.block_size - start // self.block_size + 1

    def _charge(self, reads=0, writes=0):
        c = self.counters
        c.block_reads += reads
        c.block_writes += writes
        c.bytes_read += reads * self.block_size
        c.bytes_written += writes * self.block_size

    def _check_range(self, array: EmArray, first: int, count: int):
        if first < 0 or count < 0 or first + count > array.length:
            raise BoundsError(f"range [{first}, {first + count}) outside array of {array.length} elements")

    def _reserve(self, nbytes: int):
        if self.pinned + nbytes > self.memory_budget:
            raise BudgetError(
                f"pinning {nbytes} B on top of {self.pinned} B exceeds budget {self.memory_budget} B"
            )
        self.pinned += nbytes
        self.counters.peak_pinned = max(self.counters.peak_pinned, self.pinned)
        self._phase_peak = max(self._phase_peak, self.pinned)

    # -- explicit-pin mode -------------------------------------------------

    def pin_range(self, array: EmArray, first: int, count: int, *, read=True, writable=False) -> PinnedView:
        """Bring ``count`` elements from ``first`` into RAM.

        ``read=False`` pins an output buffer: budget is charged, disk is not.
        """
        if self.mode != EXPLICIT_PIN:
            raise ConfigError("pin_range requires explicit-pin mode")
        self._check_range(array, first, count)
        nbytes = count * array.element_width
        self._reserve(nbytes)
        if read:
            raw = self._backing.read(array.origin + first * array.element_width, nbytes)
            data = np.frombuffer(raw, dtype=array.dtype).copy()
            self._charge(reads=self._blocks_spanned(array, first, count))
        else:
            data = np.zeros(count, dtype=array.dtype)
        return PinnedView(self, array, first, count, data, writable or not read, nbytes)

    def pin_rows(self, array: EmArray, first_row: int, n_rows: int, **kw) -> PinnedView:
        w = array.row_elements
        view = self.pin_range(array, first_row * w, n_rows * w, **kw)
        view.data = view.data.reshape((n_rows,) + array.shape[1:])
        return view

    def pin_scratch(self, shape, dtype, fill=0) -> PinnedView:
        """Working memory with no disk counterpart (e.g. a distance buffer)."""
        data = np.full(shape, fill, dtype=dtype)
        self._reserve(data.nbytes)
        return PinnedView(self, None, 0, data.size, data, True, data.nbytes)

    def unpin(self, view: PinnedView) -> None:
        if view.released:
            return
        self.pinned -= view.pinned_bytes
        view.released = True

    def write_back(self, view: PinnedView) -> None:
        if view.array is None or not view.writable or view.released:
            raise ConfigError("write_back needs a live writable view of a store array")
        arr = view.array
        data = np.ascontiguousarray(view.data, dtype=arr.dtype).reshape(-1)
        if data.size != view.count:
            raise BoundsError("view was resized after pinning")
        self._backing.write(arr.origin + view.first * arr.element_width, data.tobytes())
        self._charge(writes=self._blocks_spanned(arr, view.first, view.count))

    def write_range(self, array: EmArray, first: int, values) -> None:
        """Streamed write from a buffer outside the pin budget (edge spill)."""
        values = np.ascontiguousarray(values, dtype=array.dtype).reshape(-1)
        self._check_range(array, first, values.size)
        self._backing.write(array.origin + first * array.element_width, values.tobytes())
        self._charge(writes=self._blocks_spanned(array, first, values.size))

    def read_range(self, array: EmArray, first: int, count: int) -> np.ndarray:
        """Streamed read into a buffer outside the pin budget (edge spill)."""
        self._check_range(array, first, count)
        raw = self._backing.read(array.origin + first * array.element_width, count * array.element_width)
        self._charge(reads=self._blocks_spanned(array, first, count))
        return np.frombuffer(raw, dtype=array.dtype).copy()

    # -- lru-cached mode ---------------------------------------------------

    def lru_state(self):
        """Arrays the traced kernels mutate directly; call :meth:`sync_lru` afterwards."""
        if self.mode != LRU_CACHED:
            raise ConfigError("LRU access requires lru-cached mode")
        return self._frame_block, self._frame_stamp, self._frame_dirty, self._block_frame, self._lru

    def sync_lru(self) -> None:
        reads, writes = int(self._lru[1]), int(self._lru[2])
        self._charge(reads=reads - self._lru_seen[0], writes=writes - self._lru_seen[1])
        self._lru_seen = (reads, writes)
        resident = int((self._frame_block >= 0).sum()) * self.block_size
        self.counters.peak_pinned = max(self.counters.peak_pinned, resident)
        self._phase_peak = max(self._phase_peak, resident)

    def lru_touch_range(self, array: EmArray, first: int, count: int, write=False) -> None:
        self._check_range(array, first, count)
        if count == 0:
            return
        start = array.origin + first * array.element_width
        kernels.lru_touch_bytes(start, start + count * array.element_width, self.block_size, write,
                                *self.lru_state())
        self.sync_lru()

    def lru_access(self, array: EmArray, index: int, write=False, value=None):
        """Read (or write) one element through the LRU cache."""
        self.lru_touch_range(array, index, 1, write=write)
        off = array.origin + index * array.element_width
        if write:
            self._backing.write(off, np.asarray(value, dtype=array.dtype).tobytes())
            return value
        return np.frombuffer(self._backing.read(off, array.element_width), dtype=array.dtype)[0]

    def flush(self) -> None:
        """Write every dirty LRU frame back. Frames stay resident."""
        if self.mode != LRU_CACHED:
            return
        dirty = int(self._frame_dirty.sum())
        self._frame_dirty[:] = 0
        self._lru[2] += dirty
        self.sync_lru()

    # -- phases ------------------------------------------------------------

    @contextmanager
    def measure(self, phase: str, timing: bool = True):
        """Collect counter deltas for the enclosed block into a PhaseMetrics."""
        before = self.counters.copy()
        self._phase_peak = self.pinned
        metrics = PhaseMetrics(phase)
        t0 = time.perf_counter()
        try:
            yield metrics
        finally:
            after = self.counters
            metrics.block_reads = after.block_reads - before.block_reads
            metrics.block_writes = after.block_writes - before.block_writes
            metrics.bytes_read = after.bytes_read - before.bytes_read
            metrics.bytes_written = after.bytes_written - before.bytes_written
            metrics.peak_pinned = self._phase_peak
            metrics.elapsed_ms = (time.perf_counter() - t0) * 1000.0 if timing else 0.0


def create_store(block_size: int, memory_budget: int, mode: str = EXPLICIT_PIN, backing="memory") -> BlockStore:
    return BlockStore(block_size, memory_budget, mode=mode, backing=backing)
