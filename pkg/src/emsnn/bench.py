"""Parameter sweeps over N or M, written out as metrics and summary CSVs.

Profiles live in INI files, one section per profile::

    [n-sweep]
    sweep = n_points
    values = 2000, 4000, 8000
    memory = 64KiB
    block = 4KiB
    dims = 16
    k = 16
    theta = 4
    algorithms = blocked, traditional-lru

Sizes accept ``B``, ``KiB``, ``MiB`` and ``GiB`` suffixes.
"""

from __future__ import annotations

import configparser
import csv
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import astuple, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .dataset_io import GenSpec, generate_points
from .errors import ConfigError
from .knn_phase import build_knn_oracle
from .pipeline import ExecParams, run_blocked, run_traditional
from .snn_cluster import snn_oracle

ALGORITHMS = ("blocked", "traditional-lru", "oracle")
SWEEPS = ("n_points", "memory_budget")
_UNITS = {"": 1, "b": 1, "kib": 1 << 10, "kb": 1 << 10, "mib": 1 << 20, "mb": 1 << 20, "gib": 1 << 30, "gb": 1 << 30}


def parse_size(text) -> int:
    """``"64KiB"`` -> 65536. Plain integers are bytes."""
    if isinstance(text, int):
        return text
    m = re.fullmatch(r"\s*(\d+)\s*([A-Za-z]*)\s*", str(text))
    if not m or m.group(2).lower() not in _UNITS:
        raise ConfigError(f"cannot parse size {text!r}")
    return int(m.group(1)) * _UNITS[m.group(2).lower()]


@dataclass(frozen=True)
class BenchProfile:
    name: str
    sweep: str
    values: tuple
    n_points: int = 8000
    memory_bytes: int = 64 << 10
    block_bytes: int = 4 << 10
    dims: int = 16
    k: int = 16
    theta: int = 4
    seed: int = 1
    n_clusters: int = 1
    spread: float = 1.0
    algorithms: tuple = ("blocked",)
    timing: bool = False
    workers: int = 1

    def validate(self):
        if self.sweep not in SWEEPS:
            raise ConfigError(f"sweep must be one of {SWEEPS}, got {self.sweep!r}")
        if not self.values:
            raise ConfigError(f"profile {self.name!r}: empty sweep list")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ConfigError(f"profile {self.name!r}: sweep values must be strictly increasing")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad or not self.algorithms:
            raise ConfigError(f"profile {self.name!r}: unknown algorithms {bad}")
        return self

    def runs(self):
        """(N, M) for each sweep point."""
        if self.sweep == "n_points":
            return [(int(v), self.memory_bytes) for v in self.values]
        return [(self.n_points, int(v)) for v in self.values]


@dataclass
class BenchRow:
    profile: str
    algorithm: str
    n_points: int
    memory_bytes: int
    block_bytes: int
    k: int
    theta: int
    phase: str
    block_reads: int = 0
    block_writes: int = 0
    bytes_read: int = 0
    bytes_written: int = 0
    elapsed_ms: float = 0.0
    status: str = "ok"

    @property
    def transfers(self) -> int:
        return self.block_reads + self.block_writes


@dataclass
class SummaryRow:
    n_points: int
    memory_bytes: int
    block_bytes: int
    k: int
    theta: int
    blocked_ios: int
    traditional_ios: int
    ratio: float


@dataclass
class Summary:
    rows: list = field(default_factory=list)
    increasing: bool = True


_INT_KEYS = {"n_points": "n_points", "dims": "dims", "k": "k", "theta": "theta", "seed": "seed",
             "clusters": "n_clusters", "workers": "workers"}


def profile_from_mapping(name: str, cfg) -> BenchProfile:
    kw = {"name": name}
    try:
        sweep = cfg.get("sweep", "n_points")
        kw["sweep"] = sweep
        conv = parse_size if sweep == "memory_budget" else int
        kw["values"] = tuple(conv(v) for v in str(cfg.get("values", "")).replace(",", " ").split())
        for key, attr in _INT_KEYS.items():
            if key in cfg:
                kw[attr] = int(cfg[key])
        if "memory" in cfg:
            kw["memory_bytes"] = parse_size(cfg["memory"])
        if "block" in cfg:
            kw["block_bytes"] = parse_size(cfg["block"])
        if "spread" in cfg:
            kw["spread"] = float(cfg["spread"])
        if "algorithms" in cfg:
            kw["algorithms"] = tuple(a.strip() for a in str(cfg["algorithms"]).split(",") if a.strip())
        if "timing" in cfg:
            kw["timing"] = str(cfg["timing"]).lower() in ("1", "true", "yes", "on")
    except ValueError as exc:
        raise ConfigError(f"profile {name!r}: {exc}") from exc
    return BenchProfile(**kw).validate()


def load_profiles(path) -> list[BenchProfile]:
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not parser.sections():
        raise ConfigError(f"{path}: no profiles")
    return [profile_from_mapping(name, parser[name]) for name in parser.sections()]


def bundled_profile(name: str = "trends") -> Path:
    ref = resources.files("emsnn") / "profiles" / f"{name}.profile"
    return Path(str(ref))


def _one_run(profile: BenchProfile, points, n, memory, algorithm):
    base = dict(profile=profile.name, algorithm=algorithm, n_points=n, memory_bytes=memory,
                block_bytes=profile.block_bytes, k=profile.k, theta=profile.theta)
    params = ExecParams(profile.k, profile.theta, memory, profile.block_bytes, profile.seed)
    pts = points[:n]
    try:
        if algorithm == "oracle":
            knn = build_knn_oracle(pts, profile.k)
            snn_oracle(knn, profile.theta)
            return [BenchRow(phase="total", **base)]
        if algorithm == "blocked":
            result = run_blocked(pts, params, timing=profile.timing)
        else:
            result = run_traditional(pts, params, timing=profile.timing)
    except ConfigError as exc:
        return [BenchRow(phase="-", status=f"skipped: {exc}", **base)]
    return [BenchRow(phase=p.phase, block_reads=p.block_reads, block_writes=p.block_writes,
                     bytes_read=p.bytes_read, bytes_written=p.bytes_written,
                     elapsed_ms=round(p.elapsed_ms, 3), **base)
            for p in result.phases]


def run_profile(profile: BenchProfile) -> list[BenchRow]:
    """Every (sweep value, algorithm) run; rows come back in profile order."""
    profile.validate()
    runs = profile.runs()
    n_max = max(n for n, _ in runs)
    # a shorter dataset with the same seed is a prefix of a longer one
    points = generate_points(GenSpec(n_max, profile.dims, profile.n_clusters, profile.spread, seed=profile.seed))
    jobs = [(n, m, algo) for n, m in runs for algo in profile.algorithms]
    if profile.workers > 1:
        with ThreadPoolExecutor(profile.workers) as pool:
            chunks = list(pool.map(lambda job: _one_run(profile, points, *job), jobs))
    else:
        chunks = [_one_run(profile, points, *job) for job in jobs]
    return [row for chunk in chunks for row in chunk]


def write_rows(rows, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f.name for f in fields(BenchRow)])
        for row in rows:
            w.writerow(astuple(row))
    return path


def _config_key(row):
    return (row.n_points, row.memory_bytes, row.block_bytes, row.k, row.theta)


def compare(blocked_rows, traditional_rows) -> Summary:
    """Traditional / blocked total transfers for each matched configuration."""
    blocked = {_config_key(r): r for r in blocked_rows if r.phase == "total" and r.status == "ok"}
    trad = {_config_key(r): r for r in traditional_rows if r.phase == "total" and r.status == "ok"}
    if set(blocked) != set(trad):
        raise ConfigError("blocked and traditional runs cover different configurations")
    summary = Summary()
    for key in sorted(blocked, key=lambda c: (c[0] * c[1], c)):
        b, t = blocked[key], trad[key]
        ratio = t.transfers / b.transfers if b.transfers else float("inf")
        summary.rows.append(SummaryRow(*key, b.transfers, t.transfers, ratio))
    ratios = [r.ratio for r in summary.rows]
    summary.increasing = all(y >= x for x, y in zip(ratios, ratios[1:]))
    return summary


def summarize(rows) -> Summary:
    return compare([r for r in rows if r.algorithm == "blocked"],
                   [r for r in rows if r.algorithm == "traditional-lru"])


def write_summary(summary: Summary, path, profile_name="") -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["profile", "n_points", "memory_bytes", "block_bytes", "k", "theta",
                    "blocked_ios", "traditional_ios", "ratio", "ratio_increases_with_nm"])
        for r in summary.rows:
            w.writerow([profile_name, r.n_points, r.memory_bytes, r.block_bytes, r.k, r.theta,
                        r.blocked_ios, r.traditional_ios, f"{r.ratio:.4f}", int(summary.increasing)])
    return path


def fit_quadratic(ns, ios):
    """Least-squares ``ios ~ a * N**2`` through the origin. Returns (a, R^2)."""
    x = np.asarray(ns, dtype=float) ** 2
    y = np.asarray(ios, dtype=float)
    a = float(x @ y / (x @ x))
    resid = y - a * x
    ss_tot = float(((y - y.mean()) ** 2).sum())
    return a, 1.0 - float(resid @ resid) / ss_tot


def with_values(profile: BenchProfile, values) -> BenchProfile:
    return replace(profile, values=tuple(values)).validate()
