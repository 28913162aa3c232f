"""``emsnn`` command line.

Exit codes: 0 ok, 2 configuration error, 3 I/O or file-format error,
4 internal invariant breach. Metric lines on stdout are ``key=value``.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .bench import bundled_profile, load_profiles, parse_size, profile_from_mapping, run_profile, summarize, \
    write_rows, write_summary
from .dataset_io import GenSpec, KnnHeader, generate_dataset, read_header, read_knn, read_points, \
    write_knn, write_labels, write_metrics
from .em_model import EXPLICIT_PIN, LRU_CACHED
from .errors import ConfigError, EmsnnError, FormatError
from .knn_phase import ELEMENT_WIDTH, phase1_tile_size
from .pipeline import ExecParams, run_blocked, run_cluster, run_knn, run_traditional
from .snn_cluster import DEFAULT_EDGE_CAP, phase2_tile_size


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def read_config(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment. Keys use flag names (``m``, ``theta``...)."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _emit(key, value):
    print(f"{key}={value}")


def _emit_phases(phases):
    for p in phases:
        for attr in ("block_reads", "block_writes", "bytes_read", "bytes_written"):
            _emit(f"{p.phase}.{attr}", getattr(p, attr))


def _params(args) -> ExecParams:
    params = ExecParams(args.k, getattr(args, "theta", 0), parse_size(args.m), parse_size(args.b), args.seed)
    if params.k < 2:
        raise ConfigError(f"k must be >= 2 (self plus at least one neighbor), got {params.k}")
    if params.memory_bytes < 2 * params.block_bytes:
        raise ConfigError(f"M={params.memory_bytes} B must be at least 2B={2 * params.block_bytes} B")
    return params


def _emit_tiling(params, dims=None):
    slots = params.memory_bytes // ELEMENT_WIDTH
    _emit("memory_bytes", params.memory_bytes)
    _emit("block_bytes", params.block_bytes)
    _emit("memory_slots", slots)
    if dims is not None:
        _emit("phase1.t", phase1_tile_size(params.memory_bytes, dims, params.k))
    _emit("phase2.t", phase2_tile_size(params.memory_bytes, params.k))


def cmd_gen(args):
    spec = GenSpec(args.n, args.d, args.clusters, args.spread, (args.box_low, args.box_high), args.seed)
    path = generate_dataset(spec, args.output)
    _emit("output", path)
    _emit("n_points", spec.n_points)
    _emit("dims", spec.dims)


def cmd_validate(args):
    header = read_header(args.path)
    kind = "knn" if isinstance(header, KnnHeader) else "points"
    if kind == "knn":
        read_knn(args.path)
    _emit("kind", kind)
    _emit("n_points", header.n_points)
    _emit("k" if kind == "knn" else "dims", header.k if kind == "knn" else header.dims)
    _emit("payload_bytes", header.payload_bytes)


def cmd_knn(args):
    points = read_points(args.input)
    params = _params(args)
    _emit_tiling(params, points.shape[1])
    knn, metrics, tiling, peak = run_knn(points, params, backing=args.backing, timing=args.timing)
    write_knn(knn, args.output)
    _emit_phases([metrics])
    _emit("peak_pinned", peak)
    if args.metrics:
        write_metrics([metrics], args.metrics)


def cmd_cluster(args):
    knn = read_knn(args.input)
    args.k = knn.shape[1]  # the matrix fixes k
    params = _params(args)
    _emit_tiling(params)
    labels, edges, phases, tiling, pairs, peak = run_cluster(
        knn, params, backing=args.backing, edge_cap=args.edge_cap,
        paper_literal=args.paper_literal, timing=args.timing)
    write_labels(labels, args.output)
    _emit_phases(phases)
    _emit("edges", len(edges))
    _emit("clusters", len(set(labels.tolist())))
    _emit("peak_pinned", peak)
    if args.metrics:
        write_metrics(phases, args.metrics)


def cmd_run(args):
    points = read_points(args.input)
    params = _params(args)
    if args.mode == LRU_CACHED:
        _emit("lru_frames", params.memory_bytes // params.block_bytes)
        result = run_traditional(points, params, backing=args.backing, timing=args.timing)
    else:
        _emit_tiling(params, points.shape[1])
        result = run_blocked(points, params, backing=args.backing, edge_cap=args.edge_cap,
                             paper_literal=args.paper_literal, timing=args.timing)
    write_labels(result.labels, args.output)
    _emit_phases(result.phases)
    _emit("edges", len(result.edges))
    _emit("clusters", len(set(result.labels.tolist())))
    _emit("peak_pinned", result.peak_pinned)
    if args.knn_out:
        write_knn(result.knn, args.knn_out)
    if args.metrics:
        write_metrics(result.phases, args.metrics)


def cmd_bench(args):
    if args.profile:
        profiles = load_profiles(args.profile)
    elif args.values:
        cfg = {"sweep": args.sweep, "values": args.values, "memory": args.m, "block": args.b,
               "dims": args.d, "k": args.k, "theta": args.theta, "seed": args.seed,
               "n_points": args.n, "clusters": args.clusters, "spread": args.spread,
               "algorithms": args.algorithms, "workers": args.workers}
        profiles = [profile_from_mapping(args.name, {k: str(v) for k, v in cfg.items()})]
    else:
        profiles = load_profiles(bundled_profile())
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for profile in profiles:
        if args.timing:
            profile = replace(profile, timing=True)
        rows = run_profile(profile)
        metrics = write_rows(rows, out_dir / f"{profile.name}.metrics.csv")
        _emit(f"{profile.name}.metrics", metrics)
        if "blocked" in profile.algorithms and "traditional-lru" in profile.algorithms:
            summary = summarize(rows)
            path = write_summary(summary, out_dir / f"{profile.name}.summary.csv", profile.name)
            _emit(f"{profile.name}.summary", path)
            _emit(f"{profile.name}.ratio_increases", int(summary.increasing))


def _add_params(p, theta=True):
    p.add_argument("--k", type=int, default=16, help="row length of the k-NN matrix, self included")
    if theta:
        p.add_argument("--theta", type=int, default=4, help="merge when more than theta neighbors are shared")
    p.add_argument("--m", default="64KiB", help="memory budget, e.g. 64KiB")
    p.add_argument("--b", default="4KiB", help="block size, e.g. 4KiB")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--backing", choices=("memory", "file"), default="memory",
                   help="simulated disk in RAM or in a temp file under $EMSNN_TMPDIR")
    p.add_argument("--timing", action="store_true", help="record elapsed_ms (otherwise written as 0)")
    p.add_argument("--metrics", help="write per-phase *.metrics.csv here")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="emsnn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="key=value file supplying defaults for any flag")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="write a synthetic *.emsnn dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--clusters", type=int, default=1)
    p.add_argument("--spread", type=float, default=1.0)
    p.add_argument("--box-low", type=float, default=-100.0)
    p.add_argument("--box-high", type=float, default=100.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("validate", help="check a *.emsnn or *.emknn file")
    p.add_argument("path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("knn", help="phase 1: blocked k-NN matrix")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    _add_params(p, theta=False)
    p.set_defaults(func=cmd_knn)

    for name, func, helptext in (("cluster", cmd_cluster, "phase 2: SNN labels from a k-NN matrix"),
                                 ("run", cmd_run, "both phases end to end")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("input")
        p.add_argument("-o", "--output", required=True, help="*.labels.csv")
        _add_params(p)
        if name == "cluster":
            p.set_defaults(k=None)
        p.add_argument("--edge-cap", type=int, default=DEFAULT_EDGE_CAP,
                       help="merge edges held in RAM before spilling to the store")
        p.add_argument("--paper-literal", action="store_true",
                       help="diagnostic: single-pass relabel instead of component closure")
        if name == "run":
            p.add_argument("--mode", choices=(EXPLICIT_PIN, LRU_CACHED), default=EXPLICIT_PIN,
                           help="explicit-pin runs the tiled algorithm, lru-cached the traditional one")
            p.add_argument("--knn-out", help="also write the *.emknn matrix")
        p.set_defaults(func=func)

    p = sub.add_parser("bench", help="run sweep profiles and write metrics/summary CSVs")
    p.add_argument("profile", nargs="?", help="INI profile file (default: bundled trends)")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--name", default="inline")
    p.add_argument("--sweep", choices=("n_points", "memory_budget"), default="n_points")
    p.add_argument("--values", help="comma separated sweep values; enables the inline profile")
    p.add_argument("--n", type=int, default=8000, help="N when sweeping memory")
    p.add_argument("--d", type=int, default=16)
    p.add_argument("--k", type=int, default=16)
    p.add_argument("--theta", type=int, default=4)
    p.add_argument("--m", default="64KiB")
    p.add_argument("--b", default="4KiB")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--clusters", type=int, default=1)
    p.add_argument("--spread", type=float, default=1.0)
    p.add_argument("--algorithms", default="blocked,traditional-lru")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timing", action="store_true")
    p.set_defaults(func=cmd_bench)
    return parser


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = read_config(known.config)
    parser.set_defaults(**cfg)
    for action in parser._subparsers._group_actions:
        for sub in action.choices.values():
            dests = {a.dest: a for a in sub._actions}
            defaults = {}
            for key, value in cfg.items():
                if key in dests:
                    a = dests[key]
                    if a.type is not None:
                        value = a.type(value)
                    elif isinstance(a.const, bool):
                        value = value.lower() in ("1", "true", "yes", "on")
                    defaults[key] = value
                    a.required = False
            sub.set_defaults(**defaults)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        args.func(args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"emsnn: configuration error: {exc}", file=sys.stderr)
        return 2
    except (FormatError, OSError) as exc:
        print(f"emsnn: I/O error: {exc}", file=sys.stderr)
        return 3
    except (EmsnnError, AssertionError) as exc:
        print(f"emsnn: internal invariant breach: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
