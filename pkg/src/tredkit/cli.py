"""Command-line front end.

Every subcommand reads an optional flat ``key=value`` config file
(``--config``); command-line flags override config keys one for one.  Outputs
are written next to a manifest holding the fully resolved configuration, which
is itself a valid config file, so any run can be repeated from its outputs.

Exit status is 0 on success, 2 on usage errors and 1 on any other failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
import time
import warnings
from contextlib import contextmanager

import numpy as np

from . import __version__, _backend, mapkit, oracle, synth, tred
from .errors import TredError

log = logging.getLogger("tredkit")


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text: str) -> tuple:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


# name: (type, default, help).  A default of None means "required" unless the
# key is listed in _OPTIONAL.
_COMMON = {
    "seed": (int, 0, "master seed; sub-seeds are spawned from it"),
    "threads": (int, 1, "worker cap (commands run single-threaded)"),
    "out": (str, None, "output path"),
}

_TREE = {
    "M": (int, 5, "maximum tree depth"),
    "tau": (int, 0, "refinement threshold (count > tau)"),
    "R": (float, None, "half-side of the base square; fitted to the data if unset"),
    "origin": (_floats, None, "base square center, comma separated"),
    "delta_r": (float, None, "r2 - r1 offset; default (sqrt(2)-1) R 2^-M"),
}

_COMMANDS = {
    "synth": {
        "kind": (str, "shape", "'shape' (closed curves) or 'grid' (street grid GPS trips)"),
        "shape": (str, "circle", "one of " + ", ".join(synth.SHAPES)),
        "samples": (int, 1, "noisy samples to write"),
        "cycles": (int, 100, "cycles per sample"),
        "pts_per_cycle": (int, 500, "points per cycle"),
        "rows": (int, 5, "grid rows"),
        "cols": (int, 5, "grid columns"),
        "spacing": (float, 100.0, "grid spacing (m)"),
        "trips": (int, 200, "grid trips"),
        "gps_sigma": (float, 8.0, "GPS noise standard deviation (m)"),
        "sample_period": (float, 1.0, "GPS sample period (s)"),
    },
    "build": {
        "traces": (str, None, "trace file or directory"),
        "format": (str, "t x y", "trace column order"),
        **_TREE,
    },
    "update": {
        "tree": (str, None, "tree dump to update"),
        "traces": (str, None, "trace file (or directory) to insert"),
        "format": (str, "t x y", "trace column order"),
    },
    "sample": {
        "tree": (str, None, "tree dump"),
        "tau_sample": (int, 0, "keep finest bins with count > tau_sample"),
    },
    "raster": {
        "tree": (str, None, "tree dump"),
        "tau": (int, 0, "level-set threshold"),
        "resolution": (int, 256, "cells per axis"),
    },
    "map-extract": {
        "traces": (str, None, "trace directory"),
        "format": (str, "x y t", "trace column order"),
        "resolution": (int, 256, "raster cells per axis"),
        **_TREE,
    },
    "map-eval": {
        "truth": (str, None, "ground-truth graph prefix"),
        "recon": (str, None, "reconstructed graph prefix"),
        "n_pairs": (int, 100, "vertex pairs to sample"),
        "snap_radius": (float, 100.0, "maximum endpoint snapping distance"),
    },
    "bench": {
        "shape": (str, "circle", "one of " + ", ".join(synth.SHAPES)),
        "samples": (int, 1, "noisy samples per size"),
        "cycles": (_ints, (50, 100, 200), "cycles per sample, one row per value"),
        "pts_per_cycle": (int, 500, "points per cycle"),
        "R": (float, 6.0, "tree base half-side"),
        "M": (int, 5, "tree depth"),
        "tau": (int, 0, "tree threshold"),
        "r": (float, 0.3, "TLDE disk radius"),
        "grid": (int, 500, "TLDE cells per axis"),
        "repeats": (int, 1, "timing repeats (minimum is reported)"),
    },
}

_OPTIONAL = {"R", "origin", "delta_r"}

_DEFAULT_OUT = {
    "synth": "synth_out",
    "build": "tree.tred",
    "sample": "samples.txt",
    "raster": "level_set.pgm",
    "map-extract": "map_out",
    "map-eval": "metrics.csv",
    "bench": "bench.csv",
}


def _options(command: str) -> dict:
    return {**_COMMANDS[command], **_COMMON}


def read_config(path: str, command: str) -> dict:
    """Parse a flat ``key=value`` file; ``#`` starts a comment line."""
    allowed = _options(command)
    out = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise TredError(f"{path}: {exc.strerror}") from None
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise TredError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in allowed:
                raise TredError(f"{path}:{lineno}: unknown key {key!r} for {command}")
            try:
                out[key] = allowed[key][0](value)
            except ValueError:
                raise TredError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return out


def resolve(command: str, args: argparse.Namespace) -> dict:
    """Defaults, then config file, then explicit flags."""
    opts = _options(command)
    cfg = {k: v[1] for k, v in opts.items()}
    if args.config:
        cfg.update(read_config(args.config, command))
    for k in opts:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    if command == "update" and cfg["out"] is None:
        cfg["out"] = cfg["tree"]
    if cfg["out"] is None:
        cfg["out"] = _DEFAULT_OUT[command]
    missing = [k for k, v in cfg.items() if v is None and k not in _OPTIONAL]
    if missing:
        raise TredError(f"{command}: missing required setting(s) {', '.join(sorted(missing))}")
    if cfg["threads"] < 1:
        raise TredError("threads must be >= 1")
    return cfg


def write_manifest(path: str, command: str, cfg: dict, extra: dict | None = None) -> None:
    lines = [f"# tredkit {__version__} {command}", f"# backend {_backend.name()}"]
    for k, v in (extra or {}).items():
        lines.append(f"# {k} {v}")
    lines += [f"{k}={_fmt(v)}" for k, v in sorted(cfg.items()) if v is not None]
    with _atomic(path) as fh:
        fh.write("\n".join(lines) + "\n")


@contextmanager
def _atomic_path(path: str):
    """Yield a temporary sibling path; it replaces ``path`` only on success."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    os.close(fd)
    try:
        yield tmp
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


@contextmanager
def _atomic(path: str):
    with _atomic_path(path) as tmp, open(tmp, "w") as fh:
        yield fh


@contextmanager
def _stage(name: str, timings: dict):
    t0 = time.perf_counter()
    yield
    timings[name] = time.perf_counter() - t0
    log.info("stage %s: %.3f s", name, timings[name])


def _params(cfg: dict, trajs) -> tred.TredParams:
    if cfg["R"] is None:
        if cfg["origin"] is not None:
            raise TredError("origin needs R")
        return tred.TredParams.fit(trajs, cfg["M"], cfg["tau"], cfg["delta_r"])
    d = trajs[0].dim if trajs else (len(cfg["origin"]) if cfg["origin"] else 2)
    return tred.TredParams(cfg["R"], cfg["M"], cfg["tau"], cfg["delta_r"], d, cfg["origin"])


def _load_tree(path: str) -> tred.TredTree:
    try:
        fh = open(path)
    except OSError as exc:
        raise TredError(f"{path}: {exc.strerror}") from None
    with fh:
        return tred.load(fh, path)


def _write_tree(tree: tred.TredTree, path: str) -> None:
    with _atomic(path) as fh:
        tred.dump(tree, fh)


def _seeds(seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)] if n else []


# ---------------------------------------------------------------- commands

def cmd_synth(cfg: dict) -> None:
    """Write seeded noisy shape samples or street-grid traces."""
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    if cfg["kind"] == "shape":
        shape = synth.ShapeSpec(cfg["shape"])
        seeds = _seeds(cfg["seed"], cfg["samples"])
        for k, s in enumerate(seeds):
            traj = synth.noisy_sample(shape, synth.NoiseSpec.for_shape(shape.kind, s),
                                      cfg["cycles"], cfg["pts_per_cycle"])
            path = os.path.join(out, "samples", f"{shape.kind}_{k:03d}.csv")
            with _atomic_path(path) as tmp:
                synth.write_csv(traj, tmp)
        extra = {f"sample_{k:03d}_seed": s for k, s in enumerate(seeds)}
    elif cfg["kind"] == "grid":
        trajs = synth.grid_map_traces(cfg["rows"], cfg["cols"], cfg["spacing"], cfg["trips"],
                                      cfg["gps_sigma"], cfg["sample_period"], cfg["seed"])
        mapkit.write_traces(trajs, os.path.join(out, "traces"), "x y t")
        mapkit.grid_road_graph(cfg["rows"], cfg["cols"], cfg["spacing"]).write(
            os.path.join(out, "truth"))
        extra = {}
    else:
        raise TredError(f"unknown synth kind {cfg['kind']!r}; choose 'shape' or 'grid'")
    write_manifest(os.path.join(out, "manifest.txt"), "synth", cfg, extra)


def cmd_build(cfg: dict) -> None:
    """Build a tree from a trace file or directory."""
    timings = {}
    with _stage("load", timings):
        trajs = mapkit.load_traces(cfg["traces"], cfg["format"])
    params = _params(cfg, trajs)
    with _stage("build", timings):
        tree = tred.build_offline(trajs, params)
    with _stage("write", timings):
        _write_tree(tree, cfg["out"])
    write_manifest(cfg["out"] + ".manifest", "build", cfg,
                   {"bins": len(tree), "trajectories": len(trajs)})


def cmd_update(cfg: dict) -> None:
    """Insert one trace file into a tree dump."""
    timings = {}
    tree = _load_tree(cfg["tree"])
    with _stage("load", timings):
        trajs = mapkit.load_traces(cfg["traces"], cfg["format"])
    with _stage("update", timings):
        for t in trajs:
            tred.update(tree, t)
    _write_tree(tree, cfg["out"])
    write_manifest(cfg["out"] + ".manifest", "update", cfg, {"bins": len(tree)})


def cmd_sample(cfg: dict) -> None:
    """Write finest-scale bin centers with count above tau_sample."""
    tree = _load_tree(cfg["tree"])
    pts = tred.superlevel_samples(tree, cfg["tau_sample"])
    with _atomic(cfg["out"]) as fh:
        fh.writelines(" ".join(map(repr, p)) + "\n" for p in pts.tolist())
    write_manifest(cfg["out"] + ".manifest", "sample", cfg, {"points": len(pts)})


def cmd_raster(cfg: dict) -> None:
    """Write the level-set raster of a tree as PBM."""
    tree = _load_tree(cfg["tree"])
    r = tred.level_set_raster(tree, cfg["tau"], cfg["resolution"])
    with _atomic_path(cfg["out"]) as tmp:
        r.write_pgm(tmp, binary=True)
    write_manifest(cfg["out"] + ".manifest", "raster", cfg)


def cmd_map_extract(cfg: dict) -> None:
    """Extract a road graph from GPS traces."""
    out = cfg["out"]
    t0 = time.perf_counter()
    trajs = mapkit.load_traces(cfg["traces"], cfg["format"])
    log.info("stage load: %.3f s (%d traces)", time.perf_counter() - t0, len(trajs))
    if not trajs:
        raise TredError(f"{cfg['traces']}: no usable traces")
    graph, info = mapkit.extract_map(trajs, cfg["M"], cfg["tau"], cfg["resolution"],
                                     cfg["R"], cfg["origin"], delta_r=cfg["delta_r"])
    os.makedirs(out, exist_ok=True)
    graph.write(os.path.join(out, "map"))
    info["raster"].write_pgm(os.path.join(out, "level_set.pgm"), binary=True)
    info["skeleton"].write_pgm(os.path.join(out, "skeleton.pgm"), binary=True)
    extra = {"r1_M": info["r1"], "r2_M": info["r2"], "vertices": len(graph),
             "edges": len(graph.edges)}
    extra.update({f"time_{k}": f"{v:.4f}" for k, v in info["timings"].items()})
    write_manifest(os.path.join(out, "manifest.txt"), "map-extract", cfg, extra)


def cmd_map_eval(cfg: dict) -> None:
    """Compare a reconstructed road graph with ground truth."""
    truth = mapkit.RoadGraph.read(cfg["truth"])
    recon = mapkit.RoadGraph.read(cfg["recon"])
    summary = mapkit.evaluate_map(truth, recon, cfg["n_pairs"], cfg["seed"], cfg["snap_radius"])
    with _atomic_path(cfg["out"]) as tmp:
        mapkit.write_metrics_csv(summary, tmp)
    write_manifest(cfg["out"] + ".manifest", "map-eval", cfg, {"pairs": summary["pairs"]})


def bench_rows(cfg: dict) -> list[tuple]:
    """``(n, m, t_tred, t_tlde)`` per cycles value; ``n`` counts trace vertices."""
    shape = synth.ShapeSpec(cfg["shape"])
    params = tred.TredParams(cfg["R"], cfg["M"], cfg["tau"])
    grid = oracle.Raster.covering(params.origin, cfg["R"], cfg["grid"])
    m = grid.values.size
    seeds = _seeds(cfg["seed"], cfg["samples"])
    rows = []
    for cycles in cfg["cycles"]:
        trajs = [synth.noisy_sample(shape, synth.NoiseSpec.for_shape(shape.kind, s),
                                    cycles, cfg["pts_per_cycle"]) for s in seeds]
        t_tred, t_tlde = np.inf, np.inf
        for _ in range(max(cfg["repeats"], 1)):
            t0 = time.perf_counter()
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                tred.build_offline(trajs, params)
            t1 = time.perf_counter()
            oracle.tlde_counts(trajs, cfg["r"], grid)
            t2 = time.perf_counter()
            t_tred, t_tlde = min(t_tred, t1 - t0), min(t_tlde, t2 - t1)
        n = sum(len(t) for t in trajs)
        log.info("bench n=%d m=%d tred %.4f s tlde %.4f s", n, m, t_tred, t_tlde)
        rows.append((n, m, t_tred, t_tlde))
    return rows


def cmd_bench(cfg: dict) -> None:
    """Time tree build against TLDE over trace lengths."""
    rows = bench_rows(cfg)
    with _atomic(cfg["out"]) as fh:
        fh.write("n,m,t_tred,t_tlde\n")
        fh.writelines(f"{n},{m},{a!r},{b!r}\n" for n, m, a, b in rows)
    write_manifest(cfg["out"] + ".manifest", "bench", cfg)


_HANDLERS = {
    "synth": cmd_synth,
    "build": cmd_build,
    "update": cmd_update,
    "sample": cmd_sample,
    "raster": cmd_raster,
    "map-extract": cmd_map_extract,
    "map-eval": cmd_map_eval,
    "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tredkit", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"tredkit {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true", help="log warnings only")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name, help=_HANDLERS[name].__doc__ or name)
        p.add_argument("--config", help="flat key=value config file")
        for key, (typ, default, help_) in _options(name).items():
            flag = "--" + key.replace("_", "-")
            kw = {"dest": key, "type": typ, "default": None,
                  "help": f"{help_} (default: {_fmt(default) if default is not None else 'unset'})"}
            if key == "shape":
                kw["choices"] = synth.SHAPES
            p.add_argument(flag, **kw)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(name)s: %(message)s")
    logging.captureWarnings(True)
    try:
        cfg = resolve(args.command, args)
        _HANDLERS[args.command](cfg)
    except (TredError, OSError) as exc:
        print(f"tredkit {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
