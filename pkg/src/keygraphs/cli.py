"""Command-line interface: build-model, detect, benchmark, track, aggregate.

Exit codes: 0 success, 2 invalid input or arguments, 3 I/O failure,
4 no pose found.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .config import Params
from .errors import EmptyFrameDirectory, KeygraphError, NoPoseFound
from .evaluation import aggregate_curves, find_datasets, read_curve_csv, write_curve_csv
from .image import read_pnm
from .keypoint import load_keypoints
from .matching import ModelStore, build_model_store, format_correspondence_dump
from .pipeline import STAGES, process_scene
from .pose import RansacConfig, format_pose

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_IO = 3
EXIT_NO_POSE = 4


def _add_params(p):
    g = p.add_argument_group("pipeline parameters")
    g.add_argument("--config", help="JSON file with parameters; flags override it")
    g.add_argument("--structure", choices=["pair", "tri", "quad"])
    g.add_argument("--min-dist", type=int)
    g.add_argument("--max-dist", type=int)
    g.add_argument("--profile-len", type=int)
    g.add_argument("--coeffs", type=int)
    g.add_argument("--threshold", type=float)
    g.add_argument("--max-corners", type=int)
    g.add_argument("--quality", type=float)
    g.add_argument("--max-graphs", type=int, dest="model_max_graphs",
                   help="cap on model keygraphs, strongest corners first")
    g.add_argument("--index-eps", type=float, help="approximate kd-tree search slack (0 = exact)")
    g.add_argument("--ransac-conf", type=float)
    g.add_argument("--inlier-tol", type=float)
    g.add_argument("--max-iter", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--keypoints-file", help="read keypoints ('x y' per line) instead of detecting")
    g.add_argument("--echo-config", help="write the effective configuration to this file")


def params_from_args(args):
    base = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            base = json.load(fh)
    p = Params.from_dict(base)
    d = p.to_dict()
    for name in ("structure", "min_dist", "max_dist", "profile_len", "coeffs", "threshold",
                 "max_corners", "quality", "model_max_graphs", "index_eps", "seed"):
        v = getattr(args, name, None)
        if v is not None:
            d[name] = v
    r = dict(d["ransac"])
    for flag, name in (("ransac_conf", "confidence"), ("inlier_tol", "inlier_tol"),
                       ("max_iter", "max_iterations")):
        v = getattr(args, flag, None)
        if v is not None:
            r[name] = v
    if getattr(args, "seed", None) is not None:
        r["seed"] = args.seed
    d["ransac"] = RansacConfig(**r)
    return Params.from_dict(d)


def _echo(params, path, extra=None):
    if not path:
        return
    d = params.to_dict()
    d["version"] = __version__
    if extra:
        d.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(d, sort_keys=True, indent=2) + "\n")


def _keypoints(args, img):
    if getattr(args, "keypoints_file", None):
        return load_keypoints(args.keypoints_file, shape=img.shape)
    return None


def cmd_build_model(args):
    params = params_from_args(args)
    img = read_pnm(args.image)
    store = build_model_store(img, params.structure, params, keypoints=_keypoints(args, img))
    store.save(args.output)
    _echo(params, args.echo_config or args.output + ".config.json",
          {"command": "build-model", "image": args.image, "output": args.output})
    print(f"model {args.output}: {len(store.keypoints)} keypoints, {len(store.graphs)} "
          f"{store.structure.name} keygraphs, {len(store.arcs)} arcs")
    return EXIT_OK


def _load_store(path):
    return ModelStore.load(path)


def _scene_params(args, store):
    params = params_from_args(args)
    if args.structure is None:
        params.structure = store.structure.name
    elif params.structure != store.structure.name:
        raise ValueError(f"store holds {store.structure.name} keygraphs, not {params.structure}")
    return params


def cmd_detect(args):
    store = _load_store(args.store)
    params = _scene_params(args, store)
    img = read_pnm(args.scene)
    res = process_scene(store, img, params, keypoints=_keypoints(args, img))
    _echo(params, args.echo_config, {"command": "detect", "store": args.store, "scene": args.scene})
    if args.correspondences:
        with open(args.correspondences, "w", encoding="utf-8") as fh:
            fh.write(format_correspondence_dump(res.correspondences))
    out = sys.stdout
    if res.pose is None:
        out.write("pose NONE\n")
    else:
        out.write(f"pose {format_pose(res.pose.homography)}\n")
        out.write(f"inliers {res.pose.score} iterations {res.pose.iterations}\n")
    out.write(f"correspondences {len(res.correspondences)}\n")
    for s in STAGES:
        out.write(f"time {s} {res.timings[s]:.3f}\n")
    out.write(f"time total {res.total_ms:.3f}\n")
    if res.pose is None:
        raise NoPoseFound(f"no pose among {len(res.correspondences)} correspondences")
    return EXIT_OK


_FRAME_EXT = (".pgm", ".ppm")


def cmd_track(args):
    store = _load_store(args.store)
    params = _scene_params(args, store)
    if not os.path.isdir(args.frames):
        raise EmptyFrameDirectory(f"{args.frames} is not a directory")
    names = sorted(n for n in os.listdir(args.frames) if n.lower().endswith(_FRAME_EXT))
    if not names:
        raise EmptyFrameDirectory(f"no PGM/PPM frames in {args.frames}")
    _echo(params, args.echo_config, {"command": "track", "store": args.store, "frames": args.frames})
    times = []
    for name in names:
        img = read_pnm(os.path.join(args.frames, name))
        res = process_scene(store, img, params)
        times.append(res.total_ms)
        pose = "NONE" if res.pose is None else format_pose(res.pose.homography)
        print(f"{name} {pose} {res.total_ms:.3f}", flush=True)
    t = np.asarray(times)
    print(f"frames {len(t)} mean_ms {t.mean():.3f} p95_ms {np.percentile(t, 95):.3f} max_ms {t.max():.3f}")
    return EXIT_OK


def cmd_benchmark(args):
    from .benchmark import DEFAULT_THRESHOLDS, run_dataset

    params = params_from_args(args)
    thresholds = tuple(args.thresholds) if args.thresholds else DEFAULT_THRESHOLDS
    datasets = find_datasets(args.dataset)
    os.makedirs(args.output, exist_ok=True)
    structures = args.structures or [params.structure]
    _echo(params, args.echo_config or os.path.join(args.output, "config.json"),
          {"command": "benchmark", "dataset": args.dataset, "structures": structures,
           "thresholds": list(thresholds)})
    iter_rows = []
    for s in structures:
        p = dataclasses.replace(params, structure=s)
        curves = []
        for ds in datasets:
            name = os.path.basename(os.path.normpath(ds.root))
            runs = run_dataset(ds, s, p, thresholds, crops=args.crops, crop_size=tuple(args.crop_size),
                               seed=p.seed)
            for r in runs:
                tag = f"{name}_crop{r.stats['crop']}_img{r.stats['scene']}_{s}"
                write_curve_csv(os.path.join(args.output, tag + ".csv"), r.curve)
                curves.append(r.curve)
                iter_rows.append((name, r.stats["crop"], r.stats["scene"], s, r.candidates,
                                  r.keygraph_iterations, r.point_iterations))
        agg = aggregate_curves(curves)
        write_curve_csv(os.path.join(args.output, f"aggregate_{s}.csv"), agg)
        print(f"{s}: {len(curves)} curves -> aggregate_{s}.csv")
    with open(os.path.join(args.output, "iterations.csv"), "w", encoding="utf-8") as fh:
        fh.write("dataset,crop,scene,structure,candidates,keygraph_iterations,point_iterations\n")
        for row in iter_rows:
            fh.write(",".join("" if v is None else str(v) for v in row) + "\n")
    return EXIT_OK


def cmd_aggregate(args):
    curves = [read_curve_csv(p) for p in args.curves]
    agg = aggregate_curves(curves)
    write_curve_csv(args.output, agg)
    print(f"{len(curves)} curves, {len(agg)} shared thresholds -> {args.output}")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="keygraphs", description="Keygraph-based planar object detection.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-model", help="detect, enumerate, describe and store model keygraphs")
    p.add_argument("image", help="model image (PGM or PPM)")
    p.add_argument("-o", "--output", required=True, help="model store file (JSON)")
    _add_params(p)
    p.set_defaults(func=cmd_build_model)

    p = sub.add_parser("detect", help="estimate the model pose in one scene")
    p.add_argument("store")
    p.add_argument("scene")
    p.add_argument("--correspondences", help="write the correspondence dump to this file")
    _add_params(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("track", help="run detection over a directory of frames")
    p.add_argument("store")
    p.add_argument("frames")
    _add_params(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("benchmark", help="recall-precision curves and iteration counts on a dataset")
    p.add_argument("dataset", help="dataset directory, or a directory of dataset subdirectories")
    p.add_argument("-o", "--output", required=True, help="output directory for CSV files")
    p.add_argument("--structures", nargs="+", choices=["pair", "tri", "quad"])
    p.add_argument("--thresholds", nargs="+", type=float)
    p.add_argument("--crops", type=int, default=1, help="random model crops per dataset")
    p.add_argument("--crop-size", nargs=2, type=int, default=[128, 128], metavar=("W", "H"))
    _add_params(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("aggregate", help="mean of several curve CSV files")
    p.add_argument("curves", nargs="+")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_aggregate)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    start = time.perf_counter()
    try:
        return args.func(args)
    except NoPoseFound as exc:
        print(f"error: no pose found: {exc}", file=sys.stderr)
        return EXIT_NO_POSE
    except (KeygraphError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    finally:
        if os.environ.get("KEYGRAPHS_DEBUG_TIME"):
            print(f"elapsed {1e3 * (time.perf_counter() - start):.1f} ms", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
