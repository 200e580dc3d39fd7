"""Command-line front end.

Every subcommand is a pure function of (inputs, config, seed) to files, and
each output directory receives the fully resolved configuration so reruns
are reproducible. Config errors exit with code 2 and numerical failures
with code 3; both write a machine-readable JSON object to stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import cubeio
from .calibrate import calibrate_strength, mean_tpr
from .config import resolve_config, write_resolved
from .detection import ace_map, build_rois
from .errors import CalibrationError, ConfigError, NumericalError, PlumebenchError
from .estimators import BackgroundEstimate, estimate_background, method_names
from .identify import SpectralLibrary, identify, whitened_superpixel
from .morphology import make_guardrail
from .plume import builtin_gas_names, embed_plume, make_gas
from .report import (make_library, run_benchmark, sample_scene_and_plume,
                     select_roi)
from .scene import AtmosProfile, SurfaceTruth, gen_scene
from .segmentation import segment_cube
from .sweep import FULL_GRIDS, PlumeCase, evaluate_grid, make_report
from .types import RadianceCube, SpectralGrid
from .whitening import fit_whitening

ENV_WORKERS = "PLUME_BENCH_WORKERS"


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args, **overrides) -> dict:
    cfg = resolve_config(overrides=overrides or None, path=args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.workers is not None:
        cfg["workers"] = args.workers
    elif os.environ.get(ENV_WORKERS):
        try:
            cfg["workers"] = int(os.environ[ENV_WORKERS])
        except ValueError as exc:
            raise ConfigError(f"{ENV_WORKERS} must be an integer") from exc
    return cfg


def _save_truth(path, truth: SurfaceTruth, atmos: AtmosProfile, grid: SpectralGrid):
    np.savez(path, emissivity=truth.emissivity, temperature=truth.temperature_K,
             material=truth.material_label, tau=atmos.tau, l_up=atmos.l_up,
             l_down=atmos.l_down, wavelengths=grid.wavelengths)


def _load_truth(path):
    data = np.load(path)
    truth = SurfaceTruth(data["emissivity"], data["temperature"], data["material"])
    atmos = AtmosProfile(data["tau"], data["l_up"], data["l_down"])
    return truth, atmos, SpectralGrid(data["wavelengths"])


def _write_estimate_csv(estimate: BackgroundEstimate, csv_path, sidecar_path):
    bands = estimate.backgrounds.shape[1]
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "col"] + [f"b{i}" for i in range(bands)])
        for (r, c), bg in zip(estimate.roi_pixels, estimate.backgrounds):
            writer.writerow([int(r), int(c)] + [repr(float(v)) for v in bg])
    with open(sidecar_path, "w") as fh:
        json.dump({"method": estimate.method,
                   "hyperparams": _jsonable(estimate.hyperparams)}, fh, indent=2)
        fh.write("\n")


def _read_estimate_csv(csv_path, sidecar_path=None) -> BackgroundEstimate:
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        pixels, rows = [], []
        for record in reader:
            pixels.append((int(record[0]), int(record[1])))
            rows.append([float(v) for v in record[2:]])
    method, hyperparams = "unknown", {}
    if sidecar_path and Path(sidecar_path).exists():
        with open(sidecar_path) as fh:
            meta = json.load(fh)
        method, hyperparams = meta.get("method", "unknown"), meta.get("hyperparams", {})
    return BackgroundEstimate(np.asarray(pixels), np.asarray(rows), method, hyperparams)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def _gas_target(args, grid: SpectralGrid):
    if args.library:
        library = SpectralLibrary.from_csv(args.library)
        idx = library.names.index(args.gas)
        return library.absorptions[idx]
    return make_gas(args.gas, grid).absorption


# ---------------------------------------------------------------------------
# subcommands

def cmd_scene(args):
    cfg = _config(args)
    out = _out_dir(args)
    sc = cfg["scene"]
    cube, truth, atmos = gen_scene(sc["height"], sc["width"], sc["band_count"],
                                   sc["material_count"], sc["layout"],
                                   sc["noise_level"], seed=cfg["seed"])
    cubeio.write_cube(cube, out / "scene.plbc")
    _save_truth(out / "truth.npz", truth, atmos, cube.grid)
    write_resolved(cfg, out / "resolved_config.json")
    print(f"wrote scene {cube.height}x{cube.width}x{cube.band_count} to {out}")
    return 0


def cmd_plume(args):
    cfg = _config(args)
    out = _out_dir(args)
    scene_dir = Path(args.scene_dir)
    cube = cubeio.read_cube(scene_dir / "scene.plbc")
    truth, atmos, _ = _load_truth(scene_dir / "truth.npz")
    _, _, _, density = sample_scene_and_plume(cfg, cfg["seed"])
    gas = make_gas(args.gas, cube.grid)
    embedded, plume_truth = embed_plume(cube, truth, atmos, gas, density,
                                        args.n_c_max, t_min_K=cfg["plume"]["t_min_K"])
    cubeio.write_cube(embedded, out / "plume.plbc")
    cubeio.write_cube(RadianceCube(cube.grid, plume_truth.l_off_true),
                      out / "l_off_true.plbc")
    cubeio.write_mask(plume_truth.roi_truth, out / "roi_truth.plbc")
    with open(out / "plume_truth.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "col", "density", "n_c", "T_p"])
        h, w = plume_truth.shape
        for r in range(h):
            for c in range(w):
                writer.writerow([r, c, repr(float(plume_truth.density[r, c])),
                                 repr(float(plume_truth.n_c[r, c])),
                                 repr(float(plume_truth.T_p[r, c]))])
    write_resolved(cfg, out / "resolved_config.json")
    print(f"embedded {args.gas} plume (n_c_max={args.n_c_max}) into {out}")
    return 0


def cmd_calibrate(args):
    cfg = _config(args)
    out = _out_dir(args)
    grid = SpectralGrid.default(cfg["scene"]["band_count"])
    gas = make_gas(args.gas, grid)
    factory = lambda s: sample_scene_and_plume(cfg, s)  # noqa: E731
    n_c_max = calibrate_strength(factory, gas, args.target_tpr,
                                 far=cfg["detection"]["far"], trials=args.trials,
                                 seed=cfg["seed"], t_min_K=cfg["plume"]["t_min_K"])
    check_seeds = np.random.SeedSequence(cfg["seed"] + 9999).generate_state(args.trials)
    achieved = mean_tpr([factory(int(s)) for s in check_seeds], gas, n_c_max,
                        cfg["detection"]["far"], cfg["plume"]["t_min_K"])
    result = {"gas": args.gas, "target_tpr": args.target_tpr,
              "n_c_max": n_c_max, "achieved_tpr_fresh": achieved}
    with open(out / "calibration.json", "w") as fh:
        json.dump(result, fh, indent=2)
        fh.write("\n")
    write_resolved(cfg, out / "resolved_config.json")
    print(json.dumps(result))
    return 0


def cmd_detect(args):
    cfg = _config(args)
    det = dict(cfg["detection"])
    if args.far is not None:
        det["far"] = args.far
    if args.min_roi_size is not None:
        det["min_roi_size"] = args.min_roi_size
    cfg["detection"] = det
    out = _out_dir(args)
    cube = cubeio.read_cube(args.cube)
    target = _gas_target(args, cube.grid)
    model = fit_whitening(cube)
    scores = ace_map(model, cube, target)
    score_cube = RadianceCube(SpectralGrid([1.0]), scores[:, :, None])
    cubeio.write_cube(score_cube, out / "score_map.plbc")
    rois = build_rois(scores, far=det["far"], min_size=det["min_roi_size"])
    for i, roi in enumerate(rois):
        cubeio.write_mask(roi, out / f"roi_{i:02d}.plbc")
    with open(out / "detect.json", "w") as fh:
        json.dump({"gas": args.gas, "far": det["far"],
                   "min_roi_size": det["min_roi_size"], "roi_count": len(rois),
                   "roi_sizes": [r.count() for r in rois]}, fh, indent=2)
        fh.write("\n")
    write_resolved(cfg, out / "resolved_config.json")
    print(f"{len(rois)} ROI(s) written to {out}")
    return 0


def cmd_segment(args):
    cfg = _config(args)
    h = args.h_minima if args.h_minima is not None else cfg["segmentation"]["h_minima"]
    out = _out_dir(args)
    cube = cubeio.read_cube(args.cube)
    segmap = segment_cube(cube, h=h)
    cubeio.write_labels(segmap.labels, out / "segments.plbc")
    with open(out / "segment.json", "w") as fh:
        json.dump({"segment_count": segmap.segment_count, "h_minima": h}, fh, indent=2)
        fh.write("\n")
    write_resolved(cfg, out / "resolved_config.json")
    print(f"{segmap.segment_count} segments written to {out}")
    return 0


def cmd_estimate(args):
    cfg = _config(args)
    out = _out_dir(args)
    cube = cubeio.read_cube(args.cube)
    roi = cubeio.read_mask(args.roi)
    segments = cubeio.read_labels(args.segments) if args.segments else None
    hyper = {}
    if args.method == "kmeans":
        hyper = {"n_clusters": args.clusters, "seed": cfg["seed"]}
    elif args.method == "pca":
        hyper = {"n_components": args.components}
    elif args.method == "knn":
        hyper = {"n_neighbors": args.neighbors}
    elif args.method == "annulus":
        hyper = {"n_dilations": args.dilations}
    elif args.method == "kns":
        hyper = {"min_pixels": args.min_pixels, "linkage": args.linkage,
                 "use_bts": args.use_bts, "sign_mode": args.sign_mode}
    estimate = estimate_background(cube, roi, method=args.method,
                                   segments=segments, **hyper)
    _write_estimate_csv(estimate, out / "backgrounds.csv", out / "backgrounds.json")
    write_resolved(cfg, out / "resolved_config.json")
    print(f"{len(estimate)} background spectra written to {out}")
    return 0


def cmd_identify(args):
    cfg = _config(args)
    out = _out_dir(args)
    cube = cubeio.read_cube(args.cube)
    estimate = _read_estimate_csv(args.backgrounds,
                                  Path(args.backgrounds).with_suffix(".json"))
    library = (SpectralLibrary.from_csv(args.library) if args.library
               else make_library(cube.band_count))
    model = fit_whitening(cube)
    sp = whitened_superpixel(model, cube, estimate)
    result = identify(sp, library, model, beta=args.beta,
                      sign_mode=args.sign_mode or cfg["identifier"]["sign_mode"],
                      method=estimate.method, hyperparams=estimate.hyperparams)
    (out / "identification.json").write_text(result.to_json() + "\n")
    write_resolved(cfg, out / "resolved_config.json")
    print(f"top: {result.top} ({result.confidence(result.top):.3f})")
    return 0


def cmd_sweep(args):
    cfg = _config(args)
    out = _out_dir(args)
    cube, truth, atmos, density = sample_scene_and_plume(cfg, cfg["seed"])
    gas = make_gas(args.gas, cube.grid)
    embedded, plume_truth = embed_plume(cube, truth, atmos, gas, density,
                                        args.n_c_max, t_min_K=cfg["plume"]["t_min_K"])
    model = fit_whitening(embedded)
    scores = ace_map(model, embedded, gas.absorption)
    roi = select_roi(scores, density, cfg["detection"]["far"],
                     cfg["detection"]["min_roi_size"])
    guard = make_guardrail(roi)
    segments = segment_cube(embedded, h=cfg["segmentation"]["h_minima"])
    library = make_library(cube.band_count)
    case = PlumeCase(cube=embedded, truth=plume_truth, roi=roi, gas_name=args.gas,
                     strength=0.0, seed=cfg["seed"], case_id="sweep")
    grid = FULL_GRIDS[args.method] if args.grid == "full" else cfg["grids"][args.method]
    points = evaluate_grid(case, args.method, grid, model, library=library,
                           segments=segments, beta=cfg["identifier"]["beta"],
                           sign_mode=args.sign_mode or cfg["identifier"]["sign_mode"],
                           guard=guard)
    report = make_report(args.method, args.objective, points)
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["params", "bg_mse", "id_confidence", "error"])
        for p in points:
            writer.writerow([json.dumps(p.params, sort_keys=True),
                             repr(float(p.bg_mse)), repr(float(p.id_confidence)),
                             p.error])
    with open(out / "sweep.json", "w") as fh:
        json.dump({"method": report.method, "objective": report.objective,
                   "best_params": report.best_params,
                   "best_response": report.best_response,
                   "sensitivity": report.sensitivity,
                   "missing": report.missing,
                   "points": len(points)}, fh, indent=2)
        fh.write("\n")
    write_resolved(cfg, out / "resolved_config.json")
    print(f"swept {len(points)} points; best {report.objective} = "
          f"{report.best_response:.6g} at {report.best_params}")
    return 0


def cmd_report(args):
    cfg = _config(args)
    out = _out_dir(args)
    write_resolved(cfg, out / "resolved_config.json")
    cases = run_benchmark(cfg, out, workers=cfg["workers"] or None)
    print(f"benchmark complete: {cases['case_id'].nunique()} cases, "
          f"tables and figures in {out}")
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser():
    parser = argparse.ArgumentParser(prog="plumebench",
                                     description="LWIR gas plume analysis benchmark")
    parser.add_argument("--config", default=None, help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--workers", type=int, default=None,
                        help=f"worker processes (fallback: ${ENV_WORKERS})")
    parser.add_argument("--out-dir", default="plumebench_out")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("scene", help="generate a synthetic scene").set_defaults(func=cmd_scene)

    p = sub.add_parser("plume", help="embed a plume into a stored scene")
    p.add_argument("--scene-dir", required=True)
    p.add_argument("--gas", required=True, choices=builtin_gas_names())
    p.add_argument("--n-c-max", type=float, required=True)
    p.set_defaults(func=cmd_plume)

    p = sub.add_parser("calibrate", help="calibrate plume strength to a target TPR")
    p.add_argument("--gas", required=True, choices=builtin_gas_names())
    p.add_argument("--target-tpr", type=float, required=True)
    p.add_argument("--trials", type=int, default=8)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("detect", help="ACE detection and ROI creation")
    p.add_argument("--cube", required=True)
    p.add_argument("--gas", required=True)
    p.add_argument("--library", default=None, help="library CSV (default: built-in gases)")
    p.add_argument("--far", type=float, default=None)
    p.add_argument("--min-roi-size", type=int, default=None)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("segment", help="watershed segmentation")
    p.add_argument("--cube", required=True)
    p.add_argument("--h-minima", type=float, default=None)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("estimate", help="background estimation for a ROI")
    p.add_argument("--cube", required=True)
    p.add_argument("--roi", required=True)
    p.add_argument("--method", required=True, choices=method_names())
    p.add_argument("--segments", default=None, help="segment label cube (kns)")
    p.add_argument("--components", type=int, default=8)
    p.add_argument("--neighbors", type=int, default=8)
    p.add_argument("--clusters", type=int, default=8)
    p.add_argument("--dilations", type=int, default=8)
    p.add_argument("--min-pixels", type=int, default=64)
    p.add_argument("--linkage", default="average", choices=["single", "complete", "average"])
    p.add_argument("--use-bts", action="store_true")
    p.add_argument("--sign-mode", default="absorption", choices=["emission", "absorption"])
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("identify", help="identify the gas behind a background estimate")
    p.add_argument("--cube", required=True)
    p.add_argument("--backgrounds", required=True, help="backgrounds CSV from estimate")
    p.add_argument("--library", default=None)
    p.add_argument("--beta", type=float, default=10.0)
    p.add_argument("--sign-mode", default=None, choices=["emission", "absorption"])
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("sweep", help="hyperparameter sweep on one simulated plume")
    p.add_argument("--gas", required=True, choices=builtin_gas_names())
    p.add_argument("--n-c-max", type=float, required=True)
    p.add_argument("--method", required=True, choices=method_names())
    p.add_argument("--objective", default="bg_mse", choices=["bg_mse", "id_confidence"])
    p.add_argument("--grid", default="config", choices=["config", "full"])
    p.add_argument("--sign-mode", default=None, choices=["emission", "absorption"])
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="run the full desk-scale benchmark")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2
    except (NumericalError, CalibrationError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 3
    except (PlumebenchError, ValueError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
