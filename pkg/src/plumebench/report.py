"""Desk-scale benchmark: simulate plumes, sweep methods, aggregate tables.

The benchmark crosses gases, target signal strengths, and replicate seeds.
Each case embeds a calibrated plume into a fresh synthetic scene, builds a
ROI from ACE detection, sweeps every estimation method's hyperparameter
grid, and records the best background MSE and best true-gas identification
confidence per method, along with Global and oracle (true background)
references. Cases are independent, so worker count never changes results.
"""
from __future__ import annotations

import json
import os
from multiprocessing import get_context
from pathlib import Path

import numpy as np
import pandas as pd

from .calibrate import TPR_DENSITY_MIN, calibrate_strength
from .detection import ace_map, build_rois
from .estimators import BackgroundEstimate
from .identify import SpectralLibrary, identify, whitened_superpixel
from .morphology import dilate, make_guardrail
from .plume import builtin_gas_names, embed_plume, gaussian_plume, make_gas
from .scene import gen_scene
from .segmentation import segment_cube
from .sweep import PlumeCase, evaluate_grid, make_report
from .types import PixelMask, SpectralGrid
from .whitening import fit_whitening

METHODS = ("global", "kmeans", "pca", "knn", "annulus", "kns")

SUMMARY_FILES = ("summary.csv", "per_gas.csv", "per_strength.csv",
                 "hyperparams.csv", "sensitivity.csv", "cases.csv",
                 "calibration.csv")


# ---------------------------------------------------------------------------
# scene/plume sampling shared by calibration and benchmark cases

def sample_scene_and_plume(config, seed):
    """One scene plus a plume density map, deterministic per seed."""
    ss = np.random.SeedSequence(seed)
    scene_seed, plume_seed, param_seed = ss.spawn(3)
    sc = config["scene"]
    cube, truth, atmos = gen_scene(
        sc["height"], sc["width"], band_count=sc["band_count"],
        material_count=sc["material_count"], layout=sc["layout"],
        noise_level=sc["noise_level"], seed=scene_seed,
    )
    rng = np.random.default_rng(param_seed)
    margin_r = max(sc["height"] // 5, 1)
    margin_c = max(sc["width"] // 5, 1)
    source = (int(rng.integers(margin_r, sc["height"] - margin_r)),
              int(rng.integers(margin_c, sc["width"] - margin_c)))
    wind_dir = float(rng.uniform(0.0, 2.0 * np.pi))
    pl = config["plume"]
    density = gaussian_plume(
        sc["height"], sc["width"], source,
        wind_speed=pl["wind_speed"], wind_dir=wind_dir,
        meander_sigma=pl["meander_sigma"], stability=pl["stability"],
        steps=pl["steps"], seed=plume_seed, pixel_size_m=pl["pixel_size_m"],
        release_height_m=pl["release_height_m"],
    )
    return cube, truth, atmos, density


def select_roi(score_map, density, far, min_size):
    """Pick the detected ROI that best overlaps the plume core.

    Falls back to min_size=1 components, then to the best-scoring pixel's
    3x3 neighborhood, so every simulated case yields a usable ROI.
    """
    core = density >= TPR_DENSITY_MIN
    for size in (min_size, 1):
        rois = build_rois(score_map, far=far, min_size=size)
        if rois:
            overlaps = [int((r.bits & core).sum()) for r in rois]
            best = int(np.argmax(overlaps))
            if overlaps[best] > 0:
                return rois[best]
    masked = np.where(core, np.asarray(score_map), -np.inf) if core.any() else \
        np.asarray(score_map)
    peak = np.unravel_index(int(np.argmax(masked)), density.shape)
    seed_mask = np.zeros_like(core)
    seed_mask[peak] = True
    return dilate(PixelMask(seed_mask), 1)


def make_library(band_count) -> SpectralLibrary:
    grid = SpectralGrid.default(band_count)
    return SpectralLibrary.from_gases([make_gas(n, grid) for n in builtin_gas_names()])


def oracle_estimate(truth, roi) -> BackgroundEstimate:
    pixels = roi.indices()
    backgrounds = truth.l_off_true[pixels[:, 0], pixels[:, 1]]
    return BackgroundEstimate(roi_pixels=pixels, backgrounds=backgrounds,
                              method="oracle")


# ---------------------------------------------------------------------------
# one benchmark case

def run_case(config, gas_name, strength, n_c_max, case_seed, case_id):
    """Evaluate every method on one simulated plume; returns row dicts."""
    cube, truth, atmos, density = sample_scene_and_plume(config, case_seed)
    gas = make_gas(gas_name, cube.grid)
    embedded, plume_truth = embed_plume(cube, truth, atmos, gas, density, n_c_max,
                                        t_min_K=config["plume"]["t_min_K"])

    model = fit_whitening(embedded)
    scores = ace_map(model, embedded, gas.absorption)
    det = config["detection"]
    roi = select_roi(scores, density, det["far"], det["min_roi_size"])
    guard = make_guardrail(roi)
    segments = segment_cube(embedded, h=config["segmentation"]["h_minima"])
    library = make_library(cube.band_count)
    ident = config["identifier"]

    case = PlumeCase(cube=embedded, truth=plume_truth, roi=roi, gas_name=gas_name,
                     strength=strength, seed=case_seed, case_id=case_id)

    rows = []

    def add_row(method, bg_report, id_report):
        rows.append({
            "case_id": case_id, "gas": gas_name, "strength": strength,
            "seed": case_seed, "method": method,
            "bg_mse": bg_report.best_response,
            "bg_best_params": json.dumps(bg_report.best_params, sort_keys=True),
            "bg_sensitivity": bg_report.sensitivity,
            "bg_missing": bg_report.missing,
            "id_confidence": id_report.best_response,
            "id_best_params": json.dumps(id_report.best_params, sort_keys=True),
            "id_sensitivity": id_report.sensitivity,
            "id_missing": id_report.missing,
            "roi_size": roi.count(),
        })

    for method in METHODS:
        grid = {} if method == "global" else config["grids"][method]
        points = evaluate_grid(case, method, grid, model, library=library,
                               segments=segments, beta=ident["beta"],
                               sign_mode=ident["sign_mode"], guard=guard)
        add_row(method, make_report(method, "bg_mse", points),
                make_report(method, "id_confidence", points))

    oracle = oracle_estimate(plume_truth, roi)
    sp = whitened_superpixel(model, embedded, oracle)
    oracle_conf = identify(sp, library, model, beta=ident["beta"],
                           sign_mode=ident["sign_mode"]).confidence(gas_name)
    rows.append({
        "case_id": case_id, "gas": gas_name, "strength": strength,
        "seed": case_seed, "method": "oracle",
        "bg_mse": 0.0, "bg_best_params": "{}", "bg_sensitivity": 0.0,
        "bg_missing": 0,
        "id_confidence": oracle_conf, "id_best_params": "{}",
        "id_sensitivity": 0.0, "id_missing": 0,
        "roi_size": roi.count(),
    })
    return rows


def _case_task(args):
    return run_case(*args)


# ---------------------------------------------------------------------------
# full benchmark

def calibrate_benchmark(config):
    """n_c_max per (gas, strength target), reused across replicate seeds."""
    bench = config["benchmark"]
    det = config["detection"]
    master = np.random.SeedSequence(config["seed"])
    combos = [(g, s) for g in bench["gases"] for s in bench["strength_targets"]]
    cal_seeds = master.generate_state(len(combos) + 1)[1:]
    grid = SpectralGrid.default(config["scene"]["band_count"])
    out = {}
    for (gas_name, strength), cal_seed in zip(combos, cal_seeds):
        gas = make_gas(gas_name, grid)
        factory = lambda s: sample_scene_and_plume(config, s)  # noqa: E731
        out[(gas_name, strength)] = calibrate_strength(
            factory, gas, strength, far=det["far"],
            trials=bench["calibration_trials"], seed=int(cal_seed),
            t_min_K=config["plume"]["t_min_K"],
        )
    return out


def benchmark_cases(config, calibration):
    bench = config["benchmark"]
    master = np.random.SeedSequence(config["seed"])
    specs = []
    for gas_name in bench["gases"]:
        for strength in bench["strength_targets"]:
            for rep in range(bench["seeds_per_cell"]):
                specs.append((gas_name, strength, rep))
    case_seeds = np.random.SeedSequence(config["seed"] + 1).generate_state(len(specs))
    tasks = []
    for (gas_name, strength, rep), case_seed in zip(specs, case_seeds):
        case_id = f"{gas_name}_s{int(round(strength * 100)):02d}_r{rep}"
        tasks.append((config, gas_name, strength,
                      calibration[(gas_name, strength)], int(case_seed), case_id))
    return tasks


def run_benchmark(config, out_dir, workers=None) -> pd.DataFrame:
    """Run the full benchmark and write all report files into out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if workers is None:
        workers = config.get("workers", 0)
    if not workers:
        workers = os.cpu_count() or 1

    calibration = calibrate_benchmark(config)
    tasks = benchmark_cases(config, calibration)

    if workers > 1 and len(tasks) > 1:
        with get_context("fork").Pool(workers) as pool:
            chunks = pool.map(_case_task, tasks)
    else:
        chunks = [_case_task(t) for t in tasks]
    rows = [row for chunk in chunks for row in chunk]
    cases = pd.DataFrame(rows).sort_values(["case_id", "method"]).reset_index(drop=True)

    cal_rows = [{"gas": g, "strength": s, "n_c_max": v}
                for (g, s), v in sorted(calibration.items())]
    pd.DataFrame(cal_rows).to_csv(out_dir / "calibration.csv", index=False)
    cases.to_csv(out_dir / "cases.csv", index=False)
    write_aggregates(cases, out_dir)
    write_plots(cases, out_dir)
    return cases


# ---------------------------------------------------------------------------
# aggregation

def _attach_improvements(cases: pd.DataFrame) -> pd.DataFrame:
    ref = cases[cases["method"] == "global"].set_index("case_id")
    out = cases.copy()
    global_mse = ref["bg_mse"].reindex(out["case_id"]).to_numpy()
    global_conf = ref["id_confidence"].reindex(out["case_id"]).to_numpy()
    with np.errstate(divide="ignore", invalid="ignore"):
        out["improvement_bg_mse"] = np.where(
            out["bg_mse"].to_numpy() > 0, global_mse / out["bg_mse"].to_numpy(), np.nan)
        out["improvement_id_confidence"] = np.where(
            global_conf > 0, out["id_confidence"].to_numpy() / global_conf, np.nan)
    return out


def aggregate(cases: pd.DataFrame) -> dict:
    """Summary tables keyed by output file stem."""
    df = _attach_improvements(cases)
    method_order = [m for m in (*METHODS, "oracle") if m in set(df["method"])]

    def nanmedian(series):
        values = series.dropna()
        return float(values.median()) if len(values) else np.nan

    def one_summary(group):
        return pd.Series({
            "n_cases": len(group),
            "median_bg_mse": group["bg_mse"].median(),
            "mean_bg_mse": group["bg_mse"].mean(),
            "median_id_confidence": group["id_confidence"].median(),
            "mean_id_confidence": group["id_confidence"].mean(),
            "median_improvement_bg_mse": nanmedian(group["improvement_bg_mse"]),
            "median_improvement_id_confidence": nanmedian(group["improvement_id_confidence"]),
        })

    summary = (df.groupby("method", sort=False).apply(one_summary, include_groups=False)
               .reindex(method_order).reset_index())
    # ratio-of-medians companions to the per-plume medians of ratios
    global_row = summary[summary["method"] == "global"].iloc[0]
    with np.errstate(divide="ignore"):
        summary["improvement_of_median_bg_mse"] = np.where(
            summary["median_bg_mse"] > 0,
            global_row["median_bg_mse"] / summary["median_bg_mse"], np.nan)
    summary["improvement_of_median_id_confidence"] = (
        summary["median_id_confidence"] / global_row["median_id_confidence"])

    def sliced(key):
        return (df.groupby([key, "method"], sort=True)
                .apply(one_summary, include_groups=False).reset_index()
                .sort_values([key, "method"]).reset_index(drop=True))

    per_gas = sliced("gas")
    per_strength = sliced("strength")

    hyper_rows = []
    for method in method_order:
        sub = df[df["method"] == method]
        for objective, col in (("bg_mse", "bg_best_params"),
                               ("id_confidence", "id_best_params")):
            params = [json.loads(v) for v in sub[col]]
            keys = sorted({k for p in params for k in p})
            for key in keys:
                values = [p[key] for p in params if key in p]
                mode = pd.Series(values).mode()
                mode_value = mode.iloc[0] if len(mode) else ""
                numeric = all(isinstance(v, (int, float)) and not isinstance(v, bool)
                              for v in values)
                hyper_rows.append({
                    "method": method, "objective": objective, "param": key,
                    "mode": mode_value,
                    "median": float(np.median(values)) if numeric else "",
                })
    hyperparams = pd.DataFrame(hyper_rows)

    sens_rows = []
    for method in method_order:
        sub = df[df["method"] == method]
        for objective, col, miss in (("bg_mse", "bg_sensitivity", "bg_missing"),
                                     ("id_confidence", "id_sensitivity", "id_missing")):
            sens_rows.append({
                "method": method, "objective": objective,
                "median_sensitivity": sub[col].median(),
                "mean_sensitivity": sub[col].mean(),
                "missing_total": int(sub[miss].sum()),
            })
    sensitivity = pd.DataFrame(sens_rows)

    return {"summary": summary, "per_gas": per_gas, "per_strength": per_strength,
            "hyperparams": hyperparams, "sensitivity": sensitivity}


def write_aggregates(cases: pd.DataFrame, out_dir):
    out_dir = Path(out_dir)
    for stem, frame in aggregate(cases).items():
        frame.to_csv(out_dir / f"{stem}.csv", index=False)


# ---------------------------------------------------------------------------
# figures

def _violin(ax, df, column, methods, log=False):
    data, labels = [], []
    for method in methods:
        values = df.loc[df["method"] == method, column].dropna().to_numpy()
        if log:
            values = values[values > 0]
            values = np.log10(values)
        if values.size == 0:
            continue
        data.append(values)
        labels.append(method)
    if not data:
        return
    parts = ax.violinplot(data, showmedians=True, showmeans=True)
    for body in parts["bodies"]:
        body.set_facecolor("#74c476")
        body.set_alpha(0.6)
    parts["cmedians"].set_color("tab:orange")
    parts["cmeans"].set_color("tab:purple")
    ax.set_xticks(range(1, len(labels) + 1), labels, rotation=30)
    if log:
        ax.set_ylabel(f"log10 {column}")
    else:
        ax.set_ylabel(column)


def write_plots(cases: pd.DataFrame, out_dir):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    matplotlib.rcParams["svg.hashsalt"] = "plumebench"

    out_dir = Path(out_dir)
    df = _attach_improvements(cases)
    methods = [m for m in METHODS if m in set(df["method"])]
    nonglobal = [m for m in methods if m != "global"]
    save = dict(format="svg", metadata={"Date": None})

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    _violin(axes[0], df, "bg_mse", methods, log=True)
    axes[0].set_title("background MSE")
    _violin(axes[1], df, "improvement_bg_mse", nonglobal, log=True)
    axes[1].axhline(0.0, color="gray", linestyle="--", linewidth=1)
    axes[1].set_title("improvement vs global")
    fig.tight_layout()
    fig.savefig(out_dir / "bg_mse.svg", **save)
    plt.close(fig)

    id_methods = methods + (["oracle"] if "oracle" in set(df["method"]) else [])
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    _violin(axes[0], df, "id_confidence", id_methods)
    axes[0].set_title("true-gas confidence")
    _violin(axes[1], df, "improvement_id_confidence", nonglobal)
    axes[1].axhline(1.0, color="gray", linestyle="--", linewidth=1)
    axes[1].set_title("improvement vs global")
    fig.tight_layout()
    fig.savefig(out_dir / "id_confidence.svg", **save)
    plt.close(fig)

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    _violin(axes[0], df, "bg_sensitivity", nonglobal, log=True)
    axes[0].set_title("bg MSE sensitivity")
    _violin(axes[1], df, "id_sensitivity", nonglobal)
    axes[1].set_title("id confidence sensitivity")
    fig.tight_layout()
    fig.savefig(out_dir / "sensitivity.svg", **save)
    plt.close(fig)
