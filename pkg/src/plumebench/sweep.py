"""Hyperparameter grids, per-case sweeps, and sensitivity.

A sweep evaluates every grid point of one method on one plume case and
records the response (background MSE or true-gas identification confidence)
per point. The sensitivity of a method on a case is the standard deviation
of its responses across the grid; failed grid points are recorded as missing
and excluded from the best/sensitivity statistics.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .estimators import make_estimator
from .identify import SpectralLibrary, identify, whitened_superpixel
from .metrics import OBJECTIVES, background_mse
from .plume import PlumeTruth
from .segmentation import SegmentMap
from .types import PixelMask, RadianceCube
from .whitening import WhiteningTransform

# Search ranges for the full-resolution (128-band) grids.
FULL_GRIDS = {
    "pca": {"n_components": list(range(1, 128))},
    "knn": {"n_neighbors": list(range(1, 128))},
    "kmeans": {"n_clusters": list(range(2, 129))},
    "annulus": {"n_dilations": list(range(1, 128))},
    "kns": {
        "min_pixels": [2 ** n for n in range(2, 12)],
        "linkage": ["single", "complete", "average"],
        "use_bts": [False, True],
    },
}


@dataclass(frozen=True)
class PlumeCase:
    """One simulated plume: the scene under analysis plus its ground truth."""

    cube: RadianceCube
    truth: PlumeTruth
    roi: PixelMask
    gas_name: str
    strength: float      # target detection TPR bucket
    seed: int
    case_id: str = ""

    def __post_init__(self):
        if not self.roi.bits.any():
            raise ValueError("case roi must be nonempty")
        if self.truth.shape != self.roi.shape:
            raise ValueError("truth and roi shapes disagree")


@dataclass(frozen=True)
class GridPoint:
    params: dict
    bg_mse: float = np.nan
    id_confidence: float = np.nan
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


@dataclass(frozen=True)
class SweepReport:
    method: str
    objective: str
    grid: tuple            # of GridPoint
    best_params: dict
    best_response: float
    sensitivity: float
    missing: int = 0


def expand_grid(method: str, grid: dict):
    """Cartesian product of a {param: [values]} grid, in a stable order.

    An empty dict is the one-point grid of a parameterless method.
    """
    if grid is None:
        raise ValueError("grid must not be None")
    if not grid:
        return [{}]
    if any(len(v) == 0 for v in grid.values()):
        raise ValueError("grid value lists must be nonempty")
    keys = sorted(grid)
    combos = itertools.product(*(grid[k] for k in keys))
    return [dict(zip(keys, combo)) for combo in combos]


def evaluate_grid(case: PlumeCase, method: str, grid: dict,
                  model: WhiteningTransform, library: SpectralLibrary = None,
                  segments: SegmentMap = None, beta=10.0, sign_mode="absorption",
                  guard=None):
    """Evaluate every grid point once, recording both objectives per point."""
    points = []
    for params in expand_grid(method, grid):
        try:
            estimator = make_estimator(method, **params)
            if method == "kns":
                estimate = estimator.fit_predict(case.cube, case.roi, guard=guard,
                                                 segments=segments)
            else:
                estimate = estimator.fit_predict(case.cube, case.roi, guard=guard)
            mse = background_mse(estimate, case.truth)
            conf = np.nan
            if library is not None:
                sp = whitened_superpixel(model, case.cube, estimate)
                result = identify(sp, library, model, beta=beta, sign_mode=sign_mode,
                                  method=method, hyperparams=params)
                conf = result.confidence(case.gas_name)
            points.append(GridPoint(params=params, bg_mse=mse, id_confidence=conf))
        except (ValueError,) as exc:
            points.append(GridPoint(params=params, error=str(exc)))
    return points


def make_report(method: str, objective: str, points) -> SweepReport:
    if objective not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}")
    responses = []
    for p in points:
        value = p.bg_mse if objective == "bg_mse" else p.id_confidence
        responses.append(np.nan if not p.ok else value)
    responses = np.asarray(responses, dtype=np.float64)
    valid = ~np.isnan(responses)
    missing = int((~valid).sum())
    if not valid.any():
        raise ValueError(f"all {len(points)} grid points failed for method {method!r}")
    if objective == "bg_mse":
        best_idx = int(np.nanargmin(responses))
    else:
        best_idx = int(np.nanargmax(responses))
    sensitivity = float(np.std(responses[valid]))
    return SweepReport(method=method, objective=objective, grid=tuple(points),
                       best_params=points[best_idx].params,
                       best_response=float(responses[best_idx]),
                       sensitivity=sensitivity, missing=missing)


def grid_sweep(case: PlumeCase, method: str, objective: str, grid: dict,
               model: WhiteningTransform, library: SpectralLibrary = None,
               segments: SegmentMap = None, beta=10.0, sign_mode="absorption",
               guard=None) -> SweepReport:
    """Exhaustive sweep of one method on one case for one objective."""
    points = evaluate_grid(case, method, grid, model, library=library,
                           segments=segments, beta=beta, sign_mode=sign_mode,
                           guard=guard)
    return make_report(method, objective, points)
