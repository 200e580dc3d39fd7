"""plumebench: LWIR gas-plume simulation, detection, background estimation,
identification, and benchmarking."""

from .bts import BtsProblem, BtsSolution, bts_objective, solve_bts
from .calibrate import calibrate_strength
from .cubeio import (read_cube, read_labels, read_mask, write_cube,
                     write_labels, write_mask)
from .detection import ace_map, ace_score, build_rois
from .estimators import (AnnulusBackground, BackgroundEstimate, GlobalBackground,
                         KMeansBackground, KNNBackground, KNSBackground,
                         PCABackground, estimate_background, linkage_distance,
                         make_estimator)
from .identify import (IdResult, SpectralLibrary, identify, standardize,
                       whitened_superpixel)
from .metrics import background_mse, improvement_ratio
from .morphology import dilate, make_guardrail
from .plume import (GasSpec, PlumeTruth, builtin_gas_names, embed_plume,
                    gaussian_plume, make_gas)
from .radiometry import planck_radiance
from .scene import AtmosProfile, SurfaceTruth, gen_scene, surface_radiance
from .segmentation import SegmentMap, segment_cube, spectral_gradient, watershed
from .sweep import FULL_GRIDS, PlumeCase, SweepReport, grid_sweep
from .types import PixelMask, RadianceCube, SpectralGrid, mean_spectrum
from .whitening import WhiteningTransform, fit_whitening, whiten

__version__ = "0.1.0"

__all__ = [
    "AnnulusBackground", "AtmosProfile", "BackgroundEstimate", "BtsProblem",
    "BtsSolution", "FULL_GRIDS", "GasSpec", "GlobalBackground", "IdResult",
    "KMeansBackground", "KNNBackground", "KNSBackground", "PCABackground",
    "PixelMask", "PlumeCase", "PlumeTruth", "RadianceCube", "SegmentMap",
    "SpectralGrid", "SpectralLibrary", "SurfaceTruth", "SweepReport",
    "WhiteningTransform", "ace_map", "ace_score", "background_mse",
    "bts_objective", "builtin_gas_names", "build_rois", "calibrate_strength",
    "dilate", "embed_plume", "estimate_background", "fit_whitening",
    "gaussian_plume", "gen_scene", "grid_sweep", "identify",
    "improvement_ratio", "linkage_distance", "make_estimator", "make_gas",
    "make_guardrail", "mean_spectrum", "planck_radiance", "read_cube", "read_labels",
    "read_mask", "segment_cube", "solve_bts", "spectral_gradient",
    "standardize", "surface_radiance", "watershed", "whiten",
    "whitened_superpixel", "write_cube", "write_labels", "write_mask",
]
