"""Gas plume simulation: dispersion density maps and radiative embedding.

A time-averaged Gaussian dispersion model with per-step wind meander
produces a relative density map scaled to [0, 1]. That density linearly
drives both the plume's concentration pathlength and its temperature, and
the plume perturbs the scene through

    L = L_off + n_c * alpha * tau * (B(T_p) - eps * B(T_g) - rho * L_down)
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .radiometry import planck_radiance
from .scene import AtmosProfile, SurfaceTruth, surface_radiance
from .types import PixelMask, RadianceCube, SpectralGrid

DEFAULT_PIXEL_SIZE_M = 10.0
PLUME_MIN_TEMPERATURE_K = 280.0

# Briggs open-country dispersion coefficients, sigma = a*x*(1 + b*x)^p
_BRIGGS = {
    "A": ((0.22, 1e-4, -0.5), (0.20, 0.0, 0.0)),
    "B": ((0.16, 1e-4, -0.5), (0.12, 0.0, 0.0)),
    "C": ((0.11, 1e-4, -0.5), (0.08, 2e-4, -0.5)),
    "D": ((0.08, 1e-4, -0.5), (0.06, 1.5e-3, -0.5)),
    "E": ((0.06, 1e-4, -0.5), (0.03, 3e-4, -1.0)),
    "F": ((0.04, 1e-4, -0.5), (0.016, 3e-4, -1.0)),
}


@dataclass(frozen=True)
class GasSpec:
    """A gas absorption signature sampled on a spectral grid, (ppm·m)⁻¹."""

    name: str
    absorption: np.ndarray

    def __post_init__(self):
        alpha = np.asarray(self.absorption, dtype=np.float64)
        if alpha.ndim != 1 or alpha.size == 0:
            raise ValueError("absorption must be a nonempty 1-D array")
        if np.any(alpha < 0) or not np.all(np.isfinite(alpha)):
            raise ValueError("absorption must be finite and non-negative")
        if not np.any(alpha > 0):
            raise ValueError("absorption must be positive in at least one band")
        object.__setattr__(self, "absorption", alpha)

    @property
    def nominal_scale(self) -> float:
        return float(self.absorption.max())


@dataclass(frozen=True)
class PlumeTruth:
    """Ground truth recorded when a plume is embedded into a scene."""

    density: np.ndarray     # (H, W) in [0, 1]
    n_c: np.ndarray         # (H, W) concentration pathlength, ppm·m
    T_p: np.ndarray         # (H, W) plume temperature, K
    l_off_true: np.ndarray  # (H, W, B) noiseless background radiance
    roi_truth: PixelMask    # density > 0

    @property
    def shape(self):
        return self.density.shape


# ---------------------------------------------------------------------------
# built-in gas library (synthetic signatures shaped after Fig-style LWIR gases)

_GAS_PARAMS = {
    # name: (max alpha, [(center_um, sigma_um, weight), ...])
    "SF6":     (1e-2, [(10.55, 0.07, 1.0)]),
    "Freon11": (3e-3, [(9.22, 0.10, 1.0), (11.80, 0.12, 0.75)]),
    "Freon12": (1e-3, [(8.98, 0.28, 1.0), (10.90, 0.35, 0.65)]),
    "NH3":     (3e-4, [(10.35, 0.30, 1.0), (10.75, 0.40, 0.85)]),
    "N2O":     (1e-4, [(7.78, 0.09, 1.0), (8.57, 0.12, 0.35)]),
    "CH4":     (3e-5, [(7.66, 0.11, 1.0)]),
    "C2H2":    (1e-5, [(13.02, 0.10, 1.0)]),
    "SO2":     (1e-6, [(8.69, 0.45, 1.0), (7.35, 0.50, 0.4)]),
}


def builtin_gas_names():
    return list(_GAS_PARAMS)


def make_gas(name: str, grid: SpectralGrid) -> GasSpec:
    """Sample a built-in gas absorption signature onto a spectral grid.

    Lines are integrated over each band's width (not point-sampled) so that
    features narrower than the band spacing still deposit their mass into
    the covering band on coarse grids.
    """
    from scipy.special import erf

    if name not in _GAS_PARAMS:
        raise ValueError(f"unknown gas {name!r}; available: {builtin_gas_names()}")
    amp, lines = _GAS_PARAMS[name]
    wl = grid.wavelengths
    alpha = np.zeros_like(wl)
    if wl.size == 1:
        for center, sigma, weight in lines:
            alpha += weight * np.exp(-0.5 * ((wl - center) / sigma) ** 2)
    else:
        half = np.empty(wl.size + 1)
        half[1:-1] = 0.5 * (wl[1:] + wl[:-1])
        half[0] = wl[0] - (wl[1] - wl[0]) / 2
        half[-1] = wl[-1] + (wl[-1] - wl[-2]) / 2
        widths = np.diff(half)
        root2 = np.sqrt(2.0)
        for center, sigma, weight in lines:
            cdf = 0.5 * (1.0 + erf((half - center) / (sigma * root2)))
            mass = np.diff(cdf) * (sigma * np.sqrt(2.0 * np.pi))
            alpha += weight * mass / widths
    peak = alpha.max()
    if peak <= 0:  # pragma: no cover - grids always overlap a line tail
        raise ValueError(f"gas {name!r} has no absorption on this grid")
    return GasSpec(name, alpha * (amp / peak))


# ---------------------------------------------------------------------------
# dispersion

def _briggs_sigmas(stability: str, x_m: np.ndarray):
    try:
        (ay, by, py), (az, bz, pz) = _BRIGGS[stability.upper()]
    except KeyError:
        raise ValueError(f"stability class must be one of {list(_BRIGGS)}") from None
    x = np.maximum(x_m, 1.0)  # Briggs laws are for x > 0; clamp near-source
    sigma_y = ay * x * (1.0 + by * x) ** py
    sigma_z = az * x * (1.0 + bz * x) ** pz
    return sigma_y, sigma_z


def gaussian_plume(height, width, source, wind_speed, wind_dir, meander_sigma=0.0,
                   stability="D", steps=1, seed=0, pixel_size_m=DEFAULT_PIXEL_SIZE_M,
                   release_height_m=10.0):
    """Time-averaged ground-level plume density map, rescaled to [0, 1].

    `source` is (row, col); `wind_dir` is the downwind direction in radians
    measured from the +col axis toward +row. Ground-level concentration of an
    elevated release with ground reflection is evaluated per pixel, each step
    perturbing the wind direction with a Gaussian meander of standard
    deviation `meander_sigma` radians; the per-step fields are averaged and
    rescaled so the map spans exactly [0, 1].
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if wind_speed <= 0:
        raise ValueError("wind_speed must be positive")
    r0, c0 = source
    if not (0 <= r0 < height and 0 <= c0 < width):
        raise ValueError(f"source {source} lies outside the {height}x{width} image")

    rng = np.random.default_rng(seed)
    rr, cc = np.meshgrid(np.arange(height, dtype=np.float64),
                         np.arange(width, dtype=np.float64), indexing="ij")
    dy = (rr - r0) * pixel_size_m
    dx = (cc - c0) * pixel_size_m

    total = np.zeros((height, width))
    for _ in range(steps):
        theta = wind_dir + (rng.normal(0.0, meander_sigma) if meander_sigma > 0 else 0.0)
        along = dx * np.cos(theta) + dy * np.sin(theta)
        cross = -dx * np.sin(theta) + dy * np.cos(theta)
        total += plume_concentration(along, cross, wind_speed, stability,
                                     release_height_m)
    total /= steps

    lo, hi = total.min(), total.max()
    if hi <= lo:
        raise ValueError("degenerate plume: concentration field is constant")
    return (total - lo) / (hi - lo)


def plume_concentration(along_m, cross_m, wind_speed, stability="D",
                        release_height_m=10.0):
    """Ground-level concentration (unit emission rate) at downwind/crosswind
    offsets in meters; zero upwind of the source."""
    along = np.asarray(along_m, dtype=np.float64)
    cross = np.asarray(cross_m, dtype=np.float64)
    sigma_y, sigma_z = _briggs_sigmas(stability, along)
    with np.errstate(under="ignore"):
        conc = (np.exp(-0.5 * (cross / sigma_y) ** 2)
                * np.exp(-0.5 * (release_height_m / sigma_z) ** 2)
                / (np.pi * wind_speed * sigma_y * sigma_z))
    return np.where(along > 0, conc, 0.0)


# ---------------------------------------------------------------------------
# embedding

def thermal_contrast(b_plume, emissivity, b_ground, reflectance, l_down):
    """B_p - eps*B_g - rho*L_D, the sign-carrying part of the plume term."""
    return b_plume - emissivity * b_ground - reflectance * l_down


def plume_perturbation(n_c, alpha, tau, contrast):
    """n_c * alpha * tau * contrast, broadcast over pixels and bands."""
    return n_c * alpha * tau * contrast


def embed_plume(cube: RadianceCube, truth: SurfaceTruth, atmos: AtmosProfile,
                gas: GasSpec, density, n_c_max,
                t_min_K=PLUME_MIN_TEMPERATURE_K):
    """Embed a gas plume into a scene cube; returns (cube, PlumeTruth).

    Per pixel the concentration pathlength is density * n_c_max and the plume
    temperature falls linearly from the pixel's ambient surface temperature
    toward `t_min_K` as density approaches one. Density-zero pixels are
    returned unchanged.
    """
    if n_c_max <= 0:
        raise ValueError("n_c_max must be positive")
    density = np.asarray(density, dtype=np.float64)
    if density.shape != cube.data.shape[:2]:
        raise ValueError("density shape does not match the cube")
    if np.any(density < 0) or np.any(density > 1):
        raise ValueError("density must lie in [0, 1]")
    if gas.absorption.size != cube.band_count:
        raise ValueError("gas signature band count does not match the cube")

    wl = cube.grid.wavelengths
    t_amb = truth.temperature_K
    t_plume = t_amb - density * (t_amb - t_min_K)
    n_c = density * n_c_max

    b_ground = planck_radiance(wl[None, None, :], t_amb[..., None])
    b_plume = planck_radiance(wl[None, None, :], t_plume[..., None])
    contrast = thermal_contrast(b_plume, truth.emissivity, b_ground,
                                truth.reflectance, atmos.l_down)
    perturbation = plume_perturbation(n_c[..., None], gas.absorption, atmos.tau, contrast)
    perturbation[density == 0] = 0.0

    l_off_true = surface_radiance(truth, atmos, cube.grid)
    out = RadianceCube(cube.grid, cube.data + perturbation)
    plume_truth = PlumeTruth(density=density, n_c=n_c, T_p=t_plume,
                             l_off_true=l_off_true, roi_truth=PixelMask(density > 0))
    return out, plume_truth
