"""Core data containers: spectral grid, radiance cube, and pixel masks.

Spectra are plain 1-D float arrays throughout the package; the containers
below carry the spatial/spectral geometry and validate their invariants at
construction. All containers are treated as immutable after construction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_BAND_RANGE_UM = (7.56, 13.16)
DEFAULT_BAND_COUNT = 128


@dataclass(frozen=True)
class SpectralGrid:
    """Band centers in micrometers, strictly increasing."""

    wavelengths: np.ndarray

    def __post_init__(self):
        wl = np.asarray(self.wavelengths, dtype=np.float64)
        if wl.ndim != 1 or wl.size == 0:
            raise ValueError("wavelengths must be a nonempty 1-D array")
        if not np.all(np.isfinite(wl)):
            raise ValueError("wavelengths must be finite")
        if np.any(wl <= 0):
            raise ValueError("wavelengths must be positive")
        if np.any(np.diff(wl) <= 0):
            raise ValueError("wavelengths must be strictly increasing")
        object.__setattr__(self, "wavelengths", wl)

    @property
    def band_count(self) -> int:
        return int(self.wavelengths.size)

    @classmethod
    def default(cls, band_count: int = DEFAULT_BAND_COUNT) -> "SpectralGrid":
        lo, hi = DEFAULT_BAND_RANGE_UM
        return cls(np.linspace(lo, hi, band_count))


@dataclass(frozen=True)
class RadianceCube:
    """At-sensor spectral radiance, (height, width, bands) in W·m⁻²·sr⁻¹·µm⁻¹."""

    grid: SpectralGrid
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise ValueError(f"cube data must be 3-D (H, W, B); got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError("cube must have positive height and width")
        if data.shape[2] != self.grid.band_count:
            raise ValueError(
                f"cube has {data.shape[2]} bands but grid declares {self.grid.band_count}"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("cube data must be finite")
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def band_count(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self):
        return self.data.shape

    def pixels(self) -> np.ndarray:
        """Row-major (H*W, B) view of the pixel spectra."""
        return self.data.reshape(-1, self.band_count)


@dataclass(frozen=True)
class PixelMask:
    """Boolean per-pixel mask aligned with a cube's spatial axes."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise ValueError(f"mask must be 2-D; got shape {bits.shape}")
        if bits.shape[0] < 1 or bits.shape[1] < 1:
            raise ValueError("mask must have positive height and width")
        object.__setattr__(self, "bits", bits.astype(bool))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def shape(self):
        return self.bits.shape

    def count(self) -> int:
        return int(self.bits.sum())

    def indices(self) -> np.ndarray:
        """(n, 2) array of (row, col) coordinates in row-major order."""
        rows, cols = np.nonzero(self.bits)
        return np.stack([rows, cols], axis=1)

    def __or__(self, other: "PixelMask") -> "PixelMask":
        return PixelMask(self.bits | as_mask_array(other, self.shape))

    def __and__(self, other: "PixelMask") -> "PixelMask":
        return PixelMask(self.bits & as_mask_array(other, self.shape))

    def __invert__(self) -> "PixelMask":
        return PixelMask(~self.bits)


def mean_spectrum(cube: RadianceCube, mask) -> np.ndarray:
    """Per-band arithmetic mean over the pixels a mask selects."""
    bits = as_mask_array(mask, cube.data.shape[:2])
    if not bits.any():
        raise ValueError("mask selects no pixels")
    return cube.data[bits].mean(axis=0)


# ---------------------------------------------------------------------------
# validation helpers

def check_cube(cube) -> RadianceCube:
    """Coerce/validate a RadianceCube argument."""
    if not isinstance(cube, RadianceCube):
        raise TypeError(f"expected RadianceCube, got {type(cube).__name__}")
    return cube


def as_mask_array(mask, shape) -> np.ndarray:
    """Accept a PixelMask or boolean array and return validated bits."""
    bits = mask.bits if isinstance(mask, PixelMask) else np.asarray(mask)
    if bits.ndim != 2:
        raise ValueError(f"mask must be 2-D; got shape {bits.shape}")
    if tuple(bits.shape) != tuple(shape):
        raise ValueError(f"mask shape {bits.shape} does not match expected {tuple(shape)}")
    return bits.astype(bool)


def check_spectrum(values, band_count=None) -> np.ndarray:
    """Validate a 1-D finite spectrum, optionally of a required length."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"spectrum must be 1-D; got shape {v.shape}")
    if band_count is not None and v.size != band_count:
        raise ValueError(f"spectrum has {v.size} bands, expected {band_count}")
    if not np.all(np.isfinite(v)):
        raise ValueError("spectrum must be finite")
    return v


def check_pixel_matrix(values, band_count=None) -> np.ndarray:
    """Validate a (n, B) finite matrix of pixel spectra."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 2:
        raise ValueError(f"pixel matrix must be 2-D; got shape {v.shape}")
    if band_count is not None and v.shape[1] != band_count:
        raise ValueError(f"pixel matrix has {v.shape[1]} bands, expected {band_count}")
    if not np.all(np.isfinite(v)):
        raise ValueError("pixel matrix must be finite")
    return v
