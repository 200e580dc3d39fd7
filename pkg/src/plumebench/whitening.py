"""Global background statistics and the whitening transform.

The whitening transform maps a spectrum L to inv_sqrt @ (L - background),
where inv_sqrt is the symmetric inverse square root of the regularized
global covariance. The background defaults to the global mean; per-pixel
background estimates are substituted when a method provides them.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .types import PixelMask, RadianceCube, check_pixel_matrix, check_spectrum

REG_SCALE = 1e-6
REG_FLOOR = 1e-12


class WhiteningTransform(BaseEstimator):
    """Sample mean/covariance of background pixels and their inverse square root.

    Fitted attributes
    -----------------
    mu_ : (B,) sample mean
    sigma_ : (B, B) sample covariance (ddof=1)
    inv_sqrt_ : (B, B) symmetric inverse square root of (sigma_ + eps*I)
    reg_epsilon_ : the ridge actually applied
    """

    def __init__(self, reg_scale=REG_SCALE):
        self.reg_scale = reg_scale

    def fit(self, X):
        X = check_pixel_matrix(X)
        n, b = X.shape
        if n < b + 1:
            raise ValueError(
                f"rank deficiency: need at least {b + 1} pixels to fit {b} bands, got {n}"
            )
        self.mu_ = X.mean(axis=0)
        centered = X - self.mu_
        self.sigma_ = centered.T @ centered / (n - 1)
        eps = max(self.reg_scale * float(np.trace(self.sigma_)) / b, REG_FLOOR)
        eigvals, eigvecs = np.linalg.eigh(self.sigma_ + eps * np.eye(b))
        eigvals = np.maximum(eigvals, eps)
        self.inv_sqrt_ = (eigvecs / np.sqrt(eigvals)) @ eigvecs.T
        self.reg_epsilon_ = eps
        return self

    def transform(self, X, backgrounds=None):
        """Whiten spectra: inv_sqrt @ (X - background), row-wise.

        `backgrounds` may be omitted (global mean), a single spectrum, or one
        spectrum per row of X.
        """
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        rows = np.atleast_2d(X)
        if backgrounds is None:
            bg = self.mu_
        else:
            bg = np.asarray(backgrounds, dtype=np.float64)
        out = (rows - bg) @ self.inv_sqrt_  # inv_sqrt_ is symmetric
        return out[0] if single else out


def fit_whitening(cube: RadianceCube, exclude=None) -> WhiteningTransform:
    """Fit global statistics on all cube pixels, minus an optional exclude mask."""
    pixels = cube.pixels()
    if exclude is not None:
        bits = exclude.bits if isinstance(exclude, PixelMask) else np.asarray(exclude, dtype=bool)
        if bits.shape != cube.data.shape[:2]:
            raise ValueError("exclude mask shape does not match the cube")
        pixels = pixels[~bits.reshape(-1)]
    return WhiteningTransform().fit(pixels)


def whiten(model: WhiteningTransform, spectrum, background=None):
    """Whiten one spectrum against a background (defaults to the global mean)."""
    spectrum = check_spectrum(spectrum)
    if background is not None:
        background = check_spectrum(background, spectrum.size)
    return model.transform(spectrum, backgrounds=background)
