"""Blackbody spectral radiance."""
from __future__ import annotations

import numpy as np
from scipy import constants

# 2hc^2 in W·m^2 and hc/k in m·K
_C1 = 2.0 * constants.h * constants.c**2
_C2 = constants.h * constants.c / constants.k


def planck_radiance(wavelength_um, temperature_K):
    """Planck spectral radiance in W·m⁻²·sr⁻¹·µm⁻¹.

    Accepts scalars or arrays (broadcasting). Wavelengths are in micrometers,
    temperatures in kelvin; both must be strictly positive.
    """
    wl = np.asarray(wavelength_um, dtype=np.float64)
    t = np.asarray(temperature_K, dtype=np.float64)
    if np.any(wl <= 0) or not np.all(np.isfinite(wl)):
        raise ValueError("wavelength must be positive and finite")
    if np.any(t <= 0) or not np.all(np.isfinite(t)):
        raise ValueError("temperature must be positive and finite")
    lam = wl * 1e-6
    with np.errstate(over="ignore"):
        exponent = _C2 / (lam * t)
        # expm1 keeps precision for small exponents; overflow maps to +inf -> 0
        radiance_per_m = _C1 / lam**5 / np.expm1(exponent)
    out = radiance_per_m * 1e-6  # per meter of wavelength -> per micrometer
    if np.isscalar(wavelength_um) and np.isscalar(temperature_K):
        return float(out)
    return out
