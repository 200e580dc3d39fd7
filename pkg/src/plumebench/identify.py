"""Whitened ROI superpixels and the surrogate gas identifier.

The identifier shares the input/output contract of a trained classifier:
a standardized whitened superpixel goes in, per-library-entry confidences
summing to one come out. Responses are cosine similarities against the
standardized whitened library signatures, with a fixed zero response for
the "None" (no gas) entry, converted to confidences by a scaled softmax.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .estimators import BackgroundEstimate
from .types import RadianceCube, check_spectrum
from .whitening import WhiteningTransform

NONE_ENTRY = "None"
DEFAULT_BETA = 10.0
STD_FLOOR = 1e-12


@dataclass(frozen=True)
class SpectralLibrary:
    """Named absorption signatures plus a mandatory no-gas entry."""

    names: tuple
    absorptions: np.ndarray          # (n_entries, B); zeros for the None entry
    temperatures: tuple = ()

    def __post_init__(self):
        names = tuple(self.names)
        absorptions = np.asarray(self.absorptions, dtype=np.float64)
        if len(names) != absorptions.shape[0]:
            raise ValueError("one absorption row per name is required")
        if len(set(names)) != len(names):
            raise ValueError("library names must be unique")
        if len(names) < 2 or NONE_ENTRY not in names:
            raise ValueError(f"library needs >= 2 entries including {NONE_ENTRY!r}")
        temps = tuple(self.temperatures) if self.temperatures else (None,) * len(names)
        if len(temps) != len(names):
            raise ValueError("one temperature (or None) per entry is required")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "absorptions", absorptions)
        object.__setattr__(self, "temperatures", temps)

    def __len__(self):
        return len(self.names)

    def whitened_refs(self, model: WhiteningTransform) -> np.ndarray:
        """inv_sqrt @ alpha per entry (the None row stays zero).

        Cached per model; the cache holds the model so its identity stays
        valid for the cache's lifetime.
        """
        cache = getattr(self, "_ref_cache", None)
        if cache is None:
            cache = {}
            object.__setattr__(self, "_ref_cache", cache)
        key = id(model)
        if key not in cache:
            if len(cache) >= 4:
                cache.clear()
            cache[key] = (model, self.absorptions @ model.inv_sqrt_)
        return cache[key][1]

    @classmethod
    def from_gases(cls, gases) -> "SpectralLibrary":
        names = [g.name for g in gases] + [NONE_ENTRY]
        band_count = gases[0].absorption.size
        rows = [g.absorption for g in gases] + [np.zeros(band_count)]
        return cls(tuple(names), np.vstack(rows))

    def to_csv(self, path):
        band_count = self.absorptions.shape[1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["name"] + [f"b{i}" for i in range(band_count)])
            for name, row in zip(self.names, self.absorptions):
                writer.writerow([name] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "SpectralLibrary":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if not header or header[0] != "name":
                raise ValueError(f"{path}: library CSV must start with a 'name' column")
            names, rows = [], []
            for record in reader:
                names.append(record[0])
                rows.append([float(v) for v in record[1:]])
        return cls(tuple(names), np.asarray(rows))


@dataclass(frozen=True)
class IdResult:
    """Per-entry identification confidences, a probability vector."""

    names: tuple
    confidences: np.ndarray
    top: str
    method: str = ""
    hyperparams: dict = field(default_factory=dict)

    def __post_init__(self):
        conf = np.asarray(self.confidences, dtype=np.float64)
        if conf.shape != (len(self.names),):
            raise ValueError("one confidence per entry is required")
        if np.any(conf < 0) or abs(conf.sum() - 1.0) > 1e-9:
            raise ValueError("confidences must be a probability vector")
        object.__setattr__(self, "confidences", conf)

    def confidence(self, name: str) -> float:
        return float(self.confidences[self.names.index(name)])

    def to_json(self) -> str:
        order = np.argsort(-self.confidences, kind="stable")
        return json.dumps({
            "method": self.method,
            "hyperparams": self.hyperparams,
            "top": self.top,
            "confidences": [
                {"name": self.names[i], "confidence": float(self.confidences[i])}
                for i in order
            ],
        }, indent=2)


def whitened_superpixel(model: WhiteningTransform, cube: RadianceCube,
                        estimate: BackgroundEstimate) -> np.ndarray:
    """Mean of the individually whitened ROI pixels against their backgrounds."""
    if len(estimate) == 0:
        raise ValueError("estimate covers no ROI pixels")
    rows, cols = estimate.roi_pixels[:, 0], estimate.roi_pixels[:, 1]
    spectra = cube.data[rows, cols]
    whitened = model.transform(spectra, backgrounds=estimate.backgrounds)
    return whitened.mean(axis=0)


def standardize(spectrum) -> np.ndarray:
    """Z-score a spectrum across bands, with a floored standard deviation."""
    spectrum = check_spectrum(spectrum)
    if spectrum.size < 2:
        raise ValueError("standardize needs at least 2 bands")
    centered = spectrum - spectrum.mean()
    return centered / max(float(centered.std()), STD_FLOOR)


def _cosine(a, b) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na <= 0 or nb <= 0:
        return 0.0
    return float(a @ b / (na * nb))


def identify(superpixel, library: SpectralLibrary, model: WhiteningTransform,
             beta=DEFAULT_BETA, sign_mode="absorption", method="",
             hyperparams=None) -> IdResult:
    """Score a whitened superpixel against the library.

    In absorption mode the library references are negated before matching,
    since a cooler-than-ambient plume subtracts signal. The None entry keeps
    a fixed response of zero; ties at the top go to None.
    """
    superpixel = check_spectrum(superpixel, library.absorptions.shape[1])
    refs = library.whitened_refs(model)
    sp = standardize(superpixel)
    sign = -1.0 if sign_mode == "absorption" else 1.0
    responses = np.zeros(len(library))
    for i, name in enumerate(library.names):
        if name == NONE_ENTRY:
            continue
        responses[i] = _cosine(sp, sign * standardize(refs[i]))

    scaled = beta * responses
    scaled -= scaled.max()
    weights = np.exp(scaled)
    confidences = weights / weights.sum()

    best = float(confidences.max())
    top_candidates = [n for n, c in zip(library.names, confidences) if c == best]
    top = NONE_ENTRY if NONE_ENTRY in top_candidates else top_candidates[0]
    return IdResult(names=library.names, confidences=confidences, top=top,
                    method=method, hyperparams=dict(hyperparams or {}))
