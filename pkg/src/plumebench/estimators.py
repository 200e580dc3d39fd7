"""Per-pixel background radiance estimation under a detected plume.

Six methods share one estimator API: fit on the background population N
(all pixels outside the ROI and its guardrail), then predict one background
spectrum per ROI pixel. Methods never read guardrail pixel values, and only
the BTS variant of KNS reads ROI pixel values.

All estimators follow the scikit-learn convention: hyperparameters are
constructor arguments (so `get_params` / `set_params` / `clone` work), and
fitted state lives in trailing-underscore attributes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator

from .bts import BtsProblem, solve_bts
from .morphology import dilate, make_guardrail
from .segmentation import SegmentMap
from .types import PixelMask, as_mask_array, check_cube

LINKAGE_KINDS = ("single", "complete", "average")
SIGN_MODES = ("emission", "absorption")


@dataclass(frozen=True)
class BackgroundEstimate:
    """One background spectrum per ROI pixel, row-major pixel order."""

    roi_pixels: np.ndarray   # (n, 2) int (row, col)
    backgrounds: np.ndarray  # (n, B)
    method: str
    hyperparams: dict = field(default_factory=dict)

    def __post_init__(self):
        pixels = np.asarray(self.roi_pixels)
        bg = np.asarray(self.backgrounds, dtype=np.float64)
        if pixels.ndim != 2 or pixels.shape[1] != 2:
            raise ValueError("roi_pixels must be (n, 2)")
        if bg.ndim != 2 or bg.shape[0] != pixels.shape[0]:
            raise ValueError("need exactly one background per ROI pixel")
        if not np.all(np.isfinite(bg)):
            raise ValueError("backgrounds must be finite")
        object.__setattr__(self, "roi_pixels", pixels.astype(np.int64))
        object.__setattr__(self, "backgrounds", bg)

    def __len__(self):
        return self.roi_pixels.shape[0]


def linkage_distance(a, b, kind="single") -> float:
    """Single/complete/average linkage between two sets of spectra.

    min / max / mean of the pairwise Euclidean distances between the rows
    of `a` and the rows of `b`.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("linkage sets must be nonempty")
    d = cdist(a, b)
    if kind == "single":
        return float(d.min())
    if kind == "complete":
        return float(d.max())
    if kind == "average":
        return float(d.mean())
    raise ValueError(f"linkage kind must be one of {LINKAGE_KINDS}")


# ---------------------------------------------------------------------------
# shared fitting plumbing

class BackgroundEstimator(BaseEstimator):
    """Base class handling mask bookkeeping shared by all methods."""

    method = "base"

    def _prepare(self, cube, roi, guard):
        cube = check_cube(cube)
        shape = cube.data.shape[:2]
        roi_bits = as_mask_array(roi, shape)
        if not roi_bits.any():
            raise ValueError("roi must be nonempty")
        if guard is None:
            guard_bits = make_guardrail(PixelMask(roi_bits)).bits
        else:
            guard_bits = as_mask_array(guard, shape)
        n_bits = ~(roi_bits | guard_bits)
        self.cube_ = cube
        self.roi_bits_ = roi_bits
        self.guard_bits_ = guard_bits
        self.n_bits_ = n_bits
        self.roi_pixels_ = np.stack(np.nonzero(roi_bits), axis=1)
        self.roi_spectra_ = cube.data[roi_bits]
        self.n_spectra_ = cube.data[n_bits]
        if self.n_spectra_.shape[0] == 0:
            raise ValueError("background population N is empty")
        return self

    def _wrap(self, backgrounds):
        return BackgroundEstimate(
            roi_pixels=self.roi_pixels_,
            backgrounds=backgrounds,
            method=self.method,
            hyperparams=self.get_params(),
        )

    def fit_predict(self, cube, roi, guard=None, **fit_kwargs):
        return self.fit(cube, roi, guard=guard, **fit_kwargs).predict()


class GlobalBackground(BackgroundEstimator):
    """Mean spectrum of N, assigned to every ROI pixel."""

    method = "global"

    def fit(self, cube, roi, guard=None):
        self._prepare(cube, roi, guard)
        self.mean_ = self.n_spectra_.mean(axis=0)
        return self

    def predict(self):
        n = self.roi_pixels_.shape[0]
        return self._wrap(np.tile(self.mean_, (n, 1)))


class KMeansBackground(BackgroundEstimator):
    """Nearest k-means++ cluster center of N, per ROI pixel."""

    method = "kmeans"

    def __init__(self, n_clusters=8, seed=0, max_iter=100, tol=1e-6):
        self.n_clusters = n_clusters
        self.seed = seed
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, cube, roi, guard=None):
        if self.n_clusters < 2:
            raise ValueError("n_clusters must be >= 2")
        self._prepare(cube, roi, guard)
        if self.n_spectra_.shape[0] < self.n_clusters:
            raise ValueError(
                f"|N| = {self.n_spectra_.shape[0]} is smaller than n_clusters = {self.n_clusters}"
            )
        self.centers_ = _kmeans(self.n_spectra_, self.n_clusters,
                                seed=self.seed, max_iter=self.max_iter, tol=self.tol)
        return self

    def predict(self):
        assign = np.argmin(cdist(self.roi_spectra_, self.centers_), axis=1)
        return self._wrap(self.centers_[assign])


class PCABackground(BackgroundEstimator):
    """Projection of each ROI pixel onto the subspace of N's top components."""

    method = "pca"

    def __init__(self, n_components=8):
        self.n_components = n_components

    def fit(self, cube, roi, guard=None):
        if self.n_components < 1:
            raise ValueError("n_components must be >= 1")
        self._prepare(cube, roi, guard)
        n = self.n_spectra_.shape[0]
        if n <= self.n_components:
            raise ValueError(
                f"|N| = {n} must exceed n_components = {self.n_components}"
            )
        self.mean_ = self.n_spectra_.mean(axis=0)
        centered = self.n_spectra_ - self.mean_
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        self.components_ = vt[: self.n_components]
        return self

    def predict(self):
        centered = self.roi_spectra_ - self.mean_
        projected = centered @ self.components_.T @ self.components_
        return self._wrap(self.mean_ + projected)


class KNNBackground(BackgroundEstimator):
    """Mean of the k spectrally nearest N pixels, per ROI pixel."""

    method = "knn"

    def __init__(self, n_neighbors=8):
        self.n_neighbors = n_neighbors

    def fit(self, cube, roi, guard=None):
        if self.n_neighbors < 1:
            raise ValueError("n_neighbors must be >= 1")
        self._prepare(cube, roi, guard)
        if self.n_spectra_.shape[0] < self.n_neighbors:
            raise ValueError(
                f"|N| = {self.n_spectra_.shape[0]} is smaller than n_neighbors = {self.n_neighbors}"
            )
        return self

    def predict(self):
        idx = nearest_neighbors(self.roi_spectra_, self.n_spectra_, self.n_neighbors)
        return self._wrap(self.n_spectra_[idx].mean(axis=1))


class AnnulusBackground(BackgroundEstimator):
    """Mean of the ring obtained by dilating roi+guardrail k more times."""

    method = "annulus"

    def __init__(self, n_dilations=8):
        self.n_dilations = n_dilations

    def fit(self, cube, roi, guard=None):
        if self.n_dilations < 1:
            raise ValueError("n_dilations must be >= 1")
        self._prepare(cube, roi, guard)
        blocked = self.roi_bits_ | self.guard_bits_
        ring = dilate(PixelMask(blocked), self.n_dilations).bits & ~blocked
        if not ring.any():
            raise ValueError("annulus is empty: guardrail reaches the image edge everywhere")
        self.mean_ = self.cube_.data[ring].mean(axis=0)
        self.annulus_bits_ = ring
        return self

    def predict(self):
        n = self.roi_pixels_.shape[0]
        return self._wrap(np.tile(self.mean_, (n, 1)))


class KNSBackground(BackgroundEstimator):
    """K-nearest segments: accumulate the spectrally closest segments of N.

    For each segment overlapping the ROI, non-ROI segments are ranked by a
    linkage distance between the segment's ROI pixels and each candidate's
    background pixels, and accumulated until at least `min_pixels` background
    pixels are collected. The background is the mean of that collection, or
    the background-target separation solution when `use_bts` is set.
    """

    method = "kns"

    def __init__(self, min_pixels=64, linkage="average", use_bts=False,
                 sign_mode="absorption", bts_max_iter=500, bts_tol=1e-8):
        self.min_pixels = min_pixels
        self.linkage = linkage
        self.use_bts = use_bts
        self.sign_mode = sign_mode
        self.bts_max_iter = bts_max_iter
        self.bts_tol = bts_tol

    def fit(self, cube, roi, guard=None, segments=None):
        if self.min_pixels < 1:
            raise ValueError("min_pixels must be >= 1")
        if self.linkage not in LINKAGE_KINDS:
            raise ValueError(f"linkage must be one of {LINKAGE_KINDS}")
        if self.sign_mode not in SIGN_MODES:
            raise ValueError(f"sign_mode must be one of {SIGN_MODES}")
        if segments is None:
            raise ValueError("KNS requires a SegmentMap via the `segments` fit argument")
        self._prepare(cube, roi, guard)
        labels = segments.labels if isinstance(segments, SegmentMap) else np.asarray(segments)
        if labels.shape != self.roi_bits_.shape:
            raise ValueError("segment map shape does not match the cube")
        self.segment_labels_ = labels
        roi_segs = np.unique(labels[self.roi_bits_])
        n_segs = np.unique(labels[self.n_bits_])
        if n_segs.size == 0:
            raise ValueError("no segment contains background pixels")
        self.roi_segments_ = roi_segs
        self.n_segments_ = n_segs
        return self

    def predict(self):
        labels = self.segment_labels_
        cube_data = self.cube_.data
        n_bits = self.n_bits_
        roi_bits = self.roi_bits_
        backgrounds = np.empty_like(self.roi_spectra_)
        roi_rows, roi_cols = self.roi_pixels_[:, 0], self.roi_pixels_[:, 1]
        roi_labels = labels[roi_rows, roi_cols]

        n_side = {int(s): cube_data[(labels == s) & n_bits] for s in self.n_segments_}
        for seg in self.roi_segments_:
            seg_roi_spectra = cube_data[(labels == seg) & roi_bits]
            ranked = sorted(
                (linkage_distance(seg_roi_spectra, n_side[int(s)], self.linkage), int(s))
                for s in self.n_segments_
            )
            chosen = []
            total = 0
            for _, s in ranked:
                chosen.append(n_side[s])
                total += n_side[s].shape[0]
                if total >= self.min_pixels:
                    break
            collection = np.vstack(chosen)
            if self.use_bts:
                problem = BtsProblem(clean=collection, contaminated=seg_roi_spectra,
                                     sign_mode=self.sign_mode)
                solution = solve_bts(problem, max_iter=self.bts_max_iter, tol=self.bts_tol)
                background = solution.l_off
            else:
                background = collection.mean(axis=0)
            backgrounds[roi_labels == seg] = background
        return self._wrap(backgrounds)


# ---------------------------------------------------------------------------
# numeric kernels

def nearest_neighbors(queries, data, k, block_bytes=64_000_000) -> np.ndarray:
    """Indices of the k nearest data rows per query, ties by row index.

    Distances are computed in query blocks with the same per-pair arithmetic
    as the brute-force oracle, so results agree with it exactly, ties
    included; the stable sort keeps row-major data order on equal distances.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    data = np.asarray(data, dtype=np.float64)
    n_q = queries.shape[0]
    per_row = data.shape[0] * data.shape[1] * 8
    block = max(1, int(block_bytes // max(per_row, 1)))
    out = np.empty((n_q, k), dtype=np.int64)
    for start in range(0, n_q, block):
        chunk = queries[start: start + block]
        d2 = ((chunk[:, None, :] - data[None, :, :]) ** 2).sum(axis=2)
        order = np.argsort(d2, axis=1, kind="stable")
        out[start: start + chunk.shape[0]] = order[:, :k]
    return out


def nearest_neighbors_bruteforce(query, data, k):
    """Reference oracle: per-query python scan with explicit tie-breaking."""
    query = np.asarray(query, dtype=np.float64)
    data = np.asarray(data, dtype=np.float64)
    dists = [float(((query - row) ** 2).sum()) for row in data]
    order = sorted(range(len(dists)), key=lambda i: (dists[i], i))
    return order[:k]


def _kmeans_pp_seed(x, k, rng):
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    first = int(rng.integers(n))
    centers[0] = x[first]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = (first + j) % n  # duplicate-heavy data: deterministic fallback
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = x[idx]
        d2 = np.minimum(d2, ((x - centers[j]) ** 2).sum(axis=1))
    return centers


def _kmeans(x, k, seed=0, max_iter=100, tol=1e-6):
    """Lloyd iterations from a k-means++ seeding; deterministic per seed."""
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_seed(x, k, rng)
    for _ in range(max_iter):
        d2 = cdist(x, centers, metric="sqeuclidean")
        assign = np.argmin(d2, axis=1)
        new_centers = centers.copy()
        for j in range(k):
            members = x[assign == j]
            if members.shape[0] > 0:
                new_centers[j] = members.mean(axis=0)
            else:
                # re-seed an empty cluster at the point farthest from its center
                farthest = int(np.argmax(d2[np.arange(x.shape[0]), assign]))
                new_centers[j] = x[farthest]
        shift = np.linalg.norm(new_centers - centers)
        scale = max(np.linalg.norm(centers), 1e-300)
        centers = new_centers
        if shift <= tol * scale:
            break
    return centers


# ---------------------------------------------------------------------------
# functional facade

_METHODS = {
    "global": GlobalBackground,
    "kmeans": KMeansBackground,
    "pca": PCABackground,
    "knn": KNNBackground,
    "annulus": AnnulusBackground,
    "kns": KNSBackground,
}


def method_names():
    return list(_METHODS)


def make_estimator(method: str, **hyperparams) -> BackgroundEstimator:
    if method not in _METHODS:
        raise ValueError(f"unknown method {method!r}; available: {method_names()}")
    return _METHODS[method](**hyperparams)


def estimate_background(cube, roi, method="global", guard=None, segments=None,
                        **hyperparams) -> BackgroundEstimate:
    """One-call background estimation for a ROI."""
    estimator = make_estimator(method, **hyperparams)
    if method == "kns":
        return estimator.fit_predict(cube, roi, guard=guard, segments=segments)
    return estimator.fit_predict(cube, roi, guard=guard)
