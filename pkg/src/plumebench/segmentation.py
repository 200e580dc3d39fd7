"""Unsupervised watershed segmentation of a hyperspectral cube.

The gradient at a pixel is the largest spectral Euclidean distance to any of
its 4-neighbors. Markers are the regional minima that survive h-minima
suppression, and basins grow by a priority flood in ascending gradient
order with (row, col) lexicographic tie-breaking, so the result is fully
deterministic.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from skimage.morphology import h_minima, local_minima

from .types import RadianceCube

_PLUS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
H_MINIMA_PERCENTILE = 25.0


@dataclass(frozen=True)
class SegmentMap:
    """Per-pixel segment labels in [0, segment_count), each segment 4-connected."""

    labels: np.ndarray
    segment_count: int

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise ValueError("labels must be 2-D")
        if self.segment_count < 1:
            raise ValueError("segment_count must be positive")
        if labels.min() < 0 or labels.max() >= self.segment_count:
            raise ValueError("labels must lie in [0, segment_count)")
        object.__setattr__(self, "labels", labels.astype(np.int64))


def spectral_gradient(cube: RadianceCube) -> np.ndarray:
    """Max spectral distance to each 4-neighbor, per pixel (H, W)."""
    data = cube.data
    h, w, _ = data.shape
    grad = np.zeros((h, w))
    down = np.sqrt(((data[1:, :, :] - data[:-1, :, :]) ** 2).sum(axis=2))
    right = np.sqrt(((data[:, 1:, :] - data[:, :-1, :]) ** 2).sum(axis=2))
    if h > 1:
        grad[:-1, :] = np.maximum(grad[:-1, :], down)
        grad[1:, :] = np.maximum(grad[1:, :], down)
    if w > 1:
        grad[:, :-1] = np.maximum(grad[:, :-1], right)
        grad[:, 1:] = np.maximum(grad[:, 1:], right)
    return grad


def default_h(gradient) -> float:
    """25th percentile of the positive gradient values (0 if none)."""
    positive = np.asarray(gradient)[np.asarray(gradient) > 0]
    if positive.size == 0:
        return 0.0
    return float(np.percentile(positive, H_MINIMA_PERCENTILE))


def _markers(gradient, h):
    if h > 0:
        minima = h_minima(gradient, h, footprint=_PLUS)
    else:
        minima = local_minima(gradient, connectivity=1)
    labels, count = ndimage.label(minima, structure=_PLUS)
    return labels, count


def watershed(gradient, h=0.0) -> SegmentMap:
    """Flood the gradient map from h-minima markers; every pixel gets a label."""
    gradient = np.asarray(gradient, dtype=np.float64)
    if gradient.ndim != 2:
        raise ValueError("gradient map must be 2-D")
    if h < 0:
        raise ValueError("h must be non-negative")
    rows, cols = gradient.shape
    markers, count = _markers(gradient, h)
    if count == 0:
        # constant map: a single basin covering the image
        return SegmentMap(np.zeros_like(gradient, dtype=np.int64), 1)

    labels = np.full((rows, cols), -1, dtype=np.int64)
    heap = []
    counter = 0
    it = np.nditer(markers, flags=["multi_index"])
    for value in it:
        if value != 0:
            r, c = it.multi_index
            heapq.heappush(heap, (gradient[r, c], r, c, counter, int(value) - 1))
            counter += 1

    while heap:
        _, r, c, _, label = heapq.heappop(heap)
        if labels[r, c] != -1:
            continue
        labels[r, c] = label
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nr < rows and 0 <= nc < cols and labels[nr, nc] == -1:
                heapq.heappush(heap, (gradient[nr, nc], nr, nc, counter, label))
                counter += 1

    used = np.unique(labels)
    remap = np.full(count, -1, dtype=np.int64)
    remap[used] = np.arange(used.size)
    return SegmentMap(remap[labels], int(used.size))


def segment_cube(cube: RadianceCube, h=None) -> SegmentMap:
    """Gradient + watershed in one step; h defaults to the 25th percentile rule."""
    gradient = spectral_gradient(cube)
    if h is None:
        h = default_h(gradient)
    return watershed(gradient, h)
