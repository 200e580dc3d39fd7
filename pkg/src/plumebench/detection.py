"""ACE detection scoring and ROI construction."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from .morphology import SQUARE_3X3
from .types import PixelMask, RadianceCube, check_spectrum
from .whitening import WhiteningTransform

DEFAULT_FAR = 0.005
DEFAULT_MIN_ROI_SIZE = 9


def ace_score(model: WhiteningTransform, spectrum, target) -> float:
    """Squared cosine between the whitened spectrum and whitened target.

    The spectrum is centered on the global mean before whitening; the target
    is whitened without centering. A zero whitened spectrum scores 0.
    """
    spectrum = check_spectrum(spectrum)
    target = check_spectrum(target, spectrum.size)
    lt = model.transform(spectrum)
    st = model.inv_sqrt_ @ target
    ss = st @ st
    if ss <= 0:
        raise ValueError("whitened target must be nonzero")
    ll = lt @ lt
    if ll <= 0:
        return 0.0
    return float((st @ lt) ** 2 / (ss * ll))


def ace_map(model: WhiteningTransform, cube: RadianceCube, target) -> np.ndarray:
    """Per-pixel ACE scores for a cube, (H, W)."""
    target = check_spectrum(target, cube.band_count)
    st = model.inv_sqrt_ @ target
    ss = st @ st
    if ss <= 0:
        raise ValueError("whitened target must be nonzero")
    lt = model.transform(cube.pixels())
    ll = np.einsum("ij,ij->i", lt, lt)
    num = (lt @ st) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        scores = np.where(ll > 0, num / (ss * ll), 0.0)
    return scores.reshape(cube.height, cube.width)


def far_threshold(scores, far, background=None) -> float:
    """(1 - far) quantile of scores over background pixels (default: all)."""
    scores = np.asarray(scores, dtype=np.float64)
    values = scores[np.asarray(background, dtype=bool)] if background is not None else scores.ravel()
    if values.size == 0:
        raise ValueError("no pixels available for thresholding")
    return float(np.quantile(values, 1.0 - far))


def build_rois(score_map, far=DEFAULT_FAR, min_size=DEFAULT_MIN_ROI_SIZE,
               background=None):
    """Threshold a score map and merge nearby components into ROIs.

    Pixels strictly above the (1 - far) quantile threshold are labeled with
    8-connectivity; components smaller than `min_size` are dropped, and
    components whose one-step dilations intersect are merged. Returns a list
    of PixelMask, ordered by each ROI's first row-major pixel. An empty list
    means nothing exceeded the threshold.
    """
    if not 0 < far < 1:
        raise ValueError("far must lie in (0, 1)")
    scores = np.asarray(score_map, dtype=np.float64)
    threshold = far_threshold(scores, far, background=background)
    above = scores > threshold
    if not above.any():
        return []
    labels, count = ndimage.label(above, structure=SQUARE_3X3)
    sizes = ndimage.sum_labels(above, labels, index=np.arange(1, count + 1))
    keep = [i + 1 for i in range(count) if sizes[i] >= min_size]
    if not keep:
        return []

    dilated = {i: ndimage.binary_dilation(labels == i, structure=SQUARE_3X3) for i in keep}
    parent = {i: i for i in keep}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a_idx, a in enumerate(keep):
        for b in keep[a_idx + 1:]:
            if (dilated[a] & dilated[b]).any():
                parent[find(b)] = find(a)

    groups = {}
    for i in keep:
        groups.setdefault(find(i), []).append(i)
    rois = []
    for members in groups.values():
        merged = np.isin(labels, members)
        rois.append(PixelMask(merged))
    rois.sort(key=lambda m: tuple(m.indices()[0]))
    return rois
