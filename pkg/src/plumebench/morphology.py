"""Binary morphology on pixel masks.

All dilation uses the 3x3 square structuring element (8-connectivity), with
no wraparound at image borders.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from .types import PixelMask, as_mask_array

SQUARE_3X3 = np.ones((3, 3), dtype=bool)

GUARDRAIL_DILATIONS = 4


def dilate(mask, iterations: int) -> PixelMask:
    """Dilate a mask `iterations` times with the 3x3 square element."""
    bits = mask.bits if isinstance(mask, PixelMask) else np.asarray(mask, dtype=bool)
    if iterations < 0:
        raise ValueError("iterations must be non-negative")
    if iterations == 0 or not bits.any() or bits.all():
        return PixelMask(bits.copy())
    out = ndimage.binary_dilation(bits, structure=SQUARE_3X3, iterations=iterations)
    return PixelMask(out)


def make_guardrail(roi) -> PixelMask:
    """Ring of pixels obtained by dilating the ROI four times, minus the ROI.

    The background-fitting population N is then the complement of
    roi | guardrail.
    """
    roi_mask = roi if isinstance(roi, PixelMask) else PixelMask(np.asarray(roi, dtype=bool))
    if not roi_mask.bits.any():
        raise ValueError("roi must be nonempty")
    if roi_mask.bits.all():
        raise ValueError("no background pixels: roi covers the entire image")
    grown = dilate(roi_mask, GUARDRAIL_DILATIONS)
    return PixelMask(grown.bits & ~roi_mask.bits)


def background_mask(roi, guard=None, shape=None) -> PixelMask:
    """Pixels outside roi and its guardrail; guard defaults to make_guardrail(roi)."""
    roi_bits = roi.bits if isinstance(roi, PixelMask) else np.asarray(roi, dtype=bool)
    if guard is None:
        guard_bits = make_guardrail(PixelMask(roi_bits)).bits
    else:
        guard_bits = as_mask_array(guard, roi_bits.shape)
    return PixelMask(~(roi_bits | guard_bits))


def connected_components(mask, connectivity: int = 8):
    """Label connected components; returns (labels array, count)."""
    bits = mask.bits if isinstance(mask, PixelMask) else np.asarray(mask, dtype=bool)
    structure = SQUARE_3X3 if connectivity == 8 else ndimage.generate_binary_structure(2, 1)
    labels, count = ndimage.label(bits, structure=structure)
    return labels, int(count)
