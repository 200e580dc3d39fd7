"""Evaluation metrics for background estimates and identification."""
from __future__ import annotations

import numpy as np

from .estimators import BackgroundEstimate
from .plume import PlumeTruth

OBJECTIVES = ("bg_mse", "id_confidence")


def background_mse(estimate: BackgroundEstimate, truth: PlumeTruth) -> float:
    """Mean squared error of the estimate against the true background.

    Averaged over the estimate's ROI pixels and all bands.
    """
    h, w = truth.shape
    rows, cols = estimate.roi_pixels[:, 0], estimate.roi_pixels[:, 1]
    if rows.size == 0:
        raise ValueError("estimate covers no pixels")
    if rows.min() < 0 or rows.max() >= h or cols.min() < 0 or cols.max() >= w:
        raise ValueError("estimate pixels fall outside the truth coverage")
    if truth.l_off_true.shape[2] != estimate.backgrounds.shape[1]:
        raise ValueError("band counts of estimate and truth disagree")
    reference = truth.l_off_true[rows, cols]
    return float(((estimate.backgrounds - reference) ** 2).mean())


def improvement_ratio(global_value, method_value, objective) -> float:
    """How much better a method is than Global; > 1 means better.

    bg_mse compares global/method (lower MSE is better); id_confidence
    compares method/global (higher confidence is better).
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}")
    if objective == "bg_mse":
        if method_value == 0:
            raise ValueError("zero denominator: method MSE is 0")
        return float(global_value / method_value)
    if global_value == 0:
        raise ValueError("zero denominator: global confidence is 0")
    return float(method_value / global_value)


def sign_test_pvalue(differences) -> float:
    """One-sided sign test that paired differences are positive.

    Zero differences are discarded; returns the binomial tail probability of
    seeing at least the observed number of positive signs under p = 1/2.
    """
    from scipy.stats import binomtest

    diff = np.asarray(differences, dtype=np.float64)
    nonzero = diff[diff != 0]
    if nonzero.size == 0:
        return 1.0
    wins = int((nonzero > 0).sum())
    return float(binomtest(wins, nonzero.size, 0.5, alternative="greater").pvalue)
