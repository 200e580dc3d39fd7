import numpy as np
import pandas as pd
import pytest

from plumebench import PixelMask
from plumebench.report import (aggregate, make_library, oracle_estimate,
                               select_roi)


def case_row(case_id, method, bg_mse, conf, gas="SF6", strength=0.5,
             bg_params='{"n_components": 4}', id_params='{"n_components": 2}'):
    return {
        "case_id": case_id, "gas": gas, "strength": strength, "seed": 0,
        "method": method, "bg_mse": bg_mse, "bg_best_params": bg_params,
        "bg_sensitivity": 0.1, "bg_missing": 0, "id_confidence": conf,
        "id_best_params": id_params, "id_sensitivity": 0.05, "id_missing": 0,
        "roi_size": 25,
    }


def test_aggregate_single_case_medians_equal_values():
    cases = pd.DataFrame([
        case_row("c0", "global", 8.0, 0.4),
        case_row("c0", "pca", 2.0, 0.8),
    ])
    tables = aggregate(cases)
    summary = tables["summary"].set_index("method")
    assert summary.loc["pca", "median_bg_mse"] == 2.0
    assert summary.loc["pca", "median_id_confidence"] == 0.8
    assert summary.loc["pca", "median_improvement_bg_mse"] == 4.0
    assert summary.loc["pca", "median_improvement_id_confidence"] == 2.0


def test_aggregate_global_improvement_is_exactly_one():
    cases = pd.DataFrame([
        case_row("c0", "global", 8.0, 0.4),
        case_row("c1", "global", 3.0, 0.6),
        case_row("c0", "pca", 2.0, 0.8),
        case_row("c1", "pca", 1.0, 0.9),
    ])
    summary = aggregate(cases)["summary"].set_index("method")
    assert summary.loc["global", "median_improvement_bg_mse"] == 1.0
    assert summary.loc["global", "median_improvement_id_confidence"] == 1.0


def test_aggregate_two_case_median():
    cases = pd.DataFrame([
        case_row("c0", "global", 1.0, 0.5),
        case_row("c1", "global", 3.0, 0.7),
    ])
    summary = aggregate(cases)["summary"].set_index("method")
    assert summary.loc["global", "median_bg_mse"] == 2.0
    assert summary.loc["global", "median_id_confidence"] == pytest.approx(0.6)


def test_aggregate_oracle_bg_improvement_blank():
    cases = pd.DataFrame([
        case_row("c0", "global", 8.0, 0.4),
        case_row("c0", "oracle", 0.0, 0.95),
    ])
    summary = aggregate(cases)["summary"].set_index("method")
    assert np.isnan(summary.loc["oracle", "median_improvement_bg_mse"])
    assert summary.loc["oracle", "median_improvement_id_confidence"] == pytest.approx(
        0.95 / 0.4)


def test_aggregate_hyperparameter_modes():
    cases = pd.DataFrame([
        case_row("c0", "pca", 1.0, 0.5, bg_params='{"n_components": 4}'),
        case_row("c1", "pca", 1.0, 0.5, bg_params='{"n_components": 4}'),
        case_row("c2", "pca", 1.0, 0.5, bg_params='{"n_components": 16}'),
        case_row("c0", "global", 2.0, 0.4, bg_params="{}", id_params="{}"),
        case_row("c1", "global", 2.0, 0.4, bg_params="{}", id_params="{}"),
        case_row("c2", "global", 2.0, 0.4, bg_params="{}", id_params="{}"),
    ])
    hyper = aggregate(cases)["hyperparams"]
    row = hyper[(hyper["method"] == "pca") & (hyper["objective"] == "bg_mse")
                & (hyper["param"] == "n_components")].iloc[0]
    assert row["mode"] == 4
    assert row["median"] == 4.0


def test_aggregate_slices_cover_all_cases():
    cases = pd.DataFrame([
        case_row("c0", "global", 1.0, 0.5, gas="SF6", strength=0.2),
        case_row("c1", "global", 2.0, 0.5, gas="SF6", strength=0.8),
        case_row("c2", "global", 3.0, 0.5, gas="N2O", strength=0.2),
        case_row("c3", "global", 4.0, 0.5, gas="N2O", strength=0.8),
    ])
    tables = aggregate(cases)
    assert tables["per_gas"]["n_cases"].sum() == 4
    assert tables["per_strength"]["n_cases"].sum() == 4


# ---------------------------------------------------------------------------
# roi selection and oracle backgrounds

def test_select_roi_prefers_core_overlap():
    scores = np.zeros((30, 30))
    scores[2:6, 2:6] = 0.9      # false alarm blob
    scores[20:26, 20:26] = 0.8  # plume blob
    density = np.zeros((30, 30))
    density[20:26, 20:26] = 1.0
    roi = select_roi(scores, density, far=0.06, min_size=9)
    assert roi.bits[22, 22]
    assert not roi.bits[3, 3]


def test_select_roi_falls_back_to_min_size_one():
    scores = np.zeros((30, 30))
    scores[15, 15] = 1.0  # single pixel, below min_size 9
    density = np.zeros((30, 30))
    density[15, 15] = 1.0
    roi = select_roi(scores, density, far=0.005, min_size=9)
    assert roi.bits[15, 15]
    assert roi.count() >= 1


def test_select_roi_last_resort_uses_best_core_pixel():
    scores = np.zeros((20, 20))  # nothing above any threshold
    density = np.zeros((20, 20))
    density[7, 9] = 1.0
    roi = select_roi(scores, density, far=0.005, min_size=9)
    assert roi.bits[7, 9]
    assert roi.count() == 9  # 3x3 neighborhood


def test_oracle_estimate_matches_truth(embedded_case):
    truth = embedded_case["plume_truth"]
    roi = embedded_case["roi"]
    est = oracle_estimate(truth, roi)
    pixels = roi.indices()
    assert np.array_equal(est.backgrounds,
                          truth.l_off_true[pixels[:, 0], pixels[:, 1]])
    from plumebench import background_mse
    assert background_mse(est, truth) == 0.0


def test_make_library_contains_all_gases_and_none():
    library = make_library(16)
    from plumebench import builtin_gas_names
    assert set(builtin_gas_names()) <= set(library.names)
    assert "None" in library.names
