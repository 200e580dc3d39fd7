import numpy as np
import pytest

from plumebench import (BackgroundEstimate, PixelMask, PlumeTruth, RadianceCube,
                        SpectralGrid, background_mse, fit_whitening,
                        improvement_ratio, make_gas)
from plumebench.identify import SpectralLibrary
from plumebench.metrics import sign_test_pvalue
from plumebench.sweep import (FULL_GRIDS, PlumeCase, evaluate_grid, expand_grid,
                              grid_sweep, make_report)


def synthetic_truth(h=10, w=10, b=3, value=2.0):
    l_off = np.full((h, w, b), value)
    density = np.zeros((h, w))
    return PlumeTruth(density=density, n_c=density, T_p=np.full((h, w), 300.0),
                      l_off_true=l_off, roi_truth=PixelMask(density > 0))


def estimate_at(pixels, backgrounds):
    return BackgroundEstimate(np.asarray(pixels), np.asarray(backgrounds, float),
                              "test")


# ---------------------------------------------------------------------------
# metrics

def test_mse_zero_for_exact_estimate():
    truth = synthetic_truth()
    est = estimate_at([[2, 3], [4, 4]], [[2.0, 2.0, 2.0], [2.0, 2.0, 2.0]])
    assert background_mse(est, truth) == 0.0


def test_mse_single_pixel_single_band():
    truth = synthetic_truth(b=1, value=1.0)
    est = estimate_at([[0, 0]], [[4.0]])
    assert background_mse(est, truth) == 9.0


def test_mse_closed_form_two_material_scene():
    # global mean over two materials vs each material's truth
    h, w, b = 4, 6, 2
    l_off = np.full((h, w, b), 1.0)
    l_off[:, 3:, :] = 5.0  # second material
    truth = PlumeTruth(density=np.zeros((h, w)), n_c=np.zeros((h, w)),
                       T_p=np.full((h, w), 300.0), l_off_true=l_off,
                       roi_truth=PixelMask(np.zeros((h, w), dtype=bool)))
    global_mean = 3.0  # half the pixels at 1, half at 5
    pixels = [[0, 0], [0, 5]]  # one pixel per material
    est = estimate_at(pixels, [[global_mean] * b] * 2)
    # hand computation: squared deviation of 3 from 1 and from 5 is 4 each
    assert background_mse(est, truth) == pytest.approx(4.0)


def test_mse_rejects_out_of_bounds():
    truth = synthetic_truth(h=4, w=4)
    est = estimate_at([[5, 0]], [[0.0, 0.0, 0.0]])
    with pytest.raises(ValueError, match="outside"):
        background_mse(est, truth)


def test_improvement_ratio_global_row_is_one():
    assert improvement_ratio(7.5, 7.5, "bg_mse") == 1.0
    assert improvement_ratio(0.4, 0.4, "id_confidence") == 1.0


def test_improvement_ratio_published_medians():
    # ratio-of-medians view of the reported table values
    assert improvement_ratio(10159.7, 0.5, "bg_mse") == pytest.approx(20319.4)
    assert improvement_ratio(0.382, 0.914, "id_confidence") == pytest.approx(2.3927, rel=1e-4)


def test_improvement_ratio_zero_denominator():
    with pytest.raises(ValueError, match="denominator"):
        improvement_ratio(1.0, 0.0, "bg_mse")
    with pytest.raises(ValueError, match="denominator"):
        improvement_ratio(0.0, 1.0, "id_confidence")


def test_sign_test_pvalue():
    assert sign_test_pvalue(np.ones(20)) < 1e-5
    assert sign_test_pvalue(np.zeros(5)) == 1.0
    assert sign_test_pvalue([1.0, -1.0, 1.0, -1.0]) > 0.3


# ---------------------------------------------------------------------------
# grids

def test_expand_grid_cartesian_product():
    grid = {"a": [1, 2], "b": ["x", "y", "z"]}
    points = expand_grid("m", grid)
    assert len(points) == 6
    assert {"a": 1, "b": "x"} in points


def test_expand_grid_empty_is_single_point():
    assert expand_grid("global", {}) == [{}]


def test_full_kns_grid_has_sixty_points():
    points = expand_grid("kns", FULL_GRIDS["kns"])
    assert len(points) == 60
    assert FULL_GRIDS["kns"]["min_pixels"] == [4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048]


def test_full_grid_ranges():
    assert FULL_GRIDS["pca"]["n_components"] == list(range(1, 128))
    assert FULL_GRIDS["knn"]["n_neighbors"] == list(range(1, 128))
    assert FULL_GRIDS["kmeans"]["n_clusters"] == list(range(2, 129))
    assert FULL_GRIDS["annulus"]["n_dilations"] == list(range(1, 128))


# ---------------------------------------------------------------------------
# sweeps

@pytest.fixture(scope="module")
def sweep_case():
    rng = np.random.default_rng(21)
    h, w, b = 26, 26, 4
    grid = SpectralGrid.default(b)
    l_off = np.full((h, w, b), 3.0)
    l_off[:, 13:, :] = 6.0
    data = l_off + rng.normal(0, 0.01, (h, w, b))
    # plant an exact duplicate of the clean ROI pixel value inside N
    roi_bits = np.zeros((h, w), dtype=bool)
    roi_bits[12:15, 5:8] = True
    truth = PlumeTruth(density=np.zeros((h, w)), n_c=np.zeros((h, w)),
                       T_p=np.full((h, w), 300.0), l_off_true=l_off,
                       roi_truth=PixelMask(np.zeros((h, w), dtype=bool)))
    cube = RadianceCube(grid, data)
    case = PlumeCase(cube=cube, truth=truth, roi=PixelMask(roi_bits),
                     gas_name="SF6", strength=0.5, seed=0, case_id="t")
    model = fit_whitening(cube)
    library = SpectralLibrary.from_gases([make_gas("SF6", grid)])
    return case, model, library


def test_single_point_grid(sweep_case):
    case, model, library = sweep_case
    report = grid_sweep(case, "knn", "bg_mse", {"n_neighbors": [3]}, model,
                        library=library)
    assert report.sensitivity == 0.0
    assert report.best_params == {"n_neighbors": 3}
    assert len(report.grid) == 1


def test_duplicate_pixel_scene_prefers_k_equals_one():
    # N contains exact duplicates of the true background: k=1 is exact
    rng = np.random.default_rng(5)
    h, w, b = 20, 20, 3
    grid = SpectralGrid.default(b)
    l_off = np.full((h, w, b), 2.0)
    data = l_off + rng.normal(0, 0.05, (h, w, b))
    roi_bits = np.zeros((h, w), dtype=bool)
    roi_bits[9:11, 9:11] = True
    data[roi_bits] = 2.0  # ROI pixels exactly at the true background
    data[0, 0] = 2.0      # and one exact duplicate in N
    truth = PlumeTruth(density=np.zeros((h, w)), n_c=np.zeros((h, w)),
                       T_p=np.full((h, w), 300.0), l_off_true=l_off,
                       roi_truth=PixelMask(np.zeros((h, w), dtype=bool)))
    case = PlumeCase(cube=RadianceCube(grid, data), truth=truth,
                     roi=PixelMask(roi_bits), gas_name="SF6", strength=0.5,
                     seed=0, case_id="dup")
    model = fit_whitening(case.cube)
    report = grid_sweep(case, "knn", "bg_mse", {"n_neighbors": [1, 4, 16]}, model)
    assert report.best_params == {"n_neighbors": 1}
    assert report.best_response == 0.0


def test_best_tracks_objective_direction(sweep_case):
    case, model, library = sweep_case
    points = evaluate_grid(case, "pca", {"n_components": [1, 2, 3]}, model,
                           library=library)
    bg = make_report("pca", "bg_mse", points)
    ident = make_report("pca", "id_confidence", points)
    values_bg = [p.bg_mse for p in points]
    values_id = [p.id_confidence for p in points]
    assert bg.best_response == min(values_bg)
    assert ident.best_response == max(values_id)


def test_failing_grid_points_marked_missing(sweep_case):
    case, model, library = sweep_case
    # n_neighbors beyond |N| fails; the rest succeed
    report = grid_sweep(case, "knn", "bg_mse",
                        {"n_neighbors": [1, 2, 10_000]}, model, library=library)
    assert report.missing == 1
    assert len(report.grid) == 3
    failed = [p for p in report.grid if not p.ok]
    assert len(failed) == 1 and "n_neighbors" in failed[0].error


def test_all_points_failing_raises(sweep_case):
    case, model, library = sweep_case
    with pytest.raises(ValueError, match="failed"):
        grid_sweep(case, "knn", "bg_mse", {"n_neighbors": [9999, 10_000]}, model)


def test_sweep_deterministic(sweep_case):
    case, model, library = sweep_case
    grid = {"n_clusters": [2, 3]}
    a = grid_sweep(case, "kmeans", "bg_mse", grid, model, library=library)
    b = grid_sweep(case, "kmeans", "bg_mse", grid, model, library=library)
    assert a.best_response == b.best_response
    assert [p.bg_mse for p in a.grid] == [p.bg_mse for p in b.grid]


def test_pca_best_of_grid_dominates_single_member(sweep_case):
    case, model, library = sweep_case
    report = grid_sweep(case, "pca", "bg_mse", {"n_components": [1, 2, 3]}, model)
    single = grid_sweep(case, "pca", "bg_mse", {"n_components": [1]}, model)
    assert report.best_response <= single.best_response
