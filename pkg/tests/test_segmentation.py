import numpy as np
import pytest

from plumebench import (RadianceCube, SpectralGrid, gen_scene, segment_cube,
                        spectral_gradient, watershed)
from plumebench.segmentation import SegmentMap, default_h


def cube_from_bands(data):
    data = np.asarray(data, dtype=np.float64)
    grid = SpectralGrid(np.linspace(8.0, 12.0, data.shape[2]))
    return RadianceCube(grid, data)


# ---------------------------------------------------------------------------
# gradient

def test_gradient_constant_cube_is_zero():
    cube = cube_from_bands(np.full((6, 7, 3), 2.0))
    assert np.all(spectral_gradient(cube) == 0)


def test_gradient_step_image_boundary_columns_only():
    data = np.zeros((5, 8, 2))
    data[:, 4:, :] = 3.0
    grad = spectral_gradient(cube_from_bands(data))
    nonzero_cols = np.unique(np.nonzero(grad)[1])
    assert np.array_equal(nonzero_cols, [3, 4])


def test_gradient_hand_example_three_pixels():
    # 3x1 single-band image (0, 1, 5) -> max-neighbor distances (1, 4, 4)
    data = np.array([0.0, 1.0, 5.0]).reshape(3, 1, 1)
    grad = spectral_gradient(cube_from_bands(data))
    assert np.allclose(grad[:, 0], [1.0, 4.0, 4.0])


# ---------------------------------------------------------------------------
# watershed

def test_constant_gradient_single_segment():
    seg = watershed(np.full((6, 6), 1.5), h=0.0)
    assert seg.segment_count == 1
    assert np.all(seg.labels == 0)


def test_two_basins_split_at_ridge():
    grad = np.zeros((5, 9))
    grad[:, 4] = 5.0
    grad[:, :4] = 1.0
    grad[:, 5:] = 2.0
    seg = watershed(grad, h=1.0)
    assert seg.segment_count == 2
    left = seg.labels[0, 0]
    right = seg.labels[0, 8]
    assert left != right
    assert np.all(seg.labels[:, :4] == left)
    assert np.all(seg.labels[:, 5:] == right)


def test_h_above_all_depths_single_segment():
    grad = np.zeros((5, 9))
    grad[:, 4] = 5.0
    grad[:, 5:] = 2.0
    seg = watershed(grad, h=10.0)
    assert seg.segment_count == 1


def test_segment_count_non_increasing_in_h():
    rng = np.random.default_rng(3)
    grad = rng.random((24, 24))
    counts = [watershed(grad, h).segment_count for h in (0.0, 0.1, 0.3, 0.8)]
    assert all(a >= b for a, b in zip(counts, counts[1:]))


def test_every_pixel_labeled_partition():
    rng = np.random.default_rng(4)
    grad = rng.random((20, 20))
    seg = watershed(grad, h=0.05)
    assert seg.labels.min() >= 0
    assert seg.labels.max() == seg.segment_count - 1
    assert set(np.unique(seg.labels)) == set(range(seg.segment_count))


def test_segments_are_4_connected():
    from scipy import ndimage
    rng = np.random.default_rng(5)
    grad = rng.random((25, 25))
    seg = watershed(grad, h=0.1)
    plus = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    for label in range(seg.segment_count):
        _, count = ndimage.label(seg.labels == label, structure=plus)
        assert count == 1


def test_watershed_deterministic():
    rng = np.random.default_rng(6)
    grad = rng.random((30, 30))
    a = watershed(grad, h=0.1)
    b = watershed(grad, h=0.1)
    assert np.array_equal(a.labels, b.labels)


def test_noiseless_scene_segments_equal_materials():
    cube, truth, _ = gen_scene(24, 24, band_count=8, material_count=4,
                               layout="rectangles", noise_level=0.0, seed=8)
    # flatten the temperature field so materials are exactly piecewise constant
    from plumebench.scene import SurfaceTruth, surface_radiance
    flat_temp = np.empty_like(truth.temperature_K)
    for m in np.unique(truth.material_label):
        sel = truth.material_label == m
        flat_temp[sel] = 290.0 + 4.0 * m
    flat = SurfaceTruth(truth.emissivity, flat_temp, truth.material_label)
    atmos = gen_scene(4, 4, band_count=8, seed=0)[2]
    data = surface_radiance(flat, atmos, cube.grid)
    piecewise = RadianceCube(cube.grid, data)
    seg = segment_cube(piecewise, h=0.0)
    # exact relabeling of the material map: boundaries coincide
    assert seg.segment_count == 4
    for m in np.unique(truth.material_label):
        labels_here = np.unique(seg.labels[truth.material_label == m])
        assert labels_here.size == 1


def test_default_h_is_quartile_of_positive_gradients():
    grad = np.zeros((4, 4))
    grad[0, :] = [0.0, 1.0, 2.0, 3.0]
    positive = grad[grad > 0]
    assert default_h(grad) == np.percentile(positive, 25)
    assert default_h(np.zeros((3, 3))) == 0.0


def test_negative_h_rejected():
    with pytest.raises(ValueError):
        watershed(np.zeros((4, 4)), h=-1.0)


def test_segment_map_validation():
    with pytest.raises(ValueError):
        SegmentMap(np.array([[0, 2]]), 2)  # label out of range
