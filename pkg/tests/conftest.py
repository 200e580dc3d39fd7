import numpy as np
import pytest

from plumebench import (PixelMask, RadianceCube, SpectralGrid, embed_plume,
                        gaussian_plume, gen_scene, make_gas, make_guardrail)


@pytest.fixture(scope="session")
def small_scene():
    """64x64x16 heterogeneous scene with mild sensor noise."""
    return gen_scene(64, 64, band_count=16, material_count=3, layout="voronoi",
                     noise_level=0.02, seed=1)


@pytest.fixture(scope="session")
def embedded_case(small_scene):
    """A detectable SF6 plume embedded into the small scene, plus masks."""
    cube, truth, atmos = small_scene
    density = gaussian_plume(64, 64, (32, 16), wind_speed=3.0, wind_dir=0.2,
                             meander_sigma=0.15, steps=20, seed=2)
    gas = make_gas("SF6", cube.grid)
    embedded, plume_truth = embed_plume(cube, truth, atmos, gas, density, n_c_max=8.0)
    roi = PixelMask(density >= 0.3)
    guard = make_guardrail(roi)
    return {
        "cube": embedded,
        "clean_cube": cube,
        "truth": truth,
        "atmos": atmos,
        "plume_truth": plume_truth,
        "gas": gas,
        "roi": roi,
        "guard": guard,
        "density": density,
    }


def constant_cube(value, height=8, width=8, bands=4):
    grid = SpectralGrid.default(bands)
    return RadianceCube(grid, np.full((height, width, bands), float(value)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
