import numpy as np
import pytest

from arraymusic.scene import (
    FrequencySet,
    ImagingGrid,
    Scatterer,
    Scene,
    linear_array,
)


@pytest.fixture
def small_scene():
    """Three well-separated on-grid scatterers, single frequency, N = 21."""
    grid = ImagingGrid(
        origin=np.array([-20.0, 0.0, 80.0]),
        cross_extent=40.0,
        range_extent=40.0,
        cross_count=21,
        range_count=21,
    )
    pts = grid.points()
    cells = [(3, 4), (15, 8), (8, 16)]
    scatterers = tuple(
        Scatterer(pts[grid.flat_index(ix, iz)], alpha)
        for (ix, iz), alpha in zip(cells, (1.0 + 0.5j, -0.8 + 0.2j, 0.6 - 1.1j))
    )
    return Scene(
        array=linear_array(21, 60.0),
        scatterers=scatterers,
        grid=grid,
        frequencies=FrequencySet.centered(1),
    )


@pytest.fixture
def multifreq_scene():
    """Paraxial-regime scene (a/L = 0.05) with 12 frequencies, N = 41."""
    grid = ImagingGrid(
        origin=np.array([-50.0, 0.0, 9950.0]),
        cross_extent=100.0,
        range_extent=100.0,
        cross_count=26,
        range_count=26,
    )
    pts = grid.points()
    cells = [(4, 5), (20, 10), (10, 20)]
    scatterers = tuple(
        Scatterer(pts[grid.flat_index(ix, iz)], alpha)
        for (ix, iz), alpha in zip(cells, (1.0, 0.9 + 0.3j, -1.2j))
    )
    return Scene(
        array=linear_array(41, 500.0),
        scatterers=scatterers,
        grid=grid,
        frequencies=FrequencySet.centered(12, 0.05),
    )
