import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arraymusic.errors import ScattererOutsideWindowError, TwoScatterersOneCellError
from arraymusic.scene import (
    ArrayGeometry,
    DelayScene,
    FrequencySet,
    ImagingGrid,
    ReflectivityVector,
    Scatterer,
    Scene,
    discretize_delays,
    discretize_reflectivity,
    grid_points,
    linear_array,
    random_delay_scene,
    random_scene,
)


def make_grid(cross_extent, range_extent, nx, nz, origin=(0.0, 0.0, 100.0)):
    return ImagingGrid(np.array(origin), cross_extent, range_extent, nx, nz)


class TestImagingGrid:
    def test_degenerate_grid_is_its_origin(self):
        grid = make_grid(0.0, 0.0, 1, 1)
        assert grid_points(grid).shape == (1, 3)
        np.testing.assert_array_equal(grid_points(grid)[0], grid.origin)

    def test_51_points_over_100_gives_mesh_size_two(self):
        grid = make_grid(100.0, 100.0, 51, 51)
        assert grid.cross_spacing == pytest.approx(2.0)
        assert grid.range_spacing == pytest.approx(2.0)

    def test_3x3_grid_extent_4_spacing_2(self):
        grid = make_grid(4.0, 4.0, 3, 3)
        pts = grid_points(grid)
        assert pts.shape == (9, 3)
        np.testing.assert_allclose(np.diff(np.unique(pts[:, 0])), 2.0)
        np.testing.assert_allclose(np.diff(np.unique(pts[:, 2])), 2.0)

    def test_row_major_cross_fastest(self):
        grid = make_grid(2.0, 2.0, 3, 2)
        pts = grid_points(grid)
        # first three points share z, sweep x
        assert np.all(pts[:3, 2] == pts[0, 2])
        assert np.all(np.diff(pts[:3, 0]) > 0)
        assert pts[3, 2] > pts[0, 2]

    @given(
        nx=st.integers(min_value=2, max_value=60),
        extent=st.floats(min_value=1e-3, max_value=1e4,
                         allow_nan=False, allow_infinity=False),
    )
    @settings(max_examples=60, deadline=None)
    def test_spacing_times_count_is_extent(self, nx, extent):
        grid = make_grid(extent, 0.0, nx, 1)
        assert abs(grid.cross_spacing * (nx - 1) - extent) <= 1e-12 * extent

    def test_paraxial_accessors(self):
        grid = make_grid(10.0, 20.0, 11, 21, origin=(-5.0, 0.0, 90.0))
        assert grid.standoff == pytest.approx(100.0)
        eta = grid.range_offsets()
        assert eta.min() == pytest.approx(-10.0)
        assert eta.max() == pytest.approx(10.0)
        assert grid.cross_range_parts().shape == (grid.point_count, 2)


class TestArrayGeometry:
    def test_linear_array_centered(self):
        arr = linear_array(5, 8.0)
        assert arr.count == 5
        assert arr.positions[:, 0].min() == pytest.approx(-4.0)
        assert arr.positions[:, 0].max() == pytest.approx(4.0)
        np.testing.assert_array_equal(arr.positions[:, 2], 0.0)

    def test_rejects_out_of_plane(self):
        with pytest.raises(ValueError):
            ArrayGeometry(np.array([[0.0, 0.0, 1.0]]))

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            ArrayGeometry(np.zeros((2, 3)))


class TestFrequencySet:
    def test_central_wavenumber_is_two_pi(self):
        freqs = FrequencySet.centered(12, 0.05)
        assert freqs.kappa_central == pytest.approx(2.0 * np.pi)
        assert freqs.count == 12
        assert freqs.bandwidth == pytest.approx(0.05 * 2.0 * np.pi)

    def test_equally_spaced_flag(self):
        freqs = FrequencySet.centered(9, 0.08)
        assert freqs.equally_spaced

    def test_perturbed_frequency_breaks_flag(self):
        base = FrequencySet.centered(9, 0.08).omegas.copy()
        base[4] *= 1.0 + 1e-5
        assert not FrequencySet(base).equally_spaced

    def test_single_frequency(self):
        freqs = FrequencySet.centered(1)
        assert freqs.equally_spaced
        assert freqs.bandwidth == 0.0


class TestDiscretize:
    def test_on_grid_scatterer_lands_exactly(self, small_scene):
        rho = discretize_reflectivity(small_scene)
        pts = small_scene.grid.points()
        assert rho.sparsity == 3
        for scat in small_scene.scatterers:
            k = int(np.argmin(np.linalg.norm(pts - scat.position, axis=1)))
            assert rho.values[k] == scat.reflectivity
            np.testing.assert_array_equal(pts[k], scat.position)

    def test_half_cell_displacement_breaks_tie_to_lowest_index(self):
        grid = make_grid(10.0, 10.0, 11, 11)
        pts = grid_points(grid)
        base = grid.flat_index(4, 6)
        shifted = pts[base] + np.array([0.5, 0.0, 0.5])
        scene = Scene(linear_array(3, 4.0), (Scatterer(shifted, 1.0),),
                      grid, FrequencySet.centered(1))
        rho = discretize_reflectivity(scene)
        # four grid points are equidistant; the lowest flat index wins
        assert rho.support == (base,)

    def test_outside_window_rejected(self):
        grid = make_grid(10.0, 10.0, 11, 11)
        scene = Scene(
            linear_array(3, 4.0),
            (Scatterer(np.array([30.0, 0.0, 105.0]), 1.0),),
            grid, FrequencySet.centered(1),
        )
        with pytest.raises(ScattererOutsideWindowError):
            discretize_reflectivity(scene)

    def test_shared_cell_rejected(self):
        grid = make_grid(10.0, 10.0, 11, 11)
        pts = grid_points(grid)
        k = grid.flat_index(5, 5)
        scene = Scene(
            linear_array(3, 4.0),
            (Scatterer(pts[k], 1.0), Scatterer(pts[k] + 0.1, 2.0)),
            grid, FrequencySet.centered(1),
        )
        with pytest.raises(TwoScatterersOneCellError):
            discretize_reflectivity(scene)

    def test_round_trip_positions(self):
        scene = random_scene(
            transducers=5, aperture=10.0, standoff=100.0,
            iw_cross=20.0, iw_range=20.0, grid_cross=11, grid_range=11,
            num_scatterers=4, seed=2,
        )
        rho = discretize_reflectivity(scene)
        pts = scene.grid.points()
        recovered = {tuple(pts[k]) for k in rho.support}
        truth = {tuple(p) for p in scene.scatterer_positions()}
        assert recovered == truth


class TestReflectivityVector:
    def test_support_and_floor(self):
        rho = ReflectivityVector(np.array([0, 2.0 + 0j, 0, -0.5j, 0]))
        assert rho.support == (1, 3)
        assert rho.sparsity == 2
        assert rho.floor_magnitude == pytest.approx(0.5)

    def test_empty(self):
        rho = ReflectivityVector(np.zeros(4, complex))
        assert rho.support == ()
        assert rho.floor_magnitude == 0.0


class TestDelayScene:
    def test_discretize_on_grid(self):
        scene = random_delay_scene(candidate_count=41, span=80.0, offset=100.0,
                                   num_scatterers=4, seed=1)
        rho = discretize_delays(scene)
        assert rho.sparsity == 4
        np.testing.assert_allclose(
            np.sort(scene.candidate_delays[list(rho.support)]),
            np.sort(scene.true_delays),
        )

    def test_outside_span_rejected(self):
        scene = DelayScene([300.0], [1.0], np.linspace(100.0, 180.0, 41))
        with pytest.raises(ScattererOutsideWindowError):
            discretize_delays(scene)


class TestRandomScene:
    def test_separation_honored(self):
        scene = random_scene(
            transducers=5, aperture=10.0, standoff=100.0,
            iw_cross=60.0, iw_range=60.0, grid_cross=31, grid_range=31,
            num_scatterers=5, seed=7, min_separation=10.0,
        )
        pos = scene.scatterer_positions()
        for i in range(len(pos)):
            for j in range(i + 1, len(pos)):
                assert np.linalg.norm(pos[i] - pos[j]) >= 10.0

    def test_offgrid_shift_half_cell(self):
        scene = random_scene(
            transducers=5, aperture=10.0, standoff=100.0,
            iw_cross=20.0, iw_range=20.0, grid_cross=11, grid_range=11,
            num_scatterers=3, seed=5, offgrid_shift=0.5,
        )
        cells = scene.grid.cell_coordinates(scene.scatterer_positions())
        frac = cells - np.floor(cells)
        np.testing.assert_allclose(frac, 0.5, atol=1e-9)

    def test_content_hash_stable_and_sensitive(self):
        kwargs = dict(transducers=5, aperture=10.0, standoff=100.0,
                      iw_cross=20.0, iw_range=20.0, grid_cross=11,
                      grid_range=11, num_scatterers=3, seed=5)
        a = random_scene(**kwargs)
        b = random_scene(**kwargs)
        c = random_scene(**{**kwargs, "seed": 6})
        assert a.content_hash() == b.content_hash()
        assert a.content_hash() != c.content_hash()
