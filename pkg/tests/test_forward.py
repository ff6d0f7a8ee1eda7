import mpmath
import numpy as np
import pytest

from arraymusic.errors import (
    CoincidentPointsError,
    DimensionMismatchError,
    ZeroSignalError,
)
from arraymusic.forward import (
    add_noise,
    apply_illumination,
    green_scalar,
    green_vector,
    point_illumination,
    response_matrix,
    response_tensor,
)
from arraymusic.scene import (
    FrequencySet,
    ImagingGrid,
    Scatterer,
    Scene,
    linear_array,
)

TWO_PI = 2.0 * np.pi


def mp_green(x, y, kappa):
    """Arbitrary-precision oracle for the point-source kernel."""
    with mpmath.workdps(40):
        r = mpmath.sqrt(sum((mpmath.mpf(float(a)) - mpmath.mpf(float(b))) ** 2
                            for a, b in zip(x, y)))
        val = mpmath.exp(mpmath.mpc(0, mpmath.mpf(kappa) * r)) / (4 * mpmath.pi * r)
        return complex(val)


class TestGreenScalar:
    def test_one_wavelength_phase_wraps(self):
        val = green_scalar(np.zeros(3), np.array([1.0, 0.0, 0.0]), TWO_PI)
        assert val == pytest.approx(1.0 / (4.0 * np.pi))

    def test_half_wavelength_flips_sign(self):
        val = green_scalar(np.zeros(3), np.array([0.5, 0.0, 0.0]), TWO_PI)
        assert val == pytest.approx(-1.0 / (2.0 * np.pi))

    def test_matches_high_precision_oracle(self):
        # |kappa * r| kept below ~50 rad: the double-precision phase alone
        # carries ~kappa*r*eps of rounding, so larger arguments cannot meet
        # a 1e-14 relative tolerance in any implementation.
        rng = np.random.default_rng(0)
        for _ in range(50):
            x = rng.uniform(-1, 1, 3)
            y = rng.uniform(-1, 1, 3)
            kappa = rng.uniform(0.5, 4.0 * np.pi)
            got = green_scalar(x, y, kappa)
            want = mp_green(x, y, kappa)
            assert abs(got - want) <= 1e-14 * abs(want)

    def test_coincident_points_rejected(self):
        with pytest.raises(CoincidentPointsError):
            green_scalar(np.ones(3), np.ones(3), TWO_PI)


class TestGreenVector:
    def test_single_transducer_equals_scalar(self):
        arr = linear_array(1, 0.0)
        y = np.array([1.0, 2.0, 3.0])
        vec = green_vector(y, TWO_PI, arr)
        assert vec.shape == (1,)
        assert vec[0] == pytest.approx(green_scalar(arr.positions[0], y, TWO_PI))

    def test_equidistant_point_gives_equal_entries(self):
        arr = linear_array(5, 4.0)
        y = np.array([0.0, 0.0, 50.0])  # on the array axis of symmetry
        vec = green_vector(y, TWO_PI, arr)
        np.testing.assert_allclose(vec[0], vec[-1])
        np.testing.assert_allclose(vec[1], vec[-2])

    def test_entries_match_per_entry_oracle(self):
        arr = linear_array(81, 100.0)
        y = np.array([7.0, 0.0, 120.0])
        vec = green_vector(y, TWO_PI, arr)
        for r in range(0, 81, 7):
            assert vec[r] == pytest.approx(
                green_scalar(arr.positions[r], y, TWO_PI))
        # magnitudes decay with distance from the point
        dist = np.linalg.norm(arr.positions - y, axis=1)
        assert np.all(np.diff(np.abs(vec)[np.argsort(dist)]) <= 0)


class TestResponseMatrix:
    def test_single_scatterer_is_rank_one_outer_product(self):
        grid = ImagingGrid(np.array([-5.0, 0.0, 95.0]), 10.0, 10.0, 11, 11)
        z = np.array([1.0, 0.0, 101.0])
        scene = Scene(linear_array(7, 10.0), (Scatterer(z, 1.0),), grid,
                      FrequencySet.centered(1))
        p = response_matrix(scene, 0)
        g = green_vector(z, TWO_PI, scene.array)
        np.testing.assert_array_equal(p, np.outer(g, g))
        s = np.linalg.svd(p, compute_uv=False)
        assert s[1] <= 1e-12 * s[0]

    def test_numerical_rank_equals_scatterer_count(self, small_scene):
        # oracle: sum the outer products explicitly, then inspect the SVD
        kappa = small_scene.frequencies.kappas[0]
        oracle = np.zeros((21, 21), complex)
        for scat in small_scene.scatterers:
            g = green_vector(scat.position, kappa, small_scene.array)
            oracle += scat.reflectivity * np.outer(g, g)
        p = response_matrix(small_scene, 0)
        np.testing.assert_allclose(p, oracle, rtol=1e-13)
        s = np.linalg.svd(p, compute_uv=False)
        assert s[3] / s[2] < 1e-8

    def test_zero_scatterers_zero_matrix(self):
        grid = ImagingGrid(np.array([-5.0, 0.0, 95.0]), 10.0, 10.0, 11, 11)
        scene = Scene(linear_array(4, 6.0), (), grid, FrequencySet.centered(1))
        np.testing.assert_array_equal(response_matrix(scene, 0), 0.0)

    def test_reciprocity(self, small_scene):
        p = response_matrix(small_scene, 0)
        assert np.linalg.norm(p - p.T) <= 1e-13 * np.linalg.norm(p)

    def test_linearity_in_reflectivity(self, small_scene):
        parts = []
        for scat in small_scene.scatterers:
            solo = Scene(small_scene.array, (scat,), small_scene.grid,
                         small_scene.frequencies)
            parts.append(response_matrix(solo, 0))
        np.testing.assert_array_equal(sum(parts), response_matrix(small_scene, 0))

    def test_scaling_reflectivities_scales_response(self, small_scene):
        c = 0.3 - 1.7j
        scaled = Scene(
            small_scene.array,
            tuple(Scatterer(s.position, c * s.reflectivity)
                  for s in small_scene.scatterers),
            small_scene.grid, small_scene.frequencies,
        )
        np.testing.assert_allclose(response_matrix(scaled, 0),
                                   c * response_matrix(small_scene, 0),
                                   rtol=1e-12)


class TestResponseTensor:
    def test_single_frequency_slice(self, small_scene):
        tensor = response_tensor(small_scene)
        assert tensor.entries.shape == (21, 21, 1)
        np.testing.assert_array_equal(tensor.matrix(0),
                                      response_matrix(small_scene, 0))

    def test_slices_match_per_frequency_oracle(self, multifreq_scene):
        tensor = response_tensor(multifreq_scene)
        assert tensor.frequency_count == 12
        for l in (0, 5, 11):
            np.testing.assert_array_equal(tensor.matrix(l),
                                          response_matrix(multifreq_scene, l))

    def test_reciprocity_all_slices(self, multifreq_scene):
        tensor = response_tensor(multifreq_scene)
        for l in range(tensor.frequency_count):
            p = tensor.matrix(l)
            assert np.linalg.norm(p - p.T) <= 1e-13 * np.linalg.norm(p)


class TestApplyIllumination:
    def test_basis_vector_selects_column(self, small_scene):
        p = response_matrix(small_scene, 0)
        f = point_illumination(21, 4)
        np.testing.assert_array_equal(apply_illumination(p, f), p[:, 4])

    def test_linearity(self, small_scene):
        p = response_matrix(small_scene, 0)
        from arraymusic.forward import Illumination

        f = Illumination(point_illumination(21, 1).vector
                         + point_illumination(21, 7).vector, "e1+e7")
        np.testing.assert_allclose(apply_illumination(p, f), p[:, 1] + p[:, 7])

    def test_matches_naive_double_loop(self, small_scene):
        p = response_matrix(small_scene, 0)
        rng = np.random.default_rng(3)
        from arraymusic.forward import Illumination

        vec = rng.normal(size=21) + 1j * rng.normal(size=21)
        out = apply_illumination(p, Illumination(vec, "rand"))
        oracle = np.array([sum(p[r, s] * vec[s] for s in range(21))
                           for r in range(21)])
        np.testing.assert_allclose(out, oracle, rtol=1e-13)

    def test_dimension_mismatch(self, small_scene):
        p = response_matrix(small_scene, 0)
        with pytest.raises(DimensionMismatchError):
            apply_illumination(p, point_illumination(5, 0))


class TestAddNoise:
    def test_huge_snr_is_identity(self, small_scene):
        b = response_matrix(small_scene, 0)
        noisy = add_noise(b, 300.0, 0)
        assert np.linalg.norm(noisy - b) <= 1e-10 * np.linalg.norm(b)

    def test_zero_db_noise_energy(self, small_scene):
        b = response_matrix(small_scene, 0)
        ratios = []
        for seed in range(200):
            e = add_noise(b, 0.0, seed) - b
            ratios.append(np.linalg.norm(e) ** 2 / np.linalg.norm(b) ** 2)
        assert abs(np.mean(ratios) - 1.0) < 0.05

    def test_deterministic_per_seed(self, small_scene):
        b = response_matrix(small_scene, 0)
        np.testing.assert_array_equal(add_noise(b, 0.0, 42), add_noise(b, 0.0, 42))
        assert not np.array_equal(add_noise(b, 0.0, 42), add_noise(b, 0.0, 43))

    def test_zero_signal_rejected(self):
        with pytest.raises(ZeroSignalError):
            add_noise(np.zeros((3, 3), complex), 0.0, 0)

    def test_weyl_inequality(self, small_scene):
        b = response_matrix(small_scene, 0)
        for seed in range(20):
            noisy = add_noise(b, 0.0, seed)
            e_norm = np.linalg.svd(noisy - b, compute_uv=False)[0]
            moved = np.abs(np.linalg.svd(noisy, compute_uv=False)
                           - np.linalg.svd(b, compute_uv=False))
            assert moved.max() <= e_norm + 1e-12
