import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arraymusic.errors import MissingAuxiliaryError, ReferenceVanishesError
from arraymusic.forward import Illumination, response_matrix, response_tensor
from arraymusic.phaseless import (
    IntensitySet,
    add_intensity_noise,
    assemble_mc_from_intensities,
    measure_cross_links,
    measure_intensities,
    pair_labels,
    polarization_inner,
    record_label,
    recover_cross_correlations,
    recover_interferometric,
)
from arraymusic.structures import build_mc


def synthetic_reference_set(fields: np.ndarray, freq_index=0, reference=0):
    """Intensity records a real acquisition would produce for known fields.

    ``fields[k, i]`` is the (complex) signal at receiver k under basis
    illumination e_i; auxiliary records follow the f + e and f + i e rule.
    """
    r, n = fields.shape
    labels, cols = [], []
    for i in range(n):
        labels.append(record_label(freq_index, f"e{i}"))
        cols.append(np.abs(fields[:, i]) ** 2)
    for j in range(n):
        plus, plus_i = pair_labels(f"e{reference}", j)
        labels.append(record_label(freq_index, plus))
        cols.append(np.abs(fields[:, reference] + fields[:, j]) ** 2)
        labels.append(record_label(freq_index, plus_i))
        cols.append(np.abs(fields[:, reference] + 1j * fields[:, j]) ** 2)
    return IntensitySet(labels, np.column_stack(cols))


complex_st = st.complex_numbers(min_magnitude=0.0, max_magnitude=1e3,
                                allow_nan=False, allow_infinity=False)


class TestPolarizationInner:
    def test_unit_and_i(self):
        # u = 1, v = i: |u|^2 = 1, |v|^2 = 1, |u+v|^2 = 2, |u-iv|^2 = 4
        assert polarization_inner(1.0, 1.0, 2.0, 4.0) == pytest.approx(1j)

    def test_equal_units(self):
        assert polarization_inner(1.0, 1.0, 4.0, 2.0) == pytest.approx(1.0)

    def test_random_pairs_match_direct_product(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            u, v = rng.normal(size=2) + 1j * rng.normal(size=2)
            got = polarization_inner(abs(u) ** 2, abs(v) ** 2,
                                     abs(u + v) ** 2, abs(u - 1j * v) ** 2)
            want = np.conj(u) * v
            assert abs(got - want) <= 1e-13 * max(1.0, abs(want))

    @given(u=complex_st, v=complex_st)
    @settings(max_examples=200, deadline=None)
    def test_identity_property(self, u, v):
        got = polarization_inner(abs(u) ** 2, abs(v) ** 2,
                                 abs(u + v) ** 2, abs(u - 1j * v) ** 2)
        want = np.conj(u) * v
        # rounding scale is set by the squared magnitudes being differenced
        scale = max((abs(u) + abs(v)) ** 2, abs(want), 1e-300)
        assert abs(got - want) <= 1e-12 * scale


class TestMeasureIntensities:
    def test_empty_request_empty_set(self, small_scene):
        iset = measure_intensities(small_scene, [], pair_mode="none")
        assert iset.illumination_count == 0
        assert iset.receiver_count == 21

    def test_basis_illumination_squares_the_column(self, small_scene):
        p = response_matrix(small_scene, 0)
        iset = measure_intensities(
            small_scene,
            [Illumination(np.eye(21, dtype=complex)[0], "e0")],
            pair_mode="none",
        )
        np.testing.assert_allclose(iset.value_vector(record_label(0, "e0")),
                                   np.abs(p[:, 0]) ** 2, rtol=1e-13)

    def test_auxiliary_count(self, small_scene):
        rng = np.random.default_rng(1)
        f = rng.normal(size=21) + 1j * rng.normal(size=21)
        iset = measure_intensities(small_scene, [Illumination(f, "f0")],
                                   pair_mode="full")
        # base (1 custom + 21 basis) + pairs x 2
        assert iset.illumination_count == 1 + 21 + 2 * 21

    def test_noise_free_intensities_match_forward_fields(self, small_scene):
        p = response_matrix(small_scene, 0)
        rng = np.random.default_rng(2)
        f = rng.normal(size=21) + 1j * rng.normal(size=21)
        iset = measure_intensities(small_scene, [Illumination(f, "f0")],
                                   pair_mode="none")
        want = np.abs(p @ f) ** 2
        got = iset.value_vector(record_label(0, "f0"))
        np.testing.assert_allclose(got, want, rtol=1e-13)


class TestRecoverCrossCorrelations:
    def test_basis_requests_give_real_self_terms(self, small_scene):
        p = response_matrix(small_scene, 0)
        basis3 = Illumination(np.eye(21, dtype=complex)[3], "e3")
        iset = measure_intensities(small_scene, [basis3], pair_mode="full")
        m = recover_cross_correlations(iset, receiver=5, illuminations=[basis3])
        assert m[0, 3] == pytest.approx(abs(p[5, 3]) ** 2, rel=1e-10)
        assert abs(m[0, 3].imag) <= 1e-12 * abs(m[0, 3])

    def test_matches_full_phase_oracle(self, small_scene):
        p = response_matrix(small_scene, 0)
        rng = np.random.default_rng(3)
        f = rng.normal(size=21) + 1j * rng.normal(size=21)
        fq = Illumination(f, "f0")
        iset = measure_intensities(small_scene, [fq], pair_mode="full")
        r = 7
        m = recover_cross_correlations(iset, receiver=r, illuminations=[fq])
        b_r = (p @ f)[r]
        oracle = np.conj(b_r) * p[r, :]
        assert np.linalg.norm(m[0] - oracle) <= 1e-12 * np.linalg.norm(oracle)

    def test_zero_field_gives_zero_vector(self):
        fields = np.array([[0.0, 0.3 + 0.1j, -0.2j]])
        # request the reference column itself: u = fields[:, 0] = 0
        iset = synthetic_reference_set(fields)
        m = recover_cross_correlations(
            iset, receiver=0,
            illuminations=[Illumination(np.eye(3, dtype=complex)[0], "e0")])
        np.testing.assert_allclose(m[0], 0.0, atol=1e-15)

    def test_missing_auxiliary_raises(self, small_scene):
        fq = Illumination(np.ones(21, complex), "f0")
        iset = measure_intensities(small_scene, [fq], pair_mode="none")
        with pytest.raises(MissingAuxiliaryError):
            recover_cross_correlations(iset, receiver=0, illuminations=[fq])


class TestRecoverInterferometric:
    def test_round_trip_against_adjoint_product(self, multifreq_scene):
        p = response_matrix(multifreq_scene, 0)
        iset = measure_intensities(multifreq_scene, [], pair_mode="reference")
        m = recover_interferometric(iset)
        want = p.conj().T @ p
        assert np.linalg.norm(m - want) <= 1e-10 * np.linalg.norm(want)

    def test_exactly_hermitian(self, small_scene):
        iset = measure_intensities(small_scene, [], pair_mode="reference")
        m = recover_interferometric(iset)
        np.testing.assert_array_equal(m, m.conj().T)

    def test_single_transducer_reduces_to_intensity(self):
        fields = np.array([[1.2 - 0.7j]])
        iset = synthetic_reference_set(fields)
        m = recover_interferometric(iset)
        assert m.shape == (1, 1)
        assert m[0, 0] == pytest.approx(abs(fields[0, 0]) ** 2)

    def test_vanishing_reference_raises_with_receiver_index(self):
        fields = np.array([
            [0.5 + 0.1j, 0.4, 0.3j],
            [0.0, 0.2, 0.1 - 0.1j],  # reference signal dies at receiver 1
        ])
        iset = synthetic_reference_set(fields)
        with pytest.raises(ReferenceVanishesError) as err:
            recover_interferometric(iset, fallback=False)
        assert err.value.receiver == 1

    def test_fallback_switches_reference(self):
        fields = np.array([
            [0.5 + 0.1j, 0.4, 0.3j],
            [0.0, 0.2, 0.1 - 0.1j],
        ])
        base = synthetic_reference_set(fields, reference=0)
        spare = synthetic_reference_set(fields, reference=1)
        merged = base.merge(spare)
        m = recover_interferometric(merged, fallback=True)
        want = fields.conj().T @ fields
        np.testing.assert_allclose(m, want, atol=1e-12)

    def test_global_receiver_phase_invisible(self):
        rng = np.random.default_rng(4)
        fields = rng.normal(size=(6, 5)) + 1j * rng.normal(size=(6, 5))
        phases = np.exp(2j * np.pi * rng.uniform(size=6))
        m1 = recover_interferometric(synthetic_reference_set(fields))
        m2 = recover_interferometric(
            synthetic_reference_set(phases[:, None] * fields))
        assert np.linalg.norm(m1 - m2) <= 1e-12 * np.linalg.norm(m1)


class TestMcAssembly:
    def test_matches_full_phase_stack(self, multifreq_scene):
        tensor = response_tensor(multifreq_scene)
        s = multifreq_scene.frequencies.count
        sets = [measure_intensities(multifreq_scene, [], freq_index=l,
                                    pair_mode="reference") for l in range(s)]
        links = None
        for l in range(s):
            part = measure_cross_links(multifreq_scene, l, 0)
            links = part if links is None else links.merge(part)
        got = assemble_mc_from_intensities(sets, links)
        want = build_mc(multifreq_scene, tensor).entries
        assert np.linalg.norm(got - want) <= 1e-10 * np.linalg.norm(want)


class TestIntensityNoise:
    def test_clamp_rate_reported(self, small_scene):
        iset = measure_intensities(small_scene, [], pair_mode="reference")
        noisy, rate = add_intensity_noise(iset, -10.0, 0)
        assert 0.0 < rate < 1.0
        assert np.all(noisy.values >= 0.0)

    def test_deterministic(self, small_scene):
        iset = measure_intensities(small_scene, [], pair_mode="reference")
        a, _ = add_intensity_noise(iset, 5.0, 42)
        b, _ = add_intensity_noise(iset, 5.0, 42)
        np.testing.assert_array_equal(a.values, b.values)


class TestIntensityCsv:
    def test_round_trip(self, tmp_path, small_scene):
        iset = measure_intensities(small_scene, [], pair_mode="reference")
        path = tmp_path / "intensities.csv"
        iset.to_csv(path)
        back = IntensitySet.from_csv(path)
        assert back.labels == iset.labels
        np.testing.assert_array_equal(back.values, iset.values)

    def test_record_iteration(self):
        iset = IntensitySet(["w0|e0"], np.array([[1.5], [2.5]]))
        records = list(iset)
        assert len(records) == 2
        assert records[0].label == "w0|e0"
        assert records[1].receiver == 1
        assert records[1].value == 2.5
