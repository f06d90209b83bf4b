import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freqselect.errors import ValidationError
from freqselect.spectral import (
    MaskMode,
    band_decompose,
    band_energies,
    dft2_shifted,
    idft2_shifted,
    make_band_masks,
    radial_distance,
)
from oracles import center_shift, direct_dft2


class TestDFT:
    def test_constant_image_is_dc_only(self):
        c = 0.37
        spec = dft2_shifted(np.full((3, 4, 4), c))
        expected = np.zeros((3, 4, 4), dtype=complex)
        expected[:, 2, 2] = 16 * c
        np.testing.assert_allclose(spec, expected, atol=1e-12)

    def test_impulse_has_flat_spectrum(self):
        x = np.zeros((1, 4, 4))
        x[0, 0, 0] = 1.0
        np.testing.assert_allclose(np.abs(dft2_shifted(x)), 1.0, atol=1e-12)

    def test_matches_direct_summation(self, rng):
        x = rng.random((2, 6, 8))
        spec = dft2_shifted(x)
        for c in range(2):
            np.testing.assert_allclose(spec[c], center_shift(direct_dft2(x[c])), atol=1e-10)

    def test_parseval(self, rng):
        x = rng.random((1, 8, 8))
        spatial = 0.0
        for v in x.ravel():
            spatial += v * v
        spectral = np.sum(np.abs(dft2_shifted(x)) ** 2) / 64
        assert abs(spectral - spatial) / spatial < 1e-9

    def test_round_trip(self, rng):
        x = rng.random((3, 64, 64))
        np.testing.assert_allclose(idft2_shifted(dft2_shifted(x)), x, atol=1e-9, rtol=0)

    def test_zero_spectrum(self):
        assert np.all(idft2_shifted(np.zeros((2, 8, 8), dtype=complex)) == 0)

    def test_hermitian_spectrum_is_real(self, rng):
        h = w = 16
        s = rng.standard_normal((h, w)) + 1j * rng.standard_normal((h, w))
        flipped = s[(-np.arange(h)) % h][:, (-np.arange(w)) % w]
        sym = 0.5 * (s + np.conj(flipped))
        _, imag = idft2_shifted(np.fft.fftshift(sym)[None], return_imag=True)
        assert imag < 1e-9

    def test_rejects_non_finite(self):
        x = np.zeros((1, 4, 4))
        x[0, 1, 1] = np.nan
        with pytest.raises(ValidationError):
            dft2_shifted(x)

    def test_rejects_tiny_image(self):
        with pytest.raises(ValidationError):
            dft2_shifted(np.zeros((1, 1, 4)))


class TestMasks:
    def test_band_of_radius_ten(self):
        m = make_band_masks(64, 64, 4, 32)
        np.testing.assert_array_equal(m.cutoffs, [0, 8, 16, 24, 32])
        assert radial_distance(64, 64)[42, 32] == 10
        assert m.band_index[42, 32] == 1  # band 2, zero-based

    def test_cutoff_belongs_to_lower_band(self):
        m = make_band_masks(64, 64, 4, 32)
        assert m.band_index[32 + 8, 32] == 0
        assert m.band_index[32 + 9, 32] == 1

    def test_center_pixel(self):
        assert make_band_masks(64, 64, 4, 32, "partition").band_index[32, 32] == 0
        assert make_band_masks(64, 64, 4, 32, "strict").band_index[32, 32] == -1

    def test_partition_counts(self):
        m = make_band_masks(64, 64, 16, 32, MaskMode.PARTITION)
        counts = np.zeros(16, dtype=int)
        for idx in m.band_index.ravel():
            counts[idx] += 1
        assert counts.sum() == 64 * 64
        np.testing.assert_array_equal(counts, m.counts())
        np.testing.assert_array_equal(m.masks.sum(axis=0), 1)

    def test_strict_drops_dc_and_corners(self):
        m = make_band_masks(64, 64, 16, 32, MaskMode.STRICT)
        r = radial_distance(64, 64)
        outside = (r == 0) | (r > 32)
        assert np.all(m.band_index[outside] == -1)
        assert np.all(m.band_index[~outside] >= 0)
        assert m.masks.sum() == np.count_nonzero(~outside)

    def test_masks_are_point_symmetric(self):
        # reflection k -> -k about the center, with the Nyquist row/column aliased onto itself
        m = make_band_masks(64, 64, 16, 32)
        idx = m.band_index
        refl = idx[(64 - np.arange(64)) % 64][:, (64 - np.arange(64)) % 64]
        np.testing.assert_array_equal(refl, idx)

    @pytest.mark.parametrize("n_bands, nu_max", [(0, 32), (4, 0), (4, -1.0)])
    def test_invalid(self, n_bands, nu_max):
        with pytest.raises(ValidationError):
            make_band_masks(64, 64, n_bands, nu_max)

    def test_mode_aliases(self):
        assert MaskMode.parse("STRICT") is MaskMode.STRICT
        assert MaskMode.parse("PartitionComplete") is MaskMode.PARTITION
        with pytest.raises(ValidationError):
            MaskMode.parse("rings")


class TestDecompose:
    def test_constant_image_lives_in_first_band(self):
        x = np.full((3, 64, 64), 0.6)
        d = band_decompose(x, make_band_masks(64, 64, 4, 32))
        np.testing.assert_allclose(d.bands[0], x, atol=1e-9)
        np.testing.assert_allclose(d.bands[1:], 0.0, atol=1e-9)

    def test_bands_sum_to_image(self, rng):
        x = rng.random((3, 64, 64))
        d = band_decompose(x, make_band_masks(64, 64, 16, 32))
        assert np.max(np.abs(d.total() - x)) <= 1e-6

    def test_grating_energy_in_band_two(self):
        n = np.arange(64)
        grating = np.cos(2 * np.pi * 12 * n / 64)[:, None] * np.ones(64)[None]
        d = band_decompose(grating, make_band_masks(64, 64, 4, 32))
        energy = (d.bands**2).sum(axis=(1, 2, 3))
        assert energy[1] / energy.sum() > 0.99

    def test_oblique_grating(self):
        # frequency (9, 9): r = 12.73, band 2 of 4
        n = np.arange(64)
        grating = np.cos(2 * np.pi * (9 * n[:, None] + 9 * n[None, :]) / 64)
        d = band_decompose(grating, make_band_masks(64, 64, 4, 32))
        energy = (d.bands**2).sum(axis=(1, 2, 3))
        assert energy[1] / energy.sum() > 0.99

    def test_masked_spectra_orthogonal(self, rng):
        x = rng.random((3, 64, 64))
        m = make_band_masks(64, 64, 8, 32)
        spec = dft2_shifted(x)
        parts = [m.mask(i) * spec for i in range(8)]
        for i in range(8):
            for j in range(8):
                if i != j:
                    assert np.vdot(parts[i], parts[j]) == 0

    def test_bands_are_real(self, rng):
        x = rng.random((3, 64, 64))
        _, imag = band_decompose(x, make_band_masks(64, 64, 16, 32), return_imag=True)
        assert imag < 1e-9

    def test_strict_mode_loses_mean(self, rng):
        x = rng.random((1, 32, 32))
        d = band_decompose(x, make_band_masks(32, 32, 4, 16, "strict"))
        assert abs(d.total().mean()) < 1e-12
        assert abs(x.mean() - d.total().mean()) > 0.1

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            band_decompose(np.zeros((1, 32, 32)), make_band_masks(64, 64, 4, 32))

    def test_odd_size(self, rng):
        x = rng.random((2, 15, 17))
        m = make_band_masks(15, 17, 5, 8)
        assert m.band_index[7, 8] == 0
        np.testing.assert_allclose(idft2_shifted(dft2_shifted(x)), x, atol=1e-12)
        np.testing.assert_allclose(band_decompose(x, m).total(), x, atol=1e-9)

    def test_band_energies_sum_to_parseval(self, rng):
        x = rng.random((3, 32, 32))
        e = band_energies(x, make_band_masks(32, 32, 8, 16))
        assert e.sum() == pytest.approx(np.sum(x**2), rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(
    h=st.integers(4, 24),
    w=st.integers(4, 24),
    n_bands=st.integers(1, 10),
    nu_max=st.floats(0.5, 20),
    seed=st.integers(0, 2**31),
)
def test_partition_reproduces_any_image(h, w, n_bands, nu_max, seed):
    x = np.random.default_rng(seed).random((2, h, w))
    m = make_band_masks(h, w, n_bands, nu_max)
    assert np.all(m.masks.sum(axis=0) == 1)
    np.testing.assert_allclose(band_decompose(x, m).total(), x, atol=1e-9)
