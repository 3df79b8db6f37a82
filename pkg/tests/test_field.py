"""Field container and centered unitary transform tests.

The transform oracle is a direct matrix DFT built from first principles
(no np.fft), with phase referenced to the center pixel n//2.
"""

import numpy as np
import pytest

from holosplat.field import (
    OpticsConfig,
    SpectrumField,
    WaveField,
    coordinate_grid,
    fft2_centered,
    frequency_grid,
    ifft2_centered,
    intensity,
    inverse_spectrum,
    make_field,
    rel_l2,
    spectrum,
)

from conftest import PITCH, WAVELENGTHS, random_field


def dft_matrix_centered(n: int) -> np.ndarray:
    """Unitary DFT matrix with both index axes referenced to n//2."""
    c = n // 2
    idx = np.arange(n) - c
    return np.exp(-2j * np.pi * np.outer(idx, idx) / n) / np.sqrt(n)


def centered_dft_oracle(u: np.ndarray) -> np.ndarray:
    wy = dft_matrix_centered(u.shape[0])
    wx = dft_matrix_centered(u.shape[1])
    return wy @ u @ wx.T


class TestTransforms:
    def test_matches_matrix_dft_oracle(self):
        rng = np.random.default_rng(11)
        u = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        assert rel_l2(fft2_centered(u), centered_dft_oracle(u)) < 1e-12

    def test_matches_oracle_rectangular(self):
        rng = np.random.default_rng(12)
        u = rng.standard_normal((8, 16)) + 1j * rng.standard_normal((8, 16))
        assert rel_l2(fft2_centered(u), centered_dft_oracle(u)) < 1e-12

    def test_round_trip_identity(self):
        rng = np.random.default_rng(13)
        u = rng.standard_normal((32, 32)) + 1j * rng.standard_normal((32, 32))
        assert rel_l2(ifft2_centered(fft2_centered(u)), u) < 1e-12

    def test_constant_field_transforms_to_dc_impulse(self):
        u = np.ones((16, 16), dtype=complex)
        s = fft2_centered(u)
        assert s[8, 8] == pytest.approx(16.0)
        off = s.copy()
        off[8, 8] = 0.0
        assert np.max(np.abs(off)) < 1e-12

    def test_parseval(self):
        rng = np.random.default_rng(14)
        f = random_field(rng, 64)
        s = spectrum(f)
        e_spatial = np.sum(np.abs(f.samples) ** 2)
        e_spectral = np.sum(np.abs(s.samples) ** 2)
        assert abs(e_spatial - e_spectral) / e_spatial < 1e-12

    def test_linearity(self):
        rng = np.random.default_rng(15)
        f = random_field(rng, 32)
        g = random_field(rng, 32)
        a = 0.7 - 1.3j
        b = -0.2 + 0.9j
        combo = f.with_samples(a * f.samples + b * g.samples)
        lhs = spectrum(combo).samples
        rhs = a * spectrum(f).samples + b * spectrum(g).samples
        assert rel_l2(lhs, rhs) < 1e-10

    def test_spectrum_inverse_spectrum_round_trip(self):
        rng = np.random.default_rng(16)
        f = random_field(rng, 32, plane_z=1.5e-3)
        g = inverse_spectrum(spectrum(f))
        assert rel_l2(g.samples, f.samples) < 1e-12
        assert g.plane_z == f.plane_z
        assert g.pitch == f.pitch

    def test_determinism(self):
        rng = np.random.default_rng(17)
        u = rng.standard_normal((32, 32)) + 1j * rng.standard_normal((32, 32))
        a = fft2_centered(u.copy())
        b = fft2_centered(u.copy())
        assert np.array_equal(a, b)


class TestGrids:
    def test_frequency_grid_spacing_and_nyquist(self):
        kx, ky = frequency_grid((8, 8), 8e-6)
        dk = 2 * np.pi / (8 * 8e-6)
        assert kx[0, 1] - kx[0, 0] == pytest.approx(dk)
        assert ky[1, 0] - ky[0, 0] == pytest.approx(dk)
        # centered layout: bin 0 sits at -Nyquist, center bin at DC
        assert kx[0, 0] == pytest.approx(-np.pi / 8e-6)
        assert kx[4, 4] == 0.0
        assert ky[4, 4] == 0.0

    def test_frequency_grid_axis_roles(self):
        kx, ky = frequency_grid((4, 8), 8e-6)
        # kx varies along axis 1 (columns), ky along axis 0 (rows)
        assert np.all(kx[0] == kx[1])
        assert np.all(ky[:, 0] == ky[:, 1])
        assert kx.shape == (4, 8)

    def test_coordinate_grid_origin_and_spacing(self):
        x, y = coordinate_grid((8, 8), 2e-6)
        assert x[4, 4] == 0.0
        assert y[4, 4] == 0.0
        assert x[0, 5] - x[0, 4] == pytest.approx(2e-6)
        assert y[5, 0] - y[4, 0] == pytest.approx(2e-6)
        assert x[0, 0] == pytest.approx(-4 * 2e-6)


class TestIntensity:
    def test_all_ones(self):
        f = WaveField(np.ones((4, 4), dtype=complex), PITCH, WAVELENGTHS[0])
        assert np.array_equal(intensity(f), np.ones((4, 4)))

    def test_unit_modulus(self):
        f = WaveField(np.full((4, 4), 0.6 + 0.8j), PITCH, WAVELENGTHS[0])
        assert np.allclose(intensity(f), 1.0, atol=1e-15)

    def test_matches_conj_product_oracle(self):
        rng = np.random.default_rng(18)
        f = random_field(rng, 16)
        expected = (f.samples * np.conj(f.samples)).real
        assert np.allclose(intensity(f), expected, atol=1e-15)
        assert np.all(intensity(f) >= 0.0)


class TestContainers:
    def test_optics_validation(self):
        with pytest.raises(ValueError):
            OpticsConfig(pixel_pitch=-1e-6, wavelengths=WAVELENGTHS)
        with pytest.raises(ValueError):
            OpticsConfig(pixel_pitch=PITCH, wavelengths=(638e-9, -520e-9, 450e-9))
        with pytest.raises(ValueError):
            OpticsConfig(pixel_pitch=PITCH, wavelengths=WAVELENGTHS, grid_ny=0)
        cfg = OpticsConfig(pixel_pitch=PITCH, wavelengths=WAVELENGTHS)
        with pytest.raises(ValueError):
            cfg.check_channel(3)

    def test_wavenumber(self):
        cfg = OpticsConfig(pixel_pitch=PITCH, wavelengths=WAVELENGTHS)
        assert cfg.wavenumber(1) == pytest.approx(2 * np.pi / 520e-9)

    def test_make_field_is_empty(self):
        cfg = OpticsConfig(pixel_pitch=PITCH, wavelengths=WAVELENGTHS, grid_ny=8, grid_nx=8)
        f = make_field(cfg, 2, plane_z=3e-3)
        assert f.samples.shape == (8, 8)
        assert np.all(f.samples == 0)
        assert f.wavelength == 450e-9
        assert f.plane_z == 3e-3

    def test_field_rejects_non_finite(self):
        bad = np.ones((4, 4), dtype=complex)
        bad[1, 2] = np.nan
        with pytest.raises(ValueError):
            WaveField(bad, PITCH, WAVELENGTHS[0])

    def test_field_rejects_wrong_rank(self):
        with pytest.raises(ValueError):
            WaveField(np.ones(4, dtype=complex), PITCH, WAVELENGTHS[0])

    def test_spectrum_field_pitch(self):
        rng = np.random.default_rng(19)
        s = spectrum(random_field(rng, 16))
        assert isinstance(s, SpectrumField)
        assert s.pitch == pytest.approx(PITCH)

    def test_energy(self):
        f = WaveField(np.full((4, 4), 2.0 + 0j), PITCH, WAVELENGTHS[0])
        assert f.energy() == pytest.approx(16 * 4.0 * PITCH**2)


class TestRelL2:
    def test_zero_reference_uses_absolute_norm(self):
        a = np.full((2, 2), 1e-3 + 0j)
        assert rel_l2(a, np.zeros((2, 2))) == pytest.approx(2e-3)

    def test_identical(self):
        rng = np.random.default_rng(20)
        u = rng.standard_normal((8, 8))
        assert rel_l2(u, u) == 0.0
