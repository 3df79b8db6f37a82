"""Scalar wave fields on regular grids and their discrete Fourier duals.

All grids are row-major with axis 0 = y and axis 1 = x.  The spatial origin
sits at index ``n // 2`` along each axis, and spectra are kept DC-centered in
the same layout.  Both transform directions are unitary, so energy bookkeeping
(Parseval) holds to near machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Default wavelengths in meters (red, green, blue).
DEFAULT_WAVELENGTHS = (638e-9, 520e-9, 450e-9)

#: Default SLM pixel pitch in meters.
DEFAULT_PITCH = 8e-6


@dataclass(frozen=True)
class OpticsConfig:
    """Static optical parameters shared by a reconstruction pipeline.

    Parameters
    ----------
    pixel_pitch : float
        SLM pixel pitch in meters, identical in x and y.
    wavelengths : tuple of float
        One wavelength per color channel, in meters.
    grid_ny, grid_nx : int
        Grid dimensions in samples (rows, columns).
    slm_z : float
        Axial position of the SLM plane.  The scene lives at z > slm_z.
    """

    pixel_pitch: float = DEFAULT_PITCH
    wavelengths: tuple[float, ...] = DEFAULT_WAVELENGTHS
    grid_ny: int = 256
    grid_nx: int = 256
    slm_z: float = 0.0

    def __post_init__(self) -> None:
        if not (self.pixel_pitch > 0 and np.isfinite(self.pixel_pitch)):
            raise ValueError(f"pixel_pitch must be positive, got {self.pixel_pitch}")
        if len(self.wavelengths) == 0:
            raise ValueError("at least one wavelength is required")
        for lam in self.wavelengths:
            if not (lam > 0 and np.isfinite(lam)):
                raise ValueError(f"wavelengths must be positive, got {lam}")
        if self.grid_ny < 2 or self.grid_nx < 2:
            raise ValueError(
                f"grid must be at least 2x2, got {self.grid_ny}x{self.grid_nx}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return (self.grid_ny, self.grid_nx)

    @property
    def n_channels(self) -> int:
        return len(self.wavelengths)

    def wavenumber(self, channel: int) -> float:
        """Vacuum wavenumber 2*pi/lambda for one channel, in rad/m."""
        return 2.0 * np.pi / self.wavelengths[self.check_channel(channel)]

    def check_channel(self, channel: int) -> int:
        if not 0 <= channel < self.n_channels:
            raise ValueError(
                f"channel {channel} out of range for {self.n_channels} wavelengths"
            )
        return channel


def _as_complex_grid(samples: np.ndarray) -> np.ndarray:
    arr = np.asarray(samples, dtype=np.complex128)
    if arr.ndim != 2:
        raise ValueError(f"field samples must be 2D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr.view(np.float64))):
        raise ValueError("field samples contain non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class WaveField:
    """Complex scalar field sampled on a regular grid at one plane.

    Treated as an immutable value: operations return new instances and never
    write into ``samples``.
    """

    samples: np.ndarray
    pitch: float
    wavelength: float
    plane_z: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", _as_complex_grid(self.samples))
        if not (self.pitch > 0 and np.isfinite(self.pitch)):
            raise ValueError(f"pitch must be positive, got {self.pitch}")
        if not (self.wavelength > 0 and np.isfinite(self.wavelength)):
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")
        if not np.isfinite(self.plane_z):
            raise ValueError("plane_z must be finite")

    @property
    def shape(self) -> tuple[int, int]:
        return self.samples.shape

    def energy(self) -> float:
        """Total field energy, sum |u|^2 * pitch^2."""
        return float(np.sum(np.abs(self.samples) ** 2)) * self.pitch**2

    def with_samples(self, samples: np.ndarray, plane_z: float | None = None) -> "WaveField":
        """New field sharing this field's metadata."""
        z = self.plane_z if plane_z is None else plane_z
        return WaveField(samples, self.pitch, self.wavelength, z)


@dataclass(frozen=True, eq=False)
class SpectrumField:
    """DC-centered unitary spectrum of a :class:`WaveField`.

    ``freq_step`` holds the per-axis bin spacing (y then x) in cycles/meter;
    it equals ``1 / (n * pitch)`` along each axis.
    """

    samples: np.ndarray
    freq_step: tuple[float, float]
    wavelength: float
    plane_z: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", _as_complex_grid(self.samples))
        dfy, dfx = self.freq_step
        if not (dfy > 0 and dfx > 0):
            raise ValueError(f"freq_step must be positive, got {self.freq_step}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.samples.shape

    @property
    def pitch(self) -> float:
        return 1.0 / (self.freq_step[0] * self.samples.shape[0])


def make_field(cfg: OpticsConfig, channel: int, plane_z: float = 0.0) -> WaveField:
    """Zero-valued field for one color channel at the given plane."""
    lam = cfg.wavelengths[cfg.check_channel(channel)]
    samples = np.zeros(cfg.shape, dtype=np.complex128)
    return WaveField(samples, cfg.pixel_pitch, lam, plane_z)


def fft2_centered(samples: np.ndarray) -> np.ndarray:
    """Unitary 2D FFT mapping center-origin space to a DC-centered spectrum."""
    return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(samples), norm="ortho"))


def ifft2_centered(samples: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fft2_centered`."""
    return np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(samples), norm="ortho"))


def spectrum(f: WaveField) -> SpectrumField:
    """Unitary DC-centered spectrum of a field."""
    ny, nx = f.shape
    step = (1.0 / (ny * f.pitch), 1.0 / (nx * f.pitch))
    return SpectrumField(fft2_centered(f.samples), step, f.wavelength, f.plane_z)


def inverse_spectrum(s: SpectrumField) -> WaveField:
    """Field whose spectrum is ``s``; inverse of :func:`spectrum`."""
    return WaveField(ifft2_centered(s.samples), s.pitch, s.wavelength, s.plane_z)


def frequency_grid(shape: tuple[int, int], pitch: float) -> tuple[np.ndarray, np.ndarray]:
    """Angular spatial frequencies of the DC-centered spectral layout.

    Returns ``(kx, ky)`` as full 2D arrays in radians/meter.  Bin spacing is
    ``2*pi / (n * pitch)`` per axis and the extreme bin sits at the Nyquist
    frequency ``-pi / pitch``.
    """
    ny, nx = shape
    kx_1d = 2.0 * np.pi * np.fft.fftshift(np.fft.fftfreq(nx, d=pitch))
    ky_1d = 2.0 * np.pi * np.fft.fftshift(np.fft.fftfreq(ny, d=pitch))
    kx, ky = np.meshgrid(kx_1d, ky_1d)
    return kx, ky


def coordinate_grid(shape: tuple[int, int], pitch: float) -> tuple[np.ndarray, np.ndarray]:
    """Physical sample coordinates ``(x, y)`` in meters, origin at index n//2."""
    ny, nx = shape
    x_1d = (np.arange(nx) - nx // 2) * pitch
    y_1d = (np.arange(ny) - ny // 2) * pitch
    x, y = np.meshgrid(x_1d, y_1d)
    return x, y


def intensity(f: WaveField) -> np.ndarray:
    """Pointwise intensity |u|^2 as a real float64 grid."""
    return np.abs(f.samples) ** 2


def rel_l2(a: np.ndarray, b: np.ndarray) -> float:
    """Relative L2 distance ||a - b|| / ||b||.

    Falls back to the absolute norm when ``b`` vanishes so that comparing two
    zero arrays yields 0 rather than NaN.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    ref = float(np.linalg.norm(b))
    diff = float(np.linalg.norm(a - b))
    if ref == 0.0:
        return diff
    return diff / ref
