"""Hologram reconstruction: focal stacks, view decompositions, metrics.

Focal stacks average the refocused intensity over hologram frames.  Light
fields come from a windowed Fourier decomposition of each frame: a view is
the squared magnitude of the field correlated with a sliding window carrying
a tilted carrier, averaged over frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .compositor import TimeMultiplexedHologram
from .field import WaveField, coordinate_grid, intensity
from .propagation import propagate

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
PSNR_CAP_DB = 120.0


@dataclass(frozen=True, eq=False)
class FocalStack:
    """Refocused mean intensities; ``slices[channel][depth]`` indexes grids."""

    depths: tuple[float, ...]
    slices: dict[int, np.ndarray]
    frames_used: int

    @property
    def channels(self) -> tuple[int, ...]:
        return tuple(sorted(self.slices))


@dataclass(frozen=True, eq=False)
class LightField:
    """View-resolved intensities on a coarse spatial hop grid.

    ``views[channel]`` has shape (vy, vx, hy, hx): view row, view column,
    then window position.  ``view_kx``/``view_ky`` hold the carrier
    frequencies (rad/m) of each view column/row.
    """

    views: dict[int, np.ndarray]
    view_kx: np.ndarray
    view_ky: np.ndarray
    window_size: int
    stride: int
    frames_used: int

    @property
    def channels(self) -> tuple[int, ...]:
        return tuple(sorted(self.views))


def focal_stack(
    h: TimeMultiplexedHologram,
    depths: list[float] | tuple[float, ...],
    band_limited: bool | None = None,
    pad: bool = False,
) -> FocalStack:
    """Mean refocused intensity per channel over all hologram frames."""
    depths = tuple(float(d) for d in depths)
    if len(depths) == 0:
        raise ValueError("depth list is empty")
    if any(b <= a for a, b in zip(depths, depths[1:])):
        raise ValueError(f"depths must be strictly increasing, got {depths}")
    slices: dict[int, np.ndarray] = {}
    n_frames = h.n_frames
    for ch, fields in h.frames.items():
        stack = np.zeros((len(depths),) + h.optics.shape)
        for f in fields:
            for di, z in enumerate(depths):
                refocused = propagate(f, z - f.plane_z, band_limited=band_limited, pad=pad)
                stack[di] += intensity(refocused)
        slices[ch] = stack / n_frames
    return FocalStack(depths=depths, slices=slices, frames_used=n_frames)


def _view_frequencies(n_views: int, pitch: float) -> np.ndarray:
    """View carriers uniformly spanning (-pi/pitch, pi/pitch), half-offset."""
    nyquist = np.pi / pitch
    idx = np.arange(n_views)
    return (idx + 0.5) / n_views * 2.0 * nyquist - nyquist


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window of length n."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def light_field_stft(
    h: TimeMultiplexedHologram,
    window_size: int = 64,
    stride: int | None = None,
    view_grid: tuple[int, int] = (10, 10),
    view_centers: tuple[np.ndarray, np.ndarray] | None = None,
) -> LightField:
    """Short-time Fourier view decomposition of a hologram.

    Each view is ``mean_t |sum_x u_t(x) w(x - x0) exp(-i k0 . x)|^2`` sampled
    on a window-position grid with the given stride.  View carriers default
    to a ``view_grid`` lattice spanning the grid's full frequency band;
    explicit ``view_centers`` (ky array, kx array in rad/m) must stay within
    the Nyquist band.
    """
    cfg = h.optics
    ny, nx = cfg.shape
    if stride is None:
        stride = window_size // 2
    if not 1 <= window_size <= min(ny, nx):
        raise ValueError(f"window size {window_size} does not fit grid {cfg.shape}")
    if stride < 1:
        raise ValueError(f"stride must be positive, got {stride}")

    nyquist = np.pi / cfg.pixel_pitch
    if view_centers is not None:
        view_ky = np.asarray(view_centers[0], dtype=np.float64)
        view_kx = np.asarray(view_centers[1], dtype=np.float64)
        if np.any(np.abs(view_ky) > nyquist) or np.any(np.abs(view_kx) > nyquist):
            raise ValueError("view frequencies exceed the Nyquist band")
    else:
        vy, vx = view_grid
        if vy < 1 or vx < 1:
            raise ValueError(f"view grid must be positive, got {view_grid}")
        view_ky = _view_frequencies(vy, cfg.pixel_pitch)
        view_kx = _view_frequencies(vx, cfg.pixel_pitch)

    x, y = coordinate_grid(cfg.shape, cfg.pixel_pitch)
    w1 = hann_window(window_size)
    window = np.outer(w1, w1)

    # Window positions: center pixels of each patch on the stride lattice.
    hy = np.arange(0, ny - window_size + 1, stride)
    hx = np.arange(0, nx - window_size + 1, stride)
    if len(hy) == 0 or len(hx) == 0:
        raise ValueError("window does not fit the grid even once")

    # Correlate via FFT once per (view, frame): full 'valid' correlation then
    # subsample the stride lattice.
    fshape = (
        sfft.next_fast_len(ny + window_size - 1),
        sfft.next_fast_len(nx + window_size - 1),
    )
    # Correlation with the window = convolution with its flip; zero-padded
    # FFT sizes make the circular product a full linear convolution.
    w_f = np.fft.fft2(window[::-1, ::-1], s=fshape)

    views: dict[int, np.ndarray] = {}
    for ch, fields in h.frames.items():
        acc = np.zeros((len(view_ky), len(view_kx), len(hy), len(hx)))
        for f in fields:
            for iy, ky0 in enumerate(view_ky):
                ramp_y = np.exp(-1j * ky0 * y[:, :1])
                for ix, kx0 in enumerate(view_kx):
                    ramp = ramp_y * np.exp(-1j * kx0 * x[:1, :])
                    mod = f.samples * ramp
                    full = np.fft.ifft2(np.fft.fft2(mod, s=fshape) * w_f)
                    valid = full[
                        window_size - 1 : window_size - 1 + ny - window_size + 1,
                        window_size - 1 : window_size - 1 + nx - window_size + 1,
                    ]
                    patch = valid[::stride, ::stride][: len(hy), : len(hx)]
                    acc[iy, ix] += np.abs(patch) ** 2
        views[ch] = acc / h.n_frames
    return LightField(
        views=views,
        view_kx=view_kx,
        view_ky=view_ky,
        window_size=window_size,
        stride=stride,
        frames_used=h.n_frames,
    )


def epipolar(lf: LightField, row: int, channel: int = 0) -> np.ndarray:
    """Horizontal-parallax slice: one hop row stacked across view columns.

    Returns an array of shape (n_views_x, n_hops_x) taken at the central
    vertical view.
    """
    if channel not in lf.views:
        raise ValueError(f"channel {channel} not present in light field")
    data = lf.views[channel]
    vy_center = data.shape[0] // 2
    if not 0 <= row < data.shape[2]:
        raise ValueError(f"row {row} out of range for {data.shape[2]} hop rows")
    return data[vy_center, :, row, :]


def psnr(a: np.ndarray, b: np.ndarray, peak: float) -> float:
    """Peak signal-to-noise ratio in dB, capped for identical inputs."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(peak**2 / mse), PSNR_CAP_DB)


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r**2) / (2.0 * sigma**2))
    k = np.outer(g, g)
    return k / k.sum()


def _filter_valid(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    from scipy.signal import fftconvolve

    return fftconvolve(img, kernel, mode="valid")


def ssim(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """Mean structural similarity with an 11x11 Gaussian window (sigma 1.5).

    Stabilizers follow the standard choice C1 = (0.01 peak)^2,
    C2 = (0.03 peak)^2; the map is averaged over the valid (fully
    overlapped) region.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW} pixels on each side")
    kern = _gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA)
    mu_a = _filter_valid(a, kern)
    mu_b = _filter_valid(b, kern)
    var_a = _filter_valid(a * a, kern) - mu_a**2
    var_b = _filter_valid(b * b, kern) - mu_b**2
    cov = _filter_valid(a * b, kern) - mu_a * mu_b
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def speckle_contrast(img: np.ndarray, region: np.ndarray | None = None) -> float:
    """Contrast std/mean over a region (boolean mask; default whole image)."""
    img = np.asarray(img, dtype=np.float64)
    values = img[region] if region is not None else img.ravel()
    if values.size == 0:
        raise ValueError("empty region")
    mean = float(values.mean())
    if mean == 0.0:
        raise ValueError("zero-mean region has no defined contrast")
    return float(values.std()) / mean
