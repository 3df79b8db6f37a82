"""Per-primitive amplitude footprints and carrier wavefronts.

A planar Gaussian's 3D covariance collapses to a 2x2 lateral covariance;
rasterization samples the peak-normalized density on the SLM-aligned grid at
the primitive's depth.  Amplitudes below ``AMPLITUDE_FLUSH`` are flushed to
exactly zero so that footprints have compact support.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import OpticsConfig, WaveField, coordinate_grid
from .splats import GaussianPrimitive

#: Rasterized amplitudes below this are set to exactly 0.
AMPLITUDE_FLUSH = 1e-6

#: Eigenvalue floor applied to the projected covariance, in units of pitch^2.
MIN_SIGMA_FRACTION = 0.3


@dataclass(frozen=True, eq=False)
class PrimitiveFootprint:
    """Real amplitude pattern of one primitive on its depth plane."""

    amplitude: np.ndarray
    plane_z: float
    primitive_id: int
    cov2d: np.ndarray
    empty: bool = False

    @property
    def shape(self) -> tuple[int, int]:
        return self.amplitude.shape


def project_covariance(p: GaussianPrimitive, pitch: float) -> np.ndarray:
    """Lateral 2x2 covariance of a planar Gaussian, regularized for sampling.

    Builds R * diag(s0^2, s1^2, 0) * R^T and keeps the upper-left block;
    eigenvalues are floored at ``(MIN_SIGMA_FRACTION * pitch)^2`` so that
    sub-pixel splats stay representable on the grid.
    """
    s = np.zeros(3)
    s[:2] = p.scales**2
    cov3 = p.rot @ np.diag(s) @ p.rot.T
    cov2 = cov3[:2, :2]
    evals, evecs = np.linalg.eigh(cov2)
    floor = (MIN_SIGMA_FRACTION * pitch) ** 2
    evals = np.maximum(evals, floor)
    return evecs @ np.diag(evals) @ evecs.T


def rasterize_gaussian(p: GaussianPrimitive, cfg: OpticsConfig) -> PrimitiveFootprint:
    """Sample a primitive's peak-normalized amplitude on the optics grid.

    Means far outside the grid (beyond 6 sigma past the aperture edge)
    produce an all-zero footprint flagged ``empty`` rather than an error, so
    callers can skip them cheaply.
    """
    cov = project_covariance(p, cfg.pixel_pitch)
    x, y = coordinate_grid(cfg.shape, cfg.pixel_pitch)
    mx, my = float(p.mean[0]), float(p.mean[1])

    sigma_max = float(np.sqrt(np.linalg.eigvalsh(cov).max()))
    half_x = cfg.grid_nx * cfg.pixel_pitch / 2.0
    half_y = cfg.grid_ny * cfg.pixel_pitch / 2.0
    if abs(mx) > half_x + 6.0 * sigma_max or abs(my) > half_y + 6.0 * sigma_max:
        zero = np.zeros(cfg.shape)
        return PrimitiveFootprint(zero, float(p.mean[2]), p.id, cov, empty=True)

    inv = np.linalg.inv(cov)
    dx = x - mx
    dy = y - my
    quad = inv[0, 0] * dx * dx + (inv[0, 1] + inv[1, 0]) * dx * dy + inv[1, 1] * dy * dy
    amp = np.exp(-0.5 * quad)
    amp[amp < AMPLITUDE_FLUSH] = 0.0
    return PrimitiveFootprint(amp, float(p.mean[2]), p.id, cov, empty=False)


def primitive_wavefront(
    fp: PrimitiveFootprint, cfg: OpticsConfig, channel: int
) -> WaveField:
    """Footprint as a complex field with its plane's on-axis carrier phase.

    The phase is ``exp(i * k * plane_z)`` with ``k`` the channel wavenumber,
    constant across the plane.
    """
    k = cfg.wavenumber(channel)
    carrier = np.exp(1j * k * fp.plane_z)
    return WaveField(
        fp.amplitude.astype(np.complex128) * carrier,
        cfg.pixel_pitch,
        cfg.wavelengths[channel],
        fp.plane_z,
    )
