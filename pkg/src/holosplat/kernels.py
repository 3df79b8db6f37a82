"""Frequency-domain amplitude kernels and keyed random phase draws.

A kernel is a non-negative real profile Q on the DC-centered frequency grid,
scaled so that ``sum(Q^2) / n_bins == 1``.  A structured draw pairs Q with
i.i.d. uniform phases and inverse-transforms to a spatial modulation whose
spectrum magnitude equals Q exactly and whose mean squared modulus is 1 in
expectation.  A spatial draw skips the shaping and applies a unit-modulus
random phasor per pixel.

Randomness is counter-based: each (seed, mode, scope, frame) tuple selects an
independent stream, so draws never depend on evaluation order or thread
schedule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .field import frequency_grid, ifft2_centered

KIND_UNIFORM = "uniform"
KIND_PUPIL = "pupil"
KIND_SH = "spherical_harmonic"
KIND_CUSTOM = "custom"

MODE_SPATIAL = "spatial"
MODE_STRUCTURED = "structured"

_MODE_TAGS = {MODE_SPATIAL: 1, MODE_STRUCTURED: 2}
_MASK64 = (1 << 64) - 1
# Fixed key half marking this package's phase streams.
_STREAM_DOMAIN = 0x48534C54_50484153


@dataclass(frozen=True, eq=False)
class SpectralKernel:
    """Normalized frequency-amplitude profile.

    ``normalization`` records the scale factor applied to the raw profile.
    """

    q: np.ndarray
    kind: str
    normalization: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.q.shape


@dataclass(frozen=True, eq=False)
class PhaseDraw:
    """One sampled modulation grid plus the key that produced it."""

    modulation: np.ndarray
    frame_index: int
    seed_path: tuple[int, ...]
    mode: str

    @property
    def shape(self) -> tuple[int, int]:
        return self.modulation.shape


def _normalize(profile: np.ndarray, kind: str) -> SpectralKernel:
    profile = np.asarray(profile, dtype=np.float64)
    if profile.ndim != 2:
        raise ValueError(f"kernel profile must be 2D, got shape {profile.shape}")
    if np.any(profile < 0.0) or not np.all(np.isfinite(profile)):
        raise ValueError("kernel profile must be finite and non-negative")
    power = float(np.sum(profile**2))
    if power == 0.0:
        raise ValueError("kernel profile has no support")
    scale = float(np.sqrt(profile.size / power))
    q = profile * scale
    q.setflags(write=False)
    return SpectralKernel(q=q, kind=kind, normalization=scale)


def kernel_uniform(shape: tuple[int, int]) -> SpectralKernel:
    """Flat kernel: every frequency bin weighted equally."""
    return _normalize(np.ones(shape), KIND_UNIFORM)


def kernel_pupil(shape: tuple[int, int], pitch: float, radius: float) -> SpectralKernel:
    """Binary disc kernel admitting frequencies with ||k|| <= radius (rad/m)."""
    kx, ky = frequency_grid(shape, pitch)
    step = 2.0 * np.pi / (max(shape) * pitch)
    if radius < step:
        raise ValueError(
            f"pupil radius {radius:g} rad/m is below one frequency bin ({step:g}); "
            "the disc would be empty"
        )
    disc = (kx**2 + ky**2 <= radius**2).astype(np.float64)
    return _normalize(disc, KIND_PUPIL)


def sh_profile(
    shape: tuple[int, int], pitch: float, wavelength: float, l: int, m: int
) -> np.ndarray:
    """Unnormalized |Y_l^m| over the propagating band, zero outside.

    Real spherical harmonics without the Condon-Shortley sign, evaluated on
    unit direction vectors (kx, ky, kz)/k with kz = sqrt(k^2 - kx^2 - ky^2).
    """
    if not 0 <= l <= 2 or abs(m) > l:
        raise ValueError(f"unsupported spherical harmonic degree (l={l}, m={m})")
    kx, ky = frequency_grid(shape, pitch)
    k = 2.0 * np.pi / wavelength
    kz_sq = k**2 - kx**2 - ky**2
    band = kz_sq > 0.0
    kz = np.sqrt(np.where(band, kz_sq, 0.0))
    ux, uy, uz = kx / k, ky / k, kz / k

    if l == 0:
        y = np.full(shape, 0.5 / np.sqrt(np.pi))
    elif l == 1:
        c = np.sqrt(3.0 / (4.0 * np.pi))
        y = c * {-1: uy, 0: uz, 1: ux}[m]
    else:
        c15 = 0.5 * np.sqrt(15.0 / np.pi)
        if m == -2:
            y = c15 * ux * uy
        elif m == -1:
            y = c15 * uy * uz
        elif m == 0:
            y = 0.25 * np.sqrt(5.0 / np.pi) * (3.0 * uz**2 - 1.0)
        elif m == 1:
            y = c15 * ux * uz
        else:
            y = 0.5 * c15 * (ux**2 - uy**2)
    return np.where(band, np.abs(y), 0.0)


def kernel_sh(
    shape: tuple[int, int], pitch: float, wavelength: float, l: int, m: int
) -> SpectralKernel:
    """Spherical-harmonic magnitude kernel |Y_l^m| on the propagating band."""
    return _normalize(sh_profile(shape, pitch, wavelength, l, m), KIND_SH)


def kernel_custom(profile: np.ndarray) -> SpectralKernel:
    """Kernel from an arbitrary non-negative profile on the frequency grid."""
    return _normalize(profile, KIND_CUSTOM)


def load_kernel_image(path: str, shape: tuple[int, int]) -> SpectralKernel:
    """Kernel from a grayscale image resampled to the frequency grid shape."""
    with Image.open(path) as img:
        gray = img.convert("F").resize((shape[1], shape[0]), Image.BILINEAR)
        profile = np.asarray(gray, dtype=np.float64)
    profile = np.clip(profile, 0.0, None)
    return _normalize(profile, KIND_CUSTOM)


def load_kernel_raw(path: str, shape: tuple[int, int]) -> SpectralKernel:
    """Kernel from a flat little-endian float32 dump matching the grid shape."""
    flat = np.fromfile(path, dtype="<f4")
    if flat.size != shape[0] * shape[1]:
        raise ValueError(
            f"{path}: expected {shape[0] * shape[1]} float32 values for shape "
            f"{shape}, found {flat.size}"
        )
    return _normalize(flat.astype(np.float64).reshape(shape), KIND_CUSTOM)


def phase_stream(seed: int, mode: str, scope: int, t: int) -> np.random.Generator:
    """Counter-based generator for one (seed, mode, scope, frame) tuple."""
    key = np.array([seed & _MASK64, _STREAM_DOMAIN], dtype=np.uint64)
    counter = np.array([0, _MODE_TAGS[mode], scope & _MASK64, t & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def _uniform_phase(shape: tuple[int, int], seed: int, mode: str, scope: int, t: int) -> np.ndarray:
    gen = phase_stream(seed, mode, scope, t)
    return gen.uniform(-np.pi, np.pi, size=shape)


def structured_modulation(kernel: SpectralKernel, phase: np.ndarray) -> np.ndarray:
    """Spatial modulation realizing the kernel profile with explicit phases.

    The unitary inverse transform of ``q * exp(i phase)``; its spectrum
    magnitude is exactly ``q`` and Parseval gives ``mean |m|^2 == 1``.
    """
    if phase.shape != kernel.shape:
        raise ValueError(f"phase shape {phase.shape} != kernel shape {kernel.shape}")
    return ifft2_centered(kernel.q * np.exp(1j * phase))


def sample_structured(
    kernel: SpectralKernel, seed: int, t: int, scope: int = 0
) -> PhaseDraw:
    """Draw a structured modulation for frame ``t``.

    The spectrum of the returned grid has magnitude exactly proportional to
    the kernel profile; ``E[|m(x)|^2] = 1`` under the kernel normalization.
    """
    phase = _uniform_phase(kernel.shape, seed, MODE_STRUCTURED, scope, t)
    m = structured_modulation(kernel, phase)
    return PhaseDraw(
        modulation=m,
        frame_index=t,
        seed_path=(seed, _MODE_TAGS[MODE_STRUCTURED], scope, t),
        mode=MODE_STRUCTURED,
    )


def sample_spatial(shape: tuple[int, int], seed: int, t: int, scope: int = 0) -> PhaseDraw:
    """Draw a per-pixel unit-modulus random phasor grid for frame ``t``."""
    phase = _uniform_phase(shape, seed, MODE_SPATIAL, scope, t)
    return PhaseDraw(
        modulation=np.exp(1j * phase),
        frame_index=t,
        seed_path=(seed, _MODE_TAGS[MODE_SPATIAL], scope, t),
        mode=MODE_SPATIAL,
    )


def modulate(u: np.ndarray, draw: PhaseDraw) -> np.ndarray:
    """Apply a modulation grid to a complex field of matching shape."""
    u = np.asarray(u)
    if u.shape != draw.modulation.shape:
        raise ValueError(f"field shape {u.shape} != modulation shape {draw.modulation.shape}")
    return u * draw.modulation
