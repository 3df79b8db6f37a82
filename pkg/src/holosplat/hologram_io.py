"""Serialization: hologram containers, float map dumps, and PNG export.

The hologram container is a little-endian binary format: a fixed header
carrying the magic, version, grid shape, pitch, wavelengths, frame count,
compositing mode, seed, and channel list, followed by the frames as
interleaved (re, im) float32 planes, channel-major then frame-major.
"""

from __future__ import annotations

import struct

import numpy as np
from PIL import Image

from .compositor import TimeMultiplexedHologram
from .field import OpticsConfig, WaveField

MAGIC = b"HSPLTM01"
CONTAINER_VERSION = 1

_MODE_CODES = {
    "rp_spatial": 0,
    "rp_structured": 1,
    "sp_smooth": 2,
    "phase_encoded": 3,
}
_MODE_NAMES = {v: k for k, v in _MODE_CODES.items()}

# magic, version, ny, nx, pitch, 3 wavelengths, n_frames, mode, seed, n_channels
_HEADER = struct.Struct("<8sIIId3dIIqI")


class ContainerError(ValueError):
    """Malformed or unreadable hologram container."""


def write_hologram(path: str, h: TimeMultiplexedHologram) -> None:
    """Serialize a hologram to the binary container format."""
    cfg = h.optics
    if cfg.n_channels != 3:
        raise ContainerError("container format expects three configured wavelengths")
    channels = h.channels
    ny, nx = cfg.shape
    header = _HEADER.pack(
        MAGIC,
        CONTAINER_VERSION,
        ny,
        nx,
        cfg.pixel_pitch,
        *cfg.wavelengths,
        h.n_frames,
        _MODE_CODES[h.mode],
        h.seed,
        len(channels),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.asarray(channels, dtype="<u4").tobytes())
        for ch in channels:
            for f in h.frames[ch]:
                plane = np.empty((ny, nx, 2), dtype="<f4")
                plane[..., 0] = f.samples.real
                plane[..., 1] = f.samples.imag
                fh.write(plane.tobytes())


def read_hologram(path: str) -> TimeMultiplexedHologram:
    """Load a hologram container written by :func:`write_hologram`."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise ContainerError(f"{path}: file shorter than the container header")
    fields = _HEADER.unpack_from(data)
    magic, version, ny, nx, pitch, w0, w1, w2, n_frames, mode_code, seed, n_channels = fields
    if magic != MAGIC:
        raise ContainerError(f"{path}: bad magic {magic!r}")
    if version != CONTAINER_VERSION:
        raise ContainerError(f"{path}: unsupported container version {version}")
    if mode_code not in _MODE_NAMES:
        raise ContainerError(f"{path}: unknown mode code {mode_code}")
    offset = _HEADER.size
    chan_bytes = n_channels * 4
    channels = np.frombuffer(data, dtype="<u4", count=n_channels, offset=offset).tolist()
    offset += chan_bytes
    if any(not 0 <= ch < 3 for ch in channels):
        raise ContainerError(f"{path}: channel indices {channels} out of range")
    frame_floats = ny * nx * 2
    expected = offset + n_channels * n_frames * frame_floats * 4
    if len(data) < expected:
        raise ContainerError(
            f"{path}: truncated payload, expected {expected} bytes, found {len(data)}"
        )
    cfg = OpticsConfig(
        pixel_pitch=pitch, wavelengths=(w0, w1, w2), grid_ny=ny, grid_nx=nx
    )
    frames: dict[int, tuple[WaveField, ...]] = {}
    for ch in channels:
        per_frame = []
        for _ in range(n_frames):
            raw = np.frombuffer(data, dtype="<f4", count=frame_floats, offset=offset)
            offset += frame_floats * 4
            plane = raw.reshape(ny, nx, 2).astype(np.float64)
            per_frame.append(
                WaveField(
                    plane[..., 0] + 1j * plane[..., 1],
                    pitch,
                    cfg.wavelengths[ch],
                    cfg.slm_z,
                )
            )
        frames[ch] = tuple(per_frame)
    return TimeMultiplexedHologram(
        frames=frames,
        mode=_MODE_NAMES[mode_code],
        seed=seed,
        scene_digest="",
        optics=cfg,
    )


def write_pfm(path: str, img: np.ndarray) -> None:
    """Write a grayscale or 3-channel float32 PFM (little-endian)."""
    img = np.asarray(img, dtype=np.float32)
    if img.ndim == 2:
        header = b"Pf\n"
    elif img.ndim == 3 and img.shape[2] == 3:
        header = b"PF\n"
    else:
        raise ValueError(f"PFM supports HxW or HxWx3 images, got shape {img.shape}")
    ny, nx = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(f"{nx} {ny}\n".encode())
        fh.write(b"-1.0\n")
        # PFM stores rows bottom-to-top.
        fh.write(np.ascontiguousarray(img[::-1]).astype("<f4").tobytes())


def read_pfm(path: str) -> np.ndarray:
    """Read a PFM file written by :func:`write_pfm` (or any LE PFM)."""
    with open(path, "rb") as fh:
        kind = fh.readline().strip()
        if kind not in (b"Pf", b"PF"):
            raise ValueError(f"{path}: not a PFM file")
        dims = fh.readline().split()
        nx, ny = int(dims[0]), int(dims[1])
        scale = float(fh.readline())
        count = nx * ny * (3 if kind == b"PF" else 1)
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(fh.read(count * 4), dtype=dtype, count=count)
    shape = (ny, nx, 3) if kind == b"PF" else (ny, nx)
    return data.reshape(shape)[::-1].astype(np.float32)


def to_display(img: np.ndarray, gamma: float = 2.2, peak: float | None = None) -> np.ndarray:
    """Map a linear intensity image to 8-bit grayscale with gamma encoding."""
    img = np.asarray(img, dtype=np.float64)
    if peak is None:
        peak = float(img.max())
    if peak <= 0:
        return np.zeros(img.shape, dtype=np.uint8)
    norm = np.clip(img / peak, 0.0, 1.0) ** (1.0 / gamma)
    return (norm * 255.0 + 0.5).astype(np.uint8)


def write_png(path: str, img: np.ndarray, gamma: float = 2.2, peak: float | None = None) -> None:
    """Write a linear intensity image as a gamma-encoded grayscale PNG."""
    Image.fromarray(to_display(img, gamma=gamma, peak=peak), mode="L").save(path, format="PNG")


def write_phase_png(path: str, phase: np.ndarray) -> None:
    """Write SLM phases in [-pi, pi) as an 8-bit grayscale PNG."""
    phase = np.asarray(phase, dtype=np.float64)
    mapped = (phase + np.pi) / (2.0 * np.pi)
    Image.fromarray((np.clip(mapped, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8), mode="L").save(
        path, format="PNG"
    )


def read_png_gray(path: str) -> np.ndarray:
    """Read a PNG as grayscale floats in [0, 1]."""
    with Image.open(path) as img:
        return np.asarray(img.convert("L"), dtype=np.float64) / 255.0
