"""Shared builders for synthetic scenes, footprints, and PLY fixtures."""

from __future__ import annotations

import struct
import sys

import numpy as np
import pytest

from holosplat.field import OpticsConfig, WaveField
from holosplat.splats import GaussianPrimitive, HologramScene, sort_and_bin
from holosplat.wavefront import PrimitiveFootprint

WAVELENGTHS = (638e-9, 520e-9, 450e-9)
PITCH = 8e-6

# standard splat vertex layout used by the fixtures (3-scale variant)
PLY_PROPS_3D = (
    "x", "y", "z",
    "scale_0", "scale_1", "scale_2",
    "rot_0", "rot_1", "rot_2", "rot_3",
    "opacity",
    "f_dc_0", "f_dc_1", "f_dc_2",
)
PLY_PROPS_2D = tuple(p for p in PLY_PROPS_3D if p != "scale_2")


def optics(n: int) -> OpticsConfig:
    return OpticsConfig(pixel_pitch=PITCH, wavelengths=WAVELENGTHS, grid_ny=n, grid_nx=n)


@pytest.fixture(scope="session")
def opt32():
    return optics(32)


@pytest.fixture(scope="session")
def opt64():
    return optics(64)


@pytest.fixture(scope="session")
def opt128():
    return optics(128)


@pytest.fixture(scope="session")
def opt256():
    return optics(256)


def gaussian_prim(
    pid: int,
    z: float,
    x: float = 0.0,
    y: float = 0.0,
    sigma: float = 8 * PITCH,
    sigma2: float | None = None,
    opacity: float = 1.0,
    color=(1.0, 1.0, 1.0),
    rot: np.ndarray | None = None,
) -> GaussianPrimitive:
    """Axis-aligned (by default) planar Gaussian in hologram space."""
    return GaussianPrimitive(
        mean=np.array([x, y, z], dtype=np.float64),
        rot=np.eye(3) if rot is None else rot,
        scales=np.array([sigma, sigma if sigma2 is None else sigma2]),
        opacity=opacity,
        color=np.asarray(color, dtype=np.float64),
        id=pid,
    )


def scene_of(prims, cfg: OpticsConfig, order: str, n_layers=None, color_domain="intensity") -> HologramScene:
    return sort_and_bin(list(prims), cfg, order, n_layers=n_layers, color_domain=color_domain)


def flat_footprint(amplitude: np.ndarray, plane_z: float, pid: int) -> PrimitiveFootprint:
    """Footprint with a hand-authored amplitude (bypasses the rasterizer)."""
    amp = np.asarray(amplitude, dtype=np.float64)
    cov = np.eye(2) * PITCH**2
    return PrimitiveFootprint(amplitude=amp, plane_z=plane_z, primitive_id=pid, cov2d=cov)


def disc_mask(n: int, radius_px: float, cy: float | None = None, cx: float | None = None) -> np.ndarray:
    c = n // 2
    yy, xx = np.mgrid[0:n, 0:n]
    cy = c if cy is None else cy
    cx = c if cx is None else cx
    return ((yy - cy) ** 2 + (xx - cx) ** 2 <= radius_px**2).astype(np.float64)


def rect_mask(n: int, half_h: int, half_w: int) -> np.ndarray:
    c = n // 2
    m = np.zeros((n, n))
    m[c - half_h : c + half_h, c - half_w : c + half_w] = 1.0
    return m


def random_field(rng: np.random.Generator, n: int, wavelength: float = WAVELENGTHS[1], plane_z: float = 0.0) -> WaveField:
    samples = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return WaveField(samples, PITCH, wavelength, plane_z=plane_z)


def gaussian_amplitude(n: int, sigma_px: float) -> np.ndarray:
    c = n // 2
    yy, xx = np.mgrid[0:n, 0:n]
    return np.exp(-((yy - c) ** 2 + (xx - c) ** 2) / (2.0 * sigma_px**2))


# --------------------------------------------------------------------------
# PLY byte authoring


def ply_header(
    count: int,
    props=PLY_PROPS_3D,
    fmt: str = "binary_little_endian",
    prop_type: str = "float",
    extra_lines: tuple[str, ...] = (),
) -> bytes:
    lines = ["ply", f"format {fmt} 1.0", f"element vertex {count}"]
    lines += [f"property {prop_type} {p}" for p in props]
    lines += list(extra_lines)
    lines.append("end_header")
    return ("\n".join(lines) + "\n").encode("ascii")


def binary_ply(vertices, props=PLY_PROPS_3D) -> bytes:
    """Little-endian float32 PLY with one row of values per vertex."""
    body = b"".join(struct.pack(f"<{len(props)}f", *v) for v in vertices)
    return ply_header(len(vertices), props) + body


def ascii_ply(vertices, props=PLY_PROPS_3D) -> bytes:
    rows = "".join(" ".join(repr(float(x)) for x in v) + "\n" for v in vertices)
    return ply_header(len(vertices), props, fmt="ascii") + rows.encode("ascii")


# --------------------------------------------------------------------------
# acceptance report replay


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance pass/fail lines after capture is torn down."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT_LINES", None) if mod else None
    if lines:
        terminalreporter.write_line("")
        for line in lines:
            terminalreporter.write_line(line)
