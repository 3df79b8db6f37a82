"""Gaussian splat ingestion: PLY parsing, activation, and scene assembly.

The loader reads the vertex layout emitted by common splat trainers: positions
``x y z``, log-scales ``scale_0..scale_{1,2}``, a ``w x y z`` quaternion in
``rot_0..rot_3``, a pre-sigmoid ``opacity``, DC color coefficients
``f_dc_0..2``, and optional higher-order ``f_rest_*`` terms.  Parsing is
deliberately strict: malformed input raises :class:`PlyParseError` naming the
offending property or byte offset instead of propagating garbage downstream.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from .field import OpticsConfig

#: DC spherical-harmonic basis constant used to decode splat colors.
SH_DC_BASIS = 0.28209479177387814

FRONT_TO_BACK = "front_to_back"
BACK_TO_FRONT = "back_to_front"

_REQUIRED_PROPS = (
    "x",
    "y",
    "z",
    "scale_0",
    "scale_1",
    "rot_0",
    "rot_1",
    "rot_2",
    "rot_3",
    "opacity",
    "f_dc_0",
    "f_dc_1",
    "f_dc_2",
)

_PLY_DTYPES = {
    "char": np.int8,
    "int8": np.int8,
    "uchar": np.uint8,
    "uint8": np.uint8,
    "short": np.int16,
    "int16": np.int16,
    "ushort": np.uint16,
    "uint16": np.uint16,
    "int": np.int32,
    "int32": np.int32,
    "uint": np.uint32,
    "uint32": np.uint32,
    "float": np.float32,
    "float32": np.float32,
    "double": np.float64,
    "float64": np.float64,
}


class PlyParseError(ValueError):
    """Structured PLY failure carrying enough context to locate the damage."""


@dataclass(frozen=True, eq=False)
class RawSplat:
    """One vertex record exactly as stored, before any activation."""

    position: np.ndarray
    log_scales: np.ndarray
    rotation_quat: np.ndarray
    opacity_logit: float
    sh_dc: np.ndarray
    sh_rest: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class GaussianPrimitive:
    """Activated planar Gaussian.

    ``rot`` columns are the local axes; ``scales`` holds the two in-plane
    standard deviations (the third axis is flattened away).  In scene space
    the units are whatever the splat file used; after
    :func:`to_hologram_space` they are meters.
    """

    mean: np.ndarray
    rot: np.ndarray
    scales: np.ndarray
    opacity: float
    color: np.ndarray
    id: int

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64)
        rot = np.asarray(self.rot, dtype=np.float64)
        scales = np.asarray(self.scales, dtype=np.float64)
        color = np.asarray(self.color, dtype=np.float64)
        if mean.shape != (3,) or rot.shape != (3, 3) or scales.shape != (2,) or color.shape != (3,):
            raise ValueError("primitive fields have wrong shapes")
        for name, arr in (("mean", mean), ("rot", rot), ("scales", scales), ("color", color)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"primitive {name} contains non-finite values")
        if not np.allclose(rot.T @ rot, np.eye(3), atol=1e-6):
            raise ValueError("primitive rot is not orthonormal")
        if np.linalg.det(rot) < 0.0:
            raise ValueError("primitive rot must be right-handed")
        if np.any(scales <= 0.0):
            raise ValueError(f"primitive scales must be positive, got {scales}")
        if not 0.0 <= self.opacity <= 1.0:
            raise ValueError(f"opacity must lie in [0, 1], got {self.opacity}")
        if np.any(color < 0.0):
            raise ValueError(f"colors must be non-negative, got {color}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "rot", rot)
        object.__setattr__(self, "scales", scales)
        object.__setattr__(self, "color", color)


@dataclass(frozen=True, eq=False)
class SceneMapping:
    """Rigid view transform plus the scene-to-hologram metric remap.

    Lateral coordinates scale uniformly by ``lateral_scale``; depth maps
    affinely from the ``z_scene`` interval onto ``z_holo`` (meters in front
    of the SLM).  ``margin`` widens the cull aperture beyond the per-splat
    3-sigma allowance.
    """

    lateral_scale: float
    z_scene: tuple[float, float]
    z_holo: tuple[float, float]
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    margin: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=np.float64))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64))
        if self.rotation.shape != (3, 3) or self.translation.shape != (3,):
            raise ValueError("mapping rotation must be 3x3 and translation length 3")
        if not (np.isfinite(self.lateral_scale) and self.lateral_scale > 0.0):
            raise ValueError(f"degenerate mapping: lateral_scale = {self.lateral_scale}")
        zs0, zs1 = self.z_scene
        zh0, zh1 = self.z_holo
        if not zs0 < zs1:
            raise ValueError(f"degenerate mapping: scene z range {self.z_scene}")
        if not zh0 < zh1:
            raise ValueError(f"degenerate mapping: hologram z range {self.z_holo}")


@dataclass(frozen=True, eq=False)
class HologramScene:
    """Primitives in hologram space with a declared traversal order.

    ``layers`` is either ``None`` (exact per-primitive compositing) or a
    tuple of ``(layer_z, member_ids)`` pairs produced by
    :func:`sort_and_bin`.
    """

    primitives: tuple[GaussianPrimitive, ...]
    order: str
    optics: OpticsConfig
    color_domain: str = "intensity"
    layers: tuple[tuple[float, tuple[int, ...]], ...] | None = None

    def __post_init__(self) -> None:
        if self.order not in (FRONT_TO_BACK, BACK_TO_FRONT):
            raise ValueError(f"unknown traversal order {self.order!r}")
        if self.color_domain not in ("intensity", "amplitude"):
            raise ValueError(f"unknown color domain {self.color_domain!r}")

    def digest(self) -> str:
        """Content hash covering primitives, order, optics, and color domain."""
        h = hashlib.sha256()
        h.update(self.order.encode())
        h.update(self.color_domain.encode())
        h.update(repr(self.optics).encode())
        for p in self.primitives:
            h.update(np.int64(p.id).tobytes())
            h.update(p.mean.tobytes())
            h.update(p.rot.tobytes())
            h.update(p.scales.tobytes())
            h.update(np.float64(p.opacity).tobytes())
            h.update(p.color.tobytes())
        if self.layers is not None:
            for layer_z, members in self.layers:
                h.update(np.float64(layer_z).tobytes())
                h.update(np.asarray(members, dtype=np.int64).tobytes())
        return h.hexdigest()


def _parse_header(data: bytes, path: str) -> tuple[str, int, list[tuple[str, np.dtype]], int]:
    """Returns (format, vertex count, [(prop name, dtype)], payload offset)."""
    end_marker = b"end_header\n"
    end = data.find(end_marker)
    if not data.startswith(b"ply\n") and not data.startswith(b"ply\r\n"):
        raise PlyParseError(f"{path}: not a PLY file (missing 'ply' magic)")
    if end < 0:
        raise PlyParseError(f"{path}: malformed header (no end_header line)")
    header = data[:end].decode("ascii", errors="replace")
    payload_offset = end + len(end_marker)

    fmt = None
    vertex_count = None
    props: list[tuple[str, np.dtype]] = []
    in_vertex = False
    seen_vertex = False
    for line in header.splitlines()[1:]:
        tokens = line.split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            if len(tokens) != 3 or tokens[1] not in ("ascii", "binary_little_endian"):
                raise PlyParseError(f"{path}: unsupported format line {line!r}")
            fmt = tokens[1]
        elif tokens[0] == "element":
            if len(tokens) != 3:
                raise PlyParseError(f"{path}: malformed element line {line!r}")
            if tokens[1] == "vertex":
                try:
                    vertex_count = int(tokens[2])
                except ValueError:
                    raise PlyParseError(f"{path}: bad vertex count {tokens[2]!r}") from None
                if vertex_count < 0:
                    raise PlyParseError(f"{path}: bad vertex count {vertex_count}")
                in_vertex = True
                seen_vertex = True
            else:
                if not seen_vertex:
                    raise PlyParseError(
                        f"{path}: element {tokens[1]!r} precedes the vertex element; "
                        "only vertex-first layouts are supported"
                    )
                in_vertex = False
        elif tokens[0] == "property":
            if not in_vertex:
                continue
            if tokens[1] == "list":
                raise PlyParseError(f"{path}: list property {tokens[-1]!r} on vertex element")
            if len(tokens) != 3:
                raise PlyParseError(f"{path}: malformed property line {line!r}")
            if tokens[1] not in _PLY_DTYPES:
                raise PlyParseError(f"{path}: unknown property type {tokens[1]!r}")
            props.append((tokens[2], np.dtype(_PLY_DTYPES[tokens[1]])))
    if fmt is None:
        raise PlyParseError(f"{path}: malformed header (no format line)")
    if vertex_count is None:
        raise PlyParseError(f"{path}: malformed header (no vertex element)")

    names = [name for name, _ in props]
    for required in _REQUIRED_PROPS:
        if required not in names:
            raise PlyParseError(f"{path}: missing required property {required!r}")
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})
        raise PlyParseError(f"{path}: duplicate properties {dup}")
    return fmt, vertex_count, props, payload_offset


def _records_from_table(table: np.ndarray, names: list[str]) -> list[RawSplat]:
    col = {name: table[:, i].astype(np.float64) for i, name in enumerate(names)}
    scale_names = ["scale_0", "scale_1"]
    if "scale_2" in col:
        scale_names.append("scale_2")
    rest_names = sorted(
        (n for n in names if n.startswith("f_rest_")),
        key=lambda n: int(n.rsplit("_", 1)[1]),
    )
    out = []
    for i in range(table.shape[0]):
        rest = None
        if rest_names:
            rest = np.array([col[n][i] for n in rest_names], dtype=np.float64)
        out.append(
            RawSplat(
                position=np.array([col["x"][i], col["y"][i], col["z"][i]]),
                log_scales=np.array([col[n][i] for n in scale_names]),
                rotation_quat=np.array([col[f"rot_{j}"][i] for j in range(4)]),
                opacity_logit=float(col["opacity"][i]),
                sh_dc=np.array([col[f"f_dc_{j}"][i] for j in range(3)]),
                sh_rest=rest,
            )
        )
    return out


def load_ply(path: str) -> list[RawSplat]:
    """Parse a splat PLY file (ASCII or binary little-endian)."""
    with open(path, "rb") as fh:
        data = fh.read()
    fmt, count, props, offset = _parse_header(data, str(path))
    names = [name for name, _ in props]

    if fmt == "binary_little_endian":
        dtype = np.dtype([(name, dt.newbyteorder("<")) for name, dt in props])
        expected = count * dtype.itemsize
        available = len(data) - offset
        if available < expected:
            raise PlyParseError(
                f"{path}: truncated payload, expected {expected} bytes for "
                f"{count} vertices but found {available} after byte offset {offset}"
            )
        records = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
        table = np.column_stack([records[name].astype(np.float64) for name in names])
    else:
        text = data[offset:].decode("ascii", errors="replace")
        tokens = text.split()
        expected_tok = count * len(props)
        if len(tokens) < expected_tok:
            raise PlyParseError(
                f"{path}: truncated payload, expected {expected_tok} values for "
                f"{count} vertices but found {len(tokens)}"
            )
        try:
            flat = np.array([float(t) for t in tokens[:expected_tok]], dtype=np.float64)
        except ValueError as exc:
            raise PlyParseError(f"{path}: non-numeric vertex data ({exc})") from None
        table = flat.reshape(count, len(props))

    if count and not np.all(np.isfinite(table)):
        bad = int(np.argwhere(~np.isfinite(table))[0, 0])
        raise PlyParseError(f"{path}: non-finite value in vertex {bad}")
    return _records_from_table(table, names)


def _quat_to_rot(q: np.ndarray) -> np.ndarray:
    """Rotation matrix from a (w, x, y, z) quaternion, normalized first."""
    norm = float(np.linalg.norm(q))
    if norm == 0.0:
        raise ValueError("zero-norm quaternion")
    w, x, y, z = q / norm
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def activate(raw: RawSplat, splat_id: int = 0) -> GaussianPrimitive:
    """Decode stored splat parameters into a scene-space primitive.

    Opacity goes through a logistic, scales through exp, the quaternion is
    normalized, and colors decode as ``clamp(sh_dc * basis + 0.5, 0, inf)``.
    Splats stored with three scale axes keep their two largest; the dropped
    axis is rotated into the third column of ``rot``.
    """
    rot = _quat_to_rot(np.asarray(raw.rotation_quat, dtype=np.float64))
    scales = np.exp(np.asarray(raw.log_scales, dtype=np.float64))
    if scales.shape == (3,):
        drop = int(np.argmin(scales))
        keep = [i for i in range(3) if i != drop]
        perm = np.array(keep + [drop])
        rot = rot[:, perm]
        if np.linalg.det(rot) < 0.0:
            rot = rot.copy()
            rot[:, 2] = -rot[:, 2]
        scales = scales[keep]
    elif scales.shape != (2,):
        raise ValueError(f"expected 2 or 3 scales, got {scales.shape}")
    opacity = float(1.0 / (1.0 + np.exp(-raw.opacity_logit)))
    color = np.clip(np.asarray(raw.sh_dc, dtype=np.float64) * SH_DC_BASIS + 0.5, 0.0, None)
    return GaussianPrimitive(
        mean=np.asarray(raw.position, dtype=np.float64),
        rot=rot,
        scales=scales,
        opacity=opacity,
        color=color,
        id=splat_id,
    )


def to_hologram_space(
    primitives: list[GaussianPrimitive] | tuple[GaussianPrimitive, ...],
    optics: OpticsConfig,
    mapping: SceneMapping,
) -> list[GaussianPrimitive]:
    """Apply the view transform and metric remap, culling off-aperture splats.

    A splat survives when its lateral center lies within the SLM aperture
    grown by ``mapping.margin`` plus its own 3-sigma footprint radius, so
    culling never removes visible energy.
    """
    zs0, zs1 = mapping.z_scene
    zh0, zh1 = mapping.z_holo
    z_gain = (zh1 - zh0) / (zs1 - zs0)
    half_x = optics.grid_nx * optics.pixel_pitch / 2.0
    half_y = optics.grid_ny * optics.pixel_pitch / 2.0

    out = []
    for p in primitives:
        cam = mapping.rotation @ p.mean + mapping.translation
        mean = np.array(
            [
                cam[0] * mapping.lateral_scale,
                cam[1] * mapping.lateral_scale,
                zh0 + (cam[2] - zs0) * z_gain,
            ]
        )
        rot = mapping.rotation @ p.rot
        scales = p.scales * mapping.lateral_scale
        reach = 3.0 * float(scales.max()) + mapping.margin
        if abs(mean[0]) > half_x + reach or abs(mean[1]) > half_y + reach:
            continue
        out.append(replace(p, mean=mean, rot=rot, scales=scales))
    return out


def sort_and_bin(
    primitives: list[GaussianPrimitive] | tuple[GaussianPrimitive, ...],
    optics: OpticsConfig,
    order: str,
    n_layers: int | None = None,
    color_domain: str = "intensity",
) -> HologramScene:
    """Depth-sort primitives and optionally bin them onto shared planes.

    ``front_to_back`` sorts by increasing distance from the SLM,
    ``back_to_front`` by decreasing distance; ties break on ascending id.
    With ``n_layers`` set, primitives snap to the nearest of that many
    uniformly spaced planes over the scene's depth range, each retained
    layer's z being the mean depth of its members.
    """
    if len(primitives) == 0:
        raise ValueError("cannot build a scene from zero primitives")
    if order not in (FRONT_TO_BACK, BACK_TO_FRONT):
        raise ValueError(f"unknown traversal order {order!r}")
    reverse = order == BACK_TO_FRONT
    ordered = sorted(
        primitives,
        key=lambda p: (-abs(p.mean[2]), p.id) if reverse else (abs(p.mean[2]), p.id),
    )

    layers = None
    if n_layers is not None:
        if n_layers < 1:
            raise ValueError(f"n_layers must be positive, got {n_layers}")
        depths = np.array([p.mean[2] for p in ordered])
        lo, hi = float(depths.min()), float(depths.max())
        if n_layers == 1 or hi == lo:
            planes = np.array([(lo + hi) / 2.0])
        else:
            planes = np.linspace(lo, hi, n_layers)
        assignment = np.argmin(np.abs(depths[:, None] - planes[None, :]), axis=1)
        built = []
        for j in range(len(planes)):
            members = [i for i in range(len(ordered)) if assignment[i] == j]
            if not members:
                continue
            layer_z = float(np.mean([depths[i] for i in members]))
            built.append((layer_z, tuple(ordered[i].id for i in members)))
        built.sort(key=lambda item: -abs(item[0]) if reverse else abs(item[0]))
        layers = tuple(built)
        zs = [abs(z) for z, _ in layers]
        if any(b >= a for a, b in zip(zs, zs[1:])) if reverse else any(
            b <= a for a, b in zip(zs, zs[1:])
        ):
            raise AssertionError("layer depths are not strictly monotone")

    return HologramScene(
        primitives=tuple(ordered),
        order=order,
        optics=optics,
        color_domain=color_domain,
        layers=layers,
    )
