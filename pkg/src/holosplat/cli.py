"""Command-line pipeline driver.

Subcommands cover the full path from a splat file to deliverables: compose a
hologram container, reconstruct focal stacks and light fields, report
bandwidth, encode a phase-only pattern, and compare images.  Every run that
writes files also writes a ``manifest.json`` recording the resolved
configuration digest, seed, stage timings, and a content hash per output.

Exit codes: 0 success, 2 configuration errors, 3 file/container errors,
4 numeric failures.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .analysis import bandwidth_report, bandwidth_report_csv, format_bandwidth_report
from .compositor import (
    BINNING_EXACT,
    BINNING_LAYERED,
    MODE_RP_SPATIAL,
    MODE_RP_STRUCTURED,
    MODE_SP_SMOOTH,
    CompositeRequest,
    time_multiplex,
)
from .encode import EncodeProblem, encode
from .field import OpticsConfig, WaveField
from .hologram_io import (
    ContainerError,
    read_hologram,
    read_pfm,
    read_png_gray,
    write_hologram,
    write_pfm,
    write_phase_png,
    write_png,
)
from .kernels import kernel_pupil, kernel_sh, kernel_uniform, load_kernel_image, load_kernel_raw
from .reconstruct import epipolar, focal_stack, light_field_stft, psnr, ssim
from .splats import (
    BACK_TO_FRONT,
    FRONT_TO_BACK,
    PlyParseError,
    SceneMapping,
    activate,
    load_ply,
    sort_and_bin,
    to_hologram_space,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


class ConfigError(ValueError):
    """Configuration that fails schema validation."""


# --------------------------------------------------------------------------
# config schema


def _require_mapping(node, where: str) -> dict:
    if not isinstance(node, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(node).__name__}")
    return node


def _check_keys(node: dict, allowed: set[str], where: str) -> None:
    unknown = set(node) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def _number(node, where: str) -> float:
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {node!r}")
    return float(node)


def _integer(node, where: str) -> int:
    if isinstance(node, bool) or not isinstance(node, int):
        raise ConfigError(f"{where}: expected an integer, got {node!r}")
    return node


def _number_list(node, count: int | None, where: str) -> list[float]:
    if not isinstance(node, list):
        raise ConfigError(f"{where}: expected a list, got {node!r}")
    if count is not None and len(node) != count:
        raise ConfigError(f"{where}: expected {count} entries, got {len(node)}")
    return [_number(v, f"{where}[{i}]") for i, v in enumerate(node)]


_TOP_KEYS = {
    "scene",
    "optics",
    "mapping",
    "mode",
    "kernel",
    "frames",
    "seed",
    "binning",
    "color_domain",
    "channels",
    "focal_stack",
    "light_field",
    "encode",
    "output",
}


def load_config(path: str) -> dict:
    """Parse and schema-check a YAML config file."""
    try:
        with open(path, "r") as fh:
            raw = yaml.safe_load(fh)
    except (yaml.YAMLError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    cfg = _require_mapping(raw if raw is not None else {}, path)
    _check_keys(cfg, _TOP_KEYS, path)

    if "optics" in cfg:
        node = _require_mapping(cfg["optics"], "optics")
        _check_keys(node, {"pixel_pitch", "wavelengths", "grid"}, "optics")
        if "pixel_pitch" in node:
            _number(node["pixel_pitch"], "optics.pixel_pitch")
        if "wavelengths" in node:
            _number_list(node["wavelengths"], 3, "optics.wavelengths")
        if "grid" in node:
            grid = node["grid"]
            if not (isinstance(grid, list) and len(grid) == 2):
                raise ConfigError("optics.grid: expected [ny, nx]")
            for v in grid:
                _integer(v, "optics.grid")
    if "mapping" in cfg:
        node = _require_mapping(cfg["mapping"], "mapping")
        _check_keys(
            node,
            {"lateral_scale", "z_scene", "z_holo", "rotation", "translation", "margin"},
            "mapping",
        )
        for key in ("lateral_scale", "z_scene", "z_holo"):
            if key not in node:
                raise ConfigError(f"mapping.{key} is required when mapping is given")
        _number(node["lateral_scale"], "mapping.lateral_scale")
        _number_list(node["z_scene"], 2, "mapping.z_scene")
        _number_list(node["z_holo"], 2, "mapping.z_holo")
        if "rotation" in node:
            _number_list(node["rotation"], 9, "mapping.rotation")
        if "translation" in node:
            _number_list(node["translation"], 3, "mapping.translation")
        if "margin" in node:
            _number(node["margin"], "mapping.margin")
    if "mode" in cfg and cfg["mode"] not in (MODE_RP_SPATIAL, MODE_RP_STRUCTURED, MODE_SP_SMOOTH):
        raise ConfigError(f"mode: unknown compositing mode {cfg['mode']!r}")
    if "kernel" in cfg:
        node = _require_mapping(cfg["kernel"], "kernel")
        _check_keys(node, {"type", "radius_fraction", "l", "m", "path"}, "kernel")
        if node.get("type") not in ("uniform", "pupil", "sh", "image", "raw"):
            raise ConfigError(f"kernel.type: unknown kernel type {node.get('type')!r}")
    if "frames" in cfg and (_integer(cfg["frames"], "frames") < 1):
        raise ConfigError(f"frames: must be positive, got {cfg['frames']}")
    if "seed" in cfg:
        _integer(cfg["seed"], "seed")
    if "binning" in cfg and cfg["binning"] != BINNING_EXACT:
        if _integer(cfg["binning"], "binning") < 1:
            raise ConfigError("binning: must be 'exact' or a positive layer count")
    if "color_domain" in cfg and cfg["color_domain"] not in ("intensity", "amplitude"):
        raise ConfigError(f"color_domain: unknown value {cfg['color_domain']!r}")
    if "channels" in cfg:
        for v in _number_list(cfg["channels"], None, "channels"):
            if v != int(v) or not 0 <= int(v) <= 2:
                raise ConfigError(f"channels: indices must be 0..2, got {cfg['channels']}")
    if "focal_stack" in cfg:
        node = _require_mapping(cfg["focal_stack"], "focal_stack")
        _check_keys(node, {"depths", "pad"}, "focal_stack")
        if "depths" not in node:
            raise ConfigError("focal_stack.depths is required")
        _number_list(node["depths"], None, "focal_stack.depths")
    if "light_field" in cfg:
        node = _require_mapping(cfg["light_field"], "light_field")
        _check_keys(node, {"window", "stride", "views", "epipolar_row"}, "light_field")
    if "encode" in cfg:
        node = _require_mapping(cfg["encode"], "encode")
        _check_keys(
            node,
            {"channel", "frame", "distance", "iterations", "step_size", "init", "seed", "scale_free"},
            "encode",
        )
    if "output" in cfg:
        node = _require_mapping(cfg["output"], "output")
        _check_keys(node, {"gamma"}, "output")
    return cfg


def _optics_from_config(cfg: dict) -> OpticsConfig:
    node = cfg.get("optics", {})
    grid = node.get("grid", [256, 256])
    try:
        return OpticsConfig(
            pixel_pitch=float(node.get("pixel_pitch", 8e-6)),
            wavelengths=tuple(node.get("wavelengths", (638e-9, 520e-9, 450e-9))),
            grid_ny=int(grid[0]),
            grid_nx=int(grid[1]),
        )
    except ValueError as exc:
        raise ConfigError(f"optics: {exc}") from None


def _kernel_from_config(cfg: dict, optics: OpticsConfig):
    node = cfg.get("kernel")
    if node is None:
        raise ConfigError("mode rp_structured requires a kernel section")
    kind = node["type"]
    shape = optics.shape
    if kind == "uniform":
        return kernel_uniform(shape)
    if kind == "pupil":
        frac = float(node.get("radius_fraction", 1.0))
        return kernel_pupil(shape, optics.pixel_pitch, frac * np.pi / optics.pixel_pitch)
    if kind == "sh":
        if "l" not in node or "m" not in node:
            raise ConfigError("kernel: spherical-harmonic kernels need l and m")
        return kernel_sh(
            shape, optics.pixel_pitch, optics.wavelengths[1], int(node["l"]), int(node["m"])
        )
    if "path" not in node:
        raise ConfigError(f"kernel: type {kind!r} needs a path")
    if kind == "image":
        return load_kernel_image(node["path"], shape)
    return load_kernel_raw(node["path"], shape)


def _scene_from_config(cfg: dict, optics: OpticsConfig):
    if "scene" not in cfg:
        raise ConfigError("scene: a splat file path is required")
    raws = load_ply(cfg["scene"])
    prims = [activate(r, i) for i, r in enumerate(raws)]
    if "mapping" in cfg:
        node = cfg["mapping"]
        rotation = np.array(node.get("rotation", np.eye(3).ravel().tolist())).reshape(3, 3)
        mapping = SceneMapping(
            lateral_scale=float(node["lateral_scale"]),
            z_scene=tuple(float(v) for v in node["z_scene"]),
            z_holo=tuple(float(v) for v in node["z_holo"]),
            rotation=rotation,
            translation=np.array(node.get("translation", [0.0, 0.0, 0.0])),
            margin=float(node.get("margin", 0.0)),
        )
        prims = to_hologram_space(prims, optics, mapping)
    if not prims:
        raise ConfigError("scene: no primitives survive the aperture cull")
    mode = cfg.get("mode", MODE_RP_STRUCTURED)
    order = FRONT_TO_BACK if mode == MODE_SP_SMOOTH else BACK_TO_FRONT
    binning = cfg.get("binning", BINNING_EXACT)
    n_layers = None if binning == BINNING_EXACT else int(binning)
    return sort_and_bin(
        prims,
        optics,
        order,
        n_layers=n_layers,
        color_domain=cfg.get("color_domain", "intensity"),
    )


# --------------------------------------------------------------------------
# manifest plumbing


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


class RunWriter:
    """Collects output files and timings, then writes the manifest."""

    def __init__(self, out_dir: str, command: str, cfg: dict, seed: int | None):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.cfg_digest = hashlib.sha256(
            json.dumps(cfg, sort_keys=True, default=str).encode()
        ).hexdigest()
        self.seed = seed
        self.outputs: list[Path] = []
        self.timings: dict[str, float] = {}
        self._t0 = time.perf_counter()

    def path(self, name: str) -> Path:
        p = self.dir / name
        self.outputs.append(p)
        return p

    def mark(self, stage: str) -> None:
        now = time.perf_counter()
        self.timings[stage] = round(now - self._t0, 6)
        self._t0 = now

    def finish(self) -> Path:
        manifest = {
            "command": self.command,
            "package_version": __version__,
            "config_digest": self.cfg_digest,
            "seed": self.seed,
            "timings": self.timings,
            "outputs": [
                {"path": p.name, "sha256": _sha256_file(p)} for p in self.outputs
            ],
        }
        path = self.dir / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return path


# --------------------------------------------------------------------------
# subcommands


def cmd_hologram(args) -> int:
    cfg = load_config(args.config)
    optics = _optics_from_config(cfg)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    frames = args.frames if args.frames is not None else int(cfg.get("frames", 1))
    mode = cfg.get("mode", MODE_RP_STRUCTURED)
    writer = RunWriter(args.out, "hologram", cfg, seed)

    scene = _scene_from_config(cfg, optics)
    writer.mark("ingest")

    kernel = _kernel_from_config(cfg, optics) if mode == MODE_RP_STRUCTURED else None
    channels = tuple(int(c) for c in cfg.get("channels", [0, 1, 2]))
    binning = cfg.get("binning", BINNING_EXACT)
    try:
        request = CompositeRequest(
            scene=scene,
            mode=mode,
            frames=1 if mode == MODE_SP_SMOOTH else frames,
            seed=seed,
            binning=BINNING_EXACT if binning == BINNING_EXACT else BINNING_LAYERED,
            kernel=kernel,
            channels=channels,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if mode == MODE_SP_SMOOTH and frames != 1:
        raise ConfigError("sp_smooth is single-frame; set frames: 1")
    hologram = time_multiplex(request, workers=args.threads)
    writer.mark("composite")

    write_hologram(writer.path("hologram.bin"), hologram)
    writer.mark("serialize")
    manifest = writer.finish()
    print(f"wrote {writer.dir / 'hologram.bin'} ({frames} frame(s), mode {mode})")
    print(f"manifest: {manifest}")
    return EXIT_OK


def _load_container(path: str):
    try:
        return read_hologram(path)
    except FileNotFoundError:
        raise ContainerError(f"{path}: no such file") from None


def cmd_focalstack(args) -> int:
    cfg = load_config(args.config)
    node = cfg.get("focal_stack")
    if node is None:
        raise ConfigError("focal_stack section is required")
    depths = [float(d) for d in node["depths"]]
    gamma = float(cfg.get("output", {}).get("gamma", 2.2))
    writer = RunWriter(args.out, "focalstack", cfg, None)
    hologram = _load_container(args.input)
    writer.mark("load")
    try:
        stack = focal_stack(hologram, depths, pad=bool(node.get("pad", False)))
    except ValueError as exc:
        raise ConfigError(f"focal_stack: {exc}") from None
    writer.mark("reconstruct")
    for ch in stack.channels:
        peak = float(stack.slices[ch].max())
        for di, z in enumerate(stack.depths):
            stem = f"focal_c{ch}_d{di:03d}"
            write_png(writer.path(stem + ".png"), stack.slices[ch][di], gamma=gamma, peak=peak)
            write_pfm(writer.path(stem + ".pfm"), stack.slices[ch][di])
    writer.mark("export")
    manifest = writer.finish()
    print(f"wrote {len(stack.depths)} slice(s) x {len(stack.channels)} channel(s) to {writer.dir}")
    print(f"manifest: {manifest}")
    return EXIT_OK


def cmd_lightfield(args) -> int:
    cfg = load_config(args.config)
    node = cfg.get("light_field", {})
    views = node.get("views", [10, 10])
    gamma = float(cfg.get("output", {}).get("gamma", 2.2))
    writer = RunWriter(args.out, "lightfield", cfg, None)
    hologram = _load_container(args.input)
    writer.mark("load")
    try:
        lf = light_field_stft(
            hologram,
            window_size=int(node.get("window", 64)),
            stride=int(node.get("stride", node.get("window", 64) // 2)),
            view_grid=(int(views[0]), int(views[1])),
        )
    except ValueError as exc:
        raise ConfigError(f"light_field: {exc}") from None
    writer.mark("reconstruct")
    for ch in lf.channels:
        data = lf.views[ch]
        vy, vx, hy, hx = data.shape
        mosaic = data.transpose(0, 2, 1, 3).reshape(vy * hy, vx * hx)
        peak = float(mosaic.max())
        write_png(writer.path(f"views_c{ch}.png"), mosaic, gamma=gamma, peak=peak)
        write_pfm(writer.path(f"views_c{ch}.pfm"), mosaic)
        row = int(node.get("epipolar_row", hy // 2))
        write_png(writer.path(f"epipolar_c{ch}.png"), epipolar(lf, row, ch), gamma=gamma)
    writer.mark("export")
    manifest = writer.finish()
    print(f"wrote {len(lf.channels)} view mosaic(s) to {writer.dir}")
    print(f"manifest: {manifest}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = load_config(args.config)
    writer = RunWriter(args.out, "analyze", cfg, None)
    hologram = _load_container(args.input)
    writer.mark("load")
    report = bandwidth_report(hologram)
    writer.mark("analyze")
    text = format_bandwidth_report(report)
    writer.path("bandwidth.txt").write_text(text + "\n")
    writer.path("bandwidth.csv").write_text(bandwidth_report_csv(report))
    writer.mark("export")
    manifest = writer.finish()
    print(text)
    print(f"manifest: {manifest}")
    return EXIT_OK


def cmd_encode(args) -> int:
    cfg = load_config(args.config)
    node = cfg.get("encode", {})
    channel = int(node.get("channel", 0))
    frame = int(node.get("frame", 1))
    writer = RunWriter(args.out, "encode", cfg, int(node.get("seed", 0)) if "seed" in node else None)
    hologram = _load_container(args.input)
    writer.mark("load")
    if channel not in hologram.channels:
        raise ConfigError(f"encode.channel: container has channels {hologram.channels}")
    if not 1 <= frame <= hologram.n_frames:
        raise ConfigError(f"encode.frame: container has {hologram.n_frames} frame(s)")
    slm_field = hologram.frames[channel][frame - 1]
    distance = float(node.get("distance", 0.04))
    from .propagation import propagate

    target = propagate(slm_field, distance)
    try:
        problem = EncodeProblem(
            target=target,
            distance=distance,
            iterations=int(node.get("iterations", 200)),
            step_size=float(node.get("step_size", 0.5)),
            init=str(node.get("init", "random")),
            seed=int(node.get("seed", 0)),
            scale_free=bool(node.get("scale_free", True)),
        )
        pattern = encode(problem)
    except ValueError as exc:
        raise ConfigError(f"encode: {exc}") from None
    writer.mark("encode")
    write_phase_png(writer.path("phase.png"), pattern.phase)
    write_pfm(writer.path("phase.pfm"), pattern.phase)
    trace_lines = ["iteration,loss"] + [
        f"{i},{v:.9e}" for i, v in enumerate(pattern.loss_trace)
    ]
    writer.path("loss_trace.csv").write_text("\n".join(trace_lines) + "\n")
    writer.mark("export")
    manifest = writer.finish()
    print(
        f"encoded {pattern.shape[0]}x{pattern.shape[1]} phase pattern, "
        f"final loss {pattern.loss_trace[-1]:.6e}"
    )
    print(f"manifest: {manifest}")
    return EXIT_OK


def _load_image_any(path: str) -> np.ndarray:
    p = Path(path)
    if not p.exists():
        raise OSError(f"{path}: no such file")
    if p.suffix.lower() == ".pfm":
        return np.asarray(read_pfm(path), dtype=np.float64)
    return read_png_gray(path)


def cmd_metrics(args) -> int:
    a = _load_image_any(args.a)
    b = _load_image_any(args.b)
    if a.shape != b.shape:
        raise ConfigError(f"image shapes differ: {a.shape} vs {b.shape}")
    peak = float(max(a.max(), b.max()))
    if peak <= 0:
        raise ConfigError("both images are empty; metrics undefined")
    result = {
        "psnr_db": psnr(a, b, peak=peak),
        "ssim": ssim(a, b, peak=peak),
    }
    print(json.dumps(result, indent=2, sort_keys=True))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="holosplat",
        description="Compose, reconstruct, and analyze splat-based holograms.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("hologram", help="composite a splat scene into a hologram container")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--frames", type=int, default=None, help="override the config frame count")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_hologram)

    p = sub.add_parser("focalstack", help="refocus a hologram container at fixed depths")
    p.add_argument("--config", required=True)
    p.add_argument("--input", required=True, help="hologram container")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_focalstack)

    p = sub.add_parser("lightfield", help="windowed view decomposition of a container")
    p.add_argument("--config", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lightfield)

    p = sub.add_parser("analyze", help="bandwidth utilization report for a container")
    p.add_argument("--config", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("encode", help="phase-only encoding of one container frame")
    p.add_argument("--config", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("metrics", help="PSNR/SSIM between two images (PNG or PFM)")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", default=None, help="optional JSON output path")
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PlyParseError, ContainerError, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ArithmeticError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
