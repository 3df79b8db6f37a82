"""Wave-domain compositing of Gaussian primitives into SLM-plane holograms.

Two routes are provided.  The random-phase route walks the scene from the
farthest plane toward the SLM, at each plane attenuating the incoming field
by a transmittance mask ``sqrt(1 - o * a)`` and adding the plane's own
emission ``sqrt(c) * sqrt(o * a) * exp(i k z)`` times a per-primitive random
modulation, then propagating to the next plane.  Averaging reconstructions
over frames makes this compositing exact for intensities.  The smooth-phase
route instead accumulates on-axis transmittance front-to-back and sums each
primitive's independently back-propagated contribution, which yields a
low-bandwidth hologram with no speckle and no time multiplexing.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .field import OpticsConfig, WaveField
from .kernels import (
    MODE_SPATIAL,
    MODE_STRUCTURED,
    SpectralKernel,
    sample_spatial,
    sample_structured,
)
from .propagation import propagate
from .splats import BACK_TO_FRONT, FRONT_TO_BACK, GaussianPrimitive, HologramScene
from .wavefront import PrimitiveFootprint, rasterize_gaussian

MODE_RP_SPATIAL = "rp_spatial"
MODE_RP_STRUCTURED = "rp_structured"
MODE_SP_SMOOTH = "sp_smooth"

MODES = (MODE_RP_SPATIAL, MODE_RP_STRUCTURED, MODE_SP_SMOOTH)

BINNING_EXACT = "exact"
BINNING_LAYERED = "layered"

#: Signature of a modulation override: (primitive id, frame index) -> grid.
DrawFn = Callable[[int, int], np.ndarray]


@dataclass(frozen=True, eq=False)
class CompositeRequest:
    """Everything needed to composite one scene into hologram frames."""

    scene: HologramScene
    mode: str
    frames: int = 1
    seed: int = 0
    binning: str = BINNING_EXACT
    kernel: SpectralKernel | None = None
    kernel_overrides: Mapping[int, SpectralKernel] | None = None
    channels: tuple[int, ...] = (0, 1, 2)
    band_limited: bool | None = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown compositing mode {self.mode!r}")
        if len(self.scene.primitives) == 0:
            raise ValueError("scene has no primitives")
        if self.frames < 1:
            raise ValueError(f"frame count must be positive, got {self.frames}")
        if self.binning not in (BINNING_EXACT, BINNING_LAYERED):
            raise ValueError(f"unknown binning {self.binning!r}")
        if self.binning == BINNING_LAYERED and self.scene.layers is None:
            raise ValueError("layered compositing requires a scene with layers")
        if self.mode == MODE_SP_SMOOTH:
            if self.frames != 1:
                raise ValueError("smooth-phase compositing is single-frame; set frames=1")
            if self.scene.order != FRONT_TO_BACK:
                raise ValueError("smooth-phase compositing requires a front_to_back scene")
        else:
            if self.scene.order != BACK_TO_FRONT:
                raise ValueError("random-phase compositing requires a back_to_front scene")
        if self.mode == MODE_RP_STRUCTURED:
            shape = self.scene.optics.shape
            if self.kernel is None and not self.kernel_overrides:
                raise ValueError("structured mode needs a spectral kernel")
            for kern in self._kernel_set():
                if kern.shape != shape:
                    raise ValueError(
                        f"kernel shape {kern.shape} does not match grid {shape}"
                    )
            if self.kernel_overrides:
                known = {p.id for p in self.scene.primitives}
                stray = set(self.kernel_overrides) - known
                if stray:
                    raise ValueError(f"kernel overrides for unknown primitives {sorted(stray)}")
                if self.kernel is None and known - set(self.kernel_overrides):
                    raise ValueError("primitives without a kernel override need a default kernel")
        for ch in self.channels:
            self.scene.optics.check_channel(ch)
        if len(set(self.channels)) != len(self.channels):
            raise ValueError("duplicate channel indices")

    def _kernel_set(self) -> list[SpectralKernel]:
        kerns = [] if self.kernel is None else [self.kernel]
        if self.kernel_overrides:
            kerns.extend(self.kernel_overrides.values())
        return kerns

    def kernel_for(self, primitive_id: int) -> SpectralKernel:
        if self.kernel_overrides and primitive_id in self.kernel_overrides:
            return self.kernel_overrides[primitive_id]
        assert self.kernel is not None
        return self.kernel


@dataclass(frozen=True, eq=False)
class TimeMultiplexedHologram:
    """SLM-plane frame sets per color channel, plus how they were made."""

    frames: Mapping[int, tuple[WaveField, ...]]
    mode: str
    seed: int
    scene_digest: str
    optics: OpticsConfig

    @property
    def channels(self) -> tuple[int, ...]:
        return tuple(sorted(self.frames))

    @property
    def n_frames(self) -> int:
        return len(next(iter(self.frames.values())))

    def __post_init__(self) -> None:
        counts = {len(v) for v in self.frames.values()}
        if len(counts) != 1:
            raise ValueError("channels carry different frame counts")
        for fields in self.frames.values():
            for f in fields:
                if f.plane_z != self.optics.slm_z:
                    raise ValueError("hologram frames must live on the SLM plane")


def transmittance_mask(fp: PrimitiveFootprint, opacity: float) -> np.ndarray:
    """Amplitude transmittance sqrt(max(0, 1 - o * a)) of one footprint."""
    return np.sqrt(np.clip(1.0 - opacity * fp.amplitude, 0.0, None))


def _color_weight(color_value: float, domain: str) -> float:
    """Emission amplitude weight for one channel's color coefficient."""
    return float(np.sqrt(color_value)) if domain == "intensity" else float(color_value)


def prepare_footprints(scene: HologramScene) -> dict[int, PrimitiveFootprint]:
    """Rasterize every primitive once; reusable across frames and channels."""
    return {p.id: rasterize_gaussian(p, scene.optics) for p in scene.primitives}


@dataclass(frozen=True, eq=False)
class _Station:
    plane_z: float
    members: tuple[GaussianPrimitive, ...]


def _stations(req: CompositeRequest) -> list[_Station]:
    scene = req.scene
    if req.binning == BINNING_EXACT:
        return [_Station(float(p.mean[2]), (p,)) for p in scene.primitives]
    by_id = {p.id: p for p in scene.primitives}
    assert scene.layers is not None
    out = []
    for layer_z, member_ids in scene.layers:
        out.append(_Station(float(layer_z), tuple(by_id[i] for i in member_ids)))
    return out


def _default_draw_fn(req: CompositeRequest) -> DrawFn:
    shape = req.scene.optics.shape

    def draw(primitive_id: int, t: int) -> np.ndarray:
        if req.mode == MODE_RP_SPATIAL:
            return sample_spatial(shape, req.seed, t, scope=primitive_id).modulation
        return sample_structured(req.kernel_for(primitive_id), req.seed, t, scope=primitive_id).modulation

    return draw


def composite_rp_frame(
    req: CompositeRequest,
    t: int,
    footprints: Mapping[int, PrimitiveFootprint] | None = None,
    draw_fn: DrawFn | None = None,
) -> dict[int, WaveField]:
    """Composite one random-phase frame; returns SLM fields per channel.

    ``footprints`` admits precomputed or synthetic amplitude patterns keyed
    by primitive id; ``draw_fn`` overrides the modulation source, e.g. for
    custom per-primitive spectral shaping.
    """
    if req.mode not in (MODE_RP_SPATIAL, MODE_RP_STRUCTURED):
        raise ValueError(f"composite_rp_frame needs a random-phase mode, got {req.mode!r}")
    if t < 1:
        raise ValueError(f"frame index starts at 1, got {t}")
    scene = req.scene
    cfg = scene.optics
    if footprints is None:
        footprints = prepare_footprints(scene)
    if draw_fn is None:
        draw_fn = _default_draw_fn(req)
    stations = _stations(req)

    draws = {p.id: draw_fn(p.id, t) for st in stations for p in st.members}
    masks = {}
    roots = {}
    for st in stations:
        for p in st.members:
            fp = footprints[p.id]
            o_a = p.opacity * fp.amplitude
            masks[p.id] = np.sqrt(np.clip(1.0 - o_a, 0.0, None))
            roots[p.id] = np.sqrt(o_a)

    out: dict[int, WaveField] = {}
    for ch in req.channels:
        lam = cfg.wavelengths[ch]
        k = cfg.wavenumber(ch)
        weights = {
            p.id: _color_weight(p.color[ch], scene.color_domain)
            for st in stations
            for p in st.members
        }
        g = WaveField(np.zeros(cfg.shape, dtype=np.complex128), cfg.pixel_pitch, lam, stations[0].plane_z)
        for idx, st in enumerate(stations):
            carrier = np.exp(1j * k * st.plane_z)
            samples = g.samples
            for p in st.members:
                emission = (weights[p.id] * carrier) * roots[p.id] * draws[p.id]
                samples = masks[p.id] * samples + emission
            g = g.with_samples(samples)
            next_z = stations[idx + 1].plane_z if idx + 1 < len(stations) else cfg.slm_z
            g = propagate(g, next_z - st.plane_z, band_limited=req.band_limited)
        # Signed-step bookkeeping can leave plane_z a few ulp off the SLM.
        out[ch] = g.with_samples(g.samples, plane_z=cfg.slm_z)
    return out


def composite_sp(
    scene: HologramScene,
    channels: tuple[int, ...] = (0, 1, 2),
    style: str = "direct",
    footprints: Mapping[int, PrimitiveFootprint] | None = None,
    band_limited: bool | None = None,
) -> dict[int, WaveField]:
    """Smooth-phase hologram: occlusion-weighted sum of carrier wavefronts.

    Transmittance accumulates on-axis (no mask propagation): primitive ``i``
    contributes ``c * o * a * T_i * exp(i k z_i)`` back-propagated to the
    SLM, with ``T_i`` the product of ``1 - o * a`` over all nearer
    primitives.  ``style='recurrence'`` evaluates the same sum by walking
    plane to plane; both agree to propagation roundoff.
    """
    if scene.order != FRONT_TO_BACK:
        raise ValueError("smooth-phase compositing requires a front_to_back scene")
    if style not in ("direct", "recurrence"):
        raise ValueError(f"unknown evaluation style {style!r}")
    if len(scene.primitives) == 0:
        raise ValueError("scene has no primitives")
    cfg = scene.optics
    for ch in channels:
        cfg.check_channel(ch)
    if footprints is None:
        footprints = prepare_footprints(scene)

    # On-axis transmittance per primitive, accumulated front to back.
    trans: dict[int, np.ndarray] = {}
    t_acc = np.ones(cfg.shape)
    for p in scene.primitives:
        trans[p.id] = t_acc
        t_acc = t_acc * np.clip(1.0 - p.opacity * footprints[p.id].amplitude, 0.0, None)

    out: dict[int, WaveField] = {}
    for ch in channels:
        lam = cfg.wavelengths[ch]
        k = cfg.wavenumber(ch)

        def term(p: GaussianPrimitive) -> np.ndarray:
            w = _color_weight(p.color[ch], scene.color_domain)
            z = float(p.mean[2])
            return (w * p.opacity) * footprints[p.id].amplitude * trans[p.id] * np.exp(1j * k * z)

        if style == "direct":
            acc = np.zeros(cfg.shape, dtype=np.complex128)
            for p in scene.primitives:
                z = float(p.mean[2])
                contrib = propagate(
                    WaveField(term(p), cfg.pixel_pitch, lam, z),
                    cfg.slm_z - z,
                    band_limited=band_limited,
                )
                acc = acc + contrib.samples
            out[ch] = WaveField(acc, cfg.pixel_pitch, lam, cfg.slm_z)
        else:
            back_first = list(reversed(scene.primitives))
            g = WaveField(
                np.zeros(cfg.shape, dtype=np.complex128),
                cfg.pixel_pitch,
                lam,
                float(back_first[0].mean[2]),
            )
            for idx, p in enumerate(back_first):
                g = g.with_samples(g.samples + term(p))
                next_z = (
                    float(back_first[idx + 1].mean[2])
                    if idx + 1 < len(back_first)
                    else cfg.slm_z
                )
                g = propagate(g, next_z - float(p.mean[2]), band_limited=band_limited)
            out[ch] = g.with_samples(g.samples, plane_z=cfg.slm_z)
    return out


def time_multiplex(req: CompositeRequest, workers: int = 1) -> TimeMultiplexedHologram:
    """Composite all requested frames into a time-multiplexed hologram.

    Frames are keyed by their index alone, so any worker count produces
    bit-identical output.
    """
    footprints = prepare_footprints(req.scene)
    if req.mode == MODE_SP_SMOOTH:
        per_channel = composite_sp(
            req.scene, req.channels, footprints=footprints, band_limited=req.band_limited
        )
        frames = {ch: (f,) for ch, f in per_channel.items()}
    else:
        draw_fn = _default_draw_fn(req)
        indices = range(1, req.frames + 1)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(
                    pool.map(lambda t: composite_rp_frame(req, t, footprints, draw_fn), indices)
                )
        else:
            results = [composite_rp_frame(req, t, footprints, draw_fn) for t in indices]
        frames = {ch: tuple(r[ch] for r in results) for ch in req.channels}
    return TimeMultiplexedHologram(
        frames=frames,
        mode=req.mode,
        seed=req.seed,
        scene_digest=req.scene.digest(),
        optics=req.scene.optics,
    )
