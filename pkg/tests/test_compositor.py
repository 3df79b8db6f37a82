"""Occlusion-aware compositing: transmittance, emission weighting, frames."""

import numpy as np
import pytest

from holosplat.compositor import (
    CompositeRequest,
    TimeMultiplexedHologram,
    composite_rp_frame,
    composite_sp,
    prepare_footprints,
    time_multiplex,
    transmittance_mask,
)
from holosplat.field import WaveField, intensity, rel_l2
from holosplat.kernels import kernel_pupil, kernel_uniform
from holosplat.propagation import propagate
from holosplat.splats import BACK_TO_FRONT, FRONT_TO_BACK

from conftest import (
    PITCH,
    flat_footprint,
    gaussian_amplitude,
    gaussian_prim,
    optics,
    scene_of,
)


def ones_draw(shape):
    """Modulation override that freezes every random phase at zero."""
    grid = np.ones(shape, dtype=np.complex128)
    return lambda pid, t: grid


class TestTransmittance:
    def test_known_values(self):
        fp = flat_footprint(np.array([[0.0, 0.5, 1.0]]), 0.0, 0)
        assert np.allclose(transmittance_mask(fp, 1.0), [[1.0, np.sqrt(0.5), 0.0]], atol=1e-15)
        assert np.array_equal(transmittance_mask(fp, 0.0), np.ones((1, 3)))
        half = flat_footprint(np.array([[0.5]]), 0.0, 0)
        assert transmittance_mask(half, 0.5)[0, 0] == pytest.approx(np.sqrt(0.75), abs=1e-15)

    def test_clips_oversaturated_product(self):
        fp = flat_footprint(np.array([[1.2]]), 0.0, 0)
        assert transmittance_mask(fp, 1.0)[0, 0] == 0.0


class TestRandomPhase:
    def test_single_primitive_refocuses_to_emission(self, opt64):
        z = 2e-3
        p = gaussian_prim(1, z, opacity=0.8, color=(0.49, 0.49, 0.49))
        scene = scene_of([p], opt64, BACK_TO_FRONT)
        req = CompositeRequest(scene, "rp_spatial", frames=1, channels=(1,))
        fp = prepare_footprints(scene)[1]
        frame = composite_rp_frame(req, 1, draw_fn=ones_draw(opt64.shape))[1]
        assert frame.plane_z == opt64.slm_z

        recovered = propagate(frame, z)
        k = opt64.wavenumber(1)
        expected = np.sqrt(0.49) * np.sqrt(0.8 * fp.amplitude) * np.exp(1j * k * z)
        assert np.max(np.abs(recovered.samples - expected)) < 1e-9

    def test_opaque_cover_erases_background(self, opt32):
        shape = opt32.shape
        front = gaussian_prim(1, 2e-3, opacity=1.0, color=(0.6, 0.6, 0.6))
        back = gaussian_prim(2, 3e-3, opacity=0.7, color=(0.3, 0.3, 0.3))
        fps = {
            1: flat_footprint(np.ones(shape), 2e-3, 1),
            2: flat_footprint(gaussian_amplitude(32, 6.0), 3e-3, 2),
        }
        both = CompositeRequest(scene_of([front, back], opt32, BACK_TO_FRONT), "rp_spatial", seed=5)
        alone = CompositeRequest(scene_of([front], opt32, BACK_TO_FRONT), "rp_spatial", seed=5)
        for ch in (0, 1, 2):
            a = composite_rp_frame(both, 1, footprints=fps)[ch]
            b = composite_rp_frame(alone, 1, footprints={1: fps[1]})[ch]
            assert np.array_equal(a.samples, b.samples)

    def test_zero_opacity_scene_is_dark(self, opt32):
        prims = [gaussian_prim(i, (i + 1) * 1e-3, opacity=0.0) for i in range(3)]
        req = CompositeRequest(scene_of(prims, opt32, BACK_TO_FRONT), "rp_spatial", frames=2)
        holo = time_multiplex(req)
        for fields in holo.frames.values():
            for f in fields:
                assert np.all(f.samples == 0.0)

    def test_expected_intensity_follows_occlusion_weights(self, opt64):
        # Three full-aperture translucent layers: the time average of |g|^2
        # at the SLM obeys the front-to-back product weights.
        shape = opt64.shape
        prims = [
            gaussian_prim(i, z, opacity=0.5, color=(1.0, 1.0, 1.0))
            for i, z in enumerate((3e-3, 2e-3, 1e-3))
        ]
        fps = {i: flat_footprint(np.ones(shape), float(p.mean[2]), i) for i, p in enumerate(prims)}
        scene = scene_of(prims, opt64, BACK_TO_FRONT)
        req = CompositeRequest(scene, "rp_spatial", frames=16, seed=11, channels=(1,))
        acc = 0.0
        for t in range(1, 17):
            g = composite_rp_frame(req, t, footprints=fps)[1]
            acc += np.mean(intensity(g))
        mean_i = acc / 16.0
        # Front to back: 0.5, then 0.5 * (1 - 0.5), then 0.5 * (1 - 0.5)^2.
        expected = 0.5 + 0.25 + 0.125
        assert abs(mean_i - expected) / expected < 0.02

    def test_color_scale_quadruples_to_double_field(self, opt32):
        z_list = (1e-3, 2e-3)
        base = [gaussian_prim(i, z, color=(0.2, 0.2, 0.2)) for i, z in enumerate(z_list)]
        bright = [gaussian_prim(i, z, color=(0.8, 0.8, 0.8)) for i, z in enumerate(z_list)]
        req_a = CompositeRequest(scene_of(base, opt32, BACK_TO_FRONT), "rp_spatial", seed=3, channels=(0,))
        req_b = CompositeRequest(scene_of(bright, opt32, BACK_TO_FRONT), "rp_spatial", seed=3, channels=(0,))
        a = composite_rp_frame(req_a, 1)[0]
        b = composite_rp_frame(req_b, 1)[0]
        assert np.array_equal(2.0 * a.samples, b.samples)

    def test_frame_index_starts_at_one(self, opt32):
        req = CompositeRequest(scene_of([gaussian_prim(0, 1e-3)], opt32, BACK_TO_FRONT), "rp_spatial")
        with pytest.raises(ValueError, match="frame index"):
            composite_rp_frame(req, 0)


class TestSmoothPhase:
    def test_single_primitive_is_backpropagated_wavefront(self, opt64):
        z = 1.5e-3
        p = gaussian_prim(1, z, opacity=0.6, color=(0.49, 0.49, 0.49))
        scene = scene_of([p], opt64, FRONT_TO_BACK)
        fp = prepare_footprints(scene)[1]
        got = composite_sp(scene, channels=(1,))[1]

        k = opt64.wavenumber(1)
        term = np.sqrt(0.49) * 0.6 * fp.amplitude * np.exp(1j * k * z)
        expected = propagate(WaveField(term, PITCH, opt64.wavelengths[1], z), -z)
        assert rel_l2(got.samples, expected.samples) < 1e-13
        assert got.plane_z == opt64.slm_z

    def test_two_flat_layers_carry_product_weights(self, opt32):
        # Full-aperture unit-amplitude layers reduce to DC plane waves, so
        # the SLM field is the sum of the occlusion-weighted coefficients.
        shape = opt32.shape
        prims = [
            gaussian_prim(1, 1e-3, opacity=0.5, color=(1.0, 1.0, 1.0)),
            gaussian_prim(2, 2e-3, opacity=0.5, color=(1.0, 1.0, 1.0)),
        ]
        fps = {p.id: flat_footprint(np.ones(shape), float(p.mean[2]), p.id) for p in prims}
        scene = scene_of(prims, opt32, FRONT_TO_BACK)
        got = composite_sp(scene, channels=(1,), footprints=fps)[1]
        assert np.allclose(got.samples, 0.5 + 0.5 * 0.5, atol=1e-9)

    def test_direct_matches_recurrence(self, opt64):
        prims = [
            gaussian_prim(0, 1e-3, x=3 * PITCH, sigma=6 * PITCH, opacity=0.9, color=(0.8, 0.5, 0.2)),
            gaussian_prim(1, 2e-3, y=-4 * PITCH, sigma=10 * PITCH, opacity=0.4, color=(0.1, 0.9, 0.3)),
            gaussian_prim(2, 3e-3, x=-2 * PITCH, sigma=8 * PITCH, sigma2=4 * PITCH, opacity=0.7),
        ]
        scene = scene_of(prims, opt64, FRONT_TO_BACK)
        fps = prepare_footprints(scene)
        direct = composite_sp(scene, style="direct", footprints=fps)
        recur = composite_sp(scene, style="recurrence", footprints=fps)
        for ch in (0, 1, 2):
            assert rel_l2(direct[ch].samples, recur[ch].samples) < 1e-9

    def test_all_primitives_at_slm_plane_collapse_to_blend(self, opt32):
        prims = [
            gaussian_prim(0, 0.0, x=2 * PITCH, opacity=0.8, color=(0.9, 0.9, 0.9)),
            gaussian_prim(1, 0.0, x=-2 * PITCH, opacity=0.5, color=(0.4, 0.4, 0.4)),
            gaussian_prim(2, 0.0, y=3 * PITCH, opacity=0.3, color=(0.7, 0.7, 0.7)),
        ]
        scene = scene_of(prims, opt32, FRONT_TO_BACK)
        fps = prepare_footprints(scene)
        got = composite_sp(scene, channels=(0,), footprints=fps)[0]

        t_acc = np.ones(opt32.shape)
        blend = np.zeros(opt32.shape)
        for p in scene.primitives:
            a = fps[p.id].amplitude
            blend = blend + np.sqrt(p.color[0]) * p.opacity * a * t_acc
            t_acc = t_acc * (1.0 - p.opacity * a)
        assert rel_l2(got.samples, blend) < 1e-9

    def test_unknown_style_rejected(self, opt32):
        scene = scene_of([gaussian_prim(0, 1e-3)], opt32, FRONT_TO_BACK)
        with pytest.raises(ValueError, match="style"):
            composite_sp(scene, style="fast")

    def test_wrong_order_rejected(self, opt32):
        scene = scene_of([gaussian_prim(0, 1e-3)], opt32, BACK_TO_FRONT)
        with pytest.raises(ValueError, match="front_to_back"):
            composite_sp(scene)


class TestBinning:
    def test_layered_matches_exact_for_uniform_spacing(self, opt32):
        # Powers-of-two depths make the layer planes land exactly on the
        # primitive depths, so both binnings run the same arithmetic.
        step = 2.0**-9
        prims = [gaussian_prim(i, (i + 1) * step, x=(i - 2) * PITCH) for i in range(4)]
        exact = CompositeRequest(
            scene_of(prims, opt32, BACK_TO_FRONT), "rp_spatial", frames=2, seed=7
        )
        layered = CompositeRequest(
            scene_of(prims, opt32, BACK_TO_FRONT, n_layers=4),
            "rp_spatial",
            frames=2,
            seed=7,
            binning="layered",
        )
        a = time_multiplex(exact)
        b = time_multiplex(layered)
        for ch in a.channels:
            for fa, fb in zip(a.frames[ch], b.frames[ch]):
                assert np.array_equal(fa.samples, fb.samples)

    def test_layered_needs_layers(self, opt32):
        scene = scene_of([gaussian_prim(0, 1e-3)], opt32, BACK_TO_FRONT)
        with pytest.raises(ValueError, match="layers"):
            CompositeRequest(scene, "rp_spatial", binning="layered")


class TestMultiplex:
    def test_single_frame_equals_frame_call(self, opt32):
        scene = scene_of([gaussian_prim(0, 1e-3), gaussian_prim(1, 2e-3)], opt32, BACK_TO_FRONT)
        req = CompositeRequest(scene, "rp_spatial", frames=1, seed=2)
        holo = time_multiplex(req)
        direct = composite_rp_frame(req, 1)
        for ch in (0, 1, 2):
            assert np.array_equal(holo.frames[ch][0].samples, direct[ch].samples)

    def test_seed_determinism(self, opt32):
        scene = scene_of([gaussian_prim(0, 1e-3)], opt32, BACK_TO_FRONT)
        a = time_multiplex(CompositeRequest(scene, "rp_spatial", frames=3, seed=4))
        b = time_multiplex(CompositeRequest(scene, "rp_spatial", frames=3, seed=4))
        c = time_multiplex(CompositeRequest(scene, "rp_spatial", frames=3, seed=5))
        for ch in (0, 1, 2):
            for fa, fb in zip(a.frames[ch], b.frames[ch]):
                assert np.array_equal(fa.samples, fb.samples)
        assert not np.array_equal(a.frames[0][0].samples, c.frames[0][0].samples)

    def test_worker_count_does_not_change_output(self, opt32):
        scene = scene_of([gaussian_prim(0, 1e-3), gaussian_prim(1, 2e-3)], opt32, BACK_TO_FRONT)
        req = CompositeRequest(scene, "rp_structured", frames=4, seed=9, kernel=kernel_uniform(opt32.shape))
        serial = time_multiplex(req, workers=1)
        threaded = time_multiplex(req, workers=3)
        for ch in (0, 1, 2):
            for fa, fb in zip(serial.frames[ch], threaded.frames[ch]):
                assert np.array_equal(fa.samples, fb.samples)

    def test_metadata_recorded(self, opt32):
        scene = scene_of([gaussian_prim(0, 1e-3)], opt32, BACK_TO_FRONT)
        req = CompositeRequest(scene, "rp_spatial", frames=2, seed=6)
        holo = time_multiplex(req)
        assert holo.mode == "rp_spatial"
        assert holo.seed == 6
        assert holo.n_frames == 2
        assert holo.channels == (0, 1, 2)
        assert holo.scene_digest == scene.digest()

    def test_smooth_phase_multiplex_is_single_frame(self, opt32):
        scene = scene_of([gaussian_prim(0, 1e-3)], opt32, FRONT_TO_BACK)
        holo = time_multiplex(CompositeRequest(scene, "sp_smooth"))
        assert holo.n_frames == 1
        ref = composite_sp(scene)
        for ch in (0, 1, 2):
            assert np.array_equal(holo.frames[ch][0].samples, ref[ch].samples)


class TestRequestValidation:
    def test_smooth_phase_rejects_multiframe(self, opt32):
        scene = scene_of([gaussian_prim(0, 1e-3)], opt32, FRONT_TO_BACK)
        with pytest.raises(ValueError, match="single-frame"):
            CompositeRequest(scene, "sp_smooth", frames=8)

    def test_rp_needs_back_to_front(self, opt32):
        scene = scene_of([gaussian_prim(0, 1e-3)], opt32, FRONT_TO_BACK)
        with pytest.raises(ValueError, match="back_to_front"):
            CompositeRequest(scene, "rp_spatial")

    def test_unknown_mode(self, opt32):
        scene = scene_of([gaussian_prim(0, 1e-3)], opt32, BACK_TO_FRONT)
        with pytest.raises(ValueError, match="mode"):
            CompositeRequest(scene, "hybrid")

    def test_structured_needs_kernel(self, opt32):
        scene = scene_of([gaussian_prim(0, 1e-3)], opt32, BACK_TO_FRONT)
        with pytest.raises(ValueError, match="kernel"):
            CompositeRequest(scene, "rp_structured")

    def test_kernel_shape_must_match_grid(self, opt32):
        scene = scene_of([gaussian_prim(0, 1e-3)], opt32, BACK_TO_FRONT)
        with pytest.raises(ValueError, match="shape"):
            CompositeRequest(scene, "rp_structured", kernel=kernel_uniform((16, 16)))

    def test_override_for_unknown_primitive(self, opt32):
        scene = scene_of([gaussian_prim(0, 1e-3)], opt32, BACK_TO_FRONT)
        with pytest.raises(ValueError, match="unknown primitives"):
            CompositeRequest(
                scene,
                "rp_structured",
                kernel=kernel_uniform(opt32.shape),
                kernel_overrides={7: kernel_uniform(opt32.shape)},
            )

    def test_partial_overrides_need_default(self, opt32):
        scene = scene_of([gaussian_prim(0, 1e-3), gaussian_prim(1, 2e-3)], opt32, BACK_TO_FRONT)
        with pytest.raises(ValueError, match="default"):
            CompositeRequest(
                scene, "rp_structured", kernel_overrides={0: kernel_uniform(opt32.shape)}
            )

    def test_duplicate_channels(self, opt32):
        scene = scene_of([gaussian_prim(0, 1e-3)], opt32, BACK_TO_FRONT)
        with pytest.raises(ValueError, match="duplicate"):
            CompositeRequest(scene, "rp_spatial", channels=(1, 1))

    def test_channel_subset_respected(self, opt32):
        scene = scene_of([gaussian_prim(0, 1e-3)], opt32, BACK_TO_FRONT)
        holo = time_multiplex(CompositeRequest(scene, "rp_spatial", channels=(2,)))
        assert holo.channels == (2,)


class TestStructuredMode:
    def test_kernel_override_changes_output(self, opt32):
        scene = scene_of([gaussian_prim(0, 1e-3), gaussian_prim(1, 2e-3)], opt32, BACK_TO_FRONT)
        uniform = kernel_uniform(opt32.shape)
        pupil = kernel_pupil(opt32.shape, PITCH, 0.4 * np.pi / PITCH)
        plain = composite_rp_frame(CompositeRequest(scene, "rp_structured", seed=1, kernel=uniform), 1)
        mixed = composite_rp_frame(
            CompositeRequest(
                scene, "rp_structured", seed=1, kernel=uniform, kernel_overrides={1: pupil}
            ),
            1,
        )
        assert not np.array_equal(plain[0].samples, mixed[0].samples)
        for ch in (0, 1, 2):
            assert np.all(np.isfinite(mixed[ch].samples))


class TestHologramContainerChecks:
    def test_mismatched_frame_counts(self, opt32):
        f = WaveField(np.zeros(opt32.shape, dtype=complex), PITCH, opt32.wavelengths[0], opt32.slm_z)
        with pytest.raises(ValueError, match="frame counts"):
            TimeMultiplexedHologram(
                frames={0: (f, f), 1: (f,)},
                mode="rp_spatial",
                seed=0,
                scene_digest="d",
                optics=opt32,
            )

    def test_frames_off_slm_plane(self, opt32):
        f = WaveField(np.zeros(opt32.shape, dtype=complex), PITCH, opt32.wavelengths[0], 1e-3)
        with pytest.raises(ValueError, match="SLM"):
            TimeMultiplexedHologram(
                frames={0: (f,)}, mode="rp_spatial", seed=0, scene_digest="d", optics=opt32
            )
