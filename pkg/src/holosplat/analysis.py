"""Defocus spread prediction and spectral bandwidth reporting.

The lateral spread of a reconstruction slice is summarized by the
centroid-centered, energy-normalized second moment of its intensity.  For a
field u at the emitter plane the spread at defocus z decomposes into a
spatial term (the in-focus moment) plus ``(z/k)^2`` times the same moment of
the power spectrum: broadband emission defocuses fast, narrowband emission
stays compact.  Using centered normalized moments (rather than raw
un-normalized integrals) keeps the two sides comparable for any field
energy and removes tilt-induced drift.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .compositor import TimeMultiplexedHologram
from .field import WaveField, coordinate_grid, frequency_grid, intensity
from .propagation import propagate, psd


class PredictedVariance(NamedTuple):
    total: float
    spatial: float
    angular: float


@dataclass(frozen=True, eq=False)
class VarianceReport:
    """Measured vs predicted intensity spread over a set of depths.

    ``angular_coefficient`` is the predicted quadratic growth rate in
    m^2 per m^2 of defocus (the kernel's angular moment over k^2).
    """

    depths: tuple[float, ...]
    measured: tuple[float, ...]
    predicted: tuple[float, ...]
    spatial_term: float
    angular_coefficient: float


@dataclass(frozen=True, eq=False)
class BandwidthChannelReport:
    channel: int
    coverage: float
    cov: float
    radial_k: np.ndarray
    radial_psd: np.ndarray


@dataclass(frozen=True, eq=False)
class BandwidthReport:
    """Per-channel eyebox utilization of a hologram's mean PSD."""

    channels: dict[int, BandwidthChannelReport]
    threshold_fraction: float
    n_frames: int


def intensity_moment(img: np.ndarray, pitch: float) -> float:
    """Centroid-centered second moment of an intensity image, in m^2.

    ``sum |x - xbar|^2 I / sum I`` over both lateral axes; an isotropic
    Gaussian intensity of std s gives 2 s^2.
    """
    img = np.asarray(img, dtype=np.float64)
    total = float(img.sum())
    if not np.isfinite(total) or total <= 0.0:
        raise ValueError("intensity image has no energy")
    x, y = coordinate_grid(img.shape, pitch)
    xbar = float((x * img).sum()) / total
    ybar = float((y * img).sum()) / total
    return float((((x - xbar) ** 2 + (y - ybar) ** 2) * img).sum()) / total


def intensity_variance(f: WaveField) -> float:
    """Lateral spread of a field's intensity, in m^2."""
    return intensity_moment(intensity(f), f.pitch)


def spectral_moment(f: WaveField) -> float:
    """Centroid-centered second moment of the power spectrum, in rad^2/m^2."""
    p = psd(f)
    total = float(p.sum())
    if total <= 0.0:
        raise ValueError("field has no energy")
    kx, ky = frequency_grid(f.shape, f.pitch)
    kxbar = float((kx * p).sum()) / total
    kybar = float((ky * p).sum()) / total
    return float((((kx - kxbar) ** 2 + (ky - kybar) ** 2) * p).sum()) / total


def predicted_variance(u: WaveField, z: float) -> PredictedVariance:
    """Quadratic defocus-spread prediction at distance z from u's plane.

    total = spatial + (z/k)^2 * spectral moment, all terms centered and
    energy-normalized like :func:`intensity_variance`.
    """
    spatial = intensity_variance(u)
    k = 2.0 * np.pi / u.wavelength
    angular = (z / k) ** 2 * spectral_moment(u)
    return PredictedVariance(total=spatial + angular, spatial=spatial, angular=angular)


def _embed(u: WaveField, factor: int = 2) -> WaveField:
    ny, nx = u.shape
    big = np.zeros((factor * ny, factor * nx), dtype=np.complex128)
    oy, ox = (factor * ny) // 2 - ny // 2, (factor * nx) // 2 - nx // 2
    big[oy : oy + ny, ox : ox + nx] = u.samples
    return WaveField(big, u.pitch, u.wavelength, u.plane_z)


def variance_report(u: WaveField, depths: list[float] | tuple[float, ...]) -> VarianceReport:
    """Measure and predict intensity spread at each defocus depth.

    Measurement embeds the field in a 2x grid and propagates without the
    band-limiting mask so that clipped or masked tails do not bias the
    moments; depths are relative to u's plane.
    """
    depths = tuple(float(d) for d in depths)
    if len(depths) == 0:
        raise ValueError("depth list is empty")
    big = _embed(u)
    k = 2.0 * np.pi / u.wavelength
    spatial = intensity_variance(big)
    coeff = spectral_moment(big) / k**2
    measured = []
    predicted = []
    for z in depths:
        out = propagate(big, z, band_limited=False)
        measured.append(intensity_variance(out))
        predicted.append(spatial + coeff * z**2)
    return VarianceReport(
        depths=depths,
        measured=tuple(measured),
        predicted=tuple(predicted),
        spatial_term=spatial,
        angular_coefficient=coeff,
    )


def bandwidth_report(
    h: TimeMultiplexedHologram,
    threshold_fraction: float = 0.1,
    n_radial_bins: int = 24,
) -> BandwidthReport:
    """Eyebox utilization of the mean PSD over a hologram's frames.

    Coverage is the fraction of propagating-band bins whose mean PSD exceeds
    ``threshold_fraction`` of the band mean; ``cov`` is the coefficient of
    variation over the same bins; the radial profile averages the PSD in
    annuli of |k|.
    """
    cfg = h.optics
    reports: dict[int, BandwidthChannelReport] = {}
    for ch, fields in h.frames.items():
        mean_psd = np.zeros(cfg.shape)
        for f in fields:
            mean_psd += psd(f)
        mean_psd /= len(fields)

        kx, ky = frequency_grid(cfg.shape, cfg.pixel_pitch)
        k = cfg.wavenumber(ch)
        band = (kx**2 + ky**2) < k**2
        vals = mean_psd[band]
        mean_val = float(vals.mean())
        if mean_val == 0.0:
            raise ValueError("hologram has no spectral energy")
        coverage = float((vals > threshold_fraction * mean_val).mean())
        cov = float(vals.std()) / mean_val

        kr = np.sqrt(kx**2 + ky**2)[band]
        edges = np.linspace(0.0, float(kr.max()) + 1e-12, n_radial_bins + 1)
        which = np.digitize(kr, edges) - 1
        radial = np.full(n_radial_bins, np.nan)
        for b in range(n_radial_bins):
            sel = which == b
            if np.any(sel):
                radial[b] = float(vals[sel].mean())
        centers = 0.5 * (edges[:-1] + edges[1:])
        reports[ch] = BandwidthChannelReport(
            channel=ch,
            coverage=coverage,
            cov=cov,
            radial_k=centers,
            radial_psd=radial,
        )
    return BandwidthReport(
        channels=reports, threshold_fraction=threshold_fraction, n_frames=h.n_frames
    )


def format_bandwidth_report(report: BandwidthReport) -> str:
    """Plain-text table of per-channel coverage and spectral uniformity."""
    lines = [
        f"bandwidth report ({report.n_frames} frames, "
        f"threshold {report.threshold_fraction:.2f} of band mean)",
        f"{'channel':>8} {'coverage':>10} {'cov':>10}",
    ]
    for ch in sorted(report.channels):
        r = report.channels[ch]
        lines.append(f"{ch:>8d} {r.coverage:>10.4f} {r.cov:>10.4f}")
    return "\n".join(lines)


def bandwidth_report_csv(report: BandwidthReport) -> str:
    """CSV dump: one row per radial bin per channel, plus summary columns."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["channel", "coverage", "cov", "radial_k", "radial_psd"])
    for ch in sorted(report.channels):
        r = report.channels[ch]
        for k_val, p_val in zip(r.radial_k, r.radial_psd):
            writer.writerow([ch, f"{r.coverage:.6g}", f"{r.cov:.6g}", f"{k_val:.6g}", f"{p_val:.6g}"])
    return buf.getvalue()
