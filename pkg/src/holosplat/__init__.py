"""Splat-based hologram synthesis, reconstruction, and analysis."""

__version__ = "0.1.0"

from .analysis import (
    BandwidthReport,
    VarianceReport,
    bandwidth_report,
    intensity_moment,
    predicted_variance,
    spectral_moment,
    variance_report,
)
from .compositor import (
    BINNING_EXACT,
    BINNING_LAYERED,
    MODE_RP_SPATIAL,
    MODE_RP_STRUCTURED,
    MODE_SP_SMOOTH,
    CompositeRequest,
    TimeMultiplexedHologram,
    composite_rp_frame,
    composite_sp,
    time_multiplex,
    transmittance_mask,
)
from .encode import EncodeProblem, PhasePattern, encode, encode_loss, reconstruct_encoded
from .field import (
    DEFAULT_PITCH,
    DEFAULT_WAVELENGTHS,
    OpticsConfig,
    SpectrumField,
    WaveField,
    coordinate_grid,
    fft2_centered,
    frequency_grid,
    ifft2_centered,
    intensity,
    inverse_spectrum,
    make_field,
    rel_l2,
    spectrum,
)
from .hologram_io import (
    ContainerError,
    read_hologram,
    read_pfm,
    write_hologram,
    write_pfm,
    write_phase_png,
    write_png,
)
from .kernels import (
    SpectralKernel,
    kernel_custom,
    kernel_pupil,
    kernel_sh,
    kernel_uniform,
    phase_stream,
    sample_spatial,
    sample_structured,
    structured_modulation,
)
from .propagation import (
    asm_kernel,
    band_limit_threshold,
    band_support,
    expected_psd,
    propagate,
    psd,
    round_trip_check,
)
from .reconstruct import (
    FocalStack,
    LightField,
    epipolar,
    focal_stack,
    light_field_stft,
    psnr,
    speckle_contrast,
    ssim,
)
from .splats import (
    BACK_TO_FRONT,
    FRONT_TO_BACK,
    GaussianPrimitive,
    HologramScene,
    PlyParseError,
    RawSplat,
    SceneMapping,
    activate,
    load_ply,
    sort_and_bin,
    to_hologram_space,
)

__all__ = [
    "BACK_TO_FRONT",
    "BINNING_EXACT",
    "BINNING_LAYERED",
    "BandwidthReport",
    "CompositeRequest",
    "ContainerError",
    "DEFAULT_PITCH",
    "DEFAULT_WAVELENGTHS",
    "EncodeProblem",
    "FRONT_TO_BACK",
    "FocalStack",
    "GaussianPrimitive",
    "HologramScene",
    "LightField",
    "MODE_RP_SPATIAL",
    "MODE_RP_STRUCTURED",
    "MODE_SP_SMOOTH",
    "OpticsConfig",
    "PhasePattern",
    "PlyParseError",
    "RawSplat",
    "SceneMapping",
    "SpectrumField",
    "SpectralKernel",
    "TimeMultiplexedHologram",
    "VarianceReport",
    "WaveField",
    "activate",
    "asm_kernel",
    "band_limit_threshold",
    "band_support",
    "bandwidth_report",
    "composite_rp_frame",
    "composite_sp",
    "coordinate_grid",
    "encode",
    "encode_loss",
    "epipolar",
    "expected_psd",
    "fft2_centered",
    "focal_stack",
    "frequency_grid",
    "ifft2_centered",
    "intensity",
    "intensity_moment",
    "inverse_spectrum",
    "kernel_custom",
    "kernel_pupil",
    "kernel_sh",
    "kernel_uniform",
    "light_field_stft",
    "load_ply",
    "make_field",
    "phase_stream",
    "predicted_variance",
    "propagate",
    "psd",
    "psnr",
    "read_hologram",
    "read_pfm",
    "reconstruct_encoded",
    "rel_l2",
    "round_trip_check",
    "sample_spatial",
    "sample_structured",
    "sort_and_bin",
    "speckle_contrast",
    "spectral_moment",
    "spectrum",
    "ssim",
    "structured_modulation",
    "time_multiplex",
    "to_hologram_space",
    "transmittance_mask",
    "variance_report",
    "write_hologram",
    "write_pfm",
    "write_phase_png",
    "write_png",
]
