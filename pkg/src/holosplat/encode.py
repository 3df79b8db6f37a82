"""Phase-only SLM encoding against a complex target field.

Given a target complex field at a fixed distance from the SLM, find a phase
pattern theta whose unit-amplitude field propagates to (a scalar multiple
of) the target.  The loss is the squared field error after an optional
closed-form complex scale; its gradient comes from the adjoint propagation,
so each iteration costs two transforms.  Optimization is plain gradient
descent with step halving whenever a trial step would increase the loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .compositor import TimeMultiplexedHologram
from .field import WaveField
from .propagation import propagate
from .reconstruct import FocalStack, focal_stack

INIT_ZERO = "zero"
INIT_RANDOM = "random"

_MAX_HALVINGS = 40


@dataclass(frozen=True, eq=False)
class EncodeProblem:
    """Target field and optimizer settings for phase-only encoding."""

    target: WaveField
    distance: float = 0.04
    iterations: int = 200
    step_size: float = 1e-2
    init: str = INIT_ZERO
    seed: int = 0
    scale_free: bool = True

    def __post_init__(self) -> None:
        if not (np.isfinite(self.distance)):
            raise ValueError("target distance must be finite")
        if self.iterations < 1:
            raise ValueError(f"iterations must be positive, got {self.iterations}")
        if not (self.step_size > 0 and np.isfinite(self.step_size)):
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if self.init not in (INIT_ZERO, INIT_RANDOM):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass(frozen=True, eq=False)
class PhasePattern:
    """Optimized SLM phases in [-pi, pi) plus the accepted-loss trace."""

    phase: np.ndarray
    loss_trace: tuple[float, ...]
    final_scale: complex
    pitch: float
    wavelength: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.phase.shape


def wrap_phase(theta: np.ndarray) -> np.ndarray:
    """Wrap angles into [-pi, pi)."""
    return np.mod(theta + np.pi, 2.0 * np.pi) - np.pi


def _forward(theta: np.ndarray, prob: EncodeProblem) -> WaveField:
    u = WaveField(
        np.exp(1j * theta), prob.target.pitch, prob.target.wavelength, plane_z=0.0
    )
    return propagate(u, prob.distance)


def _optimal_scale(pred: np.ndarray, target: np.ndarray) -> complex:
    denom = float(np.sum(np.abs(pred) ** 2))
    if denom == 0.0:
        raise ValueError("prediction has zero energy; cannot fit a scale")
    return complex(np.sum(target * np.conj(pred)) / denom)


def encode_loss(theta: np.ndarray, prob: EncodeProblem) -> tuple[float, np.ndarray]:
    """Squared field error and its gradient with respect to the phases.

    With ``scale_free`` the loss is ``sum |s * P(e^{i theta}) - target|^2``
    at the optimal complex ``s``; since the partial derivative in ``s``
    vanishes there, the theta-gradient with ``s`` held fixed is the exact
    total gradient.  The adjoint of forward propagation is propagation by
    the negated distance.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != prob.target.shape:
        raise ValueError(f"phase shape {theta.shape} != target shape {prob.target.shape}")
    slm = np.exp(1j * theta)
    pred = _forward(theta, prob).samples
    s = _optimal_scale(pred, prob.target.samples) if prob.scale_free else 1.0 + 0.0j
    residual = s * pred - prob.target.samples
    loss = float(np.sum(np.abs(residual) ** 2))
    back = propagate(
        WaveField(
            np.conj(s) * residual,
            prob.target.pitch,
            prob.target.wavelength,
            plane_z=prob.distance,
        ),
        -prob.distance,
    ).samples
    grad = -2.0 * np.imag(slm * np.conj(back))
    return loss, grad


def encode(prob: EncodeProblem) -> PhasePattern:
    """Gradient-descent phase retrieval for the problem's target field.

    Runs ``iterations`` accepted steps of fixed-step descent, halving the
    step whenever a trial increases the loss (the trace is therefore
    non-increasing).  Returns the best iterate seen.
    """
    shape = prob.target.shape
    if prob.init == INIT_ZERO:
        theta = np.zeros(shape)
    else:
        theta = np.random.Generator(
            np.random.Philox(key=np.array([prob.seed, 0x454E4350], dtype=np.uint64))
        ).uniform(-np.pi, np.pi, size=shape)

    loss, grad = encode_loss(theta, prob)
    if not np.isfinite(loss):
        raise FloatingPointError("non-finite loss at initialization")
    step = prob.step_size
    trace = [loss]
    best_theta = theta
    best_loss = loss
    for it in range(1, prob.iterations + 1):
        accepted = False
        for _ in range(_MAX_HALVINGS):
            trial = theta - step * grad
            trial_loss, trial_grad = encode_loss(trial, prob)
            if not np.isfinite(trial_loss):
                raise FloatingPointError(f"non-finite loss at iteration {it}")
            if trial_loss <= loss:
                theta, loss, grad = trial, trial_loss, trial_grad
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # Step underflowed without improvement; the trace stays flat.
            trace.append(loss)
            continue
        trace.append(loss)
        if loss < best_loss:
            best_loss = loss
            best_theta = theta

    pred = _forward(best_theta, prob).samples
    s = _optimal_scale(pred, prob.target.samples) if prob.scale_free else 1.0 + 0.0j
    return PhasePattern(
        phase=wrap_phase(best_theta),
        loss_trace=tuple(trace),
        final_scale=s,
        pitch=prob.target.pitch,
        wavelength=prob.target.wavelength,
    )


def encoded_hologram(pattern: PhasePattern, optics, channel: int) -> TimeMultiplexedHologram:
    """Wrap a phase pattern as a single-frame, single-channel hologram."""
    f = WaveField(np.exp(1j * pattern.phase), pattern.pitch, pattern.wavelength, optics.slm_z)
    return TimeMultiplexedHologram(
        frames={channel: (f,)},
        mode="phase_encoded",
        seed=0,
        scene_digest="",
        optics=optics,
    )


def reconstruct_encoded(
    pattern: PhasePattern,
    depths: list[float] | tuple[float, ...],
    optics=None,
) -> FocalStack:
    """Focal stack of the encoded phase pattern driven as a hologram.

    Depths are absolute distances from the SLM, matching the convention of
    :func:`holosplat.reconstruct.focal_stack`.
    """
    from .field import OpticsConfig

    if optics is None:
        ny, nx = pattern.shape
        optics = OpticsConfig(
            pixel_pitch=pattern.pitch,
            wavelengths=(pattern.wavelength,),
            grid_ny=ny,
            grid_nx=nx,
        )
    h = encoded_hologram(pattern, optics, channel=0)
    return focal_stack(h, depths)
