"""Weighted two-branch guidance and the reverse sampler."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..errors import ValidationError
from ..samples import ImageBuffer
from .conditions import ConditionBundle, tensor_image
from .schedule import NoiseSchedule


@dataclass(frozen=True)
class SamplerConfig:
    w: float = 0.5
    steps: int = 50
    seed: int = 0
    deterministic: bool = True

    def __post_init__(self):
        if not 0.0 <= self.w <= 1.0:
            raise ValidationError(f"guidance weight w={self.w} outside [0, 1]")
        if self.steps < 1:
            raise ValidationError("steps must be >= 1")


def cfg_predict(model, x_t: torch.Tensor, bundle: ConditionBundle, t, w: float) -> torch.Tensor:
    """w * eps(x_t, f_st, i_sm, t) + (1 - w) * eps(x_t, p_st, t).

    This is an interpolation between the image-semantic prediction (pose nulled)
    and the pose-structure prediction (image branches nulled), not an
    extrapolation. At the endpoints only one branch is evaluated.
    """
    if not 0.0 <= w <= 1.0:
        raise ValidationError(f"guidance weight w={w} outside [0, 1]")
    if w == 1.0:
        return model(x_t, bundle.image_branch(), t)
    if w == 0.0:
        return model(x_t, bundle.pose_branch(), t)
    eps_img = model(x_t, bundle.image_branch(), t)
    eps_pose = model(x_t, bundle.pose_branch(), t)
    return w * eps_img + (1.0 - w) * eps_pose


def timestep_sequence(T: int, steps: int) -> list[int]:
    """Evenly spaced descending step indices starting at T - 1 (and ending at 0 when steps > 1)."""
    steps = min(steps, T)
    seq = np.unique(np.round(np.linspace(T - 1, 0, steps)).astype(int))
    return [int(t) for t in seq[::-1]]


def _stream(seed: int, index: int) -> torch.Generator:
    return torch.Generator().manual_seed(int(np.random.SeedSequence([seed, index]).generate_state(1)[0]))


@torch.no_grad()
def sample(model, bundle: ConditionBundle, schedule: NoiseSchedule, config: SamplerConfig,
           shape: tuple[int, int, int] | None = None, first_index: int = 0) -> torch.Tensor:
    """Reverse diffusion from pure noise, guided by :func:`cfg_predict` at each step.

    Image ``k`` of the batch draws its noise from a stream keyed on
    (config.seed, first_index + k), so results do not depend on batch layout.
    Deterministic mode uses the eta=0 update; otherwise eta=1 with fresh noise
    per step from the same per-image stream. Returns (B, C, H, W) in [-1, 1].
    """
    if config.steps < 1:
        raise ValidationError("steps must be >= 1")
    b = len(bundle)
    if shape is None:
        c = getattr(getattr(model, "config", None), "image_channels", 1)
        shape = (c, *bundle.indicator.shape[-2:])
    gens = [_stream(config.seed, first_index + k) for k in range(b)]
    x = torch.stack([torch.randn(shape, generator=g) for g in gens])
    ab = schedule.alpha_bars
    seq = timestep_sequence(schedule.T, config.steps)
    eta = 0.0 if config.deterministic else 1.0
    for i, t in enumerate(seq):
        ab_t = float(ab[t])
        ab_prev = float(ab[seq[i + 1]]) if i + 1 < len(seq) else 1.0
        if ab_t >= 1.0:
            # clean-start schedules: step 0 carries no noise
            x = x.clamp(-1.0, 1.0)
            continue
        eps = cfg_predict(model, x, bundle, torch.full((b,), t, dtype=torch.long), config.w)
        x0 = ((x - (1.0 - ab_t) ** 0.5 * eps) / ab_t ** 0.5).clamp(-1.0, 1.0)
        eps = (x - ab_t ** 0.5 * x0) / (1.0 - ab_t) ** 0.5
        sigma = eta * ((1 - ab_prev) / (1 - ab_t) * (1 - ab_t / ab_prev)) ** 0.5
        x = ab_prev ** 0.5 * x0 + max(1.0 - ab_prev - sigma ** 2, 0.0) ** 0.5 * eps
        if sigma > 0:
            x = x + sigma * torch.stack([torch.randn(shape, generator=g) for g in gens])
    return x.clamp(-1.0, 1.0)


def sample_images(model, bundle: ConditionBundle, schedule: NoiseSchedule, config: SamplerConfig,
                  first_index: int = 0) -> list[ImageBuffer]:
    """:func:`sample`, returned as model-convention ImageBuffers."""
    x = sample(model, bundle, schedule, config, first_index=first_index)
    return [tensor_image(xi) for xi in x]
