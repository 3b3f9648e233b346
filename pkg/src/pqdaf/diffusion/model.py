from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import torch
from torch import nn

from ..errors import ValidationError
from .conditions import ConditionBundle
from .guidance import SamplerConfig
from .networks import Denoiser, EncoderSet, parameter_checksum
from .schedule import NoiseSchedule


@dataclass
class GeneratorConfig:
    resolution: int = 32
    image_channels: int = 1
    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 2e-2
    drop_prob: float = 0.1
    w: float = 0.25
    steps: int = 25
    seed: int = 0
    frozen_encoder_seed: int = 1234
    embed_dim: int = 64
    base_channels: int = 16
    iterations: int = 600
    batch_size: int = 8
    lr: float = 2e-3

    def __post_init__(self):
        if self.resolution < 8 or self.resolution % 2:
            raise ValidationError("resolution must be an even number >= 8")
        if not 1 <= self.T <= 1000:
            raise ValidationError("T must be in 1..1000")
        if not 0 < self.beta_start <= self.beta_end < 1:
            raise ValidationError("need 0 < beta_start <= beta_end < 1")
        if not 0 <= self.drop_prob < 1:
            raise ValidationError("drop_prob must be in [0, 1)")
        if not 0 <= self.w <= 1:
            raise ValidationError("guidance weight w must be in [0, 1]")
        if self.steps < 1:
            raise ValidationError("steps must be >= 1")
        if self.iterations < 0 or self.batch_size < 1 or self.lr <= 0:
            raise ValidationError("iterations >= 0, batch_size >= 1 and lr > 0 required")

    @classmethod
    def from_dict(cls, d: dict) -> GeneratorConfig:
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValidationError(f"unknown generator config keys {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    def schedule(self) -> NoiseSchedule:
        return NoiseSchedule.linear(self.T, self.beta_start, self.beta_end)

    def sampler(self, seed: int | None = None, deterministic: bool = True) -> SamplerConfig:
        return SamplerConfig(self.w, self.steps, self.seed if seed is None else seed, deterministic)


class PoseGuidedGenerator(nn.Module):
    """Encoders, noise predictor, and one learned null embedding per branch."""

    def __init__(self, config: GeneratorConfig, denoiser: nn.Module | None = None,
                 encoders: EncoderSet | None = None):
        super().__init__()
        self.config = config
        self.encoders = encoders or EncoderSet(config.image_channels, config.embed_dim,
                                               frozen_seed=config.frozen_encoder_seed)
        pose_ch = self.encoders.pose.out_channels
        mask_ch = self.encoders.mask.out_channels
        self.denoiser = denoiser or Denoiser(config.image_channels, pose_ch, mask_ch,
                                             config.embed_dim, config.base_channels)
        self.null_f = nn.Parameter(torch.zeros(self.encoders.embed_dim))
        self.null_p = nn.Parameter(torch.zeros(pose_ch))
        self.null_i = nn.Parameter(torch.zeros(mask_ch))

    def frozen_checksum(self) -> str:
        return parameter_checksum(self.encoders.frozen_encoder)

    def trainable_parameters(self):
        return [p for p in self.parameters() if p.requires_grad]

    def resolve(self, bundle: ConditionBundle):
        """Apply the bundle's drop flags, substituting null embeddings."""
        di = bundle.drop_image.to(bundle.f_st.device)
        dp = bundle.drop_pose.to(bundle.f_st.device)
        f = torch.where(di[:, None], self.null_f.expand_as(bundle.f_st), bundle.f_st)
        i = torch.where(di[:, None, None, None], self.null_i[None, :, None, None].expand_as(bundle.i_sm), bundle.i_sm)
        p = torch.where(dp[:, None, None, None], self.null_p[None, :, None, None].expand_as(bundle.p_st), bundle.p_st)
        return f, p, i

    def forward(self, x_t: torch.Tensor, bundle: ConditionBundle, t: torch.Tensor) -> torch.Tensor:
        f, p, i = self.resolve(bundle)
        t = torch.as_tensor(t, device=x_t.device).long()
        if t.dim() == 0:
            t = t.expand(x_t.shape[0])
        return self.denoiser(x_t, f, p, i, t)
