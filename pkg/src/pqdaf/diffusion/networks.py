"""Encoders and noise-prediction networks for the pose-guided generator."""

from __future__ import annotations

import hashlib
import math

import torch
from torch import nn
import torch.nn.functional as F


def parameter_checksum(module: nn.Module) -> str:
    h = hashlib.sha256()
    for name, p in sorted(module.state_dict().items()):
        h.update(name.encode())
        h.update(p.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


class FrozenSemanticEncoder(nn.Module):
    """Fixed random conv pyramid; its weights are a pure function of ``seed``."""

    def __init__(self, in_channels: int = 1, width: int = 16, out_dim: int = 64, seed: int = 1234):
        super().__init__()
        self.seed = seed
        gen = torch.Generator().manual_seed(seed)
        chans = [in_channels, width, width * 2, out_dim]
        self.convs = nn.ModuleList(nn.Conv2d(a, b, 3, stride=2, padding=1) for a, b in zip(chans, chans[1:]))
        with torch.no_grad():
            for conv in self.convs:
                fan_in = conv.in_channels * 9
                conv.weight.copy_(torch.randn(conv.weight.shape, generator=gen) * math.sqrt(2.0 / fan_in))
                conv.bias.zero_()
        self.requires_grad_(False)
        self.out_dim = out_dim

    def train(self, mode: bool = True):
        return super().train(False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for conv in self.convs:
            x = F.gelu(conv(x))
        return x.mean(dim=(2, 3))


class SemanticBranch(nn.Module):
    """Frozen encoder followed by a trainable two-layer projection."""

    def __init__(self, in_channels: int, embed_dim: int, seed: int, width: int = 16):
        super().__init__()
        self.frozen = FrozenSemanticEncoder(in_channels, width, 4 * width, seed)
        self.project = nn.Sequential(
            nn.Linear(4 * width, 2 * embed_dim), nn.SiLU(), nn.Linear(2 * embed_dim, embed_dim)
        )

    def forward(self, pair: torch.Tensor) -> torch.Tensor:
        with torch.no_grad():
            feats = self.frozen(pair)
        return self.project(feats)


class PoseEncoder(nn.Module):
    """Four stride-1 conv layers over the width-concatenated pose pair; the two
    halves of the output are stacked on channels so features stay pixel-aligned
    with the target image."""

    def __init__(self, in_channels: int = 3, hidden: int = 16, out_channels: int = 8):
        super().__init__()
        self.layers = nn.Sequential(
            nn.Conv2d(in_channels, hidden, 3, padding=1), nn.SiLU(),
            nn.Conv2d(hidden, hidden, 3, padding=1), nn.SiLU(),
            nn.Conv2d(hidden, hidden, 3, padding=1), nn.SiLU(),
            nn.Conv2d(hidden, out_channels, 3, padding=1),
        )
        self.out_channels = 2 * out_channels

    def forward(self, pose_pair: torch.Tensor) -> torch.Tensor:
        y = self.layers(pose_pair)
        w = y.shape[-1] // 2
        return torch.cat([y[..., :w], y[..., w:]], dim=1)


class MaskEncoder(nn.Module):
    """Masked source plus the indicator channel."""

    def __init__(self, in_channels: int = 2, out_channels: int = 16):
        super().__init__()
        self.layers = nn.Sequential(
            nn.Conv2d(in_channels, out_channels, 3, padding=1), nn.SiLU(),
            nn.Conv2d(out_channels, out_channels, 3, padding=1),
        )
        self.out_channels = out_channels

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.layers(x)


class EncoderSet(nn.Module):
    def __init__(self, image_channels: int = 1, embed_dim: int = 64, pose_hidden: int = 16,
                 pose_out: int = 8, mask_out: int = 16, frozen_seed: int = 1234, semantic_width: int = 16):
        super().__init__()
        self.semantic = SemanticBranch(image_channels, embed_dim, frozen_seed, semantic_width)
        self.pose = PoseEncoder(3, pose_hidden, pose_out)
        self.mask = MaskEncoder(image_channels + 1, mask_out)
        self.embed_dim = embed_dim

    @property
    def frozen_encoder(self) -> FrozenSemanticEncoder:
        return self.semantic.frozen


def timestep_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    half = dim // 2
    freqs = torch.exp(-math.log(10_000.0) * torch.arange(half, dtype=torch.float64) / half).to(t.device)
    args = t.to(torch.float64)[:, None] * freqs[None]
    emb = torch.cat([torch.cos(args), torch.sin(args)], dim=1)
    return emb.to(torch.get_default_dtype())


class ResBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, emb_dim: int, groups: int = 8):
        super().__init__()
        self.norm1 = nn.GroupNorm(min(groups, in_ch), in_ch)
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.emb = nn.Linear(emb_dim, 2 * out_ch)
        self.norm2 = nn.GroupNorm(min(groups, out_ch), out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.skip = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()

    def forward(self, x, emb):
        h = self.conv1(F.silu(self.norm1(x)))
        scale, shift = self.emb(F.silu(emb))[:, :, None, None].chunk(2, dim=1)
        h = self.norm2(h) * (1 + scale) + shift
        h = self.conv2(F.silu(h))
        return h + self.skip(x)


class TransformerBlock(nn.Module):
    """Self-attention over spatial positions, then cross-attention to the
    semantic embedding token, then an MLP."""

    def __init__(self, channels: int, emb_dim: int, heads: int = 4):
        super().__init__()
        self.norm1 = nn.LayerNorm(channels)
        self.attn = nn.MultiheadAttention(channels, heads, batch_first=True)
        self.norm2 = nn.LayerNorm(channels)
        self.cross = nn.MultiheadAttention(channels, heads, kdim=emb_dim, vdim=emb_dim, batch_first=True)
        self.norm3 = nn.LayerNorm(channels)
        self.mlp = nn.Sequential(nn.Linear(channels, 2 * channels), nn.GELU(), nn.Linear(2 * channels, channels))

    def forward(self, x, context):
        b, c, h, w = x.shape
        s = x.flatten(2).transpose(1, 2)
        q = self.norm1(s)
        s = s + self.attn(q, q, q, need_weights=False)[0]
        ctx = context[:, None, :]
        s = s + self.cross(self.norm2(s), ctx, ctx, need_weights=False)[0]
        s = s + self.mlp(self.norm3(s))
        return s.transpose(1, 2).reshape(b, c, h, w)


class Denoiser(nn.Module):
    """epsilon_theta(x_t, f_st, p_st, i_sm, t).

    Spatial conditions (pose and mask embeddings) join the noisy image on the
    channel axis; the semantic embedding enters through the time embedding and
    the cross-attention context. Conv residual blocks alternate with a
    transformer block at half resolution.
    """

    def __init__(self, image_channels: int = 1, pose_channels: int = 16, mask_channels: int = 16,
                 embed_dim: int = 64, base: int = 32):
        super().__init__()
        self.image_channels = image_channels
        emb = 4 * base
        self.time_mlp = nn.Sequential(nn.Linear(base, emb), nn.SiLU(), nn.Linear(emb, emb))
        self.sem_mlp = nn.Linear(embed_dim, emb)
        self.base = base
        self.conv_in = nn.Conv2d(image_channels + pose_channels + mask_channels, base, 3, padding=1)
        self.res_in = ResBlock(base, base, emb)
        self.down = nn.Conv2d(base, 2 * base, 3, stride=2, padding=1)
        self.res_mid1 = ResBlock(2 * base, 2 * base, emb)
        self.attn = TransformerBlock(2 * base, embed_dim)
        self.res_mid2 = ResBlock(2 * base, 2 * base, emb)
        self.up = nn.Conv2d(2 * base, base, 3, padding=1)
        self.res_out = ResBlock(2 * base, base, emb)
        self.norm_out = nn.GroupNorm(8, base)
        self.conv_out = nn.Conv2d(base, image_channels, 3, padding=1)

    def forward(self, x_t, f_st, p_st, i_sm, t):
        emb = self.time_mlp(timestep_embedding(t, self.base)) + self.sem_mlp(f_st)
        h0 = self.res_in(self.conv_in(torch.cat([x_t, p_st, i_sm], dim=1)), emb)
        h = self.res_mid1(self.down(h0), emb)
        h = self.attn(h, f_st)
        h = self.res_mid2(h, emb)
        h = self.up(F.interpolate(h, scale_factor=2, mode="nearest"))
        h = self.res_out(torch.cat([h, h0], dim=1), emb)
        return self.conv_out(F.silu(self.norm_out(h)))


class TinyDenoiser(nn.Module):
    """Smooth miniature noise predictor (a few hundred parameters) with the same
    call signature as :class:`Denoiser`; used for gradient checks."""

    def __init__(self, image_channels: int = 1, pose_channels: int = 2, mask_channels: int = 2,
                 embed_dim: int = 4, hidden: int = 4):
        super().__init__()
        self.image_channels = image_channels
        self.conv_in = nn.Conv2d(image_channels + pose_channels + mask_channels, hidden, 3, padding=1)
        self.film = nn.Linear(embed_dim + 2, 2 * hidden)
        self.conv_out = nn.Conv2d(hidden, image_channels, 3, padding=1)

    def forward(self, x_t, f_st, p_st, i_sm, t):
        tt = t.to(x_t.dtype)[:, None] / 100.0
        cond = torch.cat([f_st, torch.sin(tt), torch.cos(tt)], dim=1)
        scale, shift = self.film(cond)[:, :, None, None].chunk(2, dim=1)
        h = torch.tanh(self.conv_in(torch.cat([x_t, p_st, i_sm], dim=1)))
        return self.conv_out(torch.tanh(h * (1 + scale) + shift))
