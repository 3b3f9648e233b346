"""Noise-prediction objective, the per-step update, and the toy training loop."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import torch

from ..errors import ValidationError
from ..pose import render_skeleton
from ..samples import CATEGORIES
from ..toydata import GENERATOR_IDENTITIES, RESOLUTION, identity_image
from .conditions import ConditionBundle, encode_conditions, image_tensor, random_box_mask
from .model import GeneratorConfig, PoseGuidedGenerator
from .schedule import NoiseSchedule, forward_noise

log = logging.getLogger(__name__)


def denoising_loss(model, x0: torch.Tensor, bundle: ConditionBundle, t: torch.Tensor,
                   eps: torch.Tensor, schedule: NoiseSchedule) -> torch.Tensor:
    """Mean over batch and pixels of (eps - eps_theta(x_t, conditions, t))^2."""
    x_t = forward_noise(x0, t, eps, schedule)
    pred = model(x_t, bundle, t)
    return ((eps - pred) ** 2).mean()


def training_step(
    batch: Sequence[tuple[torch.Tensor, ConditionBundle]],
    model,
    schedule: NoiseSchedule,
    optimizer: torch.optim.Optimizer | None,
    drop_prob: float = 0.1,
    generator: torch.Generator | None = None,
) -> float:
    """One optimizer step on the noise-prediction loss.

    ``t`` is uniform over [0, T) and eps standard normal per pixel. Each sample
    independently drops its image-semantic branch (f_st, i_sm) and its pose
    branch with probability ``drop_prob``, so the model also learns the two
    single-branch predictions used at inference. ``optimizer=None`` evaluates
    the loss without updating.
    """
    if not 0.0 <= drop_prob < 1.0:
        raise ValidationError("drop_prob must be in [0, 1)")
    if len(batch) == 0:
        raise ValidationError("empty batch")
    x0 = torch.cat([x for x, _ in batch])
    bundle = ConditionBundle.cat([b for _, b in batch])
    if x0.shape[0] == 0:
        raise ValidationError("empty batch")
    n = x0.shape[0]
    t = torch.randint(0, schedule.T, (n,), generator=generator)
    eps = torch.randn(x0.shape, generator=generator, dtype=x0.dtype)
    drops = torch.rand((2, n), generator=generator) < drop_prob
    bundle = bundle.with_drops(drops[0] | bundle.drop_image, drops[1] | bundle.drop_pose)
    if optimizer is not None:
        optimizer.zero_grad(set_to_none=True)
    loss = denoising_loss(model, x0, bundle, t, eps, schedule)
    if optimizer is not None:
        loss.backward()
        optimizer.step()
    return float(loss.detach())


@dataclass
class PairBatch:
    source: torch.Tensor
    target: torch.Tensor
    source_pose: torch.Tensor
    target_pose: torch.Tensor
    mask: torch.Tensor
    target_category: torch.Tensor


class ToyPairSource:
    """Pose-transfer training pairs from the toy domain's generator identities.

    A bank of (identity, category, draw) images with their pose maps is rendered
    once; a pair is two bank entries of the same identity.
    """

    def __init__(self, identities: Sequence[int] = GENERATOR_IDENTITIES, draws: int = 3,
                 resolution: int = RESOLUTION):
        self.identities = list(identities)
        self.resolution = resolution
        imgs, poses, cats = [], [], []
        for ident in self.identities:
            for cat in CATEGORIES:
                for j in range(draws):
                    img, sk = identity_image(ident, cat, j, resolution)
                    imgs.append(image_tensor(img)[0])
                    poses.append(image_tensor(render_skeleton(sk, resolution, resolution).image)[0])
                    cats.append(cat.id)
        self.images = torch.stack(imgs)
        self.poses = torch.stack(poses)
        self.categories = torch.tensor(cats)
        self.per_identity = len(CATEGORIES) * draws

    def batch(self, size: int, rng: np.random.Generator) -> PairBatch:
        ident = rng.integers(0, len(self.identities), size)
        src = ident * self.per_identity + rng.integers(0, self.per_identity, size)
        tgt = ident * self.per_identity + rng.integers(0, self.per_identity, size)
        r = self.resolution
        masks = np.stack([random_box_mask(r, r, rng) for _ in range(size)])[:, None]
        return PairBatch(
            source=self.images[src], target=self.images[tgt],
            source_pose=self.poses[src], target_pose=self.poses[tgt],
            mask=torch.from_numpy(masks), target_category=self.categories[tgt],
        )


def build_generator(config: GeneratorConfig) -> PoseGuidedGenerator:
    torch.manual_seed(config.seed)
    return PoseGuidedGenerator(config)


def train_generator(
    config: GeneratorConfig,
    model: PoseGuidedGenerator | None = None,
    source: ToyPairSource | None = None,
    iterations: int | None = None,
    callback: Callable[[int, float], None] | None = None,
) -> tuple[PoseGuidedGenerator, list[float]]:
    """Train for ``iterations`` optimizer steps (defaults to ``config.iterations``)."""
    iterations = config.iterations if iterations is None else iterations
    model = model or build_generator(config)
    source = source or ToyPairSource(resolution=config.resolution)
    schedule = config.schedule()
    opt = torch.optim.Adam(model.trainable_parameters(), lr=config.lr)
    rng = np.random.default_rng([config.seed, 1])
    gen = torch.Generator().manual_seed(config.seed)
    model.train()
    losses = []
    start = time.perf_counter()
    for it in range(iterations):
        pb = source.batch(config.batch_size, rng)
        bundle = encode_conditions(model.encoders, pb.source, pb.target, pb.source_pose,
                                   pb.target_pose, pb.mask)
        loss = training_step([(pb.target, bundle)], model, schedule, opt, config.drop_prob, gen)
        losses.append(loss)
        if callback is not None:
            callback(it, loss)
        if (it + 1) % 100 == 0:
            log.info("iter %d loss %.4f (%.1fs)", it + 1, np.mean(losses[-50:]), time.perf_counter() - start)
    model.eval()
    return model, losses
