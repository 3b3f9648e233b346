"""Pool generation: pose-transfer of source people onto synthesized class poses."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from ..errors import ValidationError
from ..pose import render_skeleton, synth_pose
from ..samples import CATEGORIES, DatasetManifest, LabeledSample
from ..toydata import GENERATOR_IDENTITIES, identity_image
from .conditions import encode_conditions, image_tensor, random_box_mask, tensor_image
from .guidance import SamplerConfig, sample
from .model import PoseGuidedGenerator
from .schedule import NoiseSchedule

SOURCE_CATEGORY = CATEGORIES[0]


@dataclass(frozen=True)
class GenerationJob:
    index: int
    category_id: int
    identity: int
    pose_seed: int

    @property
    def sample_id(self) -> str:
        return f"syn-{CATEGORIES[self.category_id].code}-{self.index:05d}"


def plan_jobs(n_per_class: int, seed: int, identities: Sequence[int] = GENERATOR_IDENTITIES) -> list[GenerationJob]:
    """One job per (class, j); sources cycle through ``identities``."""
    if n_per_class < 0:
        raise ValidationError("n_per_class must be >= 0")
    identities = list(identities)
    if not identities:
        raise ValidationError("need at least one source identity")
    jobs = []
    for cat in CATEGORIES:
        for j in range(n_per_class):
            index = cat.id * n_per_class + j
            ps = int(np.random.SeedSequence([seed, cat.id, j]).generate_state(1, np.uint64)[0] >> 1)
            jobs.append(GenerationJob(index, cat.id, identities[index % len(identities)], ps))
    return jobs


def _job_tensors(jobs: Sequence[GenerationJob], resolution: int, seed: int):
    src, src_pose, tgt_pose, masks = [], [], [], []
    for job in jobs:
        img, sk = identity_image(job.identity, SOURCE_CATEGORY, 0, resolution)
        src.append(image_tensor(img))
        src_pose.append(image_tensor(render_skeleton(sk, resolution, resolution).image))
        target = synth_pose(job.category_id, job.pose_seed)
        tgt_pose.append(image_tensor(render_skeleton(target, resolution, resolution).image))
        rng = np.random.default_rng([seed, job.index, 7])
        masks.append(torch.from_numpy(random_box_mask(resolution, resolution, rng))[None, None])
    return torch.cat(src), torch.cat(src_pose), torch.cat(tgt_pose), torch.cat(masks)


def generate_pool(
    model: PoseGuidedGenerator,
    schedule: NoiseSchedule,
    n_per_class: int,
    sampler: SamplerConfig,
    out_dir: str | Path | None = None,
    identities: Sequence[int] = GENERATOR_IDENTITIES,
    batch_size: int = 50,
) -> DatasetManifest:
    """Unscored synthetic pool of ``n_per_class`` images per category.

    The target image is unknown at inference, so the source stands in for it in
    the semantic pair. Each image's noise is keyed on (sampler.seed, job index).
    """
    res = model.config.resolution
    jobs = plan_jobs(n_per_class, sampler.seed, identities)
    root = Path(out_dir) if out_dir is not None else None
    if root is not None:
        (root / "images").mkdir(parents=True, exist_ok=True)
    records = []
    model.eval()
    for start in range(0, len(jobs), batch_size):
        chunk = jobs[start:start + batch_size]
        src, src_pose, tgt_pose, mask = _job_tensors(chunk, res, sampler.seed)
        with torch.no_grad():
            bundle = encode_conditions(model.encoders, src, src, src_pose, tgt_pose, mask)
            x = sample(model, bundle, schedule, sampler, first_index=chunk[0].index)
        for job, xi in zip(chunk, x):
            img = tensor_image(xi)
            cat = CATEGORIES[job.category_id]
            if root is not None:
                rel = f"images/{job.sample_id}.png"
                img.save(root / rel)
                records.append(LabeledSample(job.sample_id, cat, "synthetic", path=rel))
            else:
                records.append(LabeledSample(job.sample_id, cat, "synthetic", image=img))
    return DatasetManifest(tuple(records), split="synthetic-pool", seed=sampler.seed, root=root)
