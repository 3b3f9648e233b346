"""Desk-scale stand-in for a driver-behavior dataset.

Each "identity" has a fixed appearance (background shade and slope, figure
brightness); an image is that identity's stick figure drawn in one pose. Images
are single-channel, model convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .pose import Skeleton, segment_pixels, synth_pose, to_pixel
from .samples import CATEGORIES, Category, DatasetManifest, ImageBuffer, LabeledSample

RESOLUTION = 32
GENERATOR_IDENTITIES = range(0, 64)
FEWSHOT_IDENTITY_BASE = 10_000
EVAL_IDENTITY_BASE = 20_000


@dataclass(frozen=True)
class Appearance:
    background: float
    slope: float
    figure: float
    head_radius: int
    noise: float

    @classmethod
    def for_identity(cls, identity: int) -> Appearance:
        rng = np.random.default_rng([7919, identity])
        return cls(
            background=float(rng.uniform(-0.95, -0.55)),
            slope=float(rng.uniform(-0.25, 0.25)),
            figure=float(rng.uniform(0.35, 0.95)),
            head_radius=int(rng.integers(1, 3)),
            noise=0.03,
        )


def render_person(
    skeleton: Skeleton,
    appearance: Appearance,
    size: int = RESOLUTION,
    noise_seed: int | None = None,
) -> ImageBuffer:
    cols = np.linspace(-0.5, 0.5, size, dtype=np.float32)
    img = np.broadcast_to(appearance.background + appearance.slope * cols, (size, size)).copy()
    pix = {kp.name: to_pixel(kp.x, kp.y, size, size) for kp in skeleton.keypoints}
    for _, (a, b) in skeleton.bones:
        rr, cc = segment_pixels(pix[a], pix[b])
        img[rr, cc] = appearance.figure
    if "nose" in pix:
        r0, c0 = pix["nose"]
        rad = appearance.head_radius
        yy, xx = np.ogrid[:size, :size]
        ring = np.abs(np.hypot(yy - (r0 - 1), xx - c0) - rad - 1) < 0.6
        img[ring] = appearance.figure
    if noise_seed is not None and appearance.noise > 0:
        img += np.random.default_rng(noise_seed).normal(0.0, appearance.noise, img.shape)
    return ImageBuffer(np.clip(img, -1.0, 1.0)[:, :, None], "model")


def pose_seed(identity: int, cat: Category, index: int) -> int:
    return (identity * 1000 + cat.id * 100 + index) & 0x7FFFFFFF


def identity_image(identity: int, cat: Category, index: int, size: int = RESOLUTION):
    """(image, skeleton) of ``identity`` performing ``cat``; ``index`` varies the pose draw."""
    seed = pose_seed(identity, cat, index)
    sk = synth_pose(cat, seed)
    return render_person(sk, Appearance.for_identity(identity), size, noise_seed=seed), sk


def make_real_manifest(
    identities: range | list[int],
    per_identity: int = 1,
    split: str = "test",
    out_dir: str | Path | None = None,
    prefix: str = "real",
    size: int = RESOLUTION,
) -> DatasetManifest:
    """One record per (identity, category, index). Writes PNGs when ``out_dir`` is set."""
    records = []
    root = Path(out_dir) if out_dir is not None else None
    if root is not None:
        (root / "images").mkdir(parents=True, exist_ok=True)
    for ident in identities:
        for cat in CATEGORIES:
            for j in range(per_identity):
                img, _ = identity_image(ident, cat, j, size)
                sid = f"{prefix}-{ident}-{cat.code}-{j}"
                if root is not None:
                    rel = f"images/{sid}.png"
                    img.save(root / rel)
                    records.append(LabeledSample(sid, cat, "real", path=rel))
                else:
                    records.append(LabeledSample(sid, cat, "real", image=img))
    return DatasetManifest(tuple(records), split=split, seed=0, root=root)
