"""Three-branch condition assembly.

Branch inputs are width-concatenated pairs: (source | target) images feed the
semantic branch, (source pose | target pose) maps feed the pose encoder, and the
masked source plus a {0,1} indicator channel feed the mask branch.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import torch

from ..errors import ValidationError
from ..pose import PoseMap
from ..samples import ImageBuffer
from .networks import EncoderSet

MASK_FILL = 0.0


@dataclass
class ConditionBundle:
    """Embeddings for a batch. A True entry in ``drop_image`` replaces that
    sample's f_st and i_sm with null embeddings; ``drop_pose`` does the same for p_st."""

    f_st: torch.Tensor
    p_st: torch.Tensor
    i_sm: torch.Tensor
    indicator: torch.Tensor
    drop_image: torch.Tensor | None = None
    drop_pose: torch.Tensor | None = None
    # branch inputs, kept for inspection
    inputs: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        b = self.f_st.shape[0]
        if self.drop_image is None:
            self.drop_image = torch.zeros(b, dtype=torch.bool)
        if self.drop_pose is None:
            self.drop_pose = torch.zeros(b, dtype=torch.bool)
        vals = torch.unique(self.indicator)
        if not bool(torch.all((vals == 0) | (vals == 1))):
            raise ValidationError("indicator map must contain only 0 and 1")

    def __len__(self) -> int:
        return self.f_st.shape[0]

    def with_drops(self, drop_image, drop_pose) -> ConditionBundle:
        b = len(self)
        di = torch.as_tensor(drop_image, dtype=torch.bool).expand(b).clone()
        dp = torch.as_tensor(drop_pose, dtype=torch.bool).expand(b).clone()
        return replace(self, drop_image=di, drop_pose=dp)

    def image_branch(self) -> ConditionBundle:
        """f_st and i_sm kept, pose nulled."""
        return self.with_drops(False, True)

    def pose_branch(self) -> ConditionBundle:
        """p_st kept, image-semantic branch nulled."""
        return self.with_drops(True, False)

    def detach(self) -> ConditionBundle:
        return replace(self, f_st=self.f_st.detach(), p_st=self.p_st.detach(), i_sm=self.i_sm.detach())

    @staticmethod
    def cat(bundles: list[ConditionBundle]) -> ConditionBundle:
        if len(bundles) == 1:
            return bundles[0]
        return ConditionBundle(
            f_st=torch.cat([b.f_st for b in bundles]),
            p_st=torch.cat([b.p_st for b in bundles]),
            i_sm=torch.cat([b.i_sm for b in bundles]),
            indicator=torch.cat([b.indicator for b in bundles]),
            drop_image=torch.cat([b.drop_image for b in bundles]),
            drop_pose=torch.cat([b.drop_pose for b in bundles]),
        )


def image_tensor(img: ImageBuffer) -> torch.Tensor:
    """(1, C, H, W) float tensor in the model convention."""
    return torch.from_numpy(np.array(img.to_model().values, dtype=np.float32)).permute(2, 0, 1)[None].float()


def tensor_image(x: torch.Tensor) -> ImageBuffer:
    arr = x.detach().cpu().clamp(-1, 1)
    if arr.dim() == 4:
        arr = arr[0]
    return ImageBuffer(arr.permute(1, 2, 0).numpy(), "model")


def random_box_mask(height: int, width: int, rng: np.random.Generator,
                    coverage: tuple[float, float] = (0.2, 0.5)) -> np.ndarray:
    """{0,1} mask with one occluded (0) rectangle covering a fraction of the area in ``coverage``."""
    area = rng.uniform(*coverage) * height * width
    aspect = rng.uniform(0.5, 2.0)
    h = int(np.clip(round(np.sqrt(area * aspect)), 1, height))
    w = int(np.clip(round(area / h), 1, width))
    top = int(rng.integers(0, height - h + 1))
    left = int(rng.integers(0, width - w + 1))
    mask = np.ones((height, width), dtype=np.float32)
    mask[top:top + h, left:left + w] = 0.0
    return mask


def encode_conditions(encoders: EncoderSet, source: torch.Tensor, target: torch.Tensor,
                      source_pose: torch.Tensor, target_pose: torch.Tensor,
                      mask: torch.Tensor) -> ConditionBundle:
    """Batched tensor form of :func:`assemble_conditions`.

    Shapes: images (B, C, H, W); poses (B, 3, H, W); mask (B, 1, H, W) in {0, 1}.
    """
    if not (source.shape == target.shape and source.shape[-2:] == source_pose.shape[-2:]
            == target_pose.shape[-2:] == mask.shape[-2:]):
        raise ValidationError("source, target, pose maps and mask must share size")
    if not bool(torch.all((mask == 0) | (mask == 1))):
        raise ValidationError("mask must be binary")
    pair = torch.cat([source, target], dim=-1)
    pose_pair = torch.cat([source_pose, target_pose], dim=-1)
    masked = torch.where(mask.bool(), source, torch.full_like(source, MASK_FILL))
    indicator = mask.to(source.dtype)
    mask_in = torch.cat([masked, indicator], dim=1)
    return ConditionBundle(
        f_st=encoders.semantic(pair),
        p_st=encoders.pose(pose_pair),
        i_sm=encoders.mask(mask_in),
        indicator=indicator,
        inputs={"pair": pair, "pose_pair": pose_pair, "masked_source": masked},
    )


def assemble_conditions(source: ImageBuffer, target: ImageBuffer, source_pose: PoseMap,
                        target_pose: PoseMap, mask: ImageBuffer | np.ndarray,
                        encoders: EncoderSet) -> ConditionBundle:
    for name, img in (("target", target), ("source pose", source_pose.image),
                      ("target pose", target_pose.image)):
        if img.height != source.height:
            raise ValidationError(f"{name} height {img.height} != source height {source.height}")
    m = mask.values if isinstance(mask, ImageBuffer) else np.asarray(mask)
    if m.ndim == 3:
        if m.shape[2] != 1:
            raise ValidationError("mask must be single-channel")
        m = m[:, :, 0]
    if m.shape != (source.height, source.width):
        raise ValidationError(f"mask shape {m.shape} != source size {(source.height, source.width)}")
    # file-convention masks may use {0, 255}
    if isinstance(mask, ImageBuffer) and mask.convention == "file" and m.max() > 1:
        m = m / 255.0
    if not np.all((m == 0) | (m == 1)):
        raise ValidationError("mask must be binary")
    if target.width != source.width or target.channels != source.channels:
        raise ValidationError("source and target must share width and channels")
    mt = torch.from_numpy(np.ascontiguousarray(m, dtype=np.float32))[None, None]
    return encode_conditions(encoders, image_tensor(source), image_tensor(target),
                             image_tensor(source_pose.image), image_tensor(target_pose.image), mt)
