from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from ..errors import ValidationError
from ..pose import PoseMap
from ..samples import CATEGORIES, NUM_CATEGORIES, Category, ImageBuffer, category

# morphological gradient (3x3 max - min) in model units, range [0, 2]
GRADIENT_THRESHOLD = 0.5


@dataclass(frozen=True)
class ClassStats:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class EvalResult:
    top1: float
    f1_macro: float
    per_class: dict[Category, ClassStats]
    n: int

    def to_dict(self) -> dict:
        return {
            "top1": self.top1,
            "f1_macro": self.f1_macro,
            "n": self.n,
            "per_class": {c.code: vars(s) for c, s in self.per_class.items()},
        }


def _ids(seq: Sequence) -> np.ndarray:
    return np.fromiter((category(c).id for c in seq), dtype=np.int64, count=len(seq))


def _check(predictions: Sequence, labels: Sequence) -> tuple[np.ndarray, np.ndarray]:
    if len(predictions) != len(labels):
        raise ValidationError(f"{len(predictions)} predictions vs {len(labels)} labels")
    if len(labels) == 0:
        raise ValidationError("cannot score an empty prediction list")
    return _ids(predictions), _ids(labels)


def top1(predictions: Sequence, labels: Sequence) -> float:
    p, y = _check(predictions, labels)
    return float(np.mean(p == y))


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def f1_macro(predictions: Sequence, labels: Sequence) -> EvalResult:
    """Per-class one-vs-rest precision/recall/F1 (0/0 taken as 0) and their unweighted mean."""
    p, y = _check(predictions, labels)
    per_class = {}
    for c in CATEGORIES:
        tp = int(np.sum((p == c.id) & (y == c.id)))
        fp = int(np.sum((p == c.id) & (y != c.id)))
        fn = int(np.sum((p != c.id) & (y == c.id)))
        prec, rec = _ratio(tp, tp + fp), _ratio(tp, tp + fn)
        per_class[c] = ClassStats(prec, rec, _ratio(2 * prec * rec, prec + rec), tp, fp, fn)
    macro = sum(s.f1 for s in per_class.values()) / NUM_CATEGORIES
    return EvalResult(float(np.mean(p == y)), macro, per_class, len(y))


evaluate = f1_macro


def gradient_mask(image: ImageBuffer, threshold: float = GRADIENT_THRESHOLD) -> np.ndarray:
    v = image.to_model().values.astype(np.float64)
    size = (3, 3, 1)
    grad = ndimage.maximum_filter(v, size=size, mode="nearest") - ndimage.minimum_filter(v, size=size, mode="nearest")
    return grad.max(axis=2) > threshold


def pose_mask(pose: PoseMap | ImageBuffer) -> np.ndarray:
    img = pose.image if isinstance(pose, PoseMap) else pose
    return img.to_file().values.max(axis=2) > 0


def pose_alignment(image: ImageBuffer, target: PoseMap, threshold: float = GRADIENT_THRESHOLD) -> float:
    """Overlap coefficient |A & B| / min(|A|, |B|) between the pose map's drawn pixels
    and the image's high-gradient pixels; 0 when either set is empty."""
    if (image.height, image.width) != (target.image.height, target.image.width):
        raise ValidationError("image and pose map sizes differ")
    a = pose_mask(target)
    b = gradient_mask(image, threshold)
    denom = min(a.sum(), b.sum())
    return float((a & b).sum() / denom) if denom else 0.0
