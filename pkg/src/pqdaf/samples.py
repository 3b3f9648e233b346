"""Core domain types: behavior categories, image buffers, labeled samples, manifests."""

from __future__ import annotations

import dataclasses
import io
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Mapping

import numpy as np
from PIL import Image

from .errors import ValidationError

Provenance = Literal["real", "synthetic"]
Split = Literal["train", "test", "synthetic-pool"]
Convention = Literal["model", "file"]

PROVENANCES = ("real", "synthetic")
SPLITS = ("train", "test", "synthetic-pool")


@dataclass(frozen=True)
class Category:
    id: int
    code: str
    description: str

    def __str__(self) -> str:
        return self.code


CATEGORIES: tuple[Category, ...] = (
    Category(0, "C0", "Normal driving"),
    Category(1, "C1", "Texting with right hand"),
    Category(2, "C2", "Holding phone to right ear"),
    Category(3, "C3", "Texting with left hand"),
    Category(4, "C4", "Holding phone to left ear"),
    Category(5, "C5", "Adjusting multimedia"),
    Category(6, "C6", "Drinking water"),
    Category(7, "C7", "Reaching toward back seat"),
    Category(8, "C8", "Applying makeup"),
    Category(9, "C9", "Talking to passenger"),
)
NUM_CATEGORIES = len(CATEGORIES)
_BY_CODE = {c.code: c for c in CATEGORIES}


def category(key: int | str | Category) -> Category:
    """Look up a category by id (0..9), code ("C0".."C9") or pass one through."""
    if isinstance(key, Category):
        return CATEGORIES[key.id]
    if isinstance(key, str):
        try:
            return _BY_CODE[key.upper()]
        except KeyError:
            raise ValidationError(f"unknown category code {key!r}") from None
    if isinstance(key, (bool, np.bool_)) or not isinstance(key, (int, np.integer)):
        raise ValidationError(f"category id must be an integer, got {key!r}")
    if not 0 <= int(key) < NUM_CATEGORIES:
        raise ValidationError(f"category id {key} outside 0..{NUM_CATEGORIES - 1}")
    return CATEGORIES[int(key)]


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """Pixel array of shape (height, width, channels).

    ``convention='model'`` holds float32 values in [-1, 1]; ``convention='file'``
    holds uint8 values in [0, 255]. The array is made read-only on construction.
    """

    values: np.ndarray
    convention: Convention = "model"

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim == 2:
            v = v[:, :, None]
        if v.ndim != 3 or v.shape[2] not in (1, 3):
            raise ValidationError(f"image must be HxWx1 or HxWx3, got shape {v.shape}")
        if v.shape[0] <= 0 or v.shape[1] <= 0:
            raise ValidationError("image width and height must be positive")
        if self.convention == "model":
            v = v.astype(np.float32, copy=True)
            if not np.all(np.isfinite(v)) or v.min() < -1.0 or v.max() > 1.0:
                raise ValidationError("model-convention image values must lie in [-1, 1]")
        elif self.convention == "file":
            if v.dtype != np.uint8:
                if np.any(v < 0) or np.any(v > 255):
                    raise ValidationError("file-convention image values must lie in [0, 255]")
                v = v.astype(np.uint8)
            else:
                v = v.copy()
        else:
            raise ValidationError(f"unknown convention {self.convention!r}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]

    def to_model(self) -> ImageBuffer:
        if self.convention == "model":
            return self
        return ImageBuffer(self.values.astype(np.float32) / 127.5 - 1.0, "model")

    def to_file(self) -> ImageBuffer:
        if self.convention == "file":
            return self
        q = np.rint((self.values.astype(np.float64) + 1.0) * 127.5)
        return ImageBuffer(np.clip(q, 0, 255).astype(np.uint8), "file")

    def to_pil(self) -> Image.Image:
        arr = self.to_file().values
        return Image.fromarray(arr[:, :, 0] if arr.shape[2] == 1 else arr)

    def save(self, path: str | Path) -> None:
        self.to_pil().save(path, format="PNG")

    def png_bytes(self) -> bytes:
        buf = io.BytesIO()
        self.to_pil().save(buf, format="PNG")
        return buf.getvalue()

    @classmethod
    def load(cls, path: str | Path) -> ImageBuffer:
        with Image.open(path) as im:
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB")
            return cls(np.asarray(im), "file")

    def __eq__(self, other) -> bool:
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return self.convention == other.convention and np.array_equal(self.values, other.values)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class LabeledSample:
    id: str
    category: Category
    provenance: Provenance
    path: str | None = None
    score: float | None = None
    image: ImageBuffer | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.id:
            raise ValidationError("sample id must be non-empty")
        object.__setattr__(self, "category", category(self.category))
        if self.provenance not in PROVENANCES:
            raise ValidationError(f"unknown provenance {self.provenance!r}")
        if self.score is not None:
            if self.provenance == "real":
                raise ValidationError(f"real sample {self.id} cannot carry a score")
            if not 0.0 <= self.score <= 1.0:
                raise ValidationError(f"sample {self.id}: score {self.score} outside [0, 1]")

    def with_score(self, score: float) -> LabeledSample:
        return dataclasses.replace(self, score=score)

    def load_image(self, root: str | Path | None = None) -> ImageBuffer:
        """Return the in-memory image, else read ``path`` (relative to ``root``)."""
        if self.image is not None:
            return self.image
        if self.path is None:
            raise ValidationError(f"sample {self.id} has neither image nor path")
        p = Path(self.path)
        if root is not None and not p.is_absolute():
            p = Path(root) / p
        return ImageBuffer.load(p)


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[LabeledSample, ...] = ()
    split: Split = "train"
    seed: int = 0
    # directory that relative record paths resolve against; not serialized
    root: Path | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if self.split not in SPLITS:
            raise ValidationError(f"unknown split {self.split!r}")
        seen: set[str] = set()
        for r in self.records:
            if r.id in seen:
                raise ValidationError(f"duplicate record id {r.id!r}")
            seen.add(r.id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def by_category(self) -> dict[Category, list[LabeledSample]]:
        groups: dict[Category, list[LabeledSample]] = {c: [] for c in CATEGORIES}
        for r in self.records:
            groups[r.category].append(r)
        return groups

    def replace(self, records: Iterable[LabeledSample] | None = None, **kw) -> DatasetManifest:
        if records is not None:
            kw["records"] = tuple(records)
        return dataclasses.replace(self, **kw)

    def load_image(self, sample: LabeledSample) -> ImageBuffer:
        return sample.load_image(self.root)


def per_class_counts(manifest: DatasetManifest | Iterable[LabeledSample]) -> dict[Category, int]:
    counts = Counter(r.category for r in manifest)
    return {c: counts.get(c, 0) for c in CATEGORIES}


def counts_by_code(counts: Mapping[Category, int]) -> dict[str, int]:
    return {c.code: n for c, n in counts.items()}
