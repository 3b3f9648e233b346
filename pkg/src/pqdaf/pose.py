"""Upper-body skeletons: a seeded per-category pose sampler, a pose-map renderer,
and the adapter contract for external keypoint extractors."""

from __future__ import annotations

import base64
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Protocol, Sequence, Union

import numpy as np
from skimage.draw import line as _draw_line

from .errors import ExtractorUnavailableError, MalformedKeypointsError, ValidationError
from .samples import CATEGORIES, Category, ImageBuffer, category as _category

KEYPOINT_NAMES: tuple[str, ...] = (
    "head_top", "nose", "right_eye", "left_eye", "right_ear", "left_ear",
    "mouth", "chin", "neck", "right_shoulder", "left_shoulder", "right_elbow",
    "left_elbow", "right_wrist", "left_wrist", "right_hip", "left_hip", "mid_hip",
)

# Order fixes the palette index of each bone.
BONES: tuple[tuple[str, str], ...] = (
    ("neck", "right_shoulder"),
    ("neck", "left_shoulder"),
    ("right_shoulder", "right_elbow"),
    ("right_elbow", "right_wrist"),
    ("left_shoulder", "left_elbow"),
    ("left_elbow", "left_wrist"),
    ("neck", "mid_hip"),
    ("mid_hip", "right_hip"),
    ("mid_hip", "left_hip"),
    ("neck", "chin"),
    ("chin", "mouth"),
    ("mouth", "nose"),
    ("nose", "right_eye"),
    ("nose", "left_eye"),
    ("right_eye", "right_ear"),
    ("left_eye", "left_ear"),
    ("nose", "head_top"),
)

BONE_PALETTE: tuple[tuple[int, int, int], ...] = (
    (255, 0, 0), (255, 85, 0), (255, 170, 0), (255, 255, 0), (170, 255, 0),
    (85, 255, 0), (0, 255, 0), (0, 255, 85), (0, 255, 170), (0, 255, 255),
    (0, 170, 255), (0, 85, 255), (0, 0, 255), (85, 0, 255), (170, 0, 255),
    (255, 0, 255), (255, 0, 170),
)
KEYPOINT_PALETTE: tuple[tuple[int, int, int], ...] = tuple(
    (255, 255, 255) if i == 0 else (min(255, 60 + 11 * i), 255 - 9 * i, 128 + 7 * i)
    for i in range(len(KEYPOINT_NAMES))
)
BACKGROUND = (0, 0, 0)


@dataclass(frozen=True)
class Keypoint:
    name: str
    x: float
    y: float
    confidence: float = 1.0


@dataclass(frozen=True)
class Skeleton:
    """Keypoints in normalized image coordinates (x right, y down, both in [0, 1])."""

    keypoints: tuple[Keypoint, ...] = ()

    def __post_init__(self):
        kps = tuple(self.keypoints)
        object.__setattr__(self, "keypoints", kps)
        seen = set()
        for kp in kps:
            if kp.name not in KEYPOINT_NAMES:
                raise ValidationError(f"unknown keypoint name {kp.name!r}")
            if kp.name in seen:
                raise ValidationError(f"keypoint {kp.name!r} appears twice")
            seen.add(kp.name)
            for label, v in (("x", kp.x), ("y", kp.y), ("confidence", kp.confidence)):
                if not (isinstance(v, (int, float)) and math.isfinite(v) and 0.0 <= v <= 1.0):
                    raise ValidationError(f"keypoint {kp.name!r}: {label}={v!r} outside [0, 1]")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(kp.name for kp in self.keypoints)

    @property
    def bones(self) -> tuple[tuple[int, tuple[str, str]], ...]:
        """(palette index, bone) for every bone whose endpoints are both present."""
        present = set(self.names)
        return tuple((i, b) for i, b in enumerate(BONES) if b[0] in present and b[1] in present)

    def __getitem__(self, name: str) -> Keypoint:
        for kp in self.keypoints:
            if kp.name == name:
                return kp
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"keypoints": [[kp.name, kp.x, kp.y, kp.confidence] for kp in self.keypoints]}

    @classmethod
    def from_dict(cls, data: Mapping) -> Skeleton:
        return cls(tuple(Keypoint(str(n), float(x), float(y), float(c)) for n, x, y, c in data["keypoints"]))


@dataclass(frozen=True)
class PoseMap:
    image: ImageBuffer
    source_skeleton: Skeleton


# --- pose grammar -----------------------------------------------------------


@dataclass(frozen=True)
class Box:
    x0: float
    x1: float
    y0: float
    y1: float

    def sample(self, rng: np.random.Generator) -> tuple[float, float]:
        return float(rng.uniform(self.x0, self.x1)), float(rng.uniform(self.y0, self.y1))

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1


@dataclass(frozen=True)
class Arc:
    """Points on a circle of radius ``r`` about (cx, cy); angles in degrees, y up."""

    cx: float
    cy: float
    r: float
    a0: float
    a1: float

    def sample(self, rng: np.random.Generator) -> tuple[float, float]:
        a = math.radians(rng.uniform(self.a0, self.a1))
        return self.cx + self.r * math.cos(a), self.cy - self.r * math.sin(a)

    def contains(self, x: float, y: float, tol: float = 1e-9) -> bool:
        d = math.hypot(x - self.cx, self.cy - y)
        a = math.degrees(math.atan2(self.cy - y, x - self.cx)) % 360.0
        return abs(d - self.r) <= tol and self.a0 - tol <= a <= self.a1 + tol


Region = Union[Box, Arc]

WHEEL_RIGHT_HAND = Arc(0.5, 0.80, 0.22, 120.0, 160.0)
WHEEL_LEFT_HAND = Arc(0.5, 0.80, 0.22, 20.0, 60.0)


@dataclass(frozen=True)
class CategoryPose:
    right_wrist: Region = WHEEL_RIGHT_HAND
    left_wrist: Region = WHEEL_LEFT_HAND
    head_turn: tuple[float, float] = (-0.01, 0.01)
    head_drop: tuple[float, float] = (0.0, 0.01)
    lean: tuple[float, float] = (-0.01, 0.01)


@dataclass(frozen=True)
class PoseGrammar:
    """Per-category ranges the sampler draws from, plus shared body jitter."""

    categories: Mapping[int, CategoryPose]
    body_shift: tuple[float, float] = (-0.03, 0.03)
    shoulder_half_width: tuple[float, float] = (0.15, 0.19)
    elbow_bend: tuple[float, float] = (0.04, 0.08)
    confidence: tuple[float, float] = (0.8, 1.0)

    def __post_init__(self):
        missing = [c.id for c in CATEGORIES if c.id not in self.categories]
        if missing:
            raise ValidationError(f"pose grammar lacks entries for categories {missing}")

    def __getitem__(self, cat: Category | int) -> CategoryPose:
        return self.categories[_category(cat).id]


# Facing the camera: the driver's right side is on the image left.
DEFAULT_GRAMMAR = PoseGrammar(
    categories={
        0: CategoryPose(),
        1: CategoryPose(right_wrist=Box(0.30, 0.42, 0.60, 0.72), head_drop=(0.02, 0.04)),
        2: CategoryPose(right_wrist=Box(0.30, 0.38, 0.16, 0.26)),
        3: CategoryPose(left_wrist=Box(0.58, 0.70, 0.60, 0.72), head_drop=(0.02, 0.04)),
        4: CategoryPose(left_wrist=Box(0.62, 0.70, 0.16, 0.26)),
        5: CategoryPose(right_wrist=Box(0.06, 0.20, 0.50, 0.64)),
        6: CategoryPose(right_wrist=Box(0.44, 0.52, 0.26, 0.32), head_turn=(-0.02, 0.0)),
        7: CategoryPose(right_wrist=Box(0.04, 0.16, 0.12, 0.30), lean=(-0.06, -0.03)),
        8: CategoryPose(right_wrist=Box(0.40, 0.50, 0.04, 0.10)),
        9: CategoryPose(head_turn=(0.05, 0.08)),
    }
)


def _clamp01(v: float) -> float:
    return min(1.0, max(0.0, v))


def _elbow(shoulder: tuple[float, float], wrist: tuple[float, float], bend: float, outward: float):
    sx, sy = shoulder
    wx, wy = wrist
    mx, my = (sx + wx) / 2, (sy + wy) / 2
    dx, dy = wx - sx, wy - sy
    norm = math.hypot(dx, dy) or 1.0
    px, py = -dy / norm, dx / norm
    if px * outward < 0 or (px == 0 and py < 0):
        px, py = -px, -py
    return mx + bend * px, my + bend * py


def synth_pose(cat: Category | int, seed: int, grammar: PoseGrammar = DEFAULT_GRAMMAR) -> Skeleton:
    """Draw a skeleton for ``cat``; deterministic in (category, seed, grammar)."""
    cat = _category(cat)
    rule = grammar[cat]
    rng = np.random.default_rng([cat.id, int(seed) & 0xFFFFFFFF, int(seed) >> 32 & 0xFFFFFFFF])

    bx = rng.uniform(*grammar.body_shift)
    by = rng.uniform(*grammar.body_shift) * 0.5
    sw = rng.uniform(*grammar.shoulder_half_width)
    lean = rng.uniform(*rule.lean)
    turn = rng.uniform(*rule.head_turn)
    drop = rng.uniform(*rule.head_drop)

    neck = (0.5 + bx + lean, 0.36 + by)
    mid_hip = (0.5 + bx, 0.86 + by)
    hip_hw = sw * 0.65
    head_x, head_y = neck[0] + lean * 0.5, neck[1] + drop

    pts: dict[str, tuple[float, float]] = {
        "neck": neck,
        "mid_hip": mid_hip,
        "right_hip": (mid_hip[0] - hip_hw, mid_hip[1]),
        "left_hip": (mid_hip[0] + hip_hw, mid_hip[1]),
        "right_shoulder": (neck[0] - sw, neck[1] + 0.02),
        "left_shoulder": (neck[0] + sw, neck[1] + 0.02),
        "chin": (head_x + turn * 0.6, head_y - 0.07),
        "mouth": (head_x + turn * 0.8, head_y - 0.11),
        "nose": (head_x + turn, head_y - 0.16),
        "right_eye": (head_x + turn - 0.035, head_y - 0.19),
        "left_eye": (head_x + turn + 0.035, head_y - 0.19),
        "right_ear": (head_x + turn * 0.3 - 0.075, head_y - 0.18),
        "left_ear": (head_x + turn * 0.3 + 0.075, head_y - 0.18),
        "head_top": (head_x + turn * 0.5, head_y - 0.27),
    }
    rw = rule.right_wrist.sample(rng)
    lw = rule.left_wrist.sample(rng)
    pts["right_wrist"] = rw
    pts["left_wrist"] = lw
    pts["right_elbow"] = _elbow(pts["right_shoulder"], rw, rng.uniform(*grammar.elbow_bend), -1.0)
    pts["left_elbow"] = _elbow(pts["left_shoulder"], lw, rng.uniform(*grammar.elbow_bend), 1.0)

    conf = rng.uniform(*grammar.confidence, size=len(KEYPOINT_NAMES))
    return Skeleton(tuple(
        Keypoint(name, _clamp01(pts[name][0]), _clamp01(pts[name][1]), float(conf[i]))
        for i, name in enumerate(KEYPOINT_NAMES)
    ))


# --- rendering --------------------------------------------------------------


def to_pixel(x: float, y: float, width: int, height: int) -> tuple[int, int]:
    """Normalized (x, y) to integer (row, col)."""
    return int(round(y * (height - 1))), int(round(x * (width - 1)))


def disc_offsets(radius: int) -> list[tuple[int, int]]:
    return [(dr, dc) for dr in range(-radius, radius + 1) for dc in range(-radius, radius + 1)
            if dr * dr + dc * dc <= radius * radius]


def _stamp(canvas: np.ndarray, r: int, c: int, offsets, color) -> None:
    h, w = canvas.shape[:2]
    for dr, dc in offsets:
        rr, cc = r + dr, c + dc
        if 0 <= rr < h and 0 <= cc < w:
            canvas[rr, cc] = color


def segment_pixels(p0: tuple[int, int], p1: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    return _draw_line(p0[0], p0[1], p1[0], p1[1])


def render_skeleton(
    skeleton: Skeleton,
    width: int,
    height: int,
    bone_width: int = 1,
    keypoint_radius: int = 1,
) -> PoseMap:
    """Rasterize bones as colored segments over black, then keypoints as filled discs."""
    if width <= 0 or height <= 0:
        raise ValidationError("render size must be positive")
    canvas = np.zeros((height, width, 3), dtype=np.uint8)
    pix = {kp.name: to_pixel(kp.x, kp.y, width, height) for kp in skeleton.keypoints}
    thick = disc_offsets((bone_width - 1) // 2) if bone_width > 1 else [(0, 0)]
    for idx, (a, b) in skeleton.bones:
        rr, cc = segment_pixels(pix[a], pix[b])
        color = BONE_PALETTE[idx % len(BONE_PALETTE)]
        for r, c in zip(rr, cc):
            _stamp(canvas, int(r), int(c), thick, color)
    disc = disc_offsets(keypoint_radius)
    for kp in skeleton.keypoints:
        color = KEYPOINT_PALETTE[KEYPOINT_NAMES.index(kp.name)]
        _stamp(canvas, *pix[kp.name], disc, color)
    return PoseMap(ImageBuffer(canvas, "file"), skeleton)


# --- extractor adapter ------------------------------------------------------

KeypointLike = Union[Keypoint, Sequence, Mapping]


class PoseExtractor(Protocol):
    def __call__(self, image: ImageBuffer) -> Skeleton | Iterable[KeypointLike]: ...


def _as_keypoint(item: KeypointLike) -> Keypoint:
    if isinstance(item, Keypoint):
        return item
    if isinstance(item, Mapping):
        return Keypoint(str(item["name"]), float(item["x"]), float(item["y"]),
                        float(item.get("confidence", 1.0)))
    name, x, y, *rest = item
    return Keypoint(str(name), float(x), float(y), float(rest[0]) if rest else 1.0)


def extract_pose(image: ImageBuffer, extractor: PoseExtractor | None = None) -> Skeleton:
    """Run an external keypoint extractor and validate its output as a Skeleton."""
    if extractor is None:
        raise ExtractorUnavailableError("no extractor configured")
    try:
        out = extractor(image)
    except (ExtractorUnavailableError, MalformedKeypointsError):
        raise
    except (OSError, ConnectionError, TimeoutError) as exc:
        raise ExtractorUnavailableError(f"extractor unavailable: {exc}") from exc
    try:
        if isinstance(out, Skeleton):
            return Skeleton(out.keypoints)
        return Skeleton(tuple(_as_keypoint(k) for k in out))
    except (ValidationError, KeyError, TypeError, ValueError) as exc:
        raise MalformedKeypointsError(f"extractor returned malformed keypoints: {exc}") from exc


@dataclass
class HTTPPoseExtractor:
    """POSTs ``{"image": <base64 PNG>}`` and expects ``{"keypoints": [{name, x, y, confidence}]}``."""

    endpoint: str
    timeout_s: float = 30.0
    client_factory: Callable | None = field(default=None, repr=False)

    def __call__(self, image: ImageBuffer) -> list[Mapping]:
        import httpx

        payload = {"image": base64.b64encode(image.png_bytes()).decode("ascii")}
        client = self.client_factory() if self.client_factory else httpx.Client(timeout=self.timeout_s)
        try:
            resp = client.post(self.endpoint, json=payload)
            resp.raise_for_status()
            body = resp.json()
        except httpx.HTTPError as exc:
            raise ExtractorUnavailableError(f"extractor unavailable: {exc}") from exc
        finally:
            client.close()
        if not isinstance(body, Mapping) or "keypoints" not in body:
            raise MalformedKeypointsError("extractor response lacks 'keypoints'")
        return list(body["keypoints"])
