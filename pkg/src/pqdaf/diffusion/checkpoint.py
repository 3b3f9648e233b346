"""Self-describing generator checkpoints.

The frozen semantic encoder is not stored; it is rebuilt from its seed and
verified against the stored checksum.
"""

from __future__ import annotations

from pathlib import Path

import torch

from ..errors import ValidationError
from .model import GeneratorConfig, PoseGuidedGenerator
from .schedule import NoiseSchedule

FORMAT_VERSION = 1
_FROZEN_PREFIX = "encoders.semantic.frozen."


def save_checkpoint(model: PoseGuidedGenerator, path: str | Path, schedule: NoiseSchedule | None = None) -> None:
    schedule = schedule or model.config.schedule()
    trainable = {k: v.detach().cpu().clone() for k, v in model.state_dict().items()
                 if not k.startswith(_FROZEN_PREFIX)}
    torch.save({
        "format_version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "schedule": schedule.to_dict(),
        "frozen_encoder_seed": model.config.frozen_encoder_seed,
        "frozen_encoder_checksum": model.frozen_checksum(),
        "trainable": trainable,
    }, path)


def load_checkpoint(path: str | Path) -> tuple[PoseGuidedGenerator, NoiseSchedule]:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"checkpoint not found: {path}")
    blob = torch.load(path, map_location="cpu", weights_only=False)
    if not isinstance(blob, dict) or blob.get("format_version") != FORMAT_VERSION:
        raise ValidationError(f"{path}: unsupported checkpoint format_version "
                              f"{blob.get('format_version') if isinstance(blob, dict) else None!r}")
    config = GeneratorConfig.from_dict(blob["config"])
    model = PoseGuidedGenerator(config)
    if model.frozen_checksum() != blob["frozen_encoder_checksum"]:
        raise ValidationError(f"{path}: frozen encoder rebuilt from seed does not match checksum")
    missing, unexpected = model.load_state_dict(blob["trainable"], strict=False)
    missing = [k for k in missing if not k.startswith(_FROZEN_PREFIX)]
    if missing or unexpected:
        raise ValidationError(f"{path}: parameter mismatch (missing={missing}, unexpected={unexpected})")
    model.eval()
    return model, NoiseSchedule.from_dict(blob["schedule"])
