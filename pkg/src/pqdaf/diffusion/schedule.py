from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..errors import ValidationError
from ..samples import ImageBuffer


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Discrete variance schedule over T steps.

    With ``clean_start=False`` (standard) step t has already applied betas[0..t],
    so alpha_bar[0] = 1 - betas[0]. With ``clean_start=True`` step t has applied
    betas[0..t-1], giving alpha_bar[0] = 1 exactly.
    """

    betas: np.ndarray
    clean_start: bool = False

    def __post_init__(self):
        b = np.asarray(self.betas, dtype=np.float64)
        if b.ndim != 1 or b.size == 0:
            raise ValidationError("betas must be a non-empty 1-d sequence")
        if not np.all((b > 0) & (b < 1)):
            raise ValidationError("betas must lie strictly inside (0, 1)")
        b = b.copy()
        b.flags.writeable = False
        object.__setattr__(self, "betas", b)
        cum = np.cumprod(1.0 - b)
        ab = np.concatenate([[1.0], cum[:-1]]) if self.clean_start else cum
        ab.flags.writeable = False
        object.__setattr__(self, "alpha_bars", ab)

    @classmethod
    def linear(cls, T: int = 200, beta_start: float = 1e-4, beta_end: float = 2e-2,
               clean_start: bool = False) -> NoiseSchedule:
        if T < 1:
            raise ValidationError("T must be at least 1")
        if not 0 < beta_start <= beta_end < 1:
            raise ValidationError("need 0 < beta_start <= beta_end < 1")
        return cls(np.linspace(beta_start, beta_end, T), clean_start=clean_start)

    @property
    def T(self) -> int:
        return len(self.betas)

    @property
    def alphas(self) -> np.ndarray:
        return 1.0 - self.betas

    def snr(self) -> np.ndarray:
        ab = self.alpha_bars
        with np.errstate(divide="ignore"):
            return ab / (1.0 - ab)

    def check_t(self, t) -> None:
        arr = np.asarray(t.cpu() if isinstance(t, torch.Tensor) else t)
        if arr.size and (arr.min() < 0 or arr.max() >= self.T):
            raise ValidationError(f"step index out of range [0, {self.T})")

    def alpha_bar(self, t: torch.Tensor, like: torch.Tensor) -> torch.Tensor:
        """alpha_bar[t] as a tensor broadcastable against ``like`` (batch first)."""
        ab = torch.tensor(self.alpha_bars, dtype=like.dtype, device=like.device)[t]
        return ab.reshape(-1, *([1] * (like.dim() - 1)))

    def to_dict(self) -> dict:
        return {"betas": self.betas.tolist(), "clean_start": self.clean_start}

    @classmethod
    def from_dict(cls, d: dict) -> NoiseSchedule:
        return cls(np.asarray(d["betas"]), clean_start=bool(d.get("clean_start", False)))


def forward_noise(x0, t, eps, schedule: NoiseSchedule):
    """x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps.

    Accepts tensors (t scalar or per-batch), numpy arrays, or an ImageBuffer
    (converted to model convention; the result is a float array since x_t
    leaves [-1, 1]).
    """
    schedule.check_t(t)
    if isinstance(x0, ImageBuffer):
        x0 = x0.to_model().values
    if isinstance(x0, torch.Tensor):
        t = torch.as_tensor(t, device=x0.device).long()
        if t.dim() == 0:
            t = t.expand(x0.shape[0]) if x0.dim() > 0 else t
        if x0.shape != eps.shape:
            raise ValidationError("x0 and eps shapes differ")
        ab = schedule.alpha_bar(t, x0)
        return ab.sqrt() * x0 + (1.0 - ab).sqrt() * eps
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    ab = schedule.alpha_bars[int(t)]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps
