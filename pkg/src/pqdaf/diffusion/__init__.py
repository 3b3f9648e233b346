"""Pose-conditioned denoising diffusion generator."""

from .checkpoint import load_checkpoint, save_checkpoint
from .conditions import ConditionBundle, assemble_conditions, encode_conditions
from .guidance import SamplerConfig, cfg_predict, sample
from .model import GeneratorConfig, PoseGuidedGenerator
from .schedule import NoiseSchedule, forward_noise
from .synthesis import generate_pool
from .training import denoising_loss, train_generator, training_step

__all__ = [
    "ConditionBundle", "GeneratorConfig", "NoiseSchedule", "PoseGuidedGenerator", "SamplerConfig",
    "assemble_conditions", "cfg_predict", "denoising_loss", "encode_conditions", "forward_noise",
    "generate_pool", "load_checkpoint", "sample", "save_checkpoint", "train_generator", "training_step",
]
