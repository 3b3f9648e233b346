from .classifier import TrainConfig, evaluate_classifier, train_classifier
from .metrics import EvalResult, f1_macro, pose_alignment, top1
from .sweep import ratio_sweep, summarize

__all__ = [
    "EvalResult", "TrainConfig", "evaluate_classifier", "f1_macro", "pose_alignment", "ratio_sweep",
    "summarize", "top1", "train_classifier",
]
