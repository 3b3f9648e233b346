"""Pose-guided synthetic augmentation with semantic filtering for few-shot driver-behavior recognition."""

from .samples import CATEGORIES, Category, DatasetManifest, ImageBuffer, LabeledSample, category

__version__ = "0.1.0"

__all__ = ["CATEGORIES", "Category", "DatasetManifest", "ImageBuffer", "LabeledSample", "category"]
