from __future__ import annotations

import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pqdaf.diffusion.model import GeneratorConfig
from pqdaf.diffusion.training import ToyPairSource, train_generator
from pqdaf.samples import CATEGORIES, DatasetManifest, ImageBuffer, LabeledSample

settings.register_profile("pqdaf", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("pqdaf")

_ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def record_criterion(key: str, name: str, passed: bool, detail: str) -> None:
    line = f"{key} {'PASS' if passed else 'FAIL'} {name}: {detail}"
    _ACCEPTANCE[key] = (passed, line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: int(k[1:])):
        terminalreporter.write_line(_ACCEPTANCE[key][1])
    passed = sum(ok for ok, _ in _ACCEPTANCE.values())
    terminalreporter.write_line(f"{passed}/{len(_ACCEPTANCE)} criteria passed")


@pytest.fixture(scope="session")
def pair_source() -> ToyPairSource:
    return ToyPairSource()


@pytest.fixture(scope="session")
def trained_generator(pair_source):
    """The toy generator at its default budget; trained once per session."""
    config = GeneratorConfig()
    start = time.perf_counter()
    model, losses = train_generator(config, source=pair_source)
    return model, losses, time.perf_counter() - start


def tiny_image(value: float = 0.0, size: int = 4) -> ImageBuffer:
    return ImageBuffer(np.full((size, size, 1), value, dtype=np.float32))


def synthetic_samples(n_per_class: int, prefix: str = "syn", score: float | None = None) -> list[LabeledSample]:
    return [
        LabeledSample(f"{prefix}-{c.code}-{j}", c, "synthetic", image=tiny_image(j / 100.0), score=score)
        for c in CATEGORIES for j in range(n_per_class)
    ]


def real_manifest(n_per_class: int, prefix: str = "real") -> DatasetManifest:
    recs = [LabeledSample(f"{prefix}-{c.code}-{j}", c, "real", image=tiny_image())
            for c in CATEGORIES for j in range(n_per_class)]
    return DatasetManifest(tuple(recs), split="test")


def pool_manifest(n_per_class: int) -> DatasetManifest:
    return DatasetManifest(tuple(synthetic_samples(n_per_class, score=0.9)), split="synthetic-pool")
