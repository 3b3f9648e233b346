import csv

import pytest
import torch

from pqdaf.dataset_ops import few_shot_subset
from pqdaf.errors import ValidationError
from pqdaf.samples import DatasetManifest, LabeledSample
from pqdaf.toydata import make_real_manifest
from pqdaf.train_eval import TrainConfig, evaluate_classifier, ratio_sweep, summarize, train_classifier
from pqdaf.train_eval.classifier import SmallCNN, build_classifier, load_classifier, save_classifier
from pqdaf.train_eval.sweep import SweepRow, write_plot_data, write_results


@pytest.fixture(scope="module")
def small_real():
    return make_real_manifest(range(2))


@pytest.fixture(scope="module")
def sweep_data():
    real = make_real_manifest(range(100, 110))
    synth = make_real_manifest(range(200, 230), prefix="syn")
    pool = DatasetManifest(tuple(LabeledSample(r.id, r.category, "synthetic", image=r.image, score=0.9) for r in synth),
                           split="synthetic-pool")
    return real, pool, make_real_manifest(range(300, 302))


def test_config_validation():
    for bad in ({"epochs": -1}, {"batch_size": 0}, {"lr": 0}, {"backbone": "resnet9000"}):
        with pytest.raises(ValidationError):
            TrainConfig(**bad)
    with pytest.raises(ValidationError):
        TrainConfig.from_dict({"momentum": 0.9})
    assert TrainConfig.from_dict(TrainConfig().to_dict()) == TrainConfig()


def test_backbone_shape():
    out = SmallCNN()(torch.zeros(3, 1, 32, 32))
    assert out.shape == (3, 10)


def test_overfits_twenty_samples(small_real):
    model, result = train_classifier(small_real, small_real, TrainConfig(epochs=200, lr=1e-3, batch_size=8))
    assert len(small_real) == 20
    assert result.top1 >= 0.95


@pytest.mark.parametrize("seed", range(5))
def test_untrained_model_near_chance(seed):
    eval_set = make_real_manifest(range(400, 405))
    result = evaluate_classifier(build_classifier(TrainConfig(seed=seed)), eval_set)
    assert 0.0 <= result.top1 <= 0.3


def test_training_is_deterministic(small_real):
    cfg = TrainConfig(epochs=3, seed=4)
    m1, r1 = train_classifier(small_real, small_real, cfg)
    m2, r2 = train_classifier(small_real, small_real, cfg)
    assert r1 == r2
    for a, b in zip(m1.state_dict().values(), m2.state_dict().values()):
        assert torch.equal(a, b)


def test_missing_class_rejected(small_real):
    partial = small_real.replace(records=[r for r in small_real if r.category.id != 6])
    with pytest.raises(ValidationError, match="C6"):
        train_classifier(partial, small_real)
    with pytest.raises(ValidationError):
        train_classifier(small_real, DatasetManifest())


def test_checkpoint_round_trip(small_real, tmp_path):
    cfg = TrainConfig(epochs=1)
    model, result = train_classifier(small_real, small_real, cfg)
    save_classifier(model, cfg, tmp_path / "c.pt")
    back, back_cfg = load_classifier(tmp_path / "c.pt")
    assert back_cfg == cfg
    assert evaluate_classifier(back, small_real) == result
    with pytest.raises(ValidationError):
        load_classifier(tmp_path / "missing.pt")


def test_sweep_shape_and_outputs(sweep_data, tmp_path):
    real, pool, eval_set = sweep_data
    rows = ratio_sweep(real, pool, [0.5, 1, 2, 3], 10, [0], TrainConfig(epochs=1), eval_set)
    assert [r.ratio for r in rows] == [0.5, 1.0, 2.0, 3.0]
    assert [r.n_train for r in rows] == [150, 200, 300, 400]

    write_results(rows, tmp_path / "results.csv")
    with open(tmp_path / "results.csv") as fh:
        table = list(csv.DictReader(fh))
    assert [int(r["n_train"]) for r in table] == [150, 200, 300, 400]
    assert float(table[0]["top1"]) == rows[0].top1

    write_plot_data(rows, tmp_path / "plot.csv")
    with open(tmp_path / "plot.csv") as fh:
        plot = list(csv.DictReader(fh))
    assert [p["series"] for p in plot] == ["seed=0"] * 4 + ["mean"] * 4
    assert [float(p["x"]) for p in plot[:4]] == [0.5, 1.0, 2.0, 3.0]


def test_ratio_zero_is_real_only(sweep_data):
    real, pool, eval_set = sweep_data
    cfg = TrainConfig(epochs=1)
    [row] = ratio_sweep(real, pool, [0], 3, [1], cfg, eval_set)
    _, direct = train_classifier(few_shot_subset(real, 3, 1), eval_set, TrainConfig(epochs=1, seed=1))
    assert row.n_train == 30
    assert row.top1 == direct.top1


def test_summary_statistics():
    rows = [SweepRow(1.0, s, v, 0.0, 10) for s, v in enumerate([0.2, 0.4, 0.6])]
    [summary] = summarize(rows)
    assert summary.mean_top1 == pytest.approx(0.4)
    assert summary.std_top1 == pytest.approx(0.2)
    assert summary.n_seeds == 3
