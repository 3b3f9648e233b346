import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pqdaf.errors import ValidationError
from pqdaf.pose import Skeleton, render_skeleton, synth_pose
from pqdaf.samples import CATEGORIES, ImageBuffer
from pqdaf.train_eval import f1_macro, pose_alignment, top1

label_lists = st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), min_size=1, max_size=80)


def oracle_macro_f1(pred, true):
    cm = np.zeros((10, 10), dtype=np.int64)
    for p, t in zip(pred, true):
        cm[t, p] += 1
    f1s = []
    for c in range(10):
        tp = cm[c, c]
        fp = cm[:, c].sum() - tp
        fn = cm[c, :].sum() - tp
        f1s.append(0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn))
    return sum(f1s) / 10


@given(label_lists)
def test_top1_matches_loop(pairs):
    pred, true = zip(*pairs)
    hits = 0
    for p, t in pairs:
        hits += p == t
    assert abs(top1(pred, true) - hits / len(pairs)) <= 1e-12


@given(label_lists)
def test_macro_f1_matches_confusion_oracle(pairs):
    pred, true = zip(*pairs)
    res = f1_macro(pred, true)
    assert abs(res.f1_macro - oracle_macro_f1(pred, true)) <= 1e-9
    assert res.n == len(pairs)
    for c, s in res.per_class.items():
        assert s.tp + s.fn == sum(t == c.id for t in true)
        assert s.tp + s.fp == sum(p == c.id for p in pred)
        assert 0.0 <= s.f1 <= 1.0


@given(label_lists, st.randoms(use_true_random=False))
def test_metrics_invariant_to_joint_permutation(pairs, rnd):
    shuffled = list(pairs)
    rnd.shuffle(shuffled)
    a = f1_macro(*zip(*pairs))
    b = f1_macro(*zip(*shuffled))
    assert a.top1 == pytest.approx(b.top1, abs=1e-12)
    assert a.f1_macro == pytest.approx(b.f1_macro, abs=1e-12)


def test_hand_computed_class():
    # class 3: TP=1, FP=1, FN=1 -> P = R = F1 = 0.5
    res = f1_macro([3, 3, 0], [3, 1, 3])
    s = res.per_class[CATEGORIES[3]]
    assert (s.tp, s.fp, s.fn) == (1, 1, 1)
    assert s.precision == s.recall == s.f1 == 0.5


def test_single_class_labels():
    res = f1_macro([2] * 5, [2] * 5)
    assert res.top1 == 1.0
    # the nine absent classes score 0, not NaN
    assert res.f1_macro == pytest.approx(0.1)
    assert all(not np.isnan(s.f1) for s in res.per_class.values())


def test_accepts_categories_and_codes():
    assert top1([CATEGORIES[1], "C2"], [1, 2]) == 1.0


def test_metric_errors():
    with pytest.raises(ValidationError):
        top1([], [])
    with pytest.raises(ValidationError):
        f1_macro([1, 2], [1])
    with pytest.raises(ValidationError):
        top1([10], [1])


# --- pose alignment ----------------------------------------------------------------

def _pose(seed=3, cat=4, size=32):
    return render_skeleton(synth_pose(CATEGORIES[cat], seed), size, size)


def _shift(img: ImageBuffer, dc: int) -> ImageBuffer:
    v = img.to_file().values
    out = np.zeros_like(v)
    out[:, dc:] = v[:, : v.shape[1] - dc]
    return ImageBuffer(out, "file")


def oracle_alignment(image: ImageBuffer, drawn: np.ndarray) -> float:
    v = image.to_model().values.astype(np.float64)
    h, w, _ = v.shape
    edges = set()
    for r in range(h):
        for c in range(w):
            win = v[max(r - 1, 0): r + 2, max(c - 1, 0): c + 2]
            if (win.max(axis=(0, 1)) - win.min(axis=(0, 1))).max() > 0.5:
                edges.add((r, c))
    pose = set(zip(*np.nonzero(drawn)))
    small = min(len(edges), len(pose))
    return len(edges & pose) / small if small else 0.0


def test_self_alignment_is_one():
    pm = _pose()
    assert pose_alignment(pm.image, pm) == pytest.approx(1.0)


def test_blank_image_scores_zero():
    assert pose_alignment(ImageBuffer(np.zeros((32, 32, 1), np.float32)), _pose()) == 0.0
    empty = render_skeleton(Skeleton(()), 32, 32)
    assert pose_alignment(_pose().image, empty) == 0.0


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_shift_lowers_alignment_and_matches_oracle(seed):
    pm = _pose(seed)
    shifted = _shift(pm.image, 4)
    got = pose_alignment(shifted, pm)
    assert got < 1.0
    drawn = pm.image.values.max(axis=2) > 0
    assert got == pytest.approx(oracle_alignment(shifted, drawn), abs=1e-12)


def test_translation_symmetry():
    # shifting both the image and the pose map by the same amount leaves overlap unchanged
    pm = _pose(size=40)
    body = pm.image.values.max(axis=2) > 0
    assert not body[:, 36:].any()
    moved = _shift(pm.image, 3)
    moved_pose = type(pm)(moved, pm.source_skeleton)
    assert pose_alignment(moved, moved_pose) == pytest.approx(pose_alignment(pm.image, pm))


def test_alignment_size_mismatch():
    with pytest.raises(ValidationError):
        pose_alignment(ImageBuffer(np.zeros((16, 16, 1), np.float32)), _pose())
