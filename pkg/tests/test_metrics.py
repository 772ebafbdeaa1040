"""Metrics against brute-force per-pixel set computation."""

import numpy as np
import pytest

from lamcore import (
    IGNORE_ID,
    ConfusionMatrix,
    InvalidInputError,
    LabelMap,
    ShapeMismatchError,
    UndefinedMetricError,
    confusion,
    mf1,
    miou,
)

from conftest import random_labels


def brute_force_iou_f1(pred_ids, gt_ids, class_count):
    """Per-class set computation straight from the label maps."""
    ious, f1s = [], []
    keep = gt_ids != IGNORE_ID
    p, g = pred_ids[keep], gt_ids[keep]
    for c in range(class_count):
        a = p == c
        b = g == c
        inter = int(np.count_nonzero(a & b))
        union = int(np.count_nonzero(a | b))
        if union == 0:
            ious.append(None)
            f1s.append(None)
        else:
            ious.append(inter / union)
            f1s.append(2 * inter / (np.count_nonzero(a) + np.count_nonzero(b)))
    return ious, f1s


class TestConfusion:
    def test_perfect_prediction_diagonal(self):
        ids = np.full((2, 2), 1, dtype=np.uint16)
        m = confusion(LabelMap(ids), LabelMap(ids), 3)
        np.testing.assert_array_equal(np.diag(m.counts), [0, 4, 0])
        assert m.total == 4

    def test_all_ignore_gt_gives_empty_matrix(self):
        gt = LabelMap(np.full((3, 3), IGNORE_ID, dtype=np.uint16))
        pred = LabelMap(np.zeros((3, 3), dtype=np.uint16))
        assert confusion(pred, gt, 2).total == 0

    def test_matches_counting_oracle(self, rng):
        for _ in range(20):
            pred = random_labels(rng, 5, 8, 8)
            gt = random_labels(rng, 5, 8, 8, ignore_fraction=0.2)
            m = confusion(pred, gt, 5).counts
            # independent recount
            want = np.zeros((5, 5), dtype=np.int64)
            for i in range(8):
                for j in range(8):
                    if gt.ids[i, j] == IGNORE_ID:
                        continue
                    want[gt.ids[i, j], pred.ids[i, j]] += 1
            np.testing.assert_array_equal(m, want)

    def test_pred_with_ignore_rejected(self):
        pred = LabelMap(np.full((2, 2), IGNORE_ID, dtype=np.uint16))
        gt = LabelMap(np.zeros((2, 2), dtype=np.uint16))
        with pytest.raises(InvalidInputError):
            confusion(pred, gt, 2)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            confusion(
                LabelMap(np.zeros((2, 2), dtype=np.uint16)),
                LabelMap(np.zeros((2, 3), dtype=np.uint16)),
                2,
            )

    def test_merge_is_elementwise_addition(self, rng):
        a = confusion(random_labels(rng, 3, 4, 4), random_labels(rng, 3, 4, 4), 3)
        b = confusion(random_labels(rng, 3, 4, 4), random_labels(rng, 3, 4, 4), 3)
        np.testing.assert_array_equal((a + b).counts, a.counts + b.counts)


class TestIouF1:
    def test_perfect_prediction(self, rng):
        ids = random_labels(rng, 4, 6, 6)
        m = confusion(ids, ids, 4)
        iou, mean_iou = miou(m)
        f1, mean_f1 = mf1(m)
        assert mean_iou == 1.0 and mean_f1 == 1.0
        present = np.unique(ids.ids)
        for c in present:
            assert iou[c] == 1.0 and f1[c] == 1.0

    def test_hand_computed_two_class_case(self):
        m = ConfusionMatrix(np.array([[2, 2], [0, 4]]))
        iou, mean_iou = miou(m)
        f1, mean_f1 = mf1(m)
        assert iou[0] == pytest.approx(2 / 4)
        assert iou[1] == pytest.approx(4 / 6)
        assert mean_iou == pytest.approx(7 / 12)
        assert f1[0] == pytest.approx(2 / 3)
        assert f1[1] == pytest.approx(4 / 5)
        assert mean_f1 == pytest.approx(11 / 15)

    def test_zero_union_classes_excluded(self):
        m = ConfusionMatrix(np.array([[5, 0, 0], [0, 3, 0], [0, 0, 0]]))
        iou, mean_iou = miou(m)
        assert np.isnan(iou[2]) and mean_iou == 1.0

    def test_all_zero_matrix_undefined(self):
        m = ConfusionMatrix(np.zeros((3, 3), dtype=np.int64))
        with pytest.raises(UndefinedMetricError):
            miou(m)
        with pytest.raises(UndefinedMetricError):
            mf1(m)

    def test_matches_brute_force_and_f1_identity(self, rng):
        for _ in range(50):
            pred = random_labels(rng, 4, 8, 8)
            gt = random_labels(rng, 4, 8, 8, ignore_fraction=0.1)
            m = confusion(pred, gt, 4)
            iou, _ = miou(m)
            f1, _ = mf1(m)
            want_iou, want_f1 = brute_force_iou_f1(pred.ids, gt.ids, 4)
            for c in range(4):
                if want_iou[c] is None:
                    assert np.isnan(iou[c])
                    continue
                assert iou[c] == pytest.approx(want_iou[c], abs=1e-12)
                assert f1[c] == pytest.approx(want_f1[c], abs=1e-12)
                # F1 = 2 IoU / (1 + IoU), hence F1 >= IoU
                assert abs(f1[c] - 2 * iou[c] / (1 + iou[c])) <= 1e-12
                assert f1[c] >= iou[c] - 1e-15

    def test_pixel_order_irrelevant(self, rng):
        pred = random_labels(rng, 3, 6, 6)
        gt = random_labels(rng, 3, 6, 6)
        perm = rng.permutation(36)
        pred2 = LabelMap(pred.ids.reshape(-1)[perm].reshape(6, 6))
        gt2 = LabelMap(gt.ids.reshape(-1)[perm].reshape(6, 6))
        assert miou(confusion(pred, gt, 3))[1] == miou(confusion(pred2, gt2, 3))[1]
