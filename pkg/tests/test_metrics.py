import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from eventcure.dataset import AlbumRecord, EventLabelDistribution
from eventcure.errors import AllDropped, EmptyAlbum, LengthMismatch, MissingGroundTruth
from eventcure.metrics import (
    EvaluationReport,
    LabelMapping,
    cutoff,
    evaluate_curation,
    evaluate_recognition,
    f1_score,
    load_confusion,
    map_at,
    precision_at,
    remap_confusion,
    save_confusion,
    top1_accuracy,
)


def brute_force_ap(predicted, ground_truth, t):
    """Average precision written out from the precision-recall points: walk
    the predicted ranking and record precision at each recall increase."""
    n = len(predicted)
    k = max(1, -(-t * n // 100))
    by_gt = sorted(range(n), key=lambda i: (-ground_truth[i], i))
    relevant = set(by_gt[:k])
    ranked = sorted(range(n), key=lambda i: (-predicted[i], i))
    points, found = [], 0
    for r, i in enumerate(ranked, start=1):
        if i in relevant:
            found += 1
            points.append(found / r)
    return sum(points) / k


class TestPrecisionAt:
    def test_perfect(self):
        gt = np.array([0.1, 0.9, 0.4, 0.7, 0.3])
        for t in (5, 20, 50, 100):
            assert precision_at(gt, gt, t) == 1.0

    def test_hand_example(self):
        gt = np.zeros(10)
        gt[[3, 7]] = [1.0, 0.9]
        pred = np.zeros(10)
        pred[[3, 1]] = [1.0, 0.9]
        assert precision_at(pred, gt, 20) == 0.5

    def test_cutoff_rounds_up_and_is_positive(self):
        assert cutoff(10, 20) == 2
        assert cutoff(11, 20) == 3
        assert cutoff(3, 5) == 1

    def test_reversed_ranking_scores_zero(self):
        gt = np.arange(10.0)
        assert precision_at(-gt, gt, 20) == 0.0

    def test_random_expectation(self):
        rng = np.random.default_rng(0)
        gt = rng.random(20)
        vals = [precision_at(rng.random(20), gt, 20) for _ in range(10_000)]
        assert abs(np.mean(vals) - 0.2) <= 0.01

    def test_empty(self):
        with pytest.raises(EmptyAlbum):
            precision_at([], [], 10)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            precision_at([1, 2], [1, 2, 3], 10)


class TestMapAt:
    def test_hand_example(self):
        # A, B relevant; ranking [A, C, B, D]
        gt = np.array([1.0, 0.9, 0.1, 0.0])
        pred = np.array([4.0, 2.0, 3.0, 1.0])
        assert_allclose(map_at(pred, gt, 50), 0.5 * (1 + 2 / 3), atol=1e-12)

    def test_perfect_agrees_with_precision(self):
        gt = np.array([0.2, 0.8, 0.5, 0.1, 0.6, 0.3])
        for t in (10, 30, 60):
            assert map_at(gt, gt, t) == 1.0 == precision_at(gt, gt, t)

    def test_exhaustive_against_oracle(self):
        # every ranking of every small album, with tied scores included
        for n in range(1, 9):
            rng = np.random.default_rng(n)
            gt = rng.integers(0, 4, size=n) / 3.0
            perms = itertools.permutations(range(n)) if n <= 6 else (rng.permutation(n) for _ in range(300))
            for perm in perms:
                pred = np.asarray(perm, dtype=float)
                for t in (5, 25, 50, 100):
                    assert map_at(pred, gt, t) == brute_force_ap(pred, gt, t)

    @settings(max_examples=100)
    @given(st.integers(0, 10_000), st.sampled_from([5, 10, 20, 30, 50]))
    def test_monotone_transform_invariance(self, seed, t):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 25))
        pred, gt = rng.random(n), rng.random(n)
        warped = np.exp(3 * pred) + 7
        assert map_at(warped, gt, t) == map_at(pred, gt, t)
        assert precision_at(warped, gt, t) == precision_at(pred, gt, t)
        assert 0 <= map_at(pred, gt, t) <= 1


class TestRecognition:
    def test_top1_multi_label(self):
        gts = [EventLabelDistribution([0.7, 0.3, 0.0])]
        assert top1_accuracy([[0.1, 0.8, 0.1]], gts) == 1.0

    def test_top1_tie_goes_to_lowest_index(self):
        gts = [EventLabelDistribution([0, 1.0, 0]), EventLabelDistribution([0, 0, 1.0])]
        assert top1_accuracy([np.ones(3) / 3] * 2, gts) == 0.0

    def test_top1_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            top1_accuracy([[1, 0]], [])

    def test_f1_all_correct(self):
        preds = np.eye(3)
        assert f1_score(preds, [{0}, {1}, {2}]) == 1.0

    def test_f1_all_wrong(self):
        preds = np.eye(3)
        assert f1_score(preds, [{1}, {2}, {0}]) == 0.0

    def test_f1_hand_example(self):
        preds = [[1, 0], [0, 1], [0, 1], [0, 1]]
        gts = [{0}, {0}, {1}, {1}]
        # F1_A = 2/3, F1_B = 0.8
        assert_allclose(f1_score(preds, gts), (2 / 3 + 0.8) / 2, atol=1e-9)

    def test_f1_correct_other_label_is_not_a_miss(self):
        preds = [[0, 1, 0], [1, 0, 0]]
        gts = [{0, 1}, {0}]
        assert f1_score(preds, gts) == 1.0


class TestRemapConfusion:
    CM = np.array([[8, 1, 1], [0, 9, 1], [2, 0, 8]])

    def test_identity(self):
        out, acc = remap_confusion(self.CM, LabelMapping((0, 1, 2)))
        assert_array_equal(out, self.CM)
        assert_allclose(acc, 25 / 30, atol=1e-9)

    def test_merge_and_drop_hand_example(self):
        out, acc = remap_confusion(self.CM, LabelMapping((0, 0, None)))
        assert_array_equal(out, [[20]])
        assert_allclose(acc, 1.0, atol=1e-9)

    def test_strict_counts_dropped_predictions_as_errors(self):
        out, acc = remap_confusion(self.CM, LabelMapping((0, 0, None)), loose=False)
        assert_array_equal(out, [[18]])
        assert_allclose(acc, 18 / 20, atol=1e-9)

    def test_all_dropped(self):
        with pytest.raises(AllDropped):
            remap_confusion(self.CM, LabelMapping((None, None, None)))

    def test_from_names(self):
        m = LabelMapping.from_names(["a", "b", "c"], ["X", "Y"], {"a": "Y", "b": "X", "c": None})
        assert m.targets == (1, 0, None)

    @settings(max_examples=100)
    @given(st.integers(0, 10_000))
    def test_loose_never_below_merge_only(self, seed):
        rng = np.random.default_rng(seed)
        C = int(rng.integers(2, 6))
        cm = rng.integers(0, 10, size=(C, C))
        targets = [None if rng.random() < 0.3 else int(rng.integers(0, 3)) for _ in range(C)]
        if all(t is None for t in targets):
            targets[0] = 0
        mapping = LabelMapping(tuple(targets), ("x", "y", "z"))
        _, loose = remap_confusion(cm, mapping, loose=True)
        _, strict = remap_confusion(cm, mapping, loose=False)
        assert loose >= strict

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "cm.json"
        save_confusion(path, self.CM, ["a", "b", "c"])
        counts, names = load_confusion(path)
        assert names == ["a", "b", "c"]
        assert_array_equal(counts, self.CM)


def album(gt, probs=(1.0, 0.0)):
    gt = np.asarray(gt, dtype=float)
    return AlbumRecord("a", [f"i{k}" for k in range(gt.size)], np.zeros((gt.size, 2)),
                       EventLabelDistribution(probs), gt)


class TestReports:
    def test_perfect_single_album(self):
        a = album([0.1, 0.9, 0.5, 0.3])
        r = evaluate_curation([a], [a.gt_importance])
        assert len(r.cells) == 12
        assert all(v == 1.0 for _, _, v in r.cells)

    def test_average_over_albums(self):
        rng = np.random.default_rng(2)
        albums = [album(rng.random(n)) for n in (5, 9, 12)]
        scores = [rng.random(len(a)) for a in albums]
        r = evaluate_curation(albums, scores, t_list=(20,))
        expect = np.mean([map_at(s, a.gt_importance, 20) for a, s in zip(albums, scores)])
        assert r.get("MAP", 20) == pytest.approx(expect, abs=1e-15)

    def test_missing_ground_truth(self):
        a = AlbumRecord("a", ["x"], np.zeros((1, 2)), EventLabelDistribution([1.0, 0.0]))
        with pytest.raises(MissingGroundTruth):
            evaluate_curation([a], [[1.0]])

    def test_csv_format(self):
        r = EvaluationReport("m")
        r.add("accuracy", None, 0.5)
        r.add("MAP", 5, 1 / 3)
        assert r.to_csv() == "metric,t,value\naccuracy,,0.500000\nMAP,5,0.333333\n"

    def test_recognition_cells(self):
        albums = [album([0.2, 0.4]), album([0.1, 0.3], (0.0, 1.0))]
        r = evaluate_recognition(albums, [[0.9, 0.1], [0.8, 0.2]])
        assert r.get("accuracy") == 0.5
