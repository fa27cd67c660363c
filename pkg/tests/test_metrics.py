import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from laughcaf.metrics import (classification_metrics, detection_counts, detection_metrics, dumps,
                              format_laughter_table, greedy_match, iou, laughter_report, rasterize,
                              temporal_counts, temporal_metrics)
from laughcaf.spans import TimeSpan

from oracles import exhaustive_max_matching, frame_loop_counts


def random_spans(rng, n, dur):
    out = []
    for _ in range(n):
        a = rng.uniform(0, dur - 0.05)
        out.append((a, min(dur, a + rng.uniform(0.01, 3.0))))
    return out


def disjoint(spans):
    spans = sorted(spans)
    out = []
    for a, b in spans:
        if out and a < out[-1][1]:
            continue
        out.append((a, b))
    return out


def ts(pairs):
    return [TimeSpan(a, b) for a, b in pairs]


def test_iou_examples():
    assert iou(TimeSpan(0, 2), TimeSpan(1, 3)) == pytest.approx(1 / 3)
    assert iou(TimeSpan(0, 1), TimeSpan(1, 2)) == 0.0
    assert iou(TimeSpan(0, 1), TimeSpan(0, 1)) == 1.0


def test_temporal_matches_frame_loop_oracle():
    rng = np.random.default_rng(0)
    for _ in range(200):
        dur = rng.uniform(1, 20)
        res = rng.choice([0.01, 0.02, 0.05, 0.1])
        pred = disjoint(random_spans(rng, rng.integers(0, 5), dur))
        gt = disjoint(random_spans(rng, rng.integers(0, 5), dur))
        r = temporal_metrics(ts(pred), ts(gt), dur, res)
        assert (r.tp, r.fp, r.fn, r.tn) == frame_loop_counts(pred, gt, dur, res)


def test_rasterize_boundaries_use_frame_centres():
    g = rasterize([TimeSpan(0.015, 0.035)], 5, 0.01)
    # centres 0.005 0.015 0.025 0.035 0.045 -> on for 0.015 and 0.025 only
    assert g.tolist() == [False, True, True, False, False]


def test_temporal_perfect_and_empty():
    gt = ts([(1.0, 2.0)])
    r = temporal_metrics(gt, gt, 5.0)
    assert (r.precision, r.recall, r.f1, r.accuracy) == (1.0, 1.0, 1.0, 1.0)
    r = temporal_metrics([], gt, 5.0)
    assert r.recall == 0.0 and r.tp == 0 and r.fn == 100


def test_greedy_never_exceeds_exhaustive_and_usually_equals():
    rng = np.random.default_rng(1)
    equal = 0
    for _ in range(300):
        pred = random_spans(rng, rng.integers(0, 7), 10.0)
        gt = random_spans(rng, rng.integers(0, 7), 10.0)
        thr = float(rng.choice([0.1, 0.3, 0.5]))
        tp = detection_metrics(ts(pred), ts(gt), thr).tp
        best = exhaustive_max_matching(pred, gt, thr)
        assert tp <= best
        equal += tp == best
    assert equal >= 0.95 * 300


def test_greedy_prefers_highest_iou():
    m = greedy_match(ts([(0, 1)]), ts([(0, 2), (0, 1.1)]), 0.3)
    assert m == [(0, 1, pytest.approx(1 / 1.1))]


def test_detection_counts_unmatched():
    r = detection_metrics(ts([(0, 1), (5, 6)]), ts([(0, 1), (8, 9)]), 0.5)
    assert (r.tp, r.fp, r.fn) == (1, 1, 1)
    assert r.precision == r.recall == r.f1 == 0.5
    with pytest.raises(ValueError):
        detection_metrics([], [], 0.0)


@given(st.integers(0, 100_000))
def test_raising_threshold_never_adds_matches(seed):
    rng = np.random.default_rng(seed)
    pred = ts(random_spans(rng, 5, 10.0))
    gt = ts(random_spans(rng, 5, 10.0))
    tps = [detection_metrics(pred, gt, t).tp for t in (0.1, 0.3, 0.5, 0.7, 0.9)]
    assert tps == sorted(tps, reverse=True)


@given(st.integers(0, 100_000))
def test_f1_lies_between_precision_and_recall(seed):
    rng = np.random.default_rng(seed)
    pred = ts(disjoint(random_spans(rng, 4, 10.0)))
    gt = ts(disjoint(random_spans(rng, 4, 10.0)))
    for r in (temporal_metrics(pred, gt, 10.0), detection_metrics(pred, gt, 0.3)):
        for v in (r.accuracy, r.precision, r.recall, r.f1):
            assert 0.0 <= v <= 1.0
        if r.precision > 0 and r.recall > 0:
            assert min(r.precision, r.recall) - 1e-12 <= r.f1 <= max(r.precision, r.recall) + 1e-12


def test_halving_resolution_moves_at_most_one_frame_per_boundary():
    rng = np.random.default_rng(2)
    for _ in range(50):
        spans = disjoint(random_spans(rng, 3, 10.0))
        coarse = rasterize(ts(spans), 1000, 0.01).sum()
        fine = rasterize(ts(spans), 2000, 0.005).sum()
        assert abs(fine * 0.5 - coarse) <= len(spans) * 2 * 1.0 + 1e-9


def test_classification_metrics_counts():
    r = classification_metrics([1, 1, 0, 0, 1], [1, 0, 0, 1, 1])
    assert (r.tp, r.fp, r.fn, r.tn) == (2, 1, 1, 1)
    assert r.accuracy == pytest.approx(0.6)
    assert r.f1 == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        classification_metrics([], [])


def test_pooled_counts_and_report_formatting():
    pairs = [(ts([(0, 1)]), ts([(0, 1)])), ([], ts([(2, 3)]))]
    det = detection_counts(pairs, 0.3)
    assert (det.tp, det.fn) == (1, 1)
    temp = temporal_counts([(p, g, 5.0) for p, g in pairs])
    assert temp.tp == 100 and temp.fn == 100
    rep = laughter_report(temp, {0.3: det, 0.7: det})
    assert set(rep["detection"]) == {"0.3", "0.7"}
    table = format_laughter_table(temp, {0.3: det})
    assert "Temp F1" in table and "Det@0.3 F1" in table
    assert dumps(rep) == dumps(rep) and dumps(rep).endswith("\n")
