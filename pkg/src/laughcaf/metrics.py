"""Classification metrics and frame/event-level laughter detection metrics."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .spans import TimeSpan


@dataclass
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int | None = None
    iou_threshold: float | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def iou(a: TimeSpan, b: TimeSpan) -> float:
    inter = min(a.end_s, b.end_s) - max(a.start_s, b.start_s)
    if inter <= 0:
        return 0.0
    return inter / (max(a.end_s, b.end_s) - min(a.start_s, b.start_s))


# ---------------------------------------------------------------------------
# frame scale

def n_grid_frames(duration_s: float, resolution_s: float) -> int:
    n = duration_s / resolution_s
    r = round(n)
    return int(r) if abs(n - r) < 1e-9 else int(math.ceil(n))


def frame_centre(k, resolution_s: float):
    return (k + 0.5) * resolution_s


def rasterize(spans: Sequence[TimeSpan], n_frames: int, resolution_s: float) -> np.ndarray:
    """Boolean occupancy grid: frame k is on iff its centre lies in some [start, end)."""
    grid = np.zeros(n_frames, dtype=bool)
    for s in spans:
        lo = max(0, math.ceil(s.start_s / resolution_s - 0.5))
        hi = min(n_frames, math.ceil(s.end_s / resolution_s - 0.5))
        # nudge the estimates so they agree with the exact centre test
        while lo > 0 and frame_centre(lo - 1, resolution_s) >= s.start_s:
            lo -= 1
        while lo < n_frames and frame_centre(lo, resolution_s) < s.start_s:
            lo += 1
        while hi > 0 and frame_centre(hi - 1, resolution_s) >= s.end_s:
            hi -= 1
        while hi < n_frames and frame_centre(hi, resolution_s) < s.end_s:
            hi += 1
        if hi > lo:
            grid[lo:hi] = True
    return grid


def temporal_metrics(pred: Sequence[TimeSpan], gt: Sequence[TimeSpan], duration_s: float,
                     resolution_s: float = 0.01) -> MetricsReport:
    n = n_grid_frames(duration_s, resolution_s)
    p = rasterize(pred, n, resolution_s)
    g = rasterize(gt, n, resolution_s)
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    tn = n - tp - fp - fn
    precision, recall, f1 = _prf(tp, fp, fn)
    return MetricsReport((tp + tn) / n if n else 0.0, precision, recall, f1, tp, fp, fn, tn)


# ---------------------------------------------------------------------------
# event scale

def greedy_match(pred: Sequence[TimeSpan], gt: Sequence[TimeSpan], iou_thr: float) -> list[tuple[int, int, float]]:
    """One-to-one matching in descending IoU order, keeping pairs with IoU >= iou_thr."""
    pairs = [(iou(p, g), i, j) for i, p in enumerate(pred) for j, g in enumerate(gt)]
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))
    used_p: set[int] = set()
    used_g: set[int] = set()
    matches = []
    for v, i, j in pairs:
        if v < iou_thr or v <= 0.0:
            break
        if i in used_p or j in used_g:
            continue
        used_p.add(i)
        used_g.add(j)
        matches.append((i, j, v))
    return matches


def detection_metrics(pred: Sequence[TimeSpan], gt: Sequence[TimeSpan], iou_thr: float) -> MetricsReport:
    if not 0.0 < iou_thr <= 1.0:
        raise ValueError("iou_thr must lie in (0, 1]")
    tp = len(greedy_match(pred, gt, iou_thr))
    fp = len(pred) - tp
    fn = len(gt) - tp
    precision, recall, f1 = _prf(tp, fp, fn)
    total = tp + fp + fn
    return MetricsReport(tp / total if total else 1.0, precision, recall, f1, tp, fp, fn,
                         iou_threshold=iou_thr)


def detection_counts(pairs: Sequence[tuple[Sequence[TimeSpan], Sequence[TimeSpan]]],
                     iou_thr: float) -> MetricsReport:
    """Pool TP/FP/FN over several files before computing P/R/F1."""
    tp = fp = fn = 0
    for pred, gt in pairs:
        r = detection_metrics(pred, gt, iou_thr)
        tp, fp, fn = tp + r.tp, fp + r.fp, fn + r.fn
    precision, recall, f1 = _prf(tp, fp, fn)
    total = tp + fp + fn
    return MetricsReport(tp / total if total else 1.0, precision, recall, f1, tp, fp, fn,
                         iou_threshold=iou_thr)


def temporal_counts(items: Sequence[tuple[Sequence[TimeSpan], Sequence[TimeSpan], float]],
                    resolution_s: float = 0.01) -> MetricsReport:
    """Frame-level metrics pooled over several files given (pred, gt, duration)."""
    tp = fp = fn = tn = 0
    for pred, gt, dur in items:
        r = temporal_metrics(pred, gt, dur, resolution_s)
        tp, fp, fn, tn = tp + r.tp, fp + r.fp, fn + r.fn, tn + r.tn
    precision, recall, f1 = _prf(tp, fp, fn)
    n = tp + fp + fn + tn
    return MetricsReport((tp + tn) / n if n else 0.0, precision, recall, f1, tp, fp, fn, tn)


# ---------------------------------------------------------------------------
# classification

def classification_metrics(preds: Sequence[int], gts: Sequence[int]) -> MetricsReport:
    """Binary metrics with 1 (funny) as the positive class."""
    p = np.asarray(preds, dtype=int)
    g = np.asarray(gts, dtype=int)
    if p.size == 0:
        raise ValueError("classification_metrics needs at least one sample")
    if p.shape != g.shape:
        raise ValueError("predictions and labels differ in length")
    tp = int(np.sum((p == 1) & (g == 1)))
    fp = int(np.sum((p == 1) & (g == 0)))
    fn = int(np.sum((p == 0) & (g == 1)))
    tn = int(np.sum((p == 0) & (g == 0)))
    precision, recall, f1 = _prf(tp, fp, fn)
    return MetricsReport((tp + tn) / p.size, precision, recall, f1, tp, fp, fn, tn)


# ---------------------------------------------------------------------------
# reporting

def laughter_report(temporal: MetricsReport, det: dict[float, MetricsReport]) -> dict:
    return {
        "temporal": temporal.to_dict(),
        "detection": {f"{thr:g}": r.to_dict() for thr, r in sorted(det.items())},
    }


def format_laughter_table(temporal: MetricsReport, det: dict[float, MetricsReport]) -> str:
    """Plain-text table: temporal Acc/Pre/Rec/F1, then Pre/Rec/F1 per IoU threshold."""
    head = ["Temp Acc", "Temp Pre", "Temp Rec", "Temp F1"]
    vals = [temporal.accuracy, temporal.precision, temporal.recall, temporal.f1]
    for thr, r in sorted(det.items()):
        head += [f"Det@{thr:g} Pre", f"Det@{thr:g} Rec", f"Det@{thr:g} F1"]
        vals += [r.precision, r.recall, r.f1]
    cells = [f"{100 * v:.1f}" for v in vals]
    widths = [max(len(h), len(c)) for h, c in zip(head, cells)]
    line1 = "  ".join(h.rjust(w) for h, w in zip(head, widths))
    line2 = "  ".join(c.rjust(w) for c, w in zip(cells, widths))
    return line1 + "\n" + line2 + "\n"


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
