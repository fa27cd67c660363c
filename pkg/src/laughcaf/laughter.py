"""Unsupervised laughter detection for multichannel soundtracks.

Pipeline: cancel centre-panned dialogue, find energy peaks in what is left,
describe each peak by summary log-Mel statistics, cluster the peaks with
k-means and drop the smallest cluster as music.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .audio import (MelParams, Waveform, load_wav, mel_spectrogram, remove_voice,
                    resample)
from .errors import LayoutError
from .spans import Event, LaughterAnnotation, TimeSpan

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PeakConfig:
    energy_window_s: float = 0.05
    threshold_db: float = -30.0
    min_event_s: float = 0.20
    merge_gap_s: float = 0.15
    max_event_s: float = 20.0
    hop_s: float = 0.01

    def __post_init__(self):
        for name in ("energy_window_s", "min_event_s", "merge_gap_s", "max_event_s", "hop_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.threshold_db >= 0:
            raise ValueError("threshold_db must be negative")


@dataclass
class ClusterResult:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    k: int
    seed: int
    history: list[float] = field(default_factory=list)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)


# ---------------------------------------------------------------------------
# energy peaks

def sliding_rms(x: np.ndarray, sample_rate: int, window_s: float, hop_s: float) -> tuple[np.ndarray, np.ndarray]:
    """RMS of windows centred every ``hop_s`` seconds. Returns (centres_s, rms)."""
    win = max(1, int(round(window_s * sample_rate)))
    hop = max(1, int(round(hop_s * sample_rate)))
    n_frames = int(np.ceil(x.size / hop))
    centres = np.arange(n_frames) * hop
    csum = np.concatenate([[0.0], np.cumsum(x.astype(np.float64) ** 2)])
    lo = np.clip(centres - win // 2, 0, x.size)
    hi = np.clip(centres - win // 2 + win, 0, x.size)
    energy = (csum[hi] - csum[lo]) / np.maximum(hi - lo, 1)
    return centres / sample_rate, np.sqrt(np.maximum(energy, 0.0))


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Half-open index runs where ``mask`` is true."""
    padded = np.concatenate([[False], mask, [False]])
    d = np.diff(padded.astype(np.int8))
    return list(zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1)))


def _split_long(run: tuple[int, int], rms: np.ndarray, max_frames: int) -> list[tuple[int, int]]:
    a, b = run
    if b - a <= max_frames:
        return [run]
    # cut at the quietest interior frame
    cut = a + 1 + int(np.argmin(rms[a + 1:b - 1]))
    return _split_long((a, cut), rms, max_frames) + _split_long((cut, b), rms, max_frames)


def detect_energy_peaks(w: Waveform, cfg: PeakConfig = PeakConfig()) -> list[TimeSpan]:
    """Spans whose sliding RMS exceeds ``threshold_db`` relative to the file maximum."""
    x = w.samples
    if x.size == 0:
        return []
    centres, rms = sliding_rms(x, w.sample_rate_hz, cfg.energy_window_s, cfg.hop_s)
    peak = rms.max()
    if peak <= 0.0:
        return []
    active = rms / peak >= 10.0 ** (cfg.threshold_db / 20.0)
    runs = _runs(active)
    gap = int(round(cfg.merge_gap_s / cfg.hop_s))
    merged: list[tuple[int, int]] = []
    for a, b in runs:
        if merged and a - merged[-1][1] < gap:
            merged[-1] = (merged[-1][0], b)
        else:
            merged.append((a, b))
    min_frames = cfg.min_event_s / cfg.hop_s
    kept = [r for r in merged if r[1] - r[0] >= min_frames - 1e-9]
    max_frames = max(3, int(cfg.max_event_s / cfg.hop_s))
    pieces = [p for r in kept for p in _split_long(r, rms, max_frames)]
    dur = w.duration_s
    half = cfg.hop_s / 2
    spans = []
    for a, b in pieces:
        start = max(0.0, centres[a] - half)
        end = min(dur, centres[b - 1] + half)
        if end > start:
            spans.append(TimeSpan(float(start), float(end)))
    return spans


# ---------------------------------------------------------------------------
# segment descriptors

def segment_stats(w: Waveform, span: TimeSpan, p: MelParams) -> np.ndarray:
    """Per-mel-bin mean and standard deviation of the log-Mel frames inside ``span``."""
    sr = w.sample_rate_hz
    x = w.samples[int(round(span.start_s * sr)):int(round(span.end_s * sr))]
    if x.size < p.win_samples:
        x = np.concatenate([x, np.zeros(p.win_samples - x.size)])
    mel = mel_spectrogram(Waveform.mono(x, sr), p).values
    return np.concatenate([mel.mean(axis=0), mel.std(axis=0)])


def standardize_rows(features: np.ndarray) -> np.ndarray:
    if features.shape[0] == 0:
        return features
    mu = features.mean(axis=0)
    sd = features.std(axis=0)
    return (features - mu) / np.where(sd > 0, sd, 1.0)


def segment_features(w: Waveform, spans: Sequence[TimeSpan], p: MelParams = MelParams(),
                     standardize: bool = True) -> np.ndarray:
    """One row per span: log-Mel mean ⊕ std (2·n_mels columns)."""
    if not spans:
        return np.zeros((0, 2 * p.n_mels))
    rows = np.stack([segment_stats(w, s, p) for s in spans])
    return standardize_rows(rows) if standardize else rows


# ---------------------------------------------------------------------------
# k-means

def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _kmeanspp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = [points[rng.integers(n)]]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        centroids.append(points[idx])
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return np.array(centroids, dtype=np.float64)


def _lloyd(points: np.ndarray, centroids: np.ndarray, max_iter: int):
    assign = _sq_dists(points, centroids).argmin(axis=1)
    history = [float(((points - centroids[assign]) ** 2).sum())]
    for _ in range(max_iter):
        for j in range(centroids.shape[0]):
            members = assign == j
            if members.any():
                centroids[j] = points[members].mean(axis=0)
        new_assign = _sq_dists(points, centroids).argmin(axis=1)
        history.append(float(((points - centroids[new_assign]) ** 2).sum()))
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    return assign, centroids, history


def kmeans(points, k: int, seed: int = 0, max_iter: int = 300, n_init: int = 10) -> ClusterResult:
    """Lloyd's algorithm with k-means++ seeding; best of ``n_init`` restarts."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("kmeans needs a non-empty 2-D point matrix")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > points.shape[0]:
        raise ValueError(f"k={k} exceeds the number of points ({points.shape[0]})")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, n_init)):
        assign, centroids, history = _lloyd(points, _kmeanspp(points, k, rng), max_iter)
        if best is None or history[-1] < best[2][-1]:
            best = (assign, centroids, history)
    assign, centroids, history = best
    return ClusterResult(assign.astype(np.int64), centroids, history[-1], k, seed, history)


def cluster_kinds(cr: ClusterResult, spans: Sequence[TimeSpan]) -> list[str]:
    """Per-span label: the smallest cluster is music, the rest laughter.

    Smallest means fewest members; ties go to the smaller total duration.
    With ``k == 1`` everything is laughter.
    """
    if len(cr.assignments) != len(spans):
        raise ValueError("assignments and spans differ in length")
    if cr.k == 1 or not len(spans):
        return ["laughter"] * len(spans)
    sizes = cr.sizes()
    durations = np.zeros(cr.k)
    for a, s in zip(cr.assignments, spans):
        durations[a] += s.duration
    candidates = [j for j in range(cr.k) if sizes[j] > 0]
    music = min(candidates, key=lambda j: (sizes[j], durations[j], j))
    return ["music" if a == music else "laughter" for a in cr.assignments]


def select_laughter_clusters(cr: ClusterResult, spans: Sequence[TimeSpan],
                             media_id: str = "") -> LaughterAnnotation:
    kinds = cluster_kinds(cr, spans)
    return LaughterAnnotation(media_id, [Event(s, kd) for s, kd in zip(spans, kinds)])


# ---------------------------------------------------------------------------
# full pipeline

FeatureFn = Callable[[Waveform, Sequence[TimeSpan]], np.ndarray]


def background_track(w: Waveform, sample_rate_hz: int = 16000) -> Waveform:
    if w.layout == "mono":
        raise LayoutError("laughter detection needs a stereo or 5.1 soundtrack, got mono")
    return remove_voice(resample(w, sample_rate_hz))


def detect_laughter(path: str | Path, cfg: PeakConfig = PeakConfig(), p: MelParams = MelParams(),
                    k: int = 2, seed: int = 0, features: FeatureFn | None = None) -> LaughterAnnotation:
    """Run the whole detector on one WAV file.

    ``features`` replaces the built-in log-Mel descriptor, e.g. with
    embeddings from an external audio encoder.
    """
    path = Path(path)
    return detect_laughter_waveform(load_wav(path), path.stem, cfg, p, k, seed, features)


def detect_laughter_waveform(w: Waveform, media_id: str, cfg: PeakConfig = PeakConfig(),
                             p: MelParams = MelParams(), k: int = 2, seed: int = 0,
                             features: FeatureFn | None = None) -> LaughterAnnotation:
    bg = background_track(w, p.sample_rate_hz)
    spans = detect_energy_peaks(bg, cfg)
    if not spans:
        return LaughterAnnotation(media_id, [], w.duration_s)
    feats = features(bg, spans) if features else segment_features(bg, spans, p)
    cr = kmeans(feats, min(k, len(spans)), seed)
    ann = select_laughter_clusters(cr, spans, media_id)
    ann.duration_s = w.duration_s
    return ann


def detect_laughter_corpus(waveforms: dict[str, Waveform], cfg: PeakConfig = PeakConfig(),
                           p: MelParams = MelParams(), ks: Sequence[int] = (2,), seed: int = 0
                           ) -> dict[int, dict[str, LaughterAnnotation]]:
    """Cluster the peaks of several files jointly, once per value in ``ks``.

    Peak detection and feature extraction run once; only the clustering is
    repeated.  Returns ``{k: {media_id: annotation}}``.
    """
    owners: list[str] = []
    all_spans: list[TimeSpan] = []
    rows = []
    for media_id, w in waveforms.items():
        bg = background_track(w, p.sample_rate_hz)
        spans = detect_energy_peaks(bg, cfg)
        owners += [media_id] * len(spans)
        all_spans += spans
        rows += [segment_stats(bg, s, p) for s in spans]
    feats = standardize_rows(np.array(rows)) if rows else np.zeros((0, 2 * p.n_mels))
    out: dict[int, dict[str, LaughterAnnotation]] = {}
    for k in ks:
        events: dict[str, list[Event]] = {m: [] for m in waveforms}
        if all_spans:
            cr = kmeans(feats, min(k, len(all_spans)), seed)
            for m, s, kind in zip(owners, all_spans, cluster_kinds(cr, all_spans)):
                events[m].append(Event(s, kind))
        log.info("k=%d: %d segments", k, len(all_spans))
        out[k] = {m: LaughterAnnotation(m, ev, waveforms[m].duration_s) for m, ev in events.items()}
    return out
