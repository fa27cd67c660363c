"""Funny / not-funny clip sampling, media slicing, augmentation and dataset directories.

A positive clip is the ``n_s`` seconds right before a laughter onset; a
negative clip is any ``n_s`` window that neither overlaps laughter nor is
followed by a laughter onset within a guard interval.  Clips are turned into
per-modality token features and stored as FNWM matrices next to a
``dataset.json`` index.
"""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .audio import MelParams, MelSpectrogram, Waveform, load_wav, mel_spectrogram, mix_to_mono, resample
from .encoders import MODALITIES, encode_audio_stub, encode_text_stub, encode_visual_stub
from .errors import DataError, DimensionError, FormatError
from .fnwm import read_matrix, write_matrix
from .spans import LaughterAnnotation, TimeSpan
from .train import ClipSet

log = logging.getLogger(__name__)

DATASET_INDEX = "dataset.json"
FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# media containers

@dataclass
class FrameStack:
    frames: np.ndarray  # (n, H, W) gray or (n, H, W, 3) RGB, values in [0, 1]
    fps: float = 1.0

    def __post_init__(self):
        f = np.asarray(self.frames, dtype=np.float64)
        if f.ndim not in (3, 4) or (f.ndim == 4 and f.shape[-1] != 3):
            raise DimensionError(f"frames must be (n, H, W) or (n, H, W, 3), got {f.shape}")
        if self.fps <= 0:
            raise ValueError("fps must be > 0")
        self.frames = f

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    def gray(self) -> np.ndarray:
        if self.frames.ndim == 4:
            return self.frames @ np.array([0.299, 0.587, 0.114])
        return self.frames


@dataclass
class ClipMedia:
    """Raw media of one window: mono audio, optional frames, transcript."""
    audio: Waveform
    frames: FrameStack | None = None
    transcript: str = ""


@dataclass(frozen=True)
class Window:
    """A clip window in media time; ``start_s`` may be negative (left padding)."""
    start_s: float
    end_s: float

    @property
    def duration(self) -> float:
        return self.end_s - self.start_s

    @property
    def pad_left_s(self) -> float:
        return max(0.0, -self.start_s)

    def span(self) -> TimeSpan:
        """The part of the window that lies inside the media."""
        return TimeSpan(max(0.0, self.start_s), self.end_s)


@dataclass
class Clip:
    media_id: str
    span: Window
    label: int  # 1 funny, 0 not funny
    mel: MelSpectrogram
    frames: FrameStack | None
    transcript: str = ""


# ---------------------------------------------------------------------------
# sampling

def extract_positives(ann: LaughterAnnotation, n_s: float) -> list[Window]:
    """One window (t_s - n_s, t_s) per laughter onset t_s."""
    if n_s <= 0:
        raise ValueError("n_s must be > 0")
    return [Window(s.start_s - n_s, s.start_s) for s in ann.laughter_spans()]


def _subtract(intervals: list[tuple[float, float]], lo: float, hi: float) -> list[tuple[float, float]]:
    out = []
    for a, b in intervals:
        if hi <= a or lo >= b:
            out.append((a, b))
            continue
        if a < lo:
            out.append((a, lo))
        if hi < b:
            out.append((hi, b))
    return out


def negative_start_intervals(ann: LaughterAnnotation, duration_s: float, n_s: float,
                             guard_s: float = 1.0) -> list[tuple[float, float]]:
    """Allowed start times for a negative window, as closed intervals.

    A start s is forbidden by laughter (a, b) when the window overlaps it
    (a - n_s < s < b) or when a falls in [s + n_s, s + n_s + guard_s].
    """
    free = [(0.0, duration_s - n_s)] if duration_s >= n_s else []
    for sp in ann.laughter_spans():
        free = _subtract(free, sp.start_s - n_s - guard_s, sp.end_s)
    return [(a, b) for a, b in free if b >= a]


def sample_negatives(ann: LaughterAnnotation, duration_s: float, n_s: float, count: int,
                     seed: int, guard_s: float = 1.0) -> list[TimeSpan]:
    """Up to ``count`` non-overlapping negative windows drawn uniformly from the allowed starts."""
    if count < 0:
        raise ValueError("count must be >= 0")
    if n_s <= 0:
        raise ValueError("n_s must be > 0")
    rng = np.random.default_rng(seed)
    free = negative_start_intervals(ann, duration_s, n_s, guard_s)
    out: list[TimeSpan] = []
    while len(out) < count and free:
        lengths = np.array([b - a for a, b in free])
        total = float(lengths.sum())
        if total > 0:
            u = rng.uniform(0.0, total)
            j = min(int(np.searchsorted(np.cumsum(lengths), u, side="right")), len(free) - 1)
            s = min(free[j][0] + (u - (np.cumsum(lengths)[j] - lengths[j])), free[j][1])
        else:  # only isolated admissible points remain
            s = free[0][0]
        out.append(TimeSpan(float(s), float(s) + n_s))
        # later windows may touch this one but not overlap it
        free = _subtract(free, s - n_s, s + n_s)
    return sorted(out)


# ---------------------------------------------------------------------------
# slicing, padding, augmentation

def slice_media(audio: Waveform, frames: FrameStack | None, transcript: str, window: Window) -> ClipMedia:
    """Cut ``window`` out of full-length media, zero-padding on the left if it starts before 0."""
    sr = audio.sample_rate_hz
    a = int(round(window.start_s * sr))
    b = int(round(window.end_s * sr))
    x = audio.channels[:, max(a, 0):max(b, 0)]
    if a < 0:
        x = np.concatenate([np.zeros((x.shape[0], -a)), x], axis=1)
    cut = None
    if frames is not None and len(frames):
        fa = int(round(window.start_s * frames.fps))
        fb = int(round(window.end_s * frames.fps))
        idx = np.clip(np.arange(fa, fb), 0, len(frames) - 1)
        cut = FrameStack(frames.frames[idx], frames.fps)
    return ClipMedia(Waveform(x, sr), cut, transcript)


def pad_or_crop(media: ClipMedia, n_s: float) -> ClipMedia:
    """Keep the last ``n_s`` seconds, or zero-pad audio / repeat the last frame at the end."""
    sr = media.audio.sample_rate_hz
    n = int(round(n_s * sr))
    x = media.audio.channels
    if x.shape[1] > n:
        x = x[:, x.shape[1] - n:]
    elif x.shape[1] < n:
        x = np.concatenate([x, np.zeros((x.shape[0], n - x.shape[1]))], axis=1)
    frames = media.frames
    if frames is not None:
        want = int(round(n_s * frames.fps))
        f = frames.frames
        if len(f) > want:
            f = f[len(f) - want:]
        elif 0 < len(f) < want:
            f = np.concatenate([f, np.repeat(f[-1:], want - len(f), axis=0)], axis=0)
        frames = FrameStack(f, frames.fps)
    return ClipMedia(Waveform(x, sr), frames, media.transcript)


@dataclass(frozen=True)
class AugmentDraw:
    shift_samples: int
    noise_sigma: float
    hflip: bool
    vflip: bool
    rot90: int


def draw_augmentation(seed: int, sample_rate_hz: int, max_shift_s: float = 0.5,
                      max_noise: float = 0.005, hop_samples: int = 160) -> AugmentDraw:
    rng = np.random.default_rng(seed)
    steps = int(max_shift_s * sample_rate_hz) // hop_samples
    shift = int(rng.integers(-steps, steps + 1)) * hop_samples
    sigma = float(rng.uniform(0.0, max_noise))
    return AugmentDraw(shift, sigma, bool(rng.random() < 0.5), bool(rng.random() < 0.5), int(rng.integers(4)))


def apply_augmentation(media: ClipMedia, draw: AugmentDraw, seed: int = 0) -> ClipMedia:
    x = np.roll(media.audio.channels, draw.shift_samples, axis=1)
    if draw.noise_sigma > 0:
        x = x + draw.noise_sigma * np.random.default_rng([seed, 1]).standard_normal(x.shape)
    frames = media.frames
    if frames is not None:
        f = frames.frames
        if draw.hflip:
            f = f[:, :, ::-1]
        if draw.vflip:
            f = f[:, ::-1, :]
        f = np.rot90(f, draw.rot90, axes=(1, 2))
        frames = FrameStack(np.ascontiguousarray(f), frames.fps)
    return ClipMedia(Waveform(x, media.audio.sample_rate_hz), frames, media.transcript)


def augment(media: ClipMedia, seed: int, max_shift_s: float = 0.5, max_noise: float = 0.005,
            hop_samples: int = 160) -> ClipMedia:
    """Random circular time shift (a whole number of Mel hops), Gaussian noise, flips and right-angle rotation.

    The shift is quantised to the Mel hop so the recomputed spectrogram is a
    frame rotation of the original away from the wrap point.
    """
    draw = draw_augmentation(seed, media.audio.sample_rate_hz, max_shift_s, max_noise, hop_samples)
    return apply_augmentation(media, draw, seed)


# ---------------------------------------------------------------------------
# transcripts

_STAMP = re.compile(r"^\s*\[\s*([-+0-9.eE]+)\s*,\s*([-+0-9.eE]+)\s*\]\s*(.*)$")


@dataclass(frozen=True)
class Utterance:
    text: str
    start_s: float | None = None
    end_s: float | None = None


def parse_transcript(text: str) -> list[Utterance]:
    """One utterance per non-empty line, with an optional leading ``[start_s,end_s]`` stamp."""
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        m = _STAMP.match(line)
        if m:
            try:
                s, e = float(m.group(1)), float(m.group(2))
            except ValueError as exc:
                raise FormatError(f"transcript line {lineno}: bad time stamp") from exc
            if e < s:
                raise FormatError(f"transcript line {lineno}: stamp ends before it starts")
            out.append(Utterance(m.group(3).strip(), s, e))
        elif line.lstrip().startswith("["):
            raise FormatError(f"transcript line {lineno}: malformed time stamp")
        else:
            out.append(Utterance(line.strip()))
    return out


def transcript_for_window(utterances: Sequence[Utterance], window: Window) -> str:
    """Utterances overlapping the window; unstamped lines are always kept."""
    keep = [u.text for u in utterances
            if u.start_s is None or (u.start_s < window.end_s and u.end_s > window.start_s)]
    return " ".join(t for t in keep if t)


# ---------------------------------------------------------------------------
# features

def clip_mel(media: ClipMedia, p: MelParams, offset_s: float = 0.0) -> MelSpectrogram:
    w = media.audio if media.audio.layout == "mono" else mix_to_mono(media.audio)
    if w.sample_rate_hz != p.sample_rate_hz:
        w = resample(w, p.sample_rate_hz)
    return mel_spectrogram(w, p, offset_s)


def clip_tokens(media: ClipMedia, p: MelParams, m: dict[str, int], d_text: int) -> dict[str, np.ndarray]:
    """Stub-encoder tokens for every modality of one clip."""
    frames = media.frames.gray() if media.frames is not None else np.zeros((0, 1, 1))
    return {
        "visual": encode_visual_stub(frames, m["visual"]).tokens,
        "text": encode_text_stub(media.transcript, m["text"], d_text).tokens,
        "audio": encode_audio_stub(clip_mel(media, p), m["audio"]).tokens,
    }


def stack_tokens(rows: Sequence[np.ndarray], m: int) -> np.ndarray:
    """Stack per-clip token matrices into (n, m, D), zero-filling clips with fewer tokens."""
    if not rows:
        raise DataError("no clips to stack")
    dim = rows[0].shape[1]
    out = np.zeros((len(rows), m, dim), np.float32)
    for i, r in enumerate(rows):
        if r.shape[1] != dim:
            raise DimensionError(f"clip {i} has token dim {r.shape[1]}, expected {dim}")
        if r.shape[0] > m:
            raise DimensionError(f"clip {i} has {r.shape[0]} tokens, more than m={m}")
        out[i, :r.shape[0]] = r
    return out


# ---------------------------------------------------------------------------
# dataset directories

@dataclass
class ClipEntry:
    clip_id: str
    media_id: str
    start_s: float
    end_s: float
    label: int
    split: str = "train"
    augmented: bool = False
    features: dict[str, str] = field(default_factory=dict)  # modality -> path relative to the dataset dir

    def to_dict(self) -> dict:
        return {"clip_id": self.clip_id, "media_id": self.media_id, "span": [self.start_s, self.end_s],
                "label": self.label, "split": self.split, "augmented": self.augmented,
                "features": dict(sorted(self.features.items()))}

    @classmethod
    def from_dict(cls, d: dict) -> "ClipEntry":
        try:
            start, end = d["span"]
            return cls(str(d["clip_id"]), str(d["media_id"]), float(start), float(end), int(d["label"]),
                       str(d.get("split", "train")), bool(d.get("augmented", False)), dict(d["features"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed clip entry: {exc}") from exc


def write_dataset(out_dir: str | Path, entries: Sequence[ClipEntry], tokens: Sequence[dict[str, np.ndarray]],
                  meta: dict | None = None) -> Path:
    """Write one FNWM file per clip and modality plus ``dataset.json``."""
    out = Path(out_dir)
    (out / "features").mkdir(parents=True, exist_ok=True)
    docs = []
    for e, tok in zip(entries, tokens):
        e.features = {}
        for mod in MODALITIES:
            rel = f"features/{e.clip_id}.{mod}.fnwm"
            write_matrix(out / rel, tok[mod])
            e.features[mod] = rel
        docs.append(e.to_dict())
    index = {"version": FORMAT_VERSION, "meta": meta or {}, "clips": docs}
    (out / DATASET_INDEX).write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    return out / DATASET_INDEX


def read_dataset_index(ds_dir: str | Path) -> tuple[list[ClipEntry], dict]:
    path = Path(ds_dir) / DATASET_INDEX
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise DataError(f"no dataset index at {path}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported dataset index version")
    return [ClipEntry.from_dict(d) for d in doc.get("clips", [])], doc.get("meta", {})


def load_clipset(ds_dir: str | Path, m: dict[str, int], split: str | None = None,
                 expected_dims: dict[str, int] | None = None) -> ClipSet:
    """Read features of the clips in ``split`` (all clips when None) into a ClipSet."""
    ds_dir = Path(ds_dir)
    entries, _ = read_dataset_index(ds_dir)
    if split is not None:
        entries = [e for e in entries if e.split == split]
    if not entries:
        raise DataError(f"{ds_dir}: no clips in split {split!r}")
    feats = {}
    for mod in MODALITIES:
        rows = []
        for e in entries:
            if mod not in e.features:
                raise FormatError(f"clip {e.clip_id} lists no {mod} features")
            rows.append(read_matrix(ds_dir / e.features[mod]))
        if expected_dims and rows[0].shape[1] != expected_dims[mod]:
            raise DimensionError(f"{mod} features have dim {rows[0].shape[1]}, model expects {expected_dims[mod]}")
        feats[mod] = stack_tokens(rows, max(m[mod], max(r.shape[0] for r in rows)))
    return ClipSet(feats, np.array([e.label for e in entries]), [e.clip_id for e in entries])


def assign_splits(n: int, test_fraction: float, seed: int) -> list[str]:
    n_test = int(round(n * test_fraction))
    order = np.random.default_rng([seed, 7]).permutation(n)
    split = ["train"] * n
    for i in order[:n_test]:
        split[int(i)] = "test"
    return split


# ---------------------------------------------------------------------------
# building from media

@dataclass
class MediaEntry:
    """One row of a build manifest."""
    media_id: str
    wav_path: str
    frames_path: str | None = None
    frames_hw: tuple[int, int] | None = None
    transcript_path: str | None = None
    span: tuple[float, float] | None = None  # explicit clip window
    label: int | None = None

    @classmethod
    def from_dict(cls, d: dict, base: Path) -> "MediaEntry":
        def resolve(p):
            return None if p is None else str((base / p) if not Path(p).is_absolute() else Path(p))
        try:
            hw = d.get("frames_hw")
            span = d.get("span")
            label = d.get("label")
            if label is not None and label not in (0, 1, "funny", "not_funny"):
                raise ValueError(f"bad label {label!r}")
            if isinstance(label, str):
                label = int(label == "funny")
            return cls(str(d["media_id"]), resolve(d["wav_path"]), resolve(d.get("frames_path")),
                       None if hw is None else (int(hw[0]), int(hw[1])), resolve(d.get("transcript_path")),
                       None if span is None else (float(span[0]), float(span[1])), label)
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise FormatError(f"malformed manifest entry: {exc}") from exc


def load_manifest(path: str | Path) -> list[MediaEntry]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise DataError(f"manifest not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, list):
        raise FormatError(f"{path}: manifest must be a JSON list")
    return [MediaEntry.from_dict(d, path.parent) for d in doc]


def load_frames(path: str | Path, hw: tuple[int, int] | None, fps: float) -> FrameStack:
    """Frames stored as an FNWM matrix with one flattened grayscale frame per row."""
    m = read_matrix(path)
    if hw is None:
        side = int(round(np.sqrt(m.shape[1])))
        if side * side != m.shape[1]:
            raise DimensionError(f"{path}: frame size {m.shape[1]} is not square; give frames_hw")
        hw = (side, side)
    if hw[0] * hw[1] != m.shape[1]:
        raise DimensionError(f"{path}: rows have {m.shape[1]} values, frames_hw {hw} needs {hw[0] * hw[1]}")
    return FrameStack(m.reshape(m.shape[0], hw[0], hw[1]), fps)


@dataclass(frozen=True)
class BuildSettings:
    n_s: float = 8.0
    fps: float = 1.0
    neg_ratio: float = 1.0
    guard_s: float = 1.0
    augment_copies: int = 0
    max_shift_s: float = 0.5
    max_noise: float = 0.005
    mel: MelParams = MelParams()
    m: tuple[tuple[str, int], ...] = (("visual", 8), ("text", 4), ("audio", 8))
    d_text: int = 128


def _media_clips(job) -> list[tuple[dict, dict[str, np.ndarray]]]:
    """All clips of one media file (run in a worker process)."""
    entry, ann, settings, seed = job
    m = dict(settings.m)
    audio = load_wav(entry.wav_path)
    audio = mix_to_mono(audio) if audio.layout != "mono" else audio
    if audio.sample_rate_hz != settings.mel.sample_rate_hz:
        audio = resample(audio, settings.mel.sample_rate_hz)
    frames = load_frames(entry.frames_path, entry.frames_hw, settings.fps) if entry.frames_path else None
    utts = []
    if entry.transcript_path:
        try:
            utts = parse_transcript(Path(entry.transcript_path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise DataError(f"transcript not found: {entry.transcript_path}") from exc

    if entry.span is not None:
        if entry.label is None:
            raise FormatError(f"{entry.media_id}: explicit span needs a label")
        windows = [(Window(*entry.span), int(entry.label))]
    else:
        if ann is None:
            raise DataError(f"{entry.media_id}: no annotation and no explicit span")
        pos = extract_positives(ann, settings.n_s)
        count = int(round(len(pos) * settings.neg_ratio))
        neg = sample_negatives(ann, audio.duration_s, settings.n_s, count, seed, settings.guard_s)
        windows = [(w, 1) for w in pos] + [(Window(s.start_s, s.end_s), 0) for s in neg]

    out = []
    for i, (win, label) in enumerate(windows):
        text = transcript_for_window(utts, win)
        media = pad_or_crop(slice_media(audio, frames, text, win), settings.n_s)
        info = {"media_id": entry.media_id, "start_s": round(win.start_s, 6), "end_s": round(win.end_s, 6),
                "label": label, "index": i, "augmented": False}
        out.append((info, clip_tokens(media, settings.mel, m, settings.d_text)))
        for c in range(settings.augment_copies):
            aug = augment(media, seed * 1_000_003 + i * 101 + c, settings.max_shift_s, settings.max_noise,
                          settings.mel.hop_samples)
            out.append(({**info, "augmented": True, "copy": c},
                        clip_tokens(aug, settings.mel, m, settings.d_text)))
    return out


def build_dataset(entries: Sequence[MediaEntry], annotations: dict[str, LaughterAnnotation],
                  settings: BuildSettings, out_dir: str | Path, seed: int = 0,
                  test_fraction: float = 0.2, jobs: int = 1) -> list[ClipEntry]:
    """Sample, slice and encode clips of every media file and write a dataset directory.

    Splits are assigned per media file so clips of one episode never leak
    between train and test; augmented copies are kept only in train.
    """
    if not entries:
        raise DataError("manifest lists no media")
    ids = [e.media_id for e in entries]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate media_id in manifest")
    jobs_in = [(e, annotations.get(e.media_id), settings, seed + i) for i, e in enumerate(entries)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_media_clips, jobs_in))
    else:
        results = [_media_clips(j) for j in jobs_in]

    media_split = dict(zip(ids, assign_splits(len(ids), test_fraction, seed))) if len(ids) > 1 else {ids[0]: "train"}
    clip_entries, tokens = [], []
    for res in results:
        for info, tok in res:
            split = media_split[info["media_id"]]
            if info["augmented"] and split != "train":
                continue
            suffix = f"_aug{info['copy']}" if info["augmented"] else ""
            cid = f"{info['media_id']}_{info['index']:04d}{suffix}"
            clip_entries.append(ClipEntry(cid, info["media_id"], info["start_s"], info["end_s"],
                                          info["label"], split, info["augmented"]))
            tokens.append(tok)
    meta = {"n_s": settings.n_s, "fps": settings.fps, "seed": seed, "m": dict(settings.m),
            "d_text": settings.d_text, "n_mels": settings.mel.n_mels}
    write_dataset(out_dir, clip_entries, tokens, meta)
    log.info("wrote %d clips from %d media files", len(clip_entries), len(entries))
    return clip_entries


# ---------------------------------------------------------------------------
# synthetic funny corpus

def funny_tokens(samples, m: dict[str, int], d_text: int = 128) -> list[dict[str, np.ndarray]]:
    """Stub-encoder tokens of synthetic feature-level clips."""
    return [{"visual": encode_visual_stub(s.frames, m["visual"]).tokens,
             "text": encode_text_stub(s.transcript, m["text"], d_text).tokens,
             "audio": encode_audio_stub(s.mel, m["audio"]).tokens} for s in samples]


def funny_clipset(n: int, seed: int, m: dict[str, int], d_text: int = 128, start: int = 0,
                  signal: str = "audio+text") -> ClipSet:
    from .synth import make_funny_corpus

    samples = make_funny_corpus(n, seed, start, signal=signal, d_text=d_text)
    toks = funny_tokens(samples, m, d_text)
    feats = {mod: stack_tokens([t[mod] for t in toks], m[mod]) for mod in MODALITIES}
    return ClipSet(feats, np.array([s.label for s in samples]), [s.clip_id for s in samples])


def write_funny_dataset(out_dir: str | Path, n_train: int, n_test: int, seed: int, m: dict[str, int],
                        d_text: int = 128, signal: str = "audio+text") -> list[ClipEntry]:
    """Synthetic funny clips as a dataset directory, plus ``ground_truth.json`` with the planted cue levels."""
    from .synth import make_funny_corpus

    samples = make_funny_corpus(n_train + n_test, seed, 0, signal=signal, d_text=d_text)
    entries = [ClipEntry(s.clip_id, s.clip_id, 0.0, s.mel.shape[0] * 0.01, s.label,
                         "train" if i < n_train else "test") for i, s in enumerate(samples)]
    write_dataset(out_dir, entries, funny_tokens(samples, m, d_text),
                  {"kind": "funny", "seed": seed, "signal": signal, "m": dict(m), "d_text": d_text})
    truth = [{"clip_id": s.clip_id, "label": s.label, "audio_level": s.audio_level,
              "text_level": s.text_level, "transcript": s.transcript} for s in samples]
    (Path(out_dir) / "ground_truth.json").write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n")
    return entries
