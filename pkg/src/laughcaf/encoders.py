"""Per-modality token features.

These deterministic stand-ins take the place of pretrained audio, video and
language backbones.  Externally computed features can be dropped in through
FNWM files instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError
from .fnwm import read_matrix

MODALITIES = ("visual", "text", "audio")
VISUAL_BINS = 64

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


@dataclass
class RawFeatures:
    modality: str
    tokens: np.ndarray  # (m, D_raw) float32

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise ValueError(f"unknown modality {self.modality!r}")
        t = np.asarray(self.tokens, dtype=np.float32)
        if t.ndim != 2 or t.shape[0] < 1:
            raise DimensionError(f"tokens must be (m>=1, D) but got {t.shape}")
        if not np.all(np.isfinite(t)):
            raise ValueError("token features must be finite")
        self.tokens = t

    @property
    def m(self) -> int:
        return self.tokens.shape[0]

    @property
    def dim(self) -> int:
        return self.tokens.shape[1]


def fnv1a64(text: str) -> int:
    """64-bit FNV-1a over the UTF-8 bytes of ``text``."""
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def word_slot(word: str, d_raw: int) -> tuple[int, float]:
    """Hashed (index, sign) of one lowercased word."""
    h = fnv1a64(word)
    return h % d_raw, (-1.0 if h >> 63 else 1.0)


def _chunks(n: int, m: int) -> list[np.ndarray]:
    return [c for c in np.array_split(np.arange(n), min(m, n)) if c.size]


def encode_audio_stub(mel, m: int = 8) -> RawFeatures:
    """Split the Mel frames into ``m`` contiguous chunks; token = mean ⊕ std of each."""
    if m < 1:
        raise ValueError("m must be >= 1")
    values = np.asarray(getattr(mel, "values", mel), dtype=np.float64)
    if values.shape[0] == 0:
        return RawFeatures("audio", np.zeros((1, 2 * values.shape[1])))
    tokens = [np.concatenate([values[c].mean(axis=0), values[c].std(axis=0)])
              for c in _chunks(values.shape[0], m)]
    return RawFeatures("audio", np.stack(tokens))


def encode_text_stub(transcript: str, m: int = 4, d_raw: int = 128) -> RawFeatures:
    """Signed hashed bag of words; word i goes to token group i mod m."""
    if d_raw < 8:
        raise ValueError("d_raw must be >= 8")
    if m < 1:
        raise ValueError("m must be >= 1")
    words = transcript.lower().split()
    if not words:
        return RawFeatures("text", np.zeros((1, d_raw)))
    groups = min(m, len(words))
    tokens = np.zeros((groups, d_raw))
    for i, w in enumerate(words):
        idx, sign = word_slot(w, d_raw)
        tokens[i % groups, idx] += sign
    return RawFeatures("text", tokens)


def frame_descriptors(frames) -> np.ndarray:
    """Per frame: 64-bin intensity histogram ⊕ mean |difference| to the previous frame."""
    f = np.asarray(getattr(frames, "frames", frames), dtype=np.float64)
    n = f.shape[0]
    flat = f.reshape(n, -1)
    bins = np.clip((flat * VISUAL_BINS).astype(np.int64), 0, VISUAL_BINS - 1)
    hist = np.stack([np.bincount(b, minlength=VISUAL_BINS) for b in bins]) / flat.shape[1]
    diff = np.zeros(n)
    if n > 1:
        diff[1:] = np.abs(np.diff(flat, axis=0)).mean(axis=1)
    return np.concatenate([hist, diff[:, None]], axis=1)


def encode_visual_stub(frames, m: int = 8) -> RawFeatures:
    if m < 1:
        raise ValueError("m must be >= 1")
    f = np.asarray(getattr(frames, "frames", frames))
    if f.size == 0 or f.shape[0] == 0:
        return RawFeatures("visual", np.zeros((1, VISUAL_BINS + 1)))
    desc = frame_descriptors(f)
    return RawFeatures("visual", np.stack([desc[c].mean(axis=0) for c in _chunks(desc.shape[0], m)]))


def load_feature_file(path: str | Path, modality: str, expected_dim: int | None = None) -> RawFeatures:
    tokens = read_matrix(path)
    if expected_dim is not None and tokens.shape[1] != expected_dim:
        raise DimensionError(f"{path}: feature dim {tokens.shape[1]}, expected {expected_dim}")
    return RawFeatures(modality, tokens)
