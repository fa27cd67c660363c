"""Waveform I/O, resampling, voice removal and log-Mel spectrograms."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import DataError, FormatError, LayoutError
from .spans import TimeSpan

LAYOUTS = {1: "mono", 2: "stereo", 6: "surround_5_1"}
# WAV 5.1 channel order: FL, FR, FC, LFE, BL, BR
CENTER_CHANNEL = 2


@dataclass
class Waveform:
    channels: np.ndarray  # (n_channels, n_samples)
    sample_rate_hz: int
    layout: str = field(default="")

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.float64)
        if ch.ndim == 1:
            ch = ch[None, :]
        if ch.ndim != 2:
            raise DataError("channels must be a 2-D array (channels x samples)")
        if ch.shape[0] not in LAYOUTS:
            raise LayoutError(f"unsupported channel count {ch.shape[0]} (expected 1, 2 or 6)")
        if self.sample_rate_hz <= 0:
            raise DataError("sample rate must be positive")
        expected = LAYOUTS[ch.shape[0]]
        if self.layout and self.layout != expected:
            raise LayoutError(f"layout {self.layout!r} does not match {ch.shape[0]} channels")
        self.channels = ch
        self.layout = expected

    @property
    def n_samples(self) -> int:
        return self.channels.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    @property
    def samples(self) -> np.ndarray:
        """The single channel of a mono waveform."""
        if self.layout != "mono":
            raise LayoutError(f"expected mono waveform, got {self.layout}")
        return self.channels[0]

    @classmethod
    def mono(cls, samples, sample_rate_hz: int) -> "Waveform":
        return cls(np.asarray(samples, dtype=np.float64)[None, :], sample_rate_hz)


@dataclass(frozen=True)
class MelParams:
    sample_rate_hz: int = 16000
    n_mels: int = 64
    window_s: float = 0.064
    hop_s: float = 0.010
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.n_mels < 1:
            raise ValueError("n_mels must be >= 1")
        if not 0 < self.hop_s <= self.window_s:
            raise ValueError("need 0 < hop_s <= window_s")

    @property
    def win_samples(self) -> int:
        return int(round(self.window_s * self.sample_rate_hz))

    @property
    def hop_samples(self) -> int:
        return int(round(self.hop_s * self.sample_rate_hz))

    @property
    def n_fft(self) -> int:
        return 1 << (self.win_samples - 1).bit_length()


@dataclass
class MelSpectrogram:
    values: np.ndarray  # (n_frames, n_mels)
    params: MelParams
    origin_span: TimeSpan

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]


# ---------------------------------------------------------------------------
# WAV I/O

def load_wav(path: str | Path) -> Waveform:
    """Read a PCM16, PCM24 or float32 WAV, normalising samples to [-1, 1]."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except (ValueError, EOFError) as exc:
        raise FormatError(f"{path}: cannot decode WAV ({exc})") from exc
    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        # scipy left-justifies 24-bit samples in int32
        x = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.float32:
        x = data.astype(np.float64)
    else:
        raise FormatError(f"{path}: unsupported sample encoding {data.dtype}")
    x = x[:, None] if x.ndim == 1 else x
    if x.shape[1] not in LAYOUTS:
        raise LayoutError(f"{path}: unsupported layout with {x.shape[1]} channels")
    return Waveform(x.T.copy(), int(rate))


def save_wav(w: Waveform, path: str | Path, encoding: str = "pcm16") -> None:
    if encoding == "pcm16":
        data = np.clip(np.round(w.channels * 32768.0), -32768, 32767).astype(np.int16)
    elif encoding == "float32":
        data = w.channels.astype(np.float32)
    else:
        raise ValueError(f"unsupported encoding {encoding!r}")
    wavfile.write(Path(path), w.sample_rate_hz, data.T.copy())


# ---------------------------------------------------------------------------
# resampling

KAISER_BETA = 8.0
HALF_TAPS = 16


def _sinc_kernel(delta: np.ndarray, cutoff: float) -> np.ndarray:
    half_width = HALF_TAPS / cutoff
    x = delta / half_width
    inside = np.abs(x) < 1.0
    win = np.where(inside, np.i0(KAISER_BETA * np.sqrt(np.clip(1.0 - x * x, 0.0, None))), 0.0)
    return cutoff * np.sinc(cutoff * delta) * win / np.i0(KAISER_BETA)


def _resample_channel_sinc(x: np.ndarray, src_hz: int, dst_hz: int, n_out: int,
                           block: int = 32768) -> np.ndarray:
    g = math.gcd(src_hz, dst_hz)
    up, down = dst_hz // g, src_hz // g
    cutoff = min(1.0, up / down)
    half = int(np.ceil(HALF_TAPS / cutoff))
    offsets = np.arange(-half + 1, half + 1)
    padded = np.concatenate([np.zeros(half), x, np.zeros(half + 1)])
    # output n sits at input position (n * down) / up; the fractional part
    # only takes `up` distinct values, so the kernel is tabulated per phase
    n = np.arange(n_out, dtype=np.int64)
    base = (n * down) // up
    phase = (n * down) % up
    if up <= 8:
        out = np.empty(n_out)
        for r in range(up):
            sel = phase == r
            if not sel.any():
                continue
            h = _sinc_kernel(r / up - offsets, cutoff)
            # full[j] = sum_k h[k] * padded[j + k]
            full = np.correlate(padded, h, mode="valid")
            out[sel] = full[base[sel] + half + offsets[0]]
        return out
    table = _sinc_kernel(np.arange(up)[:, None] / up - offsets[None, :], cutoff)
    out = np.empty(n_out)
    for start in range(0, n_out, block):
        s = slice(start, min(start + block, n_out))
        idx = base[s, None] + offsets[None, :] + half
        out[s] = (table[phase[s]] * padded[idx]).sum(axis=1)
    return out


def _resample_channel_linear(x: np.ndarray, ratio: float, n_out: int) -> np.ndarray:
    pos = np.arange(n_out) / ratio
    return np.interp(pos, np.arange(x.size), x, right=0.0)


def resample(w: Waveform, target_hz: int, method: str = "sinc") -> Waveform:
    """Band-limited resampling (Kaiser-windowed sinc; ``method='linear'`` for speed)."""
    if target_hz <= 0:
        raise ValueError("target sample rate must be positive")
    if target_hz == w.sample_rate_hz:
        return Waveform(w.channels.copy(), w.sample_rate_hz)
    ratio = target_hz / w.sample_rate_hz
    n_out = int(round(w.n_samples * ratio))
    if method == "sinc":
        chans = [_resample_channel_sinc(c, w.sample_rate_hz, target_hz, n_out) for c in w.channels]
    elif method == "linear":
        chans = [_resample_channel_linear(c, ratio, n_out) for c in w.channels]
    else:
        raise ValueError(f"unknown resampling method {method!r}")
    return Waveform(np.stack(chans), target_hz)


# ---------------------------------------------------------------------------
# channel arithmetic

def remove_voice(w: Waveform) -> Waveform:
    """Cancel centre-panned dialogue.

    Stereo: L - R.  5.1: mean of every channel except the centre one.
    """
    if w.layout == "stereo":
        return Waveform(w.channels[0:1] - w.channels[1:2], w.sample_rate_hz)
    if w.layout == "surround_5_1":
        keep = [i for i in range(6) if i != CENTER_CHANNEL]
        return Waveform(w.channels[keep].mean(axis=0, keepdims=True), w.sample_rate_hz)
    raise LayoutError("voice removal needs a stereo or 5.1 waveform, got mono")


def mix_to_mono(w: Waveform) -> Waveform:
    if w.layout == "mono":
        return w
    return Waveform(w.channels.mean(axis=0, keepdims=True), w.sample_rate_hz)


# ---------------------------------------------------------------------------
# log-Mel

def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_band_edges(p: MelParams) -> np.ndarray:
    """n_mels + 2 edge frequencies, equally spaced on the mel scale from 0 Hz to Nyquist."""
    return mel_to_hz(np.linspace(0.0, hz_to_mel(p.sample_rate_hz / 2), p.n_mels + 2))


def mel_band_centers(p: MelParams) -> np.ndarray:
    return mel_band_edges(p)[1:-1]


def mel_filterbank(p: MelParams) -> np.ndarray:
    """Triangular filters with unit peak, shape (n_fft//2 + 1, n_mels)."""
    freqs = np.fft.rfftfreq(p.n_fft, d=1.0 / p.sample_rate_hz)
    edges = mel_band_edges(p)
    lo, mid, hi = edges[:-2], edges[1:-1], edges[2:]
    f = freqs[:, None]
    up = (f - lo) / (mid - lo)
    down = (hi - f) / (hi - mid)
    return np.clip(np.minimum(up, down), 0.0, None)


def frame_count(n_samples: int, p: MelParams) -> int:
    if n_samples < p.win_samples:
        return 0
    return (n_samples - p.win_samples) // p.hop_samples + 1


def power_frames(x: np.ndarray, p: MelParams) -> np.ndarray:
    """Hann-windowed power spectra of each analysis frame, (n_frames, n_fft//2 + 1)."""
    n_frames = frame_count(x.size, p)
    win = p.win_samples
    idx = np.arange(win)[None, :] + p.hop_samples * np.arange(n_frames)[:, None]
    hann = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(win) / win)
    spec = np.fft.rfft(x[idx] * hann, n=p.n_fft, axis=1)
    return spec.real ** 2 + spec.imag ** 2


def mel_spectrogram(w: Waveform, p: MelParams = MelParams(), offset_s: float = 0.0) -> MelSpectrogram:
    """Log-power Mel spectrogram of a mono waveform at ``p.sample_rate_hz``."""
    if w.layout != "mono":
        raise LayoutError("mel_spectrogram needs a mono waveform; mix down first")
    if w.sample_rate_hz != p.sample_rate_hz:
        raise DataError(f"waveform is {w.sample_rate_hz} Hz, mel params expect {p.sample_rate_hz} Hz")
    x = w.samples
    if x.size < p.win_samples:
        raise DataError(f"waveform of {x.size} samples is shorter than one {p.win_samples}-sample window")
    mel = power_frames(x, p) @ mel_filterbank(p)
    values = np.log(np.maximum(mel, p.log_floor))
    span = TimeSpan(offset_s, offset_s + x.size / p.sample_rate_hz)
    return MelSpectrogram(values, p, span)
