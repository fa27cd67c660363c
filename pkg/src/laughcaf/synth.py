"""Deterministic synthetic corpora with known ground truth.

``laughter`` files imitate a sitcom soundtrack: centre-panned dialogue,
side-panned bursts of laughter and one short music cue.  ``funny`` clips are
feature-level samples whose label is a planted function of an audio cue and
a text cue.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import Waveform
from .encoders import word_slot
from .spans import Event, LaughterAnnotation, TimeSpan


# ---------------------------------------------------------------------------
# laughter corpus

def _bandpass_noise(rng: np.random.Generator, n: int, sr: int, lo: float, hi: float) -> np.ndarray:
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, 1.0 / sr)
    spec[(f < lo) | (f > hi)] = 0.0
    x = np.fft.irfft(spec, n)
    return x / (np.sqrt(np.mean(x ** 2)) + 1e-12)


def _ramp(n: int, sr: int, ramp_s: float = 0.02) -> np.ndarray:
    r = min(n // 2, int(ramp_s * sr))
    env = np.ones(n)
    if r > 0:
        env[:r] = np.linspace(0.0, 1.0, r)
        env[-r:] = np.linspace(1.0, 0.0, r)
    return env


def _laugh(rng: np.random.Generator, n: int, sr: int) -> np.ndarray:
    t = np.arange(n) / sr
    rate = rng.uniform(4.0, 6.0)
    env = 0.45 + 0.55 * np.abs(np.sin(np.pi * rate * t))
    return _bandpass_noise(rng, n, sr, 400.0, 3500.0) * env * _ramp(n, sr)


def _music(rng: np.random.Generator, n: int, sr: int) -> np.ndarray:
    t = np.arange(n) / sr
    root = rng.uniform(180.0, 300.0)
    x = np.zeros(n)
    for ratio in (1.0, 1.25, 1.5):
        for h, amp in ((1, 1.0), (2, 0.5), (3, 0.25)):
            x += amp * np.sin(2 * np.pi * root * ratio * h * t)
    x /= np.sqrt(np.mean(x ** 2))
    return x * _ramp(n, sr, 0.05)


def _speech(rng: np.random.Generator, n: int, sr: int) -> np.ndarray:
    """Syllable-like harmonic bursts separated by short pauses."""
    x = np.zeros(n)
    pos = 0
    while pos < n:
        syl = int(rng.uniform(0.12, 0.3) * sr)
        gap = int(rng.uniform(0.03, 0.4) * sr)
        seg = min(syl, n - pos)
        t = np.arange(seg) / sr
        f0 = rng.uniform(100.0, 240.0)
        s = sum(np.sin(2 * np.pi * f0 * h * t) / h for h in range(1, 6))
        x[pos:pos + seg] = s * np.hanning(seg)
        pos += syl + gap
    return x / (np.sqrt(np.mean(x ** 2)) + 1e-12)


def _place(rng: np.random.Generator, durations: list[float], total_s: float,
           margin_s: float = 1.0, min_gap_s: float = 1.5, tries: int = 1000) -> list[float]:
    """Random non-overlapping start times for the given durations."""
    for _ in range(tries):
        starts = []
        ok = True
        for d in durations:
            s = rng.uniform(margin_s, total_s - margin_s - d)
            if any(s < e + min_gap_s and s + d + min_gap_s > b for b, e in starts):
                ok = False
                break
            starts.append((s, s + d))
        if ok:
            return [b for b, _ in starts]
    raise RuntimeError("could not place events; corpus parameters too dense")


def make_laughter_file(seed: int, duration_s: float = 60.0, sample_rate_hz: int = 48000,
                       n_laughs: int = 5, media_id: str = "") -> tuple[Waveform, LaughterAnnotation]:
    """One stereo soundtrack plus its ground truth (laughter and music events)."""
    rng = np.random.default_rng(seed)
    sr = sample_rate_hz
    n = int(round(duration_s * sr))
    voice = 0.25 * _speech(rng, n, sr)
    left = voice.copy()
    right = voice.copy()

    laugh_durs = [float(rng.uniform(1.0, 3.0)) for _ in range(n_laughs)]
    music_dur = float(rng.uniform(3.0, 5.0))
    starts = _place(rng, laugh_durs + [music_dur], duration_s)
    events = []
    for i, (s, d) in enumerate(zip(starts, laugh_durs + [music_dur])):
        a, b = int(round(s * sr)), int(round((s + d) * sr))
        if i < n_laughs:
            sig = rng.uniform(0.2, 0.4) * _laugh(rng, b - a, sr)
            gain_l, gain_r, kind = 1.0, 0.2, "laughter"
        else:
            sig = 0.15 * _music(rng, b - a, sr)
            gain_l, gain_r, kind = 1.0, 0.3, "music"
        left[a:b] += gain_l * sig
        right[a:b] += gain_r * sig
        events.append(Event(TimeSpan(a / sr, b / sr), kind))
    # uncorrelated hiss around -60 dB
    left += 1e-3 * rng.standard_normal(n)
    right += 1e-3 * rng.standard_normal(n)
    media_id = media_id or f"synth_{seed:04d}"
    return Waveform(np.stack([left, right]), sr), LaughterAnnotation(media_id, events, n / sr)


# ---------------------------------------------------------------------------
# funny-clip corpus

NEUTRAL_VOCAB = (
    "the a and to of in is it you that he was for on are as with his they at be this have from "
    "or one had by word but not what all were we when your can said there use an each which she "
    "do how their if will up other about out many then them these so some her would make like him "
    "into time has look two more write go see number no way could people my than first water been "
    "call who oil its now find long down day did get come made may part over new sound take only "
    "little work know place year live me back give most very after thing our just name good "
    "sentence man think say great where help through much before line right too mean old any same "
    "tell boy follow came want show also around form three small set put end does another well "
    "large must big even such because turn here why ask went men read need land different home us "
    "move try kind hand picture again change off play spell air away animal house point page letter "
    "mother answer found study still learn should world high every near add food between own below "
    "country plant last school father keep tree never start city earth eye light thought head under "
    "story saw left few while along might close something seem next hard open example begin life "
    "always those both paper together got group often run important until children side feet car "
    "mile night walk white sea began grow took river four carry state once book hear stop without"
).split()
PUNCHLINE_WORDS = ("banana", "penguin", "pants")


def neutral_vocab_for(d_text: int) -> tuple[str, ...]:
    """Neutral words whose hash slot differs from every punchline word's slot."""
    taken = {word_slot(w, d_text)[0] for w in PUNCHLINE_WORDS}
    return tuple(w for w in NEUTRAL_VOCAB if word_slot(w, d_text)[0] not in taken)


@dataclass
class FunnySample:
    clip_id: str
    label: int
    mel: np.ndarray  # (n_frames, n_mels) log-Mel
    transcript: str
    frames: np.ndarray  # (n_frames, H, W) in [0, 1]
    audio_level: int
    text_level: int


def planted_label(audio_level: int, text_level: int) -> int:
    """Funny iff the audio cue and the text cue together reach 2."""
    return int(audio_level + text_level >= 2)


def _levels_for(label: int, rng: np.random.Generator) -> tuple[int, int]:
    pairs = [(a, t) for a in range(3) for t in range(3) if planted_label(a, t) == label]
    return pairs[int(rng.integers(len(pairs)))]


def make_funny_sample(seed: int, label: int, n_frames: int = 794, n_mels: int = 64,
                      n_video: int = 8, hw: tuple[int, int] = (16, 16), signal: str = "audio+text",
                      neutral_vocab: tuple[str, ...] | None = None, n_words: int = 10,
                      frame_noise: float = 0.1, visual_cue: float = 0.1, d_text: int = 128,
                      clip_id: str = "") -> FunnySample:
    """One synthetic clip.

    Audio cue: ``audio_level`` loud bursts in mel bands 8-20 during the last
    quarter of the clip.  Text cue: ``text_level`` punchline words in the
    transcript.  With ``signal='audio'`` only the audio cue varies with the
    label and the text cue is random.  The frames' mean gray level rises by
    ``visual_cue`` per level of audio and text cue combined, with jitter, so
    every modality sees a noisy view of one shared latent (set it to 0 for
    uninformative frames).
    """
    rng = np.random.default_rng(seed)
    if signal == "audio+text":
        a_level, t_level = _levels_for(label, rng)
    elif signal == "audio":
        a_level, t_level = (2 if label else 0), int(rng.integers(3))
    else:
        raise ValueError(f"unknown signal mode {signal!r}")

    profile = -6.0 - 0.04 * np.arange(n_mels)
    mel = profile + rng.normal(0.0, 0.6, size=(n_frames, n_mels)) + rng.uniform(-0.5, 0.5)
    tail = n_frames * 3 // 4
    width = max(1, (n_frames - tail) // 4)
    for b in range(a_level):
        start = tail + b * 2 * width
        mel[start:start + width, 8:20] += 3.0

    vocab = neutral_vocab if neutral_vocab is not None else neutral_vocab_for(d_text)
    words = [vocab[int(i)] for i in rng.integers(len(vocab), size=n_words)]
    for _ in range(t_level):
        words.insert(int(rng.integers(len(words) + 1)), PUNCHLINE_WORDS[int(rng.integers(len(PUNCHLINE_WORDS)))])
    transcript = " ".join(words)

    if signal == "audio+text" and visual_cue > 0:
        gray = 0.25 + visual_cue * (a_level + t_level) + rng.normal(0.0, 0.5 * visual_cue)
    else:
        gray = rng.uniform(0.2, 0.8)
    frames = np.clip(gray + frame_noise * rng.standard_normal((n_video,) + hw), 0.0, 1.0)
    return FunnySample(clip_id or f"clip_{seed:06d}", int(label), mel, transcript, frames, a_level, t_level)


def funny_seed(corpus_seed: int, index: int) -> int:
    return corpus_seed * 1_000_003 + index


def make_funny_corpus(n: int, seed: int, start: int = 0, **kwargs) -> list[FunnySample]:
    """Clips ``start .. start+n-1`` of the corpus with this seed; labels alternate 0, 1."""
    return [make_funny_sample(funny_seed(seed, i), i % 2, clip_id=f"funny_{seed}_{i:06d}", **kwargs)
            for i in range(start, start + n)]
