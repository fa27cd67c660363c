import numpy as np
import pytest
from scipy.io import wavfile

from laughcaf.audio import (MelParams, Waveform, frame_count, hz_to_mel, load_wav, mel_band_centers,
                            mel_filterbank, mel_spectrogram, mel_to_hz, mix_to_mono, power_frames,
                            remove_voice, resample, save_wav)
from laughcaf.errors import DataError, FormatError, LayoutError

from oracles import dft_power


def tone(freq, sr=16000, dur=1.0, amp=0.5):
    t = np.arange(int(sr * dur)) / sr
    return amp * np.sin(2 * np.pi * freq * t)


def test_layout_inference_and_rejection():
    assert Waveform(np.zeros((1, 10)), 16000).layout == "mono"
    assert Waveform(np.zeros((2, 10)), 16000).layout == "stereo"
    assert Waveform(np.zeros((6, 10)), 16000).layout == "surround_5_1"
    with pytest.raises(LayoutError):
        Waveform(np.zeros((3, 10)), 16000)
    with pytest.raises(LayoutError):
        Waveform(np.zeros((2, 10)), 16000).samples


@pytest.mark.parametrize("encoding,tol", [("pcm16", 1 / 32768), ("float32", 1e-7)])
def test_wav_round_trip(tmp_path, encoding, tol):
    rng = np.random.default_rng(0)
    w = Waveform(rng.uniform(-0.9, 0.9, (2, 1000)), 22050)
    save_wav(w, tmp_path / "a.wav", encoding)
    back = load_wav(tmp_path / "a.wav")
    assert back.sample_rate_hz == 22050 and back.layout == "stereo"
    np.testing.assert_allclose(back.channels, w.channels, atol=tol)


def test_load_24bit_style_int32(tmp_path):
    x = (np.array([0.5, -0.25, 0.0]) * 2 ** 31).astype(np.int32)
    wavfile.write(tmp_path / "b.wav", 8000, x)
    np.testing.assert_allclose(load_wav(tmp_path / "b.wav").samples, [0.5, -0.25, 0.0])


def test_load_errors(tmp_path):
    with pytest.raises(DataError):
        load_wav(tmp_path / "missing.wav")
    (tmp_path / "junk.wav").write_bytes(b"not a wav file at all")
    with pytest.raises(FormatError):
        load_wav(tmp_path / "junk.wav")


@pytest.mark.parametrize("src,dst", [(48000, 16000), (44100, 16000), (8000, 16000), (16000, 16000)])
def test_resample_preserves_a_tone(src, dst):
    w = Waveform.mono(tone(440.0, src, 1.0), src)
    out = resample(w, dst)
    assert out.sample_rate_hz == dst
    assert out.n_samples == round(w.n_samples * dst / src)
    ref = tone(440.0, dst, out.n_samples / dst)
    core = slice(200, out.n_samples - 200)
    err = out.samples[core] - ref[core]
    snr = 10 * np.log10(np.mean(ref[core] ** 2) / np.mean(err ** 2)) if np.any(err) else np.inf
    assert snr > 60


def test_resample_removes_content_above_new_nyquist():
    w = Waveform.mono(tone(12000.0, 48000, 1.0), 48000)
    out = resample(w, 16000)
    assert np.sqrt(np.mean(out.samples[200:-200] ** 2)) < 1e-3


def test_linear_resampler_is_available():
    out = resample(Waveform.mono(tone(100.0, 8000), 8000), 16000, method="linear")
    assert out.n_samples == 16000


def test_remove_voice_cancels_centre():
    rng = np.random.default_rng(1)
    voice = rng.standard_normal(1000)
    side = rng.standard_normal(1000)
    st = remove_voice(Waveform(np.stack([voice + side, voice]), 16000))
    np.testing.assert_allclose(st.samples, side)
    ch = np.stack([voice + side, voice, 5 * voice, np.zeros(1000), voice, voice])
    sur = remove_voice(Waveform(ch, 16000))
    assert sur.layout == "mono" and sur.n_samples == 1000
    with pytest.raises(LayoutError):
        remove_voice(Waveform.mono(voice, 16000))


def test_mix_to_mono_averages_channels():
    w = Waveform(np.stack([np.ones(4), 3 * np.ones(4)]), 8000)
    np.testing.assert_allclose(mix_to_mono(w).samples, 2.0)


def test_mel_scale_round_trip_and_anchor():
    f = np.array([0.0, 100.0, 1000.0, 7999.0])
    np.testing.assert_allclose(mel_to_hz(hz_to_mel(f)), f, atol=1e-9)
    assert hz_to_mel(1000.0) == pytest.approx(999.9855, abs=1e-3)


def test_filterbank_shape_and_peaks():
    p = MelParams()
    fb = mel_filterbank(p)
    assert fb.shape == (p.n_fft // 2 + 1, 64)
    assert fb.min() >= 0 and fb.max() <= 1 + 1e-12
    assert np.all(fb.sum(axis=0) > 0)


def test_power_frames_match_direct_dft():
    p = MelParams(sample_rate_hz=8000, n_mels=8, window_s=0.008, hop_s=0.004)
    x = np.random.default_rng(2).standard_normal(200)
    got = power_frames(x, p)
    win = p.win_samples
    hann = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(win) / win)
    for k in range(got.shape[0]):
        frame = x[k * p.hop_samples:k * p.hop_samples + win] * hann
        np.testing.assert_allclose(got[k], dft_power(frame, p.n_fft), rtol=1e-9, atol=1e-9)


def test_frame_count_and_short_input():
    p = MelParams()
    assert frame_count(p.win_samples - 1, p) == 0
    assert frame_count(p.win_samples, p) == 1
    assert frame_count(16000, p) == (16000 - 1024) // 160 + 1
    with pytest.raises(DataError):
        mel_spectrogram(Waveform.mono(np.zeros(100), 16000), p)
    with pytest.raises(LayoutError):
        mel_spectrogram(Waveform(np.zeros((2, 20000)), 16000), p)
    with pytest.raises(DataError):
        mel_spectrogram(Waveform.mono(np.zeros(20000), 8000), p)


@pytest.mark.parametrize("freq", [100, 250, 440, 800, 1300, 2000, 3100, 4400, 5600, 7000])
def test_tone_peaks_in_nearest_centre_bin(freq):
    p = MelParams()
    mel = mel_spectrogram(Waveform.mono(tone(freq), 16000), p)
    expected = int(np.argmin(np.abs(mel_band_centers(p) - freq)))
    assert int(np.argmax(mel.values.mean(axis=0))) == expected


def test_amplitude_scaling_shifts_log_mel():
    p = MelParams()
    x = tone(1000.0) + 0.1 * np.random.default_rng(3).standard_normal(16000)
    a = mel_spectrogram(Waveform.mono(x, 16000), p).values
    b = mel_spectrogram(Waveform.mono(3.0 * x, 16000), p).values
    above = a > np.log(p.log_floor) + 1
    np.testing.assert_allclose((b - a)[above], np.log(9.0), atol=1e-5)


def test_silence_hits_the_floor():
    p = MelParams()
    mel = mel_spectrogram(Waveform.mono(np.zeros(4000), 16000), p)
    np.testing.assert_array_equal(mel.values, np.log(p.log_floor))
    assert mel.origin_span.end_s == pytest.approx(0.25)
