import numpy as np
import pytest

from laughcaf.encoders import (RawFeatures, encode_audio_stub, encode_text_stub, encode_visual_stub, fnv1a64,
                               load_feature_file, word_slot)
from laughcaf.errors import DimensionError, FormatError
from laughcaf.fnwm import decode_matrix, encode_matrix, load_checkpoint, read_matrix, save_checkpoint, write_matrix


def test_fnv1a_reference_vectors():
    assert fnv1a64("") == 0xCBF29CE484222325
    assert fnv1a64("a") == 0xAF63DC4C8601EC8C
    assert fnv1a64("foobar") == 0x85944171F73967E8


def test_word_slot_is_stable():
    idx, sign = word_slot("banana", 128)
    assert 0 <= idx < 128 and sign in (-1.0, 1.0)
    assert word_slot("banana", 128) == (idx, sign)


def test_audio_stub_examples():
    mel = np.zeros((100, 64))
    f = encode_audio_stub(mel, 8)
    assert f.tokens.shape == (8, 128)
    assert np.all(f.tokens == f.tokens[0])
    rng = np.random.default_rng(0)
    mel = rng.standard_normal((40, 64))
    one = encode_audio_stub(mel, 1).tokens[0]
    np.testing.assert_allclose(one, np.concatenate([mel.mean(0), mel.std(0)]), atol=1e-6)
    perm = mel.copy()
    perm[:10] = perm[:10][::-1]
    np.testing.assert_array_equal(encode_audio_stub(perm, 4).tokens[0], encode_audio_stub(mel, 4).tokens[0])
    assert encode_audio_stub(np.zeros((0, 64)), 8).m == 1


def test_text_stub_examples():
    assert encode_text_stub("", 4).tokens.tolist() == [[0.0] * 128]
    a = encode_text_stub("the cat sat on the mat", 4).tokens
    np.testing.assert_array_equal(a, encode_text_stub("THE cat sat on the mat", 4).tokens)
    assert a.shape == (4, 128)
    b = encode_text_stub("the dog sat on the mat", 4).tokens
    assert np.count_nonzero(a - b) <= 2
    # round-robin: word i goes to group i mod m
    t = encode_text_stub("x y", 2, 16).tokens
    ix, sx = word_slot("x", 16)
    assert t[0, ix] == sx
    with pytest.raises(ValueError):
        encode_text_stub("a", 4, 4)


def test_visual_stub_examples():
    frames = np.full((8, 4, 4), 0.5)
    f = encode_visual_stub(frames, 8).tokens
    assert f.shape == (8, 65)
    assert np.all(f[:, 64] == 0)
    assert np.all(f[:, 32] == 1) and f[:, :64].sum() == 8
    rng = np.random.default_rng(1)
    frames = rng.uniform(0, 1, (6, 5, 5))
    fwd = encode_visual_stub(frames, 6).tokens[:, :64]
    rev = encode_visual_stub(frames[::-1], 6).tokens[:, :64]
    assert sorted(map(tuple, fwd)) == sorted(map(tuple, rev))
    assert encode_visual_stub(np.zeros((0, 4, 4)), 8).m == 1


def test_rawfeatures_validation():
    with pytest.raises(DimensionError):
        RawFeatures("audio", np.zeros((0, 4)))
    with pytest.raises(ValueError):
        RawFeatures("audio", np.array([[np.nan]]))
    with pytest.raises(ValueError):
        RawFeatures("smell", np.zeros((1, 4)))


def test_fnwm_round_trip_and_errors(tmp_path):
    m = np.random.default_rng(2).standard_normal((3, 5)).astype(np.float32)
    write_matrix(tmp_path / "m.fnwm", m)
    np.testing.assert_array_equal(read_matrix(tmp_path / "m.fnwm"), m)
    raw = (tmp_path / "m.fnwm").read_bytes()
    assert raw[:4] == b"FNWM" and len(raw) == 16 + 60
    (tmp_path / "t.fnwm").write_bytes(raw[:-4])
    with pytest.raises(FormatError):
        read_matrix(tmp_path / "t.fnwm")
    (tmp_path / "g.fnwm").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(FormatError):
        read_matrix(tmp_path / "g.fnwm")
    (tmp_path / "v.fnwm").write_bytes(raw[:4] + (2).to_bytes(4, "little") + raw[8:])
    with pytest.raises(FormatError):
        read_matrix(tmp_path / "v.fnwm")
    (tmp_path / "x.fnwm").write_bytes(raw + b"\0")
    with pytest.raises(FormatError):
        read_matrix(tmp_path / "x.fnwm")


def test_fnwm_header_layout():
    buf = encode_matrix(np.array([[1.0, 2.0]]))
    assert buf == b"FNWM" + bytes([1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0]) + np.array([1, 2], "<f4").tobytes()
    m, end = decode_matrix(buf)
    assert end == len(buf) and m.tolist() == [[1.0, 2.0]]


def test_load_feature_file(tmp_path):
    write_matrix(tmp_path / "f.fnwm", np.ones((1, 512)))
    f = load_feature_file(tmp_path / "f.fnwm", "visual", 512)
    assert f.m == 1 and f.dim == 512
    with pytest.raises(DimensionError):
        load_feature_file(tmp_path / "f.fnwm", "visual", 65)


def test_checkpoint_round_trip(tmp_path):
    params = {"a": np.arange(6, dtype=np.float32).reshape(2, 3), "b": np.ones(4, np.float32)}
    save_checkpoint(tmp_path / "ck", params, {"note": 1})
    back, meta = load_checkpoint(tmp_path / "ck")
    assert meta == {"note": 1}
    for k in params:
        np.testing.assert_array_equal(back[k], params[k])
        assert back[k].shape == params[k].shape
