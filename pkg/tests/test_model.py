import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from laughcaf import numkernel as nk
from laughcaf.errors import DimensionError
from laughcaf.losses import LossConfig
from laughcaf.model import (FusionModel, ModelConfig, caf_cross_fuse, caf_self_attend, classify, init_params,
                            modality_contributions, project)
from laughcaf.numkernel import Tensor
from laughcaf.train import batch_loss

from oracles import naive_caf

MODS = ("visual", "text", "audio")


def toy_cfg(n=4, d=4, dropout=0.0, **kw):
    return ModelConfig(d_raw={"visual": 5, "text": 6, "audio": 7}, n_proj=n, hidden=n, d=d, dropout=dropout, **kw)


def toy_batch(rng, B=3, m=(2, 3, 4)):
    return {mod: rng.standard_normal((B, mi, dim)).astype(np.float32)
            for mod, mi, dim in zip(MODS, m, (5, 6, 7))}


def test_project_hand_computed_toy_head():
    params = {
        "proj.t.W1": Tensor(np.array([[1.0, 0.0, -1.0], [0.5, 1.0, 0.0]])),
        "proj.t.b1": Tensor(np.zeros(3)),
        "proj.t.W2": Tensor(np.array([[1.0, 0.0], [0.0, 1.0], [1.0, -1.0]])),
        "proj.t.b2": Tensor(np.zeros(2)),
        "proj.t.gamma": Tensor(np.ones(2)),
        "proj.t.beta": Tensor(np.zeros(2)),
    }
    out = project(np.array([[1.0, 2.0]]), params, "t").data
    # h = gelu([2, 2, -1]); y = [h0 + h2, h1 - h2]; layer_norm of two values gives +-1 scaled by eps
    g = lambda v: 0.5 * v * (1 + math.tanh(math.sqrt(2 / math.pi) * (v + 0.044715 * v ** 3)))
    y = np.array([g(2) + g(-1), g(2) - g(-1)])
    expected = (y - y.mean()) / math.sqrt(y.var() + 1e-5)
    np.testing.assert_allclose(out[0], expected, atol=1e-6)


def test_project_eval_is_deterministic_and_checks_dims():
    cfg = toy_cfg(dropout=0.5)
    p = init_params(cfg)
    x = np.random.default_rng(0).standard_normal((2, 5))
    np.testing.assert_array_equal(project(x, p, "visual").data, project(x, p, "visual").data)
    with pytest.raises(DimensionError):
        project(np.ones((2, 4)), p, "visual")


def test_project_zero_input_zero_bias_gives_zeros():
    p = init_params(toy_cfg())
    np.testing.assert_array_equal(project(np.zeros((3, 5)), p, "visual").data, 0.0)


@pytest.mark.parametrize("n,d", [(4, 4), (4, 3)])
def test_caf_matches_naive_oracle(n, d):
    cfg = toy_cfg(n, d)
    p = init_params(cfg)
    rng = np.random.default_rng(1)
    tokens = {m: rng.standard_normal((2, n)) for m in MODS}
    fused, maps, _ = caf_cross_fuse({m: Tensor(t) for m, t in tokens.items()}, p)
    caf, attn = caf_self_attend(fused, p)
    W = {k: v.data.astype(np.float64) for k, v in p.items()}
    ref_fused, ref_caf = naive_caf(tokens, W)
    np.testing.assert_allclose(fused.data, ref_fused, atol=1e-6)
    np.testing.assert_allclose(caf.data, ref_caf, atol=1e-6)
    for a in list(maps.values()) + [attn]:
        np.testing.assert_allclose(a.data.sum(axis=-1), 1.0, atol=1e-6)


def test_singleton_tokens_give_identical_rows():
    cfg = toy_cfg()
    p = init_params(cfg)
    rng = np.random.default_rng(2)
    tokens = {m: Tensor(rng.standard_normal((1, 4))) for m in MODS}
    fused, maps, _ = caf_cross_fuse(tokens, p)
    expected = sum(tokens[m].data @ p[f"caf.W_V.{m}"].data for m in MODS)
    np.testing.assert_allclose(fused.data, np.repeat(expected, 3, axis=0), atol=1e-6)
    assert all(np.all(a.data == 1.0) for a in maps.values())
    w = modality_contributions({m: a.data for m, a in maps.items()})
    assert all(v == pytest.approx(1 / 3) for v in w.values())


def test_self_attend_single_row_and_zero_values():
    p = init_params(toy_cfg())
    row = Tensor(np.random.default_rng(3).standard_normal((1, 4)))
    caf, _ = caf_self_attend(row, p)
    np.testing.assert_allclose(caf.data, row.data + row.data @ p["caf.W_VU"].data, atol=1e-6)
    p["caf.W_VU"] = Tensor(np.zeros((4, 4)))
    many = Tensor(np.random.default_rng(4).standard_normal((5, 4)))
    np.testing.assert_array_equal(caf_self_attend(many, p)[0].data, many.data)


def test_classify_zero_weights_and_row_permutation():
    p = {"cls.W": Tensor(np.zeros((4, 2))), "cls.b": Tensor(np.zeros(2))}
    caf = Tensor(np.random.default_rng(5).standard_normal((1, 6, 4)))
    assert nk.row_softmax(classify(caf, p)).data[0, 1] == pytest.approx(0.5)
    p = {"cls.W": Tensor(np.random.default_rng(6).standard_normal((4, 2))), "cls.b": Tensor(np.ones(2))}
    perm = Tensor(caf.data[:, ::-1])
    np.testing.assert_allclose(classify(caf, p).data, classify(perm, p).data, atol=1e-12)


def test_classify_hand_computed():
    p = {"cls.W": Tensor(np.array([[1.0, -1.0], [2.0, 0.0]])), "cls.b": Tensor(np.array([0.0, 0.5]))}
    caf = Tensor(np.array([[1.0, 0.0], [3.0, 2.0]]))  # token mean (2, 1)
    np.testing.assert_allclose(classify(caf, p).data, [[4.0, -1.5]])


def test_modality_order_does_not_change_probability():
    cfg = toy_cfg(8, 8)
    model = FusionModel(cfg)
    batch = toy_batch(np.random.default_rng(7))
    base = model.forward(batch).probabilities()
    for order in [("audio", "text", "visual"), ("text", "audio", "visual")]:
        np.testing.assert_allclose(model.forward(batch, order=order).probabilities(), base, atol=1e-6)


@given(st.integers(0, 10_000))
def test_contributions_are_a_distribution(seed):
    rng = np.random.default_rng(seed)
    maps = {m: nk.row_softmax(rng.standard_normal((5, int(rng.integers(1, 6))))).data for m in MODS}
    w = modality_contributions(maps)
    assert all(0 <= v <= 1 for v in w.values())
    assert sum(w.values()) == pytest.approx(1.0, abs=1e-6)


def test_occlusion_contributions_follow_the_informative_modality():
    cfg = toy_cfg(4, 4)
    model = FusionModel(cfg)
    batch = toy_batch(np.random.default_rng(8), B=4)
    batch["text"] = np.zeros_like(batch["text"])
    model.fit_input_norm(batch)
    w = model.occlusion_contributions(batch)
    assert len(w) == 4
    for row in w:
        assert sum(row.values()) == pytest.approx(1.0)
        assert row["text"] == pytest.approx(0.0, abs=1e-6)


def test_pooled_mode_uses_one_token_per_modality():
    model = FusionModel(toy_cfg(pooled=True))
    r = model.forward(toy_batch(np.random.default_rng(9)))
    assert all(t.shape[1] == 1 for t in r.tokens.values())
    assert r.fused.shape == (3, 3, 4)


def test_forward_accepts_single_clip_and_state_round_trip():
    cfg = toy_cfg()
    model = FusionModel(cfg)
    batch = toy_batch(np.random.default_rng(10), B=1)
    model.fit_input_norm(batch)
    single = {m: v[0] for m, v in batch.items()}
    p1 = model.forward(single).probabilities()
    clone = FusionModel.from_state(cfg, model.state_dict())
    np.testing.assert_array_equal(clone.forward(single).probabilities(), p1)
    bad = dict(model.state_dict())
    bad["cls.W"] = np.zeros((3, 2))
    with pytest.raises(DimensionError):
        FusionModel.from_state(cfg, bad)
    del bad["cls.W"]
    with pytest.raises(DimensionError):
        FusionModel.from_state(cfg, bad)


def test_full_pipeline_gradient_small():
    cfg = toy_cfg(4, 4)
    model = FusionModel(cfg)
    batch = toy_batch(np.random.default_rng(11), B=3, m=(2, 2, 2))
    labels = np.array([0, 1, 1])
    params = model.parameters()
    f = lambda: batch_loss(model, batch, labels, LossConfig(), train=False, seed=0)[0]
    assert nk.grad_check(f, params) < 1e-3
