"""Projection heads, cross-attention fusion and the funny/not-funny classifier.

Shapes inside the model are batched: token matrices are (B, m, D).  The
stacked query sequence F_S concatenates the projected tokens of every
modality in ``order`` (visual, text, audio by default); each modality's
tokens act as keys/values of one cross-attention block, the three block
outputs are summed into F_U, and a residual self-attention over F_U gives
F_CAF.  The classifier reads the token average of F_CAF.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import numkernel as nk
from .encoders import MODALITIES, VISUAL_BINS
from .errors import DimensionError
from .numkernel import Tensor


@dataclass(frozen=True)
class ModelConfig:
    d_raw: Mapping[str, int] = field(default_factory=lambda: {
        "visual": VISUAL_BINS + 1, "text": 128, "audio": 128})
    n_proj: int = 512
    hidden: int = 512
    d: int = 512
    dropout: float = 0.1
    pooled: bool = False
    init_seed: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["d_raw"] = dict(self.d_raw)
        return d


@dataclass
class ForwardResult:
    logits: Tensor                 # (B, 2)
    tokens: dict[str, Tensor]      # projected tokens per modality, (B, m_i, N)
    cross_maps: dict[str, Tensor]  # A_i, (B, M, m_i)
    cross_out: dict[str, Tensor]   # A_i V_i after output projection, (B, M, N)
    self_map: Tensor               # (B, M, M)
    fused: Tensor                  # F_U
    caf: Tensor                    # F_CAF

    def pooled(self, modality: str) -> Tensor:
        """Token-averaged projected embedding, (B, N)."""
        return nk.mean_rows(self.tokens[modality])

    def probabilities(self) -> np.ndarray:
        return nk.row_softmax(self.logits).data[:, 1]


def _init(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return (rng.standard_normal((rows, cols)) / math.sqrt(rows)).astype(np.float32)


def init_params(cfg: ModelConfig) -> dict[str, Tensor]:
    rng = np.random.default_rng(cfg.init_seed)
    N, H, d = cfg.n_proj, cfg.hidden, cfg.d
    p: dict[str, np.ndarray] = {}
    for mod in MODALITIES:
        p[f"proj.{mod}.W1"] = _init(rng, cfg.d_raw[mod], H)
        p[f"proj.{mod}.b1"] = np.zeros(H, np.float32)
        p[f"proj.{mod}.W2"] = _init(rng, H, N)
        p[f"proj.{mod}.b2"] = np.zeros(N, np.float32)
        p[f"proj.{mod}.gamma"] = np.ones(N, np.float32)
        p[f"proj.{mod}.beta"] = np.zeros(N, np.float32)
    p["caf.W_QS"] = _init(rng, N, d)
    for mod in MODALITIES:
        p[f"caf.W_K.{mod}"] = _init(rng, N, d)
        p[f"caf.W_V.{mod}"] = _init(rng, N, d)
        if d != N:
            p[f"caf.W_O.{mod}"] = _init(rng, d, N)
    for name in ("W_QU", "W_KU", "W_VU"):
        p[f"caf.{name}"] = _init(rng, N, d)
    if d != N:
        p["caf.W_OU"] = _init(rng, d, N)
    p["cls.W"] = _init(rng, N, 2)
    p["cls.b"] = np.zeros(2, np.float32)
    return {k: Tensor(v, requires_grad=True) for k, v in p.items()}


# ---------------------------------------------------------------------------
# building blocks

def project(raw, params: Mapping[str, Tensor], modality: str, train: bool = False,
            seed: int = 0, dropout_p: float = 0.1) -> Tensor:
    """layer_norm(dropout(W2 · gelu(W1 x + b1) + b2)) · gamma + beta, per token."""
    x = nk.as_tensor(raw)
    W1 = params[f"proj.{modality}.W1"]
    if x.shape[-1] != W1.shape[0]:
        raise DimensionError(f"{modality} features have dim {x.shape[-1]}, head expects {W1.shape[0]}")
    h = nk.gelu(nk.add(nk.matmul(x, W1), params[f"proj.{modality}.b1"]))
    y = nk.add(nk.matmul(h, params[f"proj.{modality}.W2"]), params[f"proj.{modality}.b2"])
    y = nk.layer_norm(nk.dropout(y, dropout_p, seed, train))
    return nk.add(nk.mul(y, params[f"proj.{modality}.gamma"]), params[f"proj.{modality}.beta"])


def _attend(q: Tensor, k: Tensor, v: Tensor, d: int) -> tuple[Tensor, Tensor]:
    scores = nk.scale(nk.matmul(q, nk.transpose(k)), 1.0 / math.sqrt(d))
    attn = nk.row_softmax(scores)
    return attn, nk.matmul(attn, v)


def caf_cross_fuse(tokens: Mapping[str, Tensor], params: Mapping[str, Tensor],
                   order: Sequence[str] = MODALITIES):
    """Cross-attend the stacked sequence to each modality and sum the results.

    Returns (F_U, maps, outputs) where maps[i] is the row-stochastic
    attention of the stacked queries over modality i's tokens.
    """
    stacked = nk.concat_rows([tokens[m] for m in order])
    W_QS = params["caf.W_QS"]
    d = W_QS.shape[1]
    q = nk.matmul(stacked, W_QS)
    maps: dict[str, Tensor] = {}
    outs: dict[str, Tensor] = {}
    fused = None
    for mod in MODALITIES:
        k = nk.matmul(tokens[mod], params[f"caf.W_K.{mod}"])
        v = nk.matmul(tokens[mod], params[f"caf.W_V.{mod}"])
        attn, out = _attend(q, k, v, d)
        if f"caf.W_O.{mod}" in params:
            out = nk.matmul(out, params[f"caf.W_O.{mod}"])
        maps[mod], outs[mod] = attn, out
        fused = out if fused is None else nk.add(fused, out)
    return fused, maps, outs


def caf_self_attend(fused: Tensor, params: Mapping[str, Tensor]) -> tuple[Tensor, Tensor]:
    """F_CAF = F_U + softmax(Q_U K_Uᵀ / √d) V_U.  Returns (F_CAF, attention map)."""
    d = params["caf.W_QU"].shape[1]
    q = nk.matmul(fused, params["caf.W_QU"])
    k = nk.matmul(fused, params["caf.W_KU"])
    v = nk.matmul(fused, params["caf.W_VU"])
    attn, out = _attend(q, k, v, d)
    if "caf.W_OU" in params:
        out = nk.matmul(out, params["caf.W_OU"])
    return nk.add(fused, out), attn


def classify(caf: Tensor, params: Mapping[str, Tensor]) -> Tensor:
    """Logits (B, 2) from the token-averaged fused features; (1, 2) for one unbatched clip."""
    caf = nk.as_tensor(caf)
    if caf.data.ndim == 2:
        M = caf.shape[0]
        pooled = nk.matmul(np.full((1, M), 1.0 / M, dtype=caf.data.dtype), caf)
    else:
        pooled = nk.mean_rows(caf)
    return nk.add(nk.matmul(pooled, params["cls.W"]), params["cls.b"])


def funny_probability(logits: Tensor) -> np.ndarray:
    return nk.row_softmax(logits).data[..., 1]


def modality_contributions(maps: Mapping[str, np.ndarray]) -> dict[str, float]:
    """Mean entry of each attention map, renormalised to sum to 1.

    The maps are row-stochastic, so each mean is exactly 1/m_i and the
    weights only reflect token counts.  ``FusionModel.occlusion_contributions``
    gives an input-dependent alternative.
    """
    raw = {m: float(np.mean(a)) for m, a in maps.items()}
    return _normalise(raw)


def _normalise(raw: Mapping[str, float]) -> dict[str, float]:
    total = sum(raw.values())
    if not np.isfinite(total) or total <= 0:
        return {m: 1.0 / len(raw) for m in raw}
    return {m: v / total for m, v in raw.items()}


# ---------------------------------------------------------------------------

class FusionModel:
    """Parameter store plus the full forward pass."""

    def __init__(self, cfg: ModelConfig = ModelConfig(), params: dict[str, Tensor] | None = None,
                 input_norm: dict[str, np.ndarray] | None = None):
        self.cfg = cfg
        self.params = params if params is not None else init_params(cfg)
        # per-dimension standardisation of raw features; fixed, not trained
        self.input_norm = input_norm if input_norm is not None else {
            f"norm.{m}.{stat}": (np.zeros if stat == "mean" else np.ones)(cfg.d_raw[m], np.float32)
            for m in MODALITIES for stat in ("mean", "std")}

    def fit_input_norm(self, features: Mapping[str, np.ndarray]) -> None:
        """Set the input standardisation from training features (n, m, D) per modality."""
        for mod in MODALITIES:
            flat = np.asarray(features[mod], dtype=np.float64).reshape(-1, features[mod].shape[-1])
            sd = flat.std(axis=0)
            self.input_norm[f"norm.{mod}.mean"] = flat.mean(axis=0).astype(np.float32)
            self.input_norm[f"norm.{mod}.std"] = np.where(sd > 1e-6, sd, 1.0).astype(np.float32)

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {k: v.data for k, v in self.params.items()}
        state.update(self.input_norm)
        return state

    @classmethod
    def from_state(cls, cfg: ModelConfig, state: Mapping[str, np.ndarray]) -> "FusionModel":
        expected = init_params(cfg)
        missing = set(expected) - set(state)
        if missing:
            raise DimensionError(f"checkpoint is missing parameters: {sorted(missing)}")
        params = {}
        for k, t in expected.items():
            arr = np.asarray(state[k], dtype=np.float32)
            if arr.shape != t.shape:
                raise DimensionError(f"{k}: checkpoint shape {arr.shape}, model expects {t.shape}")
            params[k] = Tensor(arr.copy(), requires_grad=True)
        model = cls(cfg, params)
        for k, default in model.input_norm.items():
            if k in state:
                model.input_norm[k] = np.asarray(state[k], dtype=np.float32).reshape(default.shape)
        return model

    def forward(self, batch: Mapping[str, np.ndarray], train: bool = False, seed: int = 0,
                order: Sequence[str] = MODALITIES) -> ForwardResult:
        """``batch[mod]`` is (B, m, D_raw), or (m, D_raw) for a single clip."""
        tokens = {}
        for i, mod in enumerate(MODALITIES):
            x = np.asarray(batch[mod], dtype=np.float32)
            if x.ndim == 2:
                x = x[None]
            x = (x - self.input_norm[f"norm.{mod}.mean"]) / self.input_norm[f"norm.{mod}.std"]
            if self.cfg.pooled:
                x = x.mean(axis=1, keepdims=True)
            tokens[mod] = project(x, self.params, mod, train, seed * 3 + i, self.cfg.dropout)
        fused, maps, outs = caf_cross_fuse(tokens, self.params, order)
        caf, self_map = caf_self_attend(fused, self.params)
        return ForwardResult(classify(caf, self.params), tokens, maps, outs, self_map, fused, caf)

    def occlusion_contributions(self, batch: Mapping[str, np.ndarray]) -> list[dict[str, float]]:
        """Per clip, how far the logit margin moves when one modality is blanked.

        Blanking replaces every token of the modality with the training mean
        (zero after input standardisation).  Weights are the absolute margin
        changes, renormalised per clip.
        """
        def margin(b):
            z = self.forward(b).logits.data
            return z[:, 1] - z[:, 0]

        base = margin(batch)
        deltas = {}
        for mod in MODALITIES:
            blanked = dict(batch)
            x = np.asarray(batch[mod], dtype=np.float32)
            blanked[mod] = np.broadcast_to(self.input_norm[f"norm.{mod}.mean"], x.shape)
            deltas[mod] = np.abs(margin(blanked) - base)
        return [_normalise({m: float(deltas[m][i]) for m in MODALITIES}) for i in range(base.size)]
