"""Contrastive, self-supervised, classification and combined losses."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import numkernel as nk
from .numkernel import Tensor

SS_MODES = ("mean_of_losses", "negated")


@dataclass(frozen=True)
class LossConfig:
    tau: float = 0.1
    lambda_ss: float = 1.0
    lambda_cls: float = 1.0
    ss_sign_mode: str = "mean_of_losses"

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be > 0")
        if self.lambda_ss < 0 or self.lambda_cls < 0:
            raise ValueError("loss weights must be >= 0")
        if self.ss_sign_mode not in SS_MODES:
            raise ValueError(f"ss_sign_mode must be one of {SS_MODES}")


def contrastive_loss(anchor, candidate, tau: float = 0.1) -> Tensor:
    """InfoNCE over a batch: row i of ``anchor`` should pick row i of ``candidate``.

    The softmax denominator runs over every candidate in the batch,
    including the positive.  Zero-norm rows get cosine similarity 0.
    """
    a, c = nk.as_tensor(anchor), nk.as_tensor(candidate)
    if a.shape != c.shape or a.data.ndim != 2:
        raise ValueError(f"contrastive_loss needs equal (B, N) batches, got {a.shape} and {c.shape}")
    if np.any(np.linalg.norm(a.data, axis=1) < nk.NORM_EPS) or np.any(np.linalg.norm(c.data, axis=1) < nk.NORM_EPS):
        warnings.warn("zero-norm embedding in contrastive loss; its similarities are set to 0", RuntimeWarning)
    B = a.shape[0]
    logp = nk.log_softmax(nk.scale(nk.cosine_similarity(a, c), 1.0 / tau))
    eye = np.eye(B, dtype=logp.data.dtype)
    return nk.scale(nk.sum_all(nk.mul(logp, eye)), -1.0 / B)


def self_supervised_loss(visual, text, audio, cfg: LossConfig = LossConfig()) -> Tensor:
    """Average of the visual-audio, visual-text and text-audio contrastive losses."""
    va = contrastive_loss(visual, audio, cfg.tau)
    vt = contrastive_loss(visual, text, cfg.tau)
    ta = contrastive_loss(text, audio, cfg.tau)
    total = nk.add(nk.add(va, vt), ta)
    sign = -1.0 if cfg.ss_sign_mode == "negated" else 1.0
    return nk.scale(total, sign / 3.0)


def classification_loss(logits, labels) -> Tensor:
    """Mean softmax cross-entropy over two classes."""
    z = nk.as_tensor(logits)
    y = np.asarray(labels, dtype=np.int64)
    if z.data.ndim != 2 or z.shape[0] != y.size:
        raise ValueError("logits must be (B, C) with one label per row")
    if np.any((y < 0) | (y >= z.shape[1])):
        raise ValueError("labels out of range")
    onehot = np.zeros(z.shape, dtype=z.data.dtype)
    onehot[np.arange(y.size), y] = 1.0
    return nk.scale(nk.sum_all(nk.mul(nk.log_softmax(z), onehot)), -1.0 / y.size)


def total_loss(ss, cls, cfg: LossConfig = LossConfig()) -> Tensor:
    """lambda_ss * L_ss + lambda_cls * L_cls."""
    return nk.add(nk.scale(ss, cfg.lambda_ss), nk.scale(cls, cfg.lambda_cls))
