"""Mini-batch training and evaluation of the fusion classifier."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import numkernel as nk
from .encoders import MODALITIES
from .errors import DimensionError
from .losses import LossConfig, classification_loss, self_supervised_loss, total_loss
from .metrics import MetricsReport, classification_metrics
from .model import FusionModel

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    batch_size: int = 32
    epochs: int = 10
    seed: int = 0
    target_train_acc: float | None = None  # stop early once an epoch reaches it


@dataclass
class ClipSet:
    """Raw token features for a set of clips; every clip shares m per modality."""
    features: dict[str, np.ndarray]  # modality -> (n, m, D_raw)
    labels: np.ndarray
    clip_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = self.labels.size
        for mod in MODALITIES:
            f = self.features.get(mod)
            if f is None:
                raise DimensionError(f"clip set has no {mod} features")
            if f.ndim != 3 or f.shape[0] != n:
                raise DimensionError(f"{mod} features have shape {f.shape}, expected ({n}, m, D)")
        if not self.clip_ids:
            self.clip_ids = [f"clip_{i:06d}" for i in range(n)]

    def __len__(self) -> int:
        return int(self.labels.size)

    def batch(self, idx) -> dict[str, np.ndarray]:
        return {m: self.features[m][idx] for m in MODALITIES}

    def subset(self, idx) -> "ClipSet":
        idx = np.asarray(idx)
        return ClipSet(self.batch(idx), self.labels[idx], [self.clip_ids[i] for i in idx])


@dataclass
class EpochLog:
    epoch: int
    loss: float
    loss_ss: float
    loss_cls: float
    train_acc: float
    test_acc: float | None = None


def batch_loss(model: FusionModel, batch: dict, labels: np.ndarray, loss_cfg: LossConfig,
               train: bool, seed: int):
    r = model.forward(batch, train=train, seed=seed)
    ss = self_supervised_loss(r.pooled("visual"), r.pooled("text"), r.pooled("audio"), loss_cfg)
    cls = classification_loss(r.logits, labels)
    return total_loss(ss, cls, loss_cfg), ss, cls, r


def predict_proba(model: FusionModel, data: ClipSet, batch_size: int = 128) -> np.ndarray:
    out = []
    for start in range(0, len(data), batch_size):
        idx = np.arange(start, min(start + batch_size, len(data)))
        out.append(model.forward(data.batch(idx)).probabilities())
    return np.concatenate(out) if out else np.zeros(0)


def evaluate(model: FusionModel, data: ClipSet) -> MetricsReport:
    preds = (predict_proba(model, data) > 0.5).astype(int)
    return classification_metrics(preds, data.labels)


def train(model: FusionModel, data: ClipSet, loss_cfg: LossConfig = LossConfig(),
          cfg: TrainConfig = TrainConfig(), test: ClipSet | None = None) -> list[EpochLog]:
    """Adam on lambda_ss * L_ss + lambda_cls * L_cls; returns one log row per epoch."""
    rng = np.random.default_rng(cfg.seed)
    params = model.parameters()
    state = nk.AdamState.for_params([p.data for p in params], lr=cfg.lr)
    history: list[EpochLog] = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(data))
        sums = np.zeros(3)
        correct = 0
        for start in range(0, len(order), cfg.batch_size):
            idx = np.sort(order[start:start + cfg.batch_size])
            for p in params:
                p.grad = None
            loss, ss, cls, r = batch_loss(model, data.batch(idx), data.labels[idx], loss_cfg,
                                          train=True, seed=int(rng.integers(2 ** 31)))
            if not np.isfinite(loss.data):
                raise nk.NumericError(f"non-finite loss at epoch {epoch}, batch starting {start}")
            loss.backward()
            nk.adam_step([p.data for p in params], [p.grad for p in params], state)
            sums += np.array([float(loss.data), float(ss.data), float(cls.data)]) * idx.size
            correct += int(np.sum(r.logits.data.argmax(axis=1) == data.labels[idx]))
        sums /= len(data)
        row = EpochLog(epoch, *sums.tolist(), train_acc=correct / len(data))
        if test is not None:
            row.test_acc = evaluate(model, test).accuracy
        log.info("epoch %d loss %.4f (ss %.4f cls %.4f) train_acc %.3f test_acc %s",
                 epoch, row.loss, row.loss_ss, row.loss_cls, row.train_acc, row.test_acc)
        history.append(row)
        if cfg.target_train_acc is not None and row.train_acc >= cfg.target_train_acc:
            break
    return history


def history_csv(history: Sequence[EpochLog]) -> str:
    lines = ["epoch,loss,loss_ss,loss_cls,train_acc,test_acc"]
    for h in history:
        test = "" if h.test_acc is None else f"{h.test_acc:.6f}"
        lines.append(f"{h.epoch},{h.loss:.6f},{h.loss_ss:.6f},{h.loss_cls:.6f},{h.train_acc:.6f},{test}")
    return "\n".join(lines) + "\n"
