"""Reconstruction objective: air/non-air split cross entropy plus an IOU cost.

The IOU cost on decoded structures is piecewise constant, so training uses a
soft version built from the predicted non-air probability; the hard version
is kept for monitoring.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .tensor import Tensor
from .voxels import VoxelStructure

IOU_EPS = 1e-8
SPATIAL = (-3, -2, -1)


class LossError(ValueError):
    pass


@dataclass
class LossBreakdown:
    total: float
    ce_air: float
    ce_non_air: float
    iou_cost: float
    hard_iou_cost: float
    per_sample: list[LossBreakdown] = field(default_factory=list)
    tensor: Tensor | None = field(default=None, repr=False)
    sample_totals: np.ndarray | None = field(default=None, repr=False)

    def row(self) -> dict:
        return {
            "total": self.total,
            "ce_air": self.ce_air,
            "ce_non_air": self.ce_non_air,
            "soft_iou": self.iou_cost,
            "hard_iou": self.hard_iou_cost,
        }


def _batched(t: Tensor) -> Tensor:
    return T.reshape(t, (1,) + t.shape) if t.ndim == 4 else t


def _check_one_hot(target: np.ndarray) -> None:
    ok = np.isin(target, (0, 1)).all() and np.all(target.sum(axis=target.ndim - 4) == 1)
    if not ok:
        raise LossError("target must be one-hot over block channels")


def _group_ce(logits: Tensor, target: np.ndarray) -> tuple[Tensor, Tensor]:
    """Per-sample mean CE over target-air cells and target-non-air cells, each ``[B]``."""
    logp = T.log_softmax_channels(logits)
    ce = T.scale(T.reduce("sum", logp * target, axis=1, keepdims=True), -1.0)  # [B,1,W,D,H]
    air = target[:, :1].astype(logits.dtype)
    non_air = (1 - air).astype(logits.dtype)
    out = []
    for mask in (air, non_air):
        n = mask.sum(axis=SPATIAL)  # [B,1]
        denom = np.where(n > 0, n, 1).astype(logits.dtype)
        s = T.reduce("sum", ce * mask, axis=SPATIAL)  # [B,1]
        out.append(T.reshape(s / denom, (ce.shape[0],)))
    return out[0], out[1]


def cross_entropy_split(logits: Tensor, target) -> tuple[Tensor, Tensor]:
    """``(ce_air, ce_non_air)``, each averaged over the cells of its target group.

    Accepts single ``[M,W,D,H]`` or batched inputs; batched inputs return the
    batch mean. An empty group contributes 0.
    """
    target = np.asarray(target)
    _check_one_hot(target)
    lb = _batched(logits)
    tb = target[None] if target.ndim == 4 else target
    if lb.shape != tb.shape:
        raise T.DimensionError(f"logits {logits.shape} vs target {target.shape}")
    ce_air, ce_non = _group_ce(lb, tb)
    return T.reduce("mean", ce_air), T.reduce("mean", ce_non)


def _soft_iou(logits: Tensor, target_non_air: np.ndarray) -> Tensor:
    logp = T.log_softmax_channels(logits)
    p_air = T.exp(T.channels(logp, 0, 1))
    p = 1.0 - p_air  # [B,1,W,D,H]
    t = target_non_air.astype(logits.dtype)
    inter = T.reduce("sum", p * t, axis=SPATIAL)
    uni = T.reduce("sum", p + t - p * t, axis=SPATIAL)
    cost = (uni - inter) / (uni + IOU_EPS)
    return T.reshape(cost, (logits.shape[0],))


def soft_iou_cost(logits: Tensor, target_non_air) -> Tensor:
    """Relaxed IOU cost on ``p_non_air = 1 - softmax(logits)[air]``; batch mean for batched input."""
    t = np.asarray(target_non_air)
    lb = _batched(logits)
    tb = t[None] if t.ndim == 4 else t
    if tb.shape != (lb.shape[0], 1) + lb.shape[2:]:
        raise T.DimensionError(f"target mask {t.shape} does not match logits {logits.shape}")
    return T.reduce("mean", _soft_iou(lb, tb))


def hard_iou_counts(pred_blocks: np.ndarray, target_blocks: np.ndarray, air_index: int = 0) -> tuple[int, int]:
    p = np.asarray(pred_blocks) != air_index
    t = np.asarray(target_blocks) != air_index
    if p.shape != t.shape:
        raise T.DimensionError(f"dims differ: {p.shape} vs {t.shape}")
    return int(np.count_nonzero(p & t)), int(np.count_nonzero(p | t))


def hard_iou_cost(pred: VoxelStructure, target: VoxelStructure) -> float:
    """``(Uni - Inter) / (Uni + 1e-8)`` over non-air cells of decoded structures."""
    if pred.dims != target.dims:
        raise T.DimensionError(f"dims differ: {pred.dims} vs {target.dims}")
    inter, uni = hard_iou_counts(pred.blocks, target.blocks)
    return (uni - inter) / (uni + IOU_EPS)


def total_loss(batch_logits: Tensor, batch_targets) -> LossBreakdown:
    """Mean over the batch of ``ce_air + ce_non_air + soft_iou``.

    ``batch_targets`` is one-hot ``[B,M,W,D,H]`` or a single ``[M,W,D,H]``
    target shared by every sample.
    """
    logits = _batched(batch_logits)
    B = logits.shape[0]
    if B == 0:
        raise LossError("empty batch")
    target = np.asarray(batch_targets)
    if target.ndim == 4:
        target = np.broadcast_to(target, (B,) + target.shape)
    if target.shape != logits.shape:
        raise T.DimensionError(f"logits {logits.shape} vs targets {target.shape}")
    _check_one_hot(target)

    ce_air, ce_non = _group_ce(logits, target)
    non_air = 1 - target[:, :1]
    iou = _soft_iou(logits, non_air)
    per = ce_air + ce_non + iou  # [B]
    total = T.reduce("mean", per)

    pred_blocks = np.argmax(logits.data, axis=1)
    tgt_blocks = np.argmax(target, axis=1)
    samples = []
    for i in range(B):
        inter, uni = hard_iou_counts(pred_blocks[i], tgt_blocks[i])
        samples.append(
            LossBreakdown(
                total=float(per.data[i]),
                ce_air=float(ce_air.data[i]),
                ce_non_air=float(ce_non.data[i]),
                iou_cost=float(iou.data[i]),
                hard_iou_cost=(uni - inter) / (uni + IOU_EPS),
            )
        )
    return LossBreakdown(
        total=float(total.data),
        ce_air=float(np.mean(ce_air.data)),
        ce_non_air=float(np.mean(ce_non.data)),
        iou_cost=float(np.mean(iou.data)),
        hard_iou_cost=float(np.mean([s.hard_iou_cost for s in samples])),
        per_sample=samples,
        tensor=total,
        sample_totals=np.array(per.data, dtype=np.float64),
    )


def alive_penalty(state: Tensor, alpha_channel: int) -> Tensor:
    """Mean squared distance of the alpha channel from 1 over every cell.

    Added to the training objective so the automaton has a gradient towards
    keeping cells alive; dead cells sit at alpha 0 and are constants here.
    """
    a = T.channels(_batched(state), alpha_channel, alpha_channel + 1)
    d = a - 1.0
    return T.reduce("mean", d * d)


CSV_FIELDS = ("iteration", "total", "ce_air", "ce_non_air", "soft_iou", "hard_iou")


class LossLog:
    """Append-only CSV of per-iteration loss components."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(CSV_FIELDS)

    def write(self, iteration: int, b: LossBreakdown) -> None:
        r = b.row()
        self._w.writerow([iteration] + [f"{r[k]:.9g}" for k in CSV_FIELDS[1:]])
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
