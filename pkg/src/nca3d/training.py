"""Pool-based training: seeds, sample pool, regeneration damage, BPTT and Adam."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import tensor as T
from .loss import LossBreakdown, LossLog, alive_penalty, total_loss
from .nca import (
    Checkpoint,
    NcaConfig,
    NcaParameters,
    RngStream,
    init_parameters,
    make_seed,
    rollout,
    save_checkpoint,
)
from .voxels import VoxelStructure, damage_halfspace, encode_target, require_trainable

log = logging.getLogger(__name__)

__all__ = [
    "TrainConfig",
    "SamplePool",
    "AdamState",
    "NonFiniteLossError",
    "make_seed",
    "sample_batch",
    "adam_step",
    "train_iteration",
    "train",
]


@dataclass
class TrainConfig:
    pool_size: int = 32
    batch_size: int = 5
    max_iterations: int = 20000
    early_stop_loss: float = 0.005
    min_steps: int = 48
    max_steps: int = 64
    learning_rate: float = 0.002
    regen_enabled: bool = False
    regen_damage_count: int = 2
    rng_seed: int = 0
    checkpoint_every: int = 500
    grad_clip_norm: float = 1.0
    # weight of the alpha-towards-1 term added to the optimised objective (not to the reported loss)
    alive_loss_weight: float = 1.0

    def __post_init__(self):
        if not 1 <= self.batch_size <= self.pool_size:
            raise ValueError("need 1 <= batch_size <= pool_size")
        if not 1 <= self.min_steps <= self.max_steps:
            raise ValueError("need 1 <= min_steps <= max_steps")
        if self.alive_loss_weight < 0:
            raise ValueError("alive_loss_weight must be non-negative")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.regen_damage_count < 0 or self.regen_damage_count >= self.batch_size:
            if self.regen_enabled:
                raise ValueError("regen_damage_count must lie in [0, batch_size)")


class NonFiniteLossError(FloatingPointError):
    pass


class SamplePool:
    """Fixed-size replay pool of partially grown states."""

    def __init__(self, seed_state: np.ndarray, size: int):
        self.states = np.repeat(seed_state[None], size, axis=0)
        self.last_loss = np.full(size, np.nan)
        self.seed_state = seed_state.copy()
        self.seed_insertions = 0
        self.damage_events = 0

    def __len__(self) -> int:
        return self.states.shape[0]


def sample_batch(pool: SamplePool, batch_size: int, rng: RngStream) -> tuple[np.ndarray, np.ndarray]:
    """Uniform draw without replacement; returns indices and copies of the states."""
    if batch_size > len(pool):
        raise ValueError("batch_size exceeds pool size")
    idx = rng.choice(len(pool), batch_size)
    return idx, pool.states[idx].copy()


# ---------------------------------------------------------------- optimiser


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float | None = 1.0
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def clip_gradient(g: np.ndarray, max_norm: float | None) -> np.ndarray:
    if max_norm is None:
        return g
    norm = float(np.sqrt(np.sum(np.square(g, dtype=np.float64))))
    return g * (max_norm / norm) if norm > max_norm else g


def adam_step(params: NcaParameters | dict, grads: dict[str, np.ndarray], state: AdamState, lr: float) -> None:
    """In-place bias-corrected Adam update; each gradient tensor is first clipped to L2 norm ``clip_norm``."""
    items = params.items() if isinstance(params, NcaParameters) else list(params.items())
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1 - b1 ** state.t
    c2 = 1 - b2 ** state.t
    for name, p in items:
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        g = clip_gradient(g, state.clip_norm).astype(p.dtype)
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        state.m[name], state.v[name] = m, v
        step = (lr / c1) * m / (np.sqrt(v / c2) + state.eps)
        p.data = (p.data - step).astype(p.dtype)


# ---------------------------------------------------------------- iteration


def _pick_best(losses: np.ndarray) -> int:
    # unset losses count as worst; argmin takes the lowest position on ties
    return int(np.argmin(np.where(np.isnan(losses), np.inf, losses)))


def train_iteration(
    pool: SamplePool,
    params: NcaParameters,
    opt_state: AdamState,
    nca_cfg: NcaConfig,
    cfg: TrainConfig,
    target: np.ndarray,
    rng: RngStream,
) -> LossBreakdown:
    """Sample, reseed, optionally damage, roll out, backprop and write back.

    ``target`` is the one-hot ``[M,W,D,H]`` encoding of the goal structure.
    On a non-finite loss the pool and parameters are left untouched and
    :class:`NonFiniteLossError` is raised.
    """
    idx, batch = sample_batch(pool, cfg.batch_size, rng)
    losses = pool.last_loss[idx]
    best = _pick_best(losses)
    batch[best] = pool.seed_state

    damaged = []
    if cfg.regen_enabled and cfg.regen_damage_count:
        ranked = [i for i in np.argsort(np.where(np.isnan(losses), np.inf, losses), kind="stable") if i != best]
        for i in ranked[: cfg.regen_damage_count]:
            if np.isnan(losses[i]):
                continue  # never-grown seeds have nothing to cut
            axis = ("x", "y", "z")[rng.integers(0, 2)]
            side = ("low", "high")[rng.integers(0, 1)]
            batch[i] = damage_halfspace(batch[i], axis, side)
            damaged.append(int(i))

    steps = rng.integers(cfg.min_steps, cfg.max_steps)
    params.zero_grad()
    state = T.Tensor(batch)
    final, _ = rollout(state, params, nca_cfg, steps, rng, record_grad=True)
    logits = T.channels(final, 0, nca_cfg.num_block_channels)
    breakdown = total_loss(logits, target)
    if not math.isfinite(breakdown.total):
        raise NonFiniteLossError(f"non-finite loss {breakdown.total} after {steps} steps")
    objective = breakdown.tensor
    if cfg.alive_loss_weight:
        objective = objective + T.scale(alive_penalty(final, nca_cfg.alpha_channel), cfg.alive_loss_weight)
    T.backward(objective)
    grads = {n: t.grad for n, t in params.items()}
    if any(g is not None and not np.all(np.isfinite(g)) for g in grads.values()):
        raise NonFiniteLossError("non-finite gradient")
    adam_step(params, grads, opt_state, cfg.learning_rate)
    params.zero_grad()

    pool.states[idx] = final.data
    pool.last_loss[idx] = breakdown.sample_totals
    pool.seed_insertions += 1
    pool.damage_events += len(damaged)
    breakdown.tensor = None
    return breakdown


# ---------------------------------------------------------------- full run


def train(
    target: VoxelStructure,
    nca_cfg: NcaConfig,
    cfg: TrainConfig,
    out_dir=None,
    params: NcaParameters | None = None,
    callback: Callable[[int, LossBreakdown], None] | None = None,
) -> Checkpoint:
    """Run ``train_iteration`` until ``max_iterations`` or the loss drops below ``early_stop_loss``.

    With ``out_dir`` set, ``loss.csv`` is written every iteration and
    ``checkpoint.json`` every ``checkpoint_every`` iterations and at the end.
    """
    require_trainable(target)
    if len(target.palette) != nca_cfg.num_block_channels:
        raise ValueError(
            f"target palette has {len(target.palette)} types, config expects {nca_cfg.num_block_channels}"
        )
    rng = RngStream(cfg.rng_seed)
    if params is None:
        params = init_parameters(nca_cfg, rng)
    opt = AdamState(clip_norm=cfg.grad_clip_norm)
    pool = SamplePool(make_seed(target.dims, nca_cfg), cfg.pool_size)
    onehot = encode_target(target)

    out = Path(out_dir) if out_dir is not None else None
    csv_log = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        csv_log = LossLog(out / "loss.csv")

    meta = {
        "target": target.name,
        "dims": list(target.dims),
        "train_config": dataclasses.asdict(cfg),
        "trained_max_steps": cfg.max_steps,
        "iterations": 0,
        "final_loss": None,
        "stopped_early": False,
        "skipped_iterations": 0,
    }

    def snapshot() -> Checkpoint:
        return Checkpoint(nca_cfg, target.palette, params.copy(), dict(meta))

    try:
        for it in range(1, cfg.max_iterations + 1):
            try:
                b = train_iteration(pool, params, opt, nca_cfg, cfg, onehot, rng)
            except NonFiniteLossError as exc:
                log.warning("iteration %d skipped: %s", it, exc)
                meta["skipped_iterations"] += 1
                continue
            meta["iterations"] = it
            meta["final_loss"] = b.total
            if csv_log is not None:
                csv_log.write(it, b)
            if callback is not None:
                callback(it, b)
            if it % 100 == 0:
                log.info("iter %d loss %.5f (ce_air %.4f ce_non_air %.4f iou %.4f)", it, b.total, b.ce_air, b.ce_non_air, b.iou_cost)
            if b.total < cfg.early_stop_loss:
                meta["stopped_early"] = True
                break
            if out is not None and cfg.checkpoint_every and it % cfg.checkpoint_every == 0:
                save_checkpoint(snapshot(), out / "checkpoint.json")
    finally:
        if csv_log is not None:
            csv_log.close()

    ck = snapshot()
    if out is not None:
        save_checkpoint(ck, out / "checkpoint.json")
    return ck
