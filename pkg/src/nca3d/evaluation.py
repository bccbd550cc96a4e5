"""Growth accuracy, regeneration after a half-space cut, and long-horizon stability."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Protocol

import numpy as np

from .loss import hard_iou_counts, IOU_EPS
from .nca import Checkpoint, RngStream, make_seed, rollout
from .voxels import BlockPalette, VoxelStructure, damage_halfspace, decode_state, halfspace_slices


class EvaluationError(ValueError):
    pass


class Grower(Protocol):
    """Anything that can grow a structure: a palette, a seed and a step runner."""

    palette: BlockPalette

    def seed(self, dims) -> np.ndarray: ...

    def run(self, state: np.ndarray, steps: int, rng: RngStream, snapshot_every: int = 0): ...


class NcaModel:
    """Inference wrapper around a trained checkpoint."""

    def __init__(self, checkpoint: Checkpoint):
        self.checkpoint = checkpoint
        self.config = checkpoint.config
        self.palette = checkpoint.palette

    def seed(self, dims) -> np.ndarray:
        return make_seed(dims, self.config)

    def run(self, state, steps, rng, snapshot_every=0):
        final, snaps = rollout(state, self.checkpoint.params, self.config, steps, rng, snapshot_every)
        return final.data, snaps


def as_model(model) -> Grower:
    if isinstance(model, Checkpoint):
        return NcaModel(model)
    if all(hasattr(model, a) for a in ("palette", "seed", "run")):
        return model
    raise TypeError(f"cannot evaluate a {type(model).__name__}")


def _rng(rng) -> RngStream:
    return rng if isinstance(rng, RngStream) else RngStream(0 if rng is None else rng)


@dataclass
class EvalReport:
    block_accuracy: float
    non_air_accuracy: float
    hard_iou_cost: float
    steps: int
    regeneration_ratio: float | None = None
    regeneration_ratio_lenient: float | None = None
    stability_curve: list[tuple[int, float]] = field(default_factory=list)

    def to_json(self) -> dict:
        d = asdict(self)
        d["stability_curve"] = [list(p) for p in self.stability_curve]
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    def table(self) -> str:
        rows = [
            ("steps", f"{self.steps}"),
            ("block_accuracy", f"{self.block_accuracy:.4f}"),
            ("non_air_accuracy", f"{self.non_air_accuracy:.4f}"),
            ("hard_iou_cost", f"{self.hard_iou_cost:.4f}"),
        ]
        if self.regeneration_ratio is not None:
            rows.append(("regeneration_ratio", f"{self.regeneration_ratio:.4f}"))
            rows.append(("regeneration_ratio_lenient", f"{self.regeneration_ratio_lenient:.4f}"))
        w = max(len(k) for k, _ in rows)
        lines = [f"{k:<{w}}  {v}" for k, v in rows]
        if self.stability_curve:
            lines.append("stability (step, hard_iou_cost):")
            lines += [f"  {s:>6}  {c:.4f}" for s, c in self.stability_curve]
        return "\n".join(lines)


def _check_palette(model: Grower, target: VoxelStructure) -> None:
    if model.palette.entries != target.palette.entries:
        raise EvaluationError(
            f"model palette {model.palette.entries} does not match target palette {target.palette.entries}"
        )


def compare(pred: VoxelStructure, target: VoxelStructure, steps: int = 0) -> EvalReport:
    """Accuracy and hard IOU of a decoded structure against its target."""
    if pred.dims != target.dims:
        raise EvaluationError(f"dims differ: {pred.dims} vs {target.dims}")
    match = pred.blocks == target.blocks
    non_air = target.blocks != target.palette.air_index
    n = int(non_air.sum())
    inter, uni = hard_iou_counts(pred.blocks, target.blocks, target.palette.air_index)
    return EvalReport(
        block_accuracy=float(match.mean()),
        non_air_accuracy=float(match[non_air].sum() / n) if n else 1.0,
        hard_iou_cost=(uni - inter) / (uni + IOU_EPS),
        steps=steps,
    )


def evaluate_growth(model, target: VoxelStructure, steps: int, rng=0) -> EvalReport:
    """Grow from the seed for ``steps`` and score the decoded result."""
    model = as_model(model)
    _check_palette(model, target)
    final, _ = model.run(model.seed(target.dims), steps, _rng(rng))
    return compare(decode_state(final, model.palette), target, steps)


def regeneration_ratios(pred: VoxelStructure, target: VoxelStructure, axis: str, side: str) -> tuple[float, float]:
    """(strict, lenient) share of the half's target non-air cells that are restored.

    Strict needs the exact block type, lenient only any non-air block.
    """
    sl = halfspace_slices(target.dims, axis, side)
    t = target.blocks[sl]
    p = pred.blocks[sl]
    want = t != target.palette.air_index
    n = int(want.sum())
    if n == 0:
        raise EvaluationError(f"target has no non-air cells in the {side} half along {axis}")
    strict = int(np.count_nonzero((p == t) & want))
    lenient = int(np.count_nonzero((p != target.palette.air_index) & want))
    return strict / n, lenient / n


def evaluate_regeneration(
    model,
    target: VoxelStructure,
    grow_steps: int | None = None,
    regrow_steps: int | None = None,
    cut_axis: str = "x",
    side: str = "low",
    rng=0,
) -> EvalReport:
    """Grow, cut away one half, keep running, then measure how much came back.

    Step counts default to the checkpoint's trained ``max_steps``.
    """
    model = as_model(model)
    _check_palette(model, target)
    default = None
    if isinstance(model, NcaModel):
        default = model.checkpoint.meta.get("trained_max_steps")
    grow_steps = grow_steps or default
    regrow_steps = regrow_steps or default
    if not grow_steps or not regrow_steps:
        raise EvaluationError("grow_steps and regrow_steps are required for this model")
    # fail before spending any compute on an undefined ratio
    regeneration_ratios(target, target, cut_axis, side)
    r = _rng(rng)
    grown, _ = model.run(model.seed(target.dims), grow_steps, r)
    cut = damage_halfspace(np.asarray(grown), cut_axis, side)
    final, _ = model.run(cut, regrow_steps, r)
    pred = decode_state(final, model.palette)
    rep = compare(pred, target, grow_steps + regrow_steps)
    rep.regeneration_ratio, rep.regeneration_ratio_lenient = regeneration_ratios(pred, target, cut_axis, side)
    return rep


def evaluate_stability(
    model,
    target: VoxelStructure,
    trained_max_steps: int | None = None,
    horizon_multiplier: float = 3.0,
    every: int = 8,
    rng=0,
) -> list[tuple[int, float]]:
    """Hard IOU cost every ``every`` steps out to ``horizon_multiplier`` times the trained horizon."""
    if horizon_multiplier < 1:
        raise EvaluationError("horizon_multiplier must be >= 1")
    if every < 1:
        raise EvaluationError("every must be >= 1")
    model = as_model(model)
    _check_palette(model, target)
    if trained_max_steps is None and isinstance(model, NcaModel):
        trained_max_steps = model.checkpoint.meta.get("trained_max_steps")
    if not trained_max_steps:
        raise EvaluationError("trained_max_steps is required for this model")
    horizon = int(round(trained_max_steps * horizon_multiplier))
    _, snaps = model.run(model.seed(target.dims), horizon, _rng(rng), snapshot_every=every)
    return [(s, compare(decode_state(x, model.palette), target).hard_iou_cost) for s, x in snaps]
