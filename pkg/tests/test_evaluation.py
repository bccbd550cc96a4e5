import json

import numpy as np
import pytest

from nca3d.evaluation import (
    EvalReport,
    EvaluationError,
    compare,
    evaluate_growth,
    evaluate_regeneration,
    evaluate_stability,
    regeneration_ratios,
)
from nca3d.nca import Checkpoint, NcaConfig, RngStream, init_parameters, make_seed, rollout
from nca3d.presets import toy_tower
from nca3d.voxels import BlockPalette, VoxelStructure, decode_state, encode_target, load_structure, save_structure


class OracleModel:
    """Emits the target after any number of steps."""

    def __init__(self, target):
        self.target = target
        self.palette = target.palette

    def seed(self, dims):
        return np.zeros((len(self.palette),) + tuple(dims))

    def run(self, state, steps, rng, snapshot_every=0):
        out = encode_target(self.target) * 5.0
        snaps = [(k, out) for k in range(snapshot_every, steps + 1, snapshot_every)] if snapshot_every else []
        return out, snaps


def zero_checkpoint(target):
    cfg = NcaConfig(num_block_channels=len(target.palette), num_hidden=4, layer1_channels=8, layer2_channels=8)
    p = init_parameters(cfg, RngStream(0))
    for _, t in p.items():
        t.data[:] = 0
    return Checkpoint(cfg, target.palette, p, {"trained_max_steps": 10})


def test_oracle_model_scores_perfectly():
    t = toy_tower()
    rep = evaluate_growth(OracleModel(t), t, 10)
    assert rep.block_accuracy == 1.0 and rep.non_air_accuracy == 1.0 and rep.hard_iou_cost == 0.0
    assert evaluate_stability(OracleModel(t), t, 10, 2.0, every=5) == [(5, 0.0), (10, 0.0), (15, 0.0), (20, 0.0)]


def test_zero_model_decodes_all_air():
    t = toy_tower()
    rep = evaluate_growth(zero_checkpoint(t), t, 5)
    assert rep.non_air_accuracy == 0.0
    assert rep.block_accuracy == pytest.approx(1 - t.non_air_count / 343)
    assert rep.hard_iou_cost == pytest.approx(1.0)


def test_regeneration_oracle_and_zero_model():
    t = toy_tower()
    rep = evaluate_regeneration(OracleModel(t), t, 5, 1, "x", "low")
    assert rep.regeneration_ratio == 1.0 and rep.regeneration_ratio_lenient == 1.0
    rep = evaluate_regeneration(zero_checkpoint(t), t, cut_axis="z", side="low")
    assert rep.regeneration_ratio == 0.0 and rep.regeneration_ratio_lenient == 0.0


def test_regeneration_ratio_definitions():
    pal = BlockPalette(("AIR", "GLASS", "STONE"))
    tgt = np.zeros((4, 2, 2), int)
    tgt[:2] = 1  # low x half holds 8 glass cells
    pred = tgt.copy()
    pred[0] = 2  # wrong type but non-air
    pred[1, 0, 0] = 0  # missing
    strict, lenient = regeneration_ratios(VoxelStructure(pred, pal), VoxelStructure(tgt, pal), "x", "low")
    assert strict == pytest.approx(3 / 8) and lenient == pytest.approx(7 / 8)
    with pytest.raises(EvaluationError):
        regeneration_ratios(VoxelStructure(pred, pal), VoxelStructure(tgt, pal), "x", "high")


def test_empty_cut_half_fails_fast():
    pal = BlockPalette(("AIR", "STONE"))
    b = np.zeros((4, 4, 4), int)
    b[3, 3, 3] = 1
    t = VoxelStructure(b, pal)
    with pytest.raises(EvaluationError):
        evaluate_regeneration(OracleModel(t), t, 3, 3, "x", "low")


def test_palette_mismatch_is_an_error():
    t = toy_tower()
    other = VoxelStructure(np.ones((7, 7, 7), int), BlockPalette(("AIR", "STONE")))
    with pytest.raises(EvaluationError):
        evaluate_growth(zero_checkpoint(t), other, 3)


def test_stability_argument_checks():
    t = toy_tower()
    with pytest.raises(EvaluationError):
        evaluate_stability(OracleModel(t), t, 10, 0.5)
    with pytest.raises(EvaluationError):
        evaluate_stability(OracleModel(t), t, None, 2.0)


def test_report_serialisation():
    rep = EvalReport(0.5, 0.25, 0.75, 10, stability_curve=[(5, 0.5)])
    d = json.loads(rep.dumps())
    assert d["stability_curve"] == [[5, 0.5]] and d["regeneration_ratio"] is None
    assert "block_accuracy" in rep.table()


def test_identical_structures_are_optimal():
    t = toy_tower()
    rep = compare(t, t)
    assert (rep.block_accuracy, rep.non_air_accuracy, rep.hard_iou_cost) == (1.0, 1.0, 0.0)


def test_trained_accuracy_matches_dumped_voxels(toy_run, tmp_path):
    ck, t = toy_run.checkpoint, toy_run.target
    rep = evaluate_growth(ck, t, 40, rng=3)
    final, _ = rollout(make_seed(t.dims, ck.config), ck.params, ck.config, 40, RngStream(3))
    save_structure(decode_state(final, ck.palette, "grown"), tmp_path / "grown.json")
    dumped = json.loads((tmp_path / "grown.json").read_text())
    grid = np.zeros(t.dims, int)
    for x, y, z, i in dumped["blocks"]:
        grid[x, y, z] = t.palette.index(dumped["palette"][i])
    assert rep.block_accuracy == pytest.approx(float(np.mean(grid == t.blocks)))
    nz = t.blocks != 0
    assert rep.non_air_accuracy == pytest.approx(float(np.mean(grid[nz] == t.blocks[nz])))


def test_trained_stability_curve_is_consistent(toy_run):
    ck, t = toy_run.checkpoint, toy_run.target
    curve = evaluate_stability(ck, t, 30, 2.0, every=15, rng=7)
    assert [s for s, _ in curve] == [15, 30, 45, 60]
    for step, cost in curve:
        assert evaluate_growth(ck, t, step, rng=7).hard_iou_cost == pytest.approx(cost)
