import json
import shutil

import numpy as np
import pytest

from nca3d.cli import EXIT_CONFIG, EXIT_DATA, EXIT_NETWORK, EXIT_OK, default_config, main
from nca3d.nbt import StructureTemplate, write_structure_template
from nca3d.presets import toy_tower
from nca3d.voxels import block_enum_names, load_structure, save_structure

TOY_SETS = ["--set", "nca.num_hidden=8", "--set", "train.min_steps=20", "--set", "train.max_steps=30"]


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def synthetic_nbt(path, n_types=17, n_blocks=280):
    names = [n for n in block_enum_names() if n != "AIR"][:n_types]
    rng = np.random.default_rng(0)
    cells = rng.choice(10 * 10 * 10, size=n_blocks, replace=False)
    blocks = []
    for i, c in enumerate(cells):
        x, y, z = np.unravel_index(c, (10, 10, 10))
        blocks.append((int(x), int(y), int(z), i % n_types))
    tpl = StructureTemplate((10, 10, 10), [f"minecraft:{n.lower()}" for n in names], blocks)
    path.write_bytes(write_structure_template(tpl))


def test_convert_summary_and_idempotence(tmp_path, capsys):
    synthetic_nbt(tmp_path / "house.nbt")
    assert main(["convert", str(tmp_path / "house.nbt"), str(tmp_path / "a.json"), "--out", str(tmp_path / "m")]) == 0
    out = capsys.readouterr().out
    assert "unique_blocks   17" in out and "non_air_blocks  280" in out
    assert main(["convert", str(tmp_path / "a.json"), str(tmp_path / "b.json"), "--out", str(tmp_path / "m2")]) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert manifest(tmp_path / "m")["results"]["non_air_blocks"] == 280


def test_convert_parse_error_is_data_error(tmp_path, capsys):
    (tmp_path / "bad.nbt").write_bytes(b"\x0a\x00\x00\x03")
    assert main(["convert", str(tmp_path / "bad.nbt"), str(tmp_path / "x.json"), "--out", str(tmp_path / "m")]) == EXIT_DATA
    assert "offset" in capsys.readouterr().err
    m = manifest(tmp_path / "m")
    assert m["status"] == "failed" and not m["partial"]


def test_config_errors(tmp_path):
    assert main(["train", "--target", "toy_tower", "--set", "nca.nope=1", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["train", "--target", "toy_tower", "--set", "train.pool_size=abc", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["train", "--target", "toy_tower", "--set", "train.batch_size=64", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["train", "--entity", "spaceship", "--out", str(tmp_path)]) == EXIT_CONFIG
    (tmp_path / "c.json").write_text("[1, 2]")
    assert main(["train", "--target", "toy_tower", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path)]) == EXIT_CONFIG
    with pytest.raises(SystemExit) as info:
        main(["train", "--bogus"])
    assert info.value.code == 2


def test_missing_entity_file_is_data_error(tmp_path):
    assert main(["train", "--entity", "village_house", "--out", str(tmp_path)]) == EXIT_DATA


def test_config_layering(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"train": {"learning_rate": 0.01, "max_iterations": 2}, "nca.num_hidden": 5}))
    out = tmp_path / "run"
    args = ["train", "--target", "toy_tower", "--entity", "cathedral", "--config", str(tmp_path / "c.json"),
            "--set", "train.learning_rate=0.005", "--seed", "9", "--out", str(out)]
    # cathedral pads to 33x27x31; keep it cheap by only checking resolution on a tiny budget
    args += ["--set", "padded_dims=[7,7,7]", "--set", "train.min_steps=1", "--set", "train.max_steps=1"]
    assert main(args) == EXIT_OK
    cfg = manifest(out)["config"]
    assert cfg["train"]["learning_rate"] == 0.005  # --set beats the file
    assert cfg["train"]["max_iterations"] == 2  # file beats defaults
    assert cfg["nca"]["num_hidden"] == 5  # file beats entity
    assert cfg["nca"]["init_stdev"] == 0.2  # entity beats defaults
    assert cfg["train"]["rng_seed"] == 9
    assert default_config()["train"]["learning_rate"] == 0.002


@pytest.mark.slow
def test_train_toy_early_stops(tmp_path):
    out = tmp_path / "toy"
    assert main(["train", "--target", "toy_tower", *TOY_SETS, "--out", str(out)]) == EXIT_OK
    m = manifest(out)
    assert m["results"]["stopped_early"] and m["results"]["iterations"] < 3000
    assert sorted(m["outputs"]) == ["checkpoint.json", "loss.csv", "target.json"]


def test_grow_snapshots(toy_run, tmp_path):
    out = tmp_path / "grow"
    rc = main(["grow", "--checkpoint", str(toy_run.checkpoint_path), "--steps", "100", "--snapshot-every", "10",
               "--out", str(out)])
    assert rc == EXIT_OK
    assert len(sorted(out.glob("snapshot_*.json"))) == 10
    assert load_structure(out / "final.json").same_as(load_structure(out / "snapshot_00100.json"))


def test_eval_and_regen_reports_are_reproducible(toy_run, tmp_path):
    shutil.copy(toy_run.checkpoint_path, tmp_path / "checkpoint.json")
    ck = str(tmp_path / "checkpoint.json")
    save_structure(toy_run.target, tmp_path / "target.json")
    for name in ("a", "b"):
        assert main(["eval", "--checkpoint", ck, "--target", str(tmp_path / "target.json"), "--steps", "40",
                     "--horizon", "1.5", "--every", "20", "--out", str(tmp_path / f"e{name}")]) == EXIT_OK
        assert main(["regen-eval", "--checkpoint", ck, "--axis", "y", "--side", "high",
                     "--out", str(tmp_path / f"r{name}")]) == EXIT_OK  # target.json sits beside the checkpoint
    assert (tmp_path / "ea/report.json").read_bytes() == (tmp_path / "eb/report.json").read_bytes()
    assert (tmp_path / "ra/regen_report.json").read_bytes() == (tmp_path / "rb/regen_report.json").read_bytes()
    assert (tmp_path / "ea/manifest.json").read_text().replace("/ea", "/eb") == (tmp_path / "eb/manifest.json").read_text()
    rep = json.loads((tmp_path / "ea/report.json").read_text())
    assert [s for s, _ in rep["stability_curve"]] == [20, 40, 60]


def test_eval_without_target_is_config_error(tmp_path):
    from nca3d.nca import Checkpoint, NcaConfig, RngStream, init_parameters, save_checkpoint

    t = toy_tower()
    cfg = NcaConfig(num_block_channels=len(t.palette), num_hidden=2, layer1_channels=4, layer2_channels=4)
    save_checkpoint(Checkpoint(cfg, t.palette, init_parameters(cfg, RngStream(0)), {}), tmp_path / "ck.json")
    assert main(["eval", "--checkpoint", str(tmp_path / "ck.json"), "--out", str(tmp_path / "e")]) == EXIT_CONFIG
    (tmp_path / "junk.json").write_text("{}")
    assert main(["eval", "--checkpoint", str(tmp_path / "junk.json"), "--target", "toy_tower",
                 "--out", str(tmp_path / "e")]) == EXIT_DATA


def test_deploy_structure_to_mock(tmp_path):
    save_structure(toy_tower(), tmp_path / "t.json")
    out = tmp_path / "d"
    assert main(["deploy", "--structure", str(tmp_path / "t.json"), "--mock-server", "--clear", "--out", str(out)]) == 0
    r = manifest(out)["results"]
    assert r["messages"] == 22 and r["world_blocks"] == 22


def test_deploy_replay_from_checkpoint(toy_run, tmp_path):
    out = tmp_path / "d"
    assert main(["deploy", "--checkpoint", str(toy_run.checkpoint_path), "--mock-server", "--replay", "--steps", "30",
                 "--snapshot-every", "5", "--out", str(out)]) == 0
    r = manifest(out)["results"]
    assert len(r["messages_per_step"]) == 7  # six snapshots plus the final state
    assert r["messages"] == sum(r["messages_per_step"])


def test_deploy_unreachable_is_network_error(tmp_path):
    save_structure(toy_tower(), tmp_path / "t.json")
    rc = main(["deploy", "--structure", str(tmp_path / "t.json"), "--endpoint", "127.0.0.1:1", "--timeout", "0.5",
               "--out", str(tmp_path / "d")])
    assert rc == EXIT_NETWORK
