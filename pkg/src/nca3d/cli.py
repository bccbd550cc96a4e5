"""``nca3d`` command line: convert, train, grow, regen-eval, eval, deploy.

Configuration is resolved as defaults, then ``--entity`` hyperparameters,
then the ``--config`` JSON file, then ``--set key=value`` pairs, then
``--seed``. Every run writes ``manifest.json`` with the resolved values.

Exit codes: 0 ok, 2 configuration, 3 data, 4 runtime, 5 network.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import presets
from .evaluation import EvaluationError, evaluate_growth, evaluate_regeneration, evaluate_stability
from .nca import CheckpointError, NcaConfig, RngStream, load_checkpoint, make_seed, rollout
from .training import TrainConfig, train
from .voxels import (
    StructureError,
    VoxelStructure,
    decode_state,
    dumps_structure,
    load_structure,
    pad_structure,
    save_structure,
    write_atomic,
)

log = logging.getLogger("nca3d")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME, EXIT_NETWORK = 0, 2, 3, 4, 5

BUILTIN_TARGETS = {"toy_tower": presets.toy_tower, "flying_machine": presets.flying_machine}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- config


def default_config() -> dict:
    nca = {f.name: f.default for f in dataclasses.fields(NcaConfig) if f.name != "num_block_channels"}
    return {"nca": nca, "train": dataclasses.asdict(TrainConfig()), "padded_dims": None}


def _coerce(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_override(cfg: dict, key: str, value) -> None:
    """Set a dotted ``section.field`` key (or a top-level key) with type checking against defaults."""
    parts = key.split(".")
    if len(parts) == 1 and parts[0] in cfg and not isinstance(cfg[parts[0]], dict):
        cfg[parts[0]] = value
        return
    if len(parts) != 2 or parts[0] not in ("nca", "train"):
        raise ConfigError(f"unknown config key {key!r}")
    section, name = parts
    if name not in cfg[section]:
        raise ConfigError(f"unknown config key {key!r}")
    cur = cfg[section][name]
    if isinstance(cur, bool) and not isinstance(value, bool):
        raise ConfigError(f"{key} expects true/false, got {value!r}")
    if isinstance(cur, (int, float)) and not isinstance(cur, bool):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} expects a number, got {value!r}")
        if isinstance(cur, int) and isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{key} expects an integer, got {value!r}")
        value = type(cur)(value)
    cfg[section][name] = value


def _flatten(obj: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in obj.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict) and k in ("nca", "train"):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def resolve_config(args) -> dict:
    cfg = default_config()
    if getattr(args, "entity", None):
        try:
            for k, v in presets.entity_overrides(args.entity).items():
                apply_override(cfg, k, v)
        except KeyError as exc:
            raise ConfigError(exc.args[0]) from None
    if getattr(args, "config", None):
        try:
            obj = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(obj, dict):
            raise ConfigError("config file must hold a JSON object")
        for k, v in _flatten(obj).items():
            apply_override(cfg, k, v)
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        apply_override(cfg, k.strip(), _coerce(v.strip()))
    if getattr(args, "seed", None) is not None:
        cfg["train"]["rng_seed"] = int(args.seed)
    return cfg


def build_configs(cfg: dict, num_block_channels: int) -> tuple[NcaConfig, TrainConfig]:
    try:
        return NcaConfig(num_block_channels=num_block_channels, **cfg["nca"]), TrainConfig(**cfg["train"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------- run bookkeeping


class Run:
    """Collects outputs and writes the manifest whether the command succeeds or not."""

    def __init__(self, command: str, out: Path, config: dict | None, inputs: dict):
        self.command = command
        self.out = out
        self.config = config
        self.inputs = inputs
        self.outputs: list[str] = []
        self.results: dict = {}

    def add(self, path: Path) -> None:
        self.outputs.append(str(Path(path).relative_to(self.out)))

    def manifest(self, status: str, error: str | None = None) -> None:
        doc = {
            "command": self.command,
            "status": status,
            "error": error,
            "partial": status != "ok" and bool(self.outputs),
            "config": self.config,
            "seed": None if self.config is None else self.config["train"]["rng_seed"],
            "inputs": self.inputs,
            "outputs": self.outputs,
            "results": self.results,
        }
        self.out.mkdir(parents=True, exist_ok=True)
        write_atomic(self.out / "manifest.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_target(source: str | None, entity: str | None = None) -> VoxelStructure:
    name = source or (entity and entity.lower().replace("-", "_"))
    if not name:
        raise ConfigError("a --target file (or a built-in name: toy_tower, flying_machine) is required")
    if name in BUILTIN_TARGETS:
        return BUILTIN_TARGETS[name]()
    p = Path(name)
    if not p.exists():
        if source is None:
            raise StructureError(f"entity {entity!r} has no built-in structure; pass its file with --target")
        raise StructureError(f"target {source!r} not found")
    return load_structure(p)


def _target_for_checkpoint(args, ck) -> VoxelStructure:
    if args.target:
        t = load_target(args.target)
    else:
        near = Path(args.checkpoint).with_name("target.json")
        if not near.exists():
            raise ConfigError("--target is required (no target.json next to the checkpoint)")
        t = load_structure(near)
    if t.palette.entries != ck.palette.entries:
        t = t.with_palette(ck.palette)
    return t


# ---------------------------------------------------------------- commands


def cmd_convert(args, run: Run) -> None:
    s = load_structure(args.input)
    text = dumps_structure(s)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_atomic(out, text)
    info = s.summary()
    run.results = info
    w = max(len(k) for k in info)
    for k, v in info.items():
        print(f"{k:<{w}}  {v}")


def cmd_train(args, run: Run) -> None:
    target = load_target(args.target, args.entity)
    padded = run.config.get("padded_dims")
    if padded:
        target = pad_structure(target, padded)
    nca_cfg, train_cfg = build_configs(run.config, len(target.palette))
    if args.max_iterations is not None:
        train_cfg.max_iterations = args.max_iterations
        run.config["train"]["max_iterations"] = args.max_iterations
    run.out.mkdir(parents=True, exist_ok=True)
    save_structure(target, run.out / "target.json")
    run.add(run.out / "target.json")
    ck = train(target, nca_cfg, train_cfg, run.out)
    run.add(run.out / "loss.csv")
    run.add(run.out / "checkpoint.json")
    run.results = {k: ck.meta[k] for k in ("iterations", "final_loss", "stopped_early", "skipped_iterations")}
    print(f"trained {ck.meta['iterations']} iterations, final loss {ck.meta['final_loss']:.6f}")


def _grow(args, ck, dims, run: Run | None):
    steps = args.steps or ck.meta.get("trained_max_steps") or 64
    rng = RngStream(run.config["train"]["rng_seed"] if run else 0)
    final, snaps = rollout(make_seed(dims, ck.config), ck.params, ck.config, steps, rng, args.snapshot_every or 0)
    return steps, final.data, snaps


def cmd_grow(args, run: Run) -> None:
    ck = load_checkpoint(args.checkpoint)
    dims = tuple(args.dims) if args.dims else tuple(ck.meta.get("dims") or ())
    if len(dims) != 3:
        raise ConfigError("--dims W D H is required (checkpoint does not record them)")
    steps, final, snaps = _grow(args, ck, dims, run)
    run.out.mkdir(parents=True, exist_ok=True)
    for step, state in snaps:
        p = run.out / f"snapshot_{step:05d}.json"
        save_structure(decode_state(state, ck.palette, f"step_{step}"), p)
        run.add(p)
    p = run.out / "final.json"
    s = decode_state(final, ck.palette, f"step_{steps}")
    save_structure(s, p)
    run.add(p)
    run.results = {"steps": steps, "snapshots": len(snaps), **s.summary()}
    print(f"grew {steps} steps, {len(snaps)} snapshots, {s.non_air_count} non-air blocks")


def cmd_eval(args, run: Run) -> None:
    ck = load_checkpoint(args.checkpoint)
    target = _target_for_checkpoint(args, ck)
    steps = args.steps or ck.meta.get("trained_max_steps") or 64
    seed = run.config["train"]["rng_seed"]
    rep = evaluate_growth(ck, target, steps, seed)
    if args.horizon:
        rep.stability_curve = evaluate_stability(ck, target, steps, args.horizon, args.every, seed)
    run.out.mkdir(parents=True, exist_ok=True)
    write_atomic(run.out / "report.json", rep.dumps() + "\n")
    run.add(run.out / "report.json")
    run.results = rep.to_json()
    print(rep.table())


def cmd_regen_eval(args, run: Run) -> None:
    ck = load_checkpoint(args.checkpoint)
    target = _target_for_checkpoint(args, ck)
    rep = evaluate_regeneration(
        ck, target, args.grow_steps, args.regrow_steps, args.axis, args.side, run.config["train"]["rng_seed"]
    )
    run.out.mkdir(parents=True, exist_ok=True)
    write_atomic(run.out / "regen_report.json", rep.dumps() + "\n")
    run.add(run.out / "regen_report.json")
    run.results = rep.to_json()
    print(rep.table())


def cmd_deploy(args, run: Run) -> None:
    from .evocraft import EvoCraftClient, MockServer, replay_growth, spawn_structure

    origin = tuple(args.origin)
    if args.structure:
        structures = [load_structure(args.structure)]
    elif args.checkpoint:
        ck = load_checkpoint(args.checkpoint)
        dims = tuple(ck.meta.get("dims") or ())
        if len(dims) != 3:
            raise ConfigError("checkpoint does not record target dims")
        steps, final, snaps = _grow(args, ck, dims, run)
        structures = [decode_state(x, ck.palette) for _, x in snaps] if args.replay else []
        structures.append(decode_state(final, ck.palette))
    else:
        raise ConfigError("deploy needs --structure or --checkpoint")

    server = MockServer().start() if args.mock_server else None
    endpoint = server.endpoint if server else args.endpoint
    try:
        with EvoCraftClient(endpoint, timeout=args.timeout) as client:
            if args.replay and len(structures) > 1:
                counts = replay_growth(structures, origin, client, args.step_delay)
                sent = sum(counts)
                run.results = {"messages_per_step": counts}
            else:
                sent = spawn_structure(structures[-1], origin, client, clear=args.clear)
        run.results.update({"endpoint": endpoint, "origin": list(origin), "messages": sent, "mock": bool(server)})
        if server:
            run.results["world_blocks"] = len(server.world.blocks)
    finally:
        if server:
            server.stop()
    print(f"sent {sent} block messages to {endpoint}")


COMMANDS = {
    "convert": cmd_convert,
    "train": cmd_train,
    "grow": cmd_grow,
    "eval": cmd_eval,
    "regen-eval": cmd_regen_eval,
    "deploy": cmd_deploy,
}


# ---------------------------------------------------------------- parser


def _common(p: argparse.ArgumentParser, out_default: str) -> None:
    p.add_argument("--config", help="JSON file with nca/train sections")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key, e.g. train.learning_rate=0.001")
    p.add_argument("--seed", type=int, help="rng seed (train.rng_seed)")
    p.add_argument("--out", default=out_default, help="output directory")
    p.add_argument("--entity", help="use the hyperparameters of a named entity")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nca3d", description="Grow voxel structures with a 3D neural cellular automaton.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="NBT or voxel JSON to canonical voxel JSON")
    p.add_argument("input")
    p.add_argument("output")
    _common(p, "runs/convert")

    p = sub.add_parser("train", help="train an automaton on a target structure")
    p.add_argument("--target", help="structure file or built-in name (toy_tower, flying_machine)")
    p.add_argument("--max-iterations", type=int)
    _common(p, "runs/train")

    p = sub.add_parser("grow", help="roll out a checkpoint from its seed")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--steps", type=int)
    p.add_argument("--snapshot-every", type=int, default=0)
    p.add_argument("--dims", type=int, nargs=3, metavar=("W", "D", "H"))
    _common(p, "runs/grow")

    p = sub.add_parser("eval", help="growth accuracy and optional stability curve")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--target")
    p.add_argument("--steps", type=int)
    p.add_argument("--horizon", type=float, default=0.0, help="stability horizon as a multiple of --steps")
    p.add_argument("--every", type=int, default=8)
    _common(p, "runs/eval")

    p = sub.add_parser("regen-eval", help="regeneration ratio after a half-space cut")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--target")
    p.add_argument("--axis", choices=("x", "y", "z"), default="x")
    p.add_argument("--side", choices=("low", "high"), default="low")
    p.add_argument("--grow-steps", type=int)
    p.add_argument("--regrow-steps", type=int)
    _common(p, "runs/regen")

    p = sub.add_parser("deploy", help="spawn a structure or a grown checkpoint on a block server")
    p.add_argument("--structure", help="voxel JSON or NBT file to place")
    p.add_argument("--checkpoint")
    p.add_argument("--steps", type=int)
    p.add_argument("--snapshot-every", type=int, default=1)
    p.add_argument("--replay", action="store_true", help="animate growth by sending per-step diffs")
    p.add_argument("--step-delay", type=float, default=0.0)
    p.add_argument("--origin", type=int, nargs=3, default=(0, 64, 0), metavar=("X", "Y", "Z"))
    p.add_argument("--endpoint", default="localhost:5001", help="host:port of the block server")
    p.add_argument("--mock-server", action="store_true", help="start an in-process mock server and deploy to it")
    p.add_argument("--clear", action="store_true", help="fill the target box with air first")
    p.add_argument("--timeout", type=float, default=10.0)
    _common(p, "runs/deploy")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    from .evocraft.client import NetworkError

    out = Path(args.out)
    inputs = {k: v for k, v in vars(args).items() if k not in ("command", "verbose", "set", "config", "out")}
    inputs = {k: list(v) if isinstance(v, tuple) else v for k, v in inputs.items()}
    run = Run(args.command, out, None, inputs)
    try:
        run.config = resolve_config(args)
        COMMANDS[args.command](args, run)
    except ConfigError as exc:
        return _fail(run, EXIT_CONFIG, f"config error: {exc}")
    except (StructureError, CheckpointError, EvaluationError, FileNotFoundError) as exc:
        return _fail(run, EXIT_DATA, f"data error: {exc}")
    except NetworkError as exc:
        return _fail(run, EXIT_NETWORK, f"network error: {exc}")
    except Exception as exc:  # noqa: BLE001 - last-resort classification for the exit code
        log.debug("runtime failure", exc_info=True)
        return _fail(run, EXIT_RUNTIME, f"runtime error: {type(exc).__name__}: {exc}")
    run.manifest("ok")
    return EXIT_OK


def _fail(run: Run, code: int, message: str) -> int:
    print(message, file=sys.stderr)
    try:
        run.manifest("failed", message)
    except OSError:
        pass
    return code


if __name__ == "__main__":
    sys.exit(main())
