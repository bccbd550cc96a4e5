#!/usr/bin/env python3
"""Train the automaton on the built-in 7x7x7 toy tower and report growth accuracy.

    python scripts/train_toy.py --out runs/toy [--seed 0] [--regen]
"""
import argparse
from pathlib import Path

from nca3d.evaluation import evaluate_growth
from nca3d.nca import NcaConfig
from nca3d.presets import toy_tower
from nca3d.training import TrainConfig, train
from nca3d.voxels import save_structure


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/toy")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--regen", action="store_true", help="damage pool samples during training")
    ap.add_argument("--max-iterations", type=int, default=3000)
    args = ap.parse_args()

    target = toy_tower()
    nca_cfg = NcaConfig(num_block_channels=len(target.palette), num_hidden=8, layer1_channels=32,
                        layer2_channels=32, init_stdev=0.1)
    train_cfg = TrainConfig(min_steps=20, max_steps=30, learning_rate=0.002, max_iterations=args.max_iterations,
                            regen_enabled=args.regen, rng_seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_structure(target, out / "target.json")

    def progress(it, br):
        if it % 50 == 0:
            print(f"iter {it:5d}  loss {br.total:.4f}", flush=True)

    ck = train(target, nca_cfg, train_cfg, out, callback=progress)
    print(f"stopped after {ck.meta['iterations']} iterations, loss {ck.meta['final_loss']:.4f}")
    print(evaluate_growth(ck, target, 40, rng=args.seed).table())


if __name__ == "__main__":
    main()
