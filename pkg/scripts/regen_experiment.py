#!/usr/bin/env python3
"""Compare regeneration after half-space cuts for models trained with and without damage.

Trains one toy model each way (same seed) and prints strict and lenient
regeneration ratios per cut, averaged over a few evaluation seeds.

    python scripts/regen_experiment.py [--seed 0] [--eval-seeds 3]
"""
import argparse
import json

import numpy as np

from nca3d.evaluation import evaluate_regeneration
from nca3d.nca import NcaConfig
from nca3d.presets import toy_tower
from nca3d.training import TrainConfig, train

CUTS = [(axis, side) for axis in "xyz" for side in ("low", "high")]


def scores(ck, target, eval_seeds):
    table = {}
    for axis, side in CUTS:
        reps = [evaluate_regeneration(ck, target, cut_axis=axis, side=side, rng=r) for r in range(eval_seeds)]
        table[f"{axis}-{side}"] = (float(np.mean([r.regeneration_ratio for r in reps])),
                                   float(np.mean([r.regeneration_ratio_lenient for r in reps])))
    return table


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--eval-seeds", type=int, default=3)
    ap.add_argument("--json", help="also write the results here")
    args = ap.parse_args()

    target = toy_tower()
    nca_cfg = NcaConfig(num_block_channels=len(target.palette), num_hidden=8, init_stdev=0.1)
    results = {}
    for regen in (False, True):
        tc = TrainConfig(min_steps=20, max_steps=30, learning_rate=0.002, regen_enabled=regen, rng_seed=args.seed)
        ck = train(target, nca_cfg, tc)
        label = "regen" if regen else "plain"
        results[label] = scores(ck, target, args.eval_seeds)
        print(f"{label}: trained {ck.meta['iterations']} iterations")

    print(f"{'cut':<8} {'plain strict':>12} {'regen strict':>12} {'plain lenient':>13} {'regen lenient':>13}")
    for cut in results["plain"]:
        (ps, pl), (rs, rl) = results["plain"][cut], results["regen"][cut]
        print(f"{cut:<8} {ps:12.3f} {rs:12.3f} {pl:13.3f} {rl:13.3f}")
    means = {k: np.mean(list(v.values()), axis=0) for k, v in results.items()}
    print(f"{'mean':<8} {means['plain'][0]:12.3f} {means['regen'][0]:12.3f} {means['plain'][1]:13.3f} "
          f"{means['regen'][1]:13.3f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)


if __name__ == "__main__":
    main()
