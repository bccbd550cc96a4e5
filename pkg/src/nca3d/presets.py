"""Per-entity hyperparameters and dataset facts, plus the desk-scale toy target."""

from __future__ import annotations

import numpy as np

from .voxels import BlockPalette, VoxelStructure

# name: (unique blocks, non-air blocks, padded, padded dims W x D x H)
ENTITIES = {
    "village_house": (10, 84, True, (10, 10, 10)),
    "blacksmith": (17, 280, True, (10, 10, 10)),
    "mini_castle": (35, 1253, True, (20, 20, 20)),
    "jungle_temple": (15, 1283, True, (20, 20, 20)),
    "tree": (3, 1622, True, (30, 30, 30)),
    "apartment_block": (50, 3136, False, (18, 18, 23)),
    "cathedral": (23, 3584, False, (33, 27, 31)),
    "flying_machine": (6, 8, True, (10, 10, 10)),
    "caterpillar": (7, 137, False, (8, 27, 6)),
}

# name: (hidden, (min_steps, max_steps), (layer1, layer2), init stdev, lr)
HYPERPARAMS = {
    "village_house": (10, (48, 64), (32, 32), 0.1, 0.0002),
    "blacksmith": (10, (48, 64), (32, 32), 0.1, 0.002),
    "mini_castle": (10, (48, 64), (32, 32), 0.1, 0.002),
    "jungle_temple": (12, (48, 64), (64, 64), 0.1, 0.002),
    "tree": (12, (64, 64), (64, 64), 0.1, 0.002),
    "apartment_block": (12, (64, 65), (64, 64), 0.1, 0.002),
    "cathedral": (12, (50, 51), (64, 64), 0.2, 0.002),
    "flying_machine": (10, (48, 64), (32, 32), 0.001, 0.002),
    "caterpillar": (12, (48, 64), (64, 64), 0.02, 0.002),
}


def entity_overrides(name: str) -> dict:
    """Config keys for ``name`` in the flat ``section.key`` form used by the CLI."""
    key = name.lower().replace("-", "_").replace(" ", "_")
    if key not in HYPERPARAMS:
        raise KeyError(f"unknown entity {name!r}; known: {', '.join(sorted(HYPERPARAMS))}")
    hidden, (lo, hi), (l1, l2), stdev, lr = HYPERPARAMS[key]
    return {
        "nca.num_hidden": hidden,
        "nca.layer1_channels": l1,
        "nca.layer2_channels": l2,
        "nca.init_stdev": stdev,
        "train.min_steps": lo,
        "train.max_steps": hi,
        "train.learning_rate": lr,
        "padded_dims": list(ENTITIES[key][3]),
    }


def toy_tower() -> VoxelStructure:
    """7x7x7 target with three block types and 22 non-air cells.

    Cobblestone 3x3 floor, plank corner posts two high and a glass cross on top.
    """
    pal = BlockPalette.from_types(["COBBLESTONE", "GLASS", "PLANKS"])
    cob, glass, planks = (pal.index(n) for n in ("COBBLESTONE", "GLASS", "PLANKS"))
    b = np.zeros((7, 7, 7), dtype=np.int64)
    b[2:5, 2:5, 1] = cob
    for x, y in ((2, 2), (2, 4), (4, 2), (4, 4)):
        b[x, y, 2:4] = planks
    for x, y in ((3, 3), (2, 3), (4, 3), (3, 2), (3, 4)):
        b[x, y, 4] = glass
    return VoxelStructure(b, pal, "toy_tower")


def flying_machine() -> VoxelStructure:
    """Eight-block slime/piston flying machine (6 block types) in a 10^3 box."""
    pal = BlockPalette.from_types(["SLIME", "STICKY_PISTON", "PISTON", "OBSERVER", "REDSTONE_BLOCK", "STONE"])
    cells = [
        (4, 4, 4, "SLIME"),
        (5, 4, 4, "SLIME"),
        (4, 5, 4, "STICKY_PISTON"),
        (5, 5, 4, "PISTON"),
        (4, 6, 4, "OBSERVER"),
        (5, 6, 4, "REDSTONE_BLOCK"),
        (4, 4, 5, "SLIME"),
        (4, 3, 4, "STONE"),
    ]
    b = np.zeros((10, 10, 10), dtype=np.int64)
    for x, y, z, n in cells:
        b[x, y, z] = pal.index(n)
    return VoxelStructure(b, pal, "flying_machine")
