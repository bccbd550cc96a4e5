"""Voxel structures, block palettes, file ingestion and cell-state (de)coding.

Structure axes are ``(W, D, H)``: W is world x, D is world z and H is world
y (height). NBT templates store ``(x, y, z)`` and are transposed on load.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .nbt import NbtParseError, StructureTemplate, read_structure_template, write_structure_template

AIR = "AIR"
AXES = {"x": 0, "y": 1, "z": 2}


class StructureError(ValueError):
    """Invalid structure contents or file."""


class UnknownBlockError(StructureError):
    def __init__(self, names):
        names = sorted(set(names))
        super().__init__(f"unknown block name(s): {', '.join(names)}")
        self.names = names


class StructureParseError(StructureError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@lru_cache(maxsize=1)
def block_enum_names() -> tuple[str, ...]:
    from .evocraft import minecraft_pb2

    return tuple(minecraft_pb2.BlockType.keys())


@lru_cache(maxsize=1)
def _alias_table() -> dict[str, str]:
    text = resources.files("nca3d").joinpath("data/block_names.json").read_text()
    return json.loads(text)


def canonical_block_name(name: str, extra: dict[str, str] | None = None) -> str:
    """Map a Minecraft id (``minecraft:oak_planks``) or enum name to the enum name."""
    known = block_enum_names()
    if name in known:
        return name
    key = name.split("[", 1)[0].strip()
    if key.startswith("minecraft:"):
        key = key[len("minecraft:"):]
    key = key.lower()
    if extra and key in extra:
        return extra[key]
    alias = _alias_table().get(key)
    if alias is not None:
        return alias
    if key.upper() in known:
        return key.upper()
    raise UnknownBlockError([name])


@dataclass(frozen=True)
class BlockPalette:
    """Ordered block types; channel ``i`` of the one-hot encoding is ``entries[i]``."""

    entries: tuple[str, ...]
    air_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if not self.entries or self.entries[0] != AIR:
            raise StructureError("palette entry 0 must be AIR")
        if len(set(self.entries)) != len(self.entries):
            raise StructureError(f"palette entries must be unique: {self.entries}")

    @classmethod
    def from_types(cls, names) -> BlockPalette:
        """AIR first, then the remaining types in lexicographic order."""
        return cls((AIR,) + tuple(sorted(set(names) - {AIR})))

    def __len__(self) -> int:
        return len(self.entries)

    def index(self, name: str) -> int:
        try:
            return self.entries.index(name)
        except ValueError:
            raise UnknownBlockError([name]) from None


@dataclass(frozen=True, eq=False)
class VoxelStructure:
    blocks: np.ndarray  # int palette indices, shape (W, D, H)
    palette: BlockPalette
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        arr = np.asarray(self.blocks)
        if arr.ndim != 3:
            raise StructureError(f"blocks must be 3-D, got shape {arr.shape}")
        arr = arr.astype(np.int64, copy=True)
        if arr.size and (arr.min() < 0 or arr.max() >= len(self.palette)):
            raise StructureError("block index outside palette range")
        arr.setflags(write=False)
        object.__setattr__(self, "blocks", arr)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(d) for d in self.blocks.shape)

    @property
    def non_air_count(self) -> int:
        return int(np.count_nonzero(self.blocks != self.palette.air_index))

    @property
    def unique_blocks(self) -> int:
        """Distinct non-air block types actually present."""
        present = np.unique(self.blocks)
        return int(np.count_nonzero(present != self.palette.air_index))

    def non_air_cells(self) -> list[tuple[int, int, int, str]]:
        xs, ys, zs = np.nonzero(self.blocks != self.palette.air_index)
        return [(int(x), int(y), int(z), self.palette.entries[self.blocks[x, y, z]]) for x, y, z in zip(xs, ys, zs)]

    def names(self) -> np.ndarray:
        return np.asarray(self.palette.entries, dtype=object)[self.blocks]

    def canonical(self) -> VoxelStructure:
        """Rebuild the palette from the types present (AIR first, rest sorted)."""
        present = [self.palette.entries[i] for i in np.unique(self.blocks)]
        pal = BlockPalette.from_types(present)
        remap = np.array([pal.entries.index(n) if n in pal.entries else 0 for n in self.palette.entries])
        return VoxelStructure(remap[self.blocks], pal, self.name, dict(self.meta))

    def with_palette(self, palette: BlockPalette) -> VoxelStructure:
        names = self.names()
        missing = set(names.reshape(-1)) - set(palette.entries)
        if missing:
            raise UnknownBlockError(missing)
        lut = {n: i for i, n in enumerate(palette.entries)}
        out = np.vectorize(lut.__getitem__, otypes=[np.int64])(names) if names.size else np.zeros(self.dims, int)
        return VoxelStructure(out, palette, self.name, dict(self.meta))

    def same_as(self, other: VoxelStructure) -> bool:
        return self.palette == other.palette and np.array_equal(self.blocks, other.blocks)

    def summary(self) -> dict:
        return {
            "name": self.name,
            "dims": list(self.dims),
            "unique_blocks": self.unique_blocks,
            "non_air_blocks": self.non_air_count,
            "palette_size": len(self.palette),
        }


def require_trainable(s: VoxelStructure) -> VoxelStructure:
    if len(s.palette) < 2:
        raise StructureError(f"structure {s.name!r} has no non-air block types (palette size must be >= 2)")
    return s


# ---------------------------------------------------------------- JSON format


def structure_to_json(s: VoxelStructure) -> dict:
    blocks = [[x, y, z, int(s.blocks[x, y, z])] for x, y, z, _ in s.non_air_cells()]
    return {"name": s.name, "dims": list(s.dims), "palette": list(s.palette.entries), "blocks": blocks}


def structure_from_json(obj: dict, canonicalize: bool = True) -> VoxelStructure:
    try:
        dims = [int(d) for d in obj["dims"]]
        palette_names = list(obj["palette"])
        entries = obj["blocks"]
    except (KeyError, TypeError, ValueError) as exc:
        raise StructureError(f"malformed voxel JSON: {exc}") from exc
    if len(dims) != 3 or min(dims) < 1:
        raise StructureError(f"dims must be three positive integers, got {dims}")
    unknown = [n for n in palette_names if n not in block_enum_names()]
    if unknown:
        raise UnknownBlockError(unknown)
    palette = BlockPalette(tuple(palette_names))
    blocks = np.zeros(dims, dtype=np.int64)
    for entry in entries:
        if len(entry) != 4 or not all(isinstance(v, int) for v in entry):
            raise StructureError(f"block entry must be four integers, got {entry}")
        x, y, z, idx = entry
        if not (0 <= x < dims[0] and 0 <= y < dims[1] and 0 <= z < dims[2]):
            raise StructureError(f"block position {(x, y, z)} outside dims {dims}")
        if not 0 <= idx < len(palette):
            raise StructureError(f"palette index {idx} out of range")
        blocks[x, y, z] = idx
    s = VoxelStructure(blocks, palette, str(obj.get("name", "")))
    return s.canonical() if canonicalize else s


def dumps_structure(s: VoxelStructure) -> str:
    """Canonical text form: fixed key order, one block per line."""
    obj = structure_to_json(s)
    lines = ",\n    ".join(json.dumps(b) for b in obj["blocks"])
    blocks = f"[\n    {lines}\n  ]" if obj["blocks"] else "[]"
    return (
        "{\n"
        f'  "name": {json.dumps(obj["name"])},\n'
        f'  "dims": {json.dumps(obj["dims"])},\n'
        f'  "palette": {json.dumps(obj["palette"])},\n'
        f'  "blocks": {blocks}\n'
        "}\n"
    )


def save_structure(s: VoxelStructure, path) -> None:
    Path(path).write_text(dumps_structure(s))


# ---------------------------------------------------------------- NBT subset


def structure_from_template(tpl: StructureTemplate, name: str = "", extra_names: dict | None = None) -> VoxelStructure:
    sx, sy, sz = tpl.size
    names = []
    unknown = []
    for raw in tpl.palette:
        try:
            names.append(canonical_block_name(raw, extra_names))
        except UnknownBlockError:
            unknown.append(raw)
            names.append(None)
    if unknown:
        raise UnknownBlockError(unknown)
    palette = BlockPalette.from_types(names)
    lut = [palette.entries.index(n) for n in names]
    blocks = np.zeros((sx, sz, sy), dtype=np.int64)
    for x, y, z, state in tpl.blocks:
        if not 0 <= state < len(lut):
            raise StructureError(f"block state {state} outside template palette")
        if not (0 <= x < sx and 0 <= y < sy and 0 <= z < sz):
            raise StructureError(f"block position {(x, y, z)} outside size {tpl.size}")
        blocks[x, z, y] = lut[state]
    return VoxelStructure(blocks, palette, name).canonical()


def structure_to_template(s: VoxelStructure) -> StructureTemplate:
    W, D, H = s.dims
    cells = [(x, z, y, int(s.blocks[x, y, z])) for x, y, z, _ in s.non_air_cells()]
    return StructureTemplate(size=(W, H, D), palette=[f"minecraft:{n.lower()}" for n in s.palette.entries], blocks=cells)


def save_structure_nbt(s: VoxelStructure, path, compress: bool = True) -> None:
    Path(path).write_bytes(write_structure_template(structure_to_template(s), compress))


def load_structure(path, format: str | None = None, extra_names: dict | None = None) -> VoxelStructure:
    """Load a structure from voxel JSON or an NBT structure template.

    The palette is rebuilt from the block types present: AIR at index 0 and
    the rest sorted, so the same file always yields the same channel order.
    """
    path = Path(path)
    data = path.read_bytes()
    if format is None:
        format = "json" if data.lstrip()[:1] == b"{" else "nbt"
    name = path.stem
    if format == "json":
        try:
            obj = json.loads(data.decode("utf-8"))
        except json.JSONDecodeError as exc:
            raise StructureParseError(f"invalid JSON: {exc.msg}", exc.pos) from exc
        s = structure_from_json(obj)
        if not s.name:
            s = VoxelStructure(s.blocks, s.palette, name)
    elif format in ("nbt", "nbt-subset"):
        try:
            tpl = read_structure_template(data)
        except NbtParseError as exc:
            raise StructureParseError(exc.reason, exc.offset) from exc
        s = structure_from_template(tpl, name, extra_names)
    else:
        raise ValueError(f"unknown structure format {format!r}")
    return require_trainable(s)


# ---------------------------------------------------------------- grid ops


def pad_structure(s: VoxelStructure, target_dims) -> VoxelStructure:
    """Centre ``s`` inside an air-filled grid of ``target_dims``."""
    target = tuple(int(d) for d in target_dims)
    if len(target) != 3 or any(t < d for t, d in zip(target, s.dims)):
        raise StructureError(f"cannot pad {s.dims} to smaller dims {target}")
    out = np.full(target, s.palette.air_index, dtype=np.int64)
    off = [(t - d) // 2 for t, d in zip(target, s.dims)]
    W, D, H = s.dims
    out[off[0]:off[0] + W, off[1]:off[1] + D, off[2]:off[2] + H] = s.blocks
    return VoxelStructure(out, s.palette, s.name, dict(s.meta))


def encode_target(s: VoxelStructure, dtype=np.float32) -> np.ndarray:
    """One-hot ``[M, W, D, H]`` encoding of the block indices."""
    M = len(s.palette)
    return np.moveaxis(np.eye(M, dtype=dtype)[s.blocks], -1, 0).copy()


def decode_state(state, palette: BlockPalette, name: str = "") -> VoxelStructure:
    """Argmax over the first ``len(palette)`` channels; ties go to the lowest index."""
    data = np.asarray(state.data if hasattr(state, "requires_grad") else state)
    if data.ndim != 4:
        raise StructureError(f"expected a single [C,W,D,H] state, got shape {data.shape}")
    M = len(palette)
    # np.argmax returns the first maximal index
    return VoxelStructure(np.argmax(data[:M], axis=0), palette, name)


def halfspace_slices(shape, axis: str, side: str) -> tuple:
    """Index tuple selecting one half of a ``(W, D, H)`` grid, split at floor(extent/2)."""
    if axis not in AXES or side not in ("low", "high"):
        raise ValueError(f"bad cut specification axis={axis!r} side={side!r}")
    ax = AXES[axis]
    mid = shape[ax] // 2
    sl = [slice(None)] * 3
    sl[ax] = slice(0, mid) if side == "low" else slice(mid, None)
    return tuple(sl)


def damage_halfspace(state: np.ndarray, axis: str, side: str, air_channel: int = 0) -> np.ndarray:
    """Return a copy with every cell in one half reset to the dead (air) encoding.

    Works on single ``[C,W,D,H]`` or batched ``[B,C,W,D,H]`` arrays.
    """
    out = np.array(state, copy=True)
    spatial = halfspace_slices(out.shape[-3:], axis, side)
    lead = (slice(None),) * (out.ndim - 3)
    out[lead + spatial] = 0
    ch = (slice(None),) * (out.ndim - 4) + (air_channel,)
    out[ch + spatial] = 1
    return out


def write_atomic(path, data: bytes | str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    if isinstance(data, str):
        data = data.encode("utf-8")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
