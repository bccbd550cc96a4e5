"""Blocking gRPC client for an EvoCraft-style block service.

Structure cells ``(w, d, h)`` map to world ``(x, y, z) = origin + (w, h, d)``:
height goes along the world's vertical y axis.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Iterable, Sequence

import grpc
import numpy as np

from ..voxels import AIR, BlockPalette, UnknownBlockError, VoxelStructure
from . import minecraft_pb2 as pb

log = logging.getLogger(__name__)

SERVICE = "dk.itu.real.ooe.MinecraftService"
NORTH = pb.Orientation.Value("NORTH")


class NetworkError(ConnectionError):
    """Transport-level failure talking to the block server; safe to retry."""


@dataclass(frozen=True)
class CubeBounds:
    min_corner: tuple[int, int, int]
    max_corner: tuple[int, int, int]

    def __post_init__(self):
        lo = tuple(int(v) for v in self.min_corner)
        hi = tuple(int(v) for v in self.max_corner)
        if len(lo) != 3 or len(hi) != 3:
            raise ValueError("corners need three coordinates")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"min corner {lo} exceeds max corner {hi}")
        object.__setattr__(self, "min_corner", lo)
        object.__setattr__(self, "max_corner", hi)

    @classmethod
    def around(cls, s: VoxelStructure, origin) -> CubeBounds:
        """World box covered by ``s`` placed at ``origin``."""
        w, d, h = s.dims
        ox, oy, oz = origin
        return cls((ox, oy, oz), (ox + w - 1, oy + h - 1, oz + d - 1))

    @property
    def size(self) -> tuple[int, int, int]:
        return tuple(b - a + 1 for a, b in zip(self.min_corner, self.max_corner))

    def to_proto(self) -> pb.Cube:
        return pb.Cube(min=_point(self.min_corner), max=_point(self.max_corner))


@dataclass(frozen=True)
class BlockMessage:
    position: tuple[int, int, int]
    block_type: str
    orientation: str = "NORTH"

    def __post_init__(self):
        block_type_value(self.block_type)
        pb.Orientation.Value(self.orientation)

    def to_proto(self) -> pb.Block:
        return pb.Block(
            position=_point(self.position),
            type=block_type_value(self.block_type),
            orientation=pb.Orientation.Value(self.orientation),
        )

    @classmethod
    def from_proto(cls, b: pb.Block) -> BlockMessage:
        p = b.position
        return cls((p.x, p.y, p.z), pb.BlockType.Name(b.type), pb.Orientation.Name(b.orientation))


def _point(xyz) -> pb.Point:
    x, y, z = (int(v) for v in xyz)
    return pb.Point(x=x, y=y, z=z)


def block_type_value(name: str) -> int:
    try:
        return pb.BlockType.Value(name)
    except ValueError:
        raise UnknownBlockError([name]) from None


def check_palette(palette: BlockPalette) -> None:
    """Raise :class:`UnknownBlockError` listing every name the server cannot represent."""
    bad = [n for n in palette.entries if n not in pb.BlockType.keys()]
    if bad:
        raise UnknownBlockError(bad)


def world_position(origin, cell) -> tuple[int, int, int]:
    w, d, h = (int(v) for v in cell)
    return (origin[0] + w, origin[1] + h, origin[2] + d)


class EvoCraftClient:
    """One channel, three unary calls. Counts every block message it sends."""

    def __init__(self, endpoint: str = "localhost:5001", timeout: float = 10.0, retries: int = 2):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries
        self.messages_sent = 0
        self._channel = grpc.insecure_channel(endpoint)
        self._spawn = self._channel.unary_unary(
            f"/{SERVICE}/spawnBlocks",
            request_serializer=pb.Blocks.SerializeToString,
            response_deserializer=pb.Empty.FromString,
        )
        self._read = self._channel.unary_unary(
            f"/{SERVICE}/readCube",
            request_serializer=pb.Cube.SerializeToString,
            response_deserializer=pb.Blocks.FromString,
        )
        self._fill = self._channel.unary_unary(
            f"/{SERVICE}/fillCube",
            request_serializer=pb.FillCubeRequest.SerializeToString,
            response_deserializer=pb.Empty.FromString,
        )

    def _call(self, stub, request):
        for attempt in range(self.retries + 1):
            try:
                return stub(request, timeout=self.timeout)
            except grpc.RpcError as exc:
                code = exc.code() if hasattr(exc, "code") else None
                retryable = code in (grpc.StatusCode.UNAVAILABLE, grpc.StatusCode.DEADLINE_EXCEEDED)
                if not retryable or attempt == self.retries:
                    raise NetworkError(f"{self.endpoint}: {code}: {exc.details() if hasattr(exc, 'details') else exc}") from exc
                log.warning("retrying after %s (attempt %d)", code, attempt + 1)
                time.sleep(0.2 * (attempt + 1))

    def spawn_blocks(self, blocks: Sequence[BlockMessage]) -> int:
        if not blocks:
            return 0
        self._call(self._spawn, pb.Blocks(blocks=[b.to_proto() for b in blocks]))
        self.messages_sent += len(blocks)
        return len(blocks)

    def read_blocks(self, bounds: CubeBounds) -> list[BlockMessage]:
        resp = self._call(self._read, bounds.to_proto())
        return [BlockMessage.from_proto(b) for b in resp.blocks]

    def fill(self, bounds: CubeBounds, block_type: str = AIR) -> None:
        self._call(self._fill, pb.FillCubeRequest(cube=bounds.to_proto(), type=block_type_value(block_type)))

    def close(self) -> None:
        self._channel.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def structure_messages(s: VoxelStructure, origin=(0, 0, 0), orientation: str = "NORTH") -> list[BlockMessage]:
    """One message per non-air cell, in row-major cell order."""
    check_palette(s.palette)
    return [BlockMessage(world_position(origin, (w, d, h)), n, orientation) for w, d, h, n in s.non_air_cells()]


def spawn_structure(s: VoxelStructure, origin, client: EvoCraftClient, clear: bool = False) -> int:
    """Place every non-air cell of ``s``; with ``clear`` the box is emptied first. Returns the count."""
    msgs = structure_messages(s, origin)  # validates names before anything goes out
    if clear:
        client.fill(CubeBounds.around(s, origin), AIR)
    return client.spawn_blocks(msgs)


def fill_cube(bounds: CubeBounds, block_type: str, client: EvoCraftClient) -> None:
    block_type_value(block_type)
    client.fill(bounds, block_type)


def read_cube(bounds: CubeBounds, client: EvoCraftClient, palette: BlockPalette | None = None, name: str = "") -> VoxelStructure:
    """Read a world box back into a structure indexed like ``spawn_structure`` writes it.

    Without ``palette`` one is built from the observed types. Unreported cells are air.
    """
    blocks = [b for b in client.read_blocks(bounds) if b.block_type != AIR]
    if palette is None:
        palette = BlockPalette.from_types(b.block_type for b in blocks)
    sx, sy, sz = bounds.size
    grid = np.zeros((sx, sz, sy), dtype=np.int64)
    ox, oy, oz = bounds.min_corner
    for b in blocks:
        x, y, z = b.position
        if not (0 <= x - ox < sx and 0 <= y - oy < sy and 0 <= z - oz < sz):
            continue  # servers may pad the answer; keep only the requested box
        grid[x - ox, z - oz, y - oy] = palette.index(b.block_type)
    return VoxelStructure(grid, palette, name)


def _diff_messages(prev: VoxelStructure | None, cur: VoxelStructure, origin) -> list[BlockMessage]:
    names = cur.palette.entries
    changed = np.ones(cur.dims, bool) if prev is None else prev.blocks != cur.blocks
    if prev is None:
        changed &= cur.blocks != cur.palette.air_index
    return [BlockMessage(world_position(origin, c), names[int(cur.blocks[tuple(c)])]) for c in np.argwhere(changed)]


def replay_growth(
    snapshots: Iterable[VoxelStructure],
    origin,
    client: EvoCraftClient,
    step_delay: float = 0.0,
    baseline: VoxelStructure | None = None,
) -> list[int]:
    """Animate a rollout by sending only cells whose block changed since the previous snapshot.

    The first snapshot is diffed against ``baseline`` (all-air when omitted).
    Returns the number of messages sent per step.
    """
    snaps = list(snapshots)
    if not snaps:
        return []
    first = snaps[0]
    for s in snaps[1:]:
        if s.dims != first.dims or s.palette.entries != first.palette.entries:
            raise ValueError("snapshots must share dims and palette")
    check_palette(first.palette)
    counts = []
    prev = baseline
    for i, cur in enumerate(snaps):
        if i and step_delay > 0:
            time.sleep(step_delay)
        counts.append(client.spawn_blocks(_diff_messages(prev, cur, origin)))
        prev = cur
    return counts
