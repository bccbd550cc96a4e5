"""Client and local mock for an EvoCraft-style block placement service."""

from .client import (
    BlockMessage,
    CubeBounds,
    EvoCraftClient,
    NetworkError,
    fill_cube,
    read_cube,
    replay_growth,
    spawn_structure,
    structure_messages,
)
from .mock_server import MockServer, MockWorld

__all__ = [
    "BlockMessage",
    "CubeBounds",
    "EvoCraftClient",
    "MockServer",
    "MockWorld",
    "NetworkError",
    "fill_cube",
    "read_cube",
    "replay_growth",
    "spawn_structure",
    "structure_messages",
]
