"""In-process stand-in for the block server, backed by a dict of world positions."""

from __future__ import annotations

import threading
from concurrent import futures

import grpc

from . import minecraft_pb2 as pb
from .client import SERVICE

AIR = pb.BlockType.Value("AIR")


class MockWorld:
    """Sparse voxel world: ``(x, y, z) -> (type, orientation)``, air is absent."""

    def __init__(self):
        self.blocks: dict[tuple[int, int, int], tuple[int, int]] = {}
        self.calls: list[tuple[str, int]] = []  # (rpc name, blocks carried)
        self._lock = threading.Lock()

    def spawn(self, req: pb.Blocks, ctx=None) -> pb.Empty:
        with self._lock:
            for b in req.blocks:
                key = (b.position.x, b.position.y, b.position.z)
                if b.type == AIR:
                    self.blocks.pop(key, None)
                else:
                    self.blocks[key] = (b.type, b.orientation)
            self.calls.append(("spawnBlocks", len(req.blocks)))
        return pb.Empty()

    def read(self, req: pb.Cube, ctx=None) -> pb.Blocks:
        lo, hi = req.min, req.max
        with self._lock:
            out = [
                pb.Block(position=pb.Point(x=x, y=y, z=z), type=t, orientation=o)
                for (x, y, z), (t, o) in sorted(self.blocks.items())
                if lo.x <= x <= hi.x and lo.y <= y <= hi.y and lo.z <= z <= hi.z
            ]
            self.calls.append(("readCube", len(out)))
        return pb.Blocks(blocks=out)

    def fill(self, req: pb.FillCubeRequest, ctx=None) -> pb.Empty:
        lo, hi = req.cube.min, req.cube.max
        with self._lock:
            for x in range(lo.x, hi.x + 1):
                for y in range(lo.y, hi.y + 1):
                    for z in range(lo.z, hi.z + 1):
                        if req.type == AIR:
                            self.blocks.pop((x, y, z), None)
                        else:
                            self.blocks[(x, y, z)] = (req.type, 0)
            self.calls.append(("fillCube", 0))
        return pb.Empty()

    def spawned_messages(self) -> int:
        return sum(n for name, n in self.calls if name == "spawnBlocks")


class MockServer:
    """gRPC server on localhost serving a :class:`MockWorld`; use as a context manager."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0, world: MockWorld | None = None):
        self.world = world or MockWorld()
        self._server = grpc.server(futures.ThreadPoolExecutor(max_workers=2))
        handlers = {
            "spawnBlocks": grpc.unary_unary_rpc_method_handler(
                self.world.spawn, request_deserializer=pb.Blocks.FromString, response_serializer=pb.Empty.SerializeToString
            ),
            "readCube": grpc.unary_unary_rpc_method_handler(
                self.world.read, request_deserializer=pb.Cube.FromString, response_serializer=pb.Blocks.SerializeToString
            ),
            "fillCube": grpc.unary_unary_rpc_method_handler(
                self.world.fill,
                request_deserializer=pb.FillCubeRequest.FromString,
                response_serializer=pb.Empty.SerializeToString,
            ),
        }
        self._server.add_generic_rpc_handlers((grpc.method_handlers_generic_handler(SERVICE, handlers),))
        self.port = self._server.add_insecure_port(f"{host}:{port}")
        self.host = host

    @property
    def endpoint(self) -> str:
        return f"{self.host}:{self.port}"

    def start(self) -> MockServer:
        self._server.start()
        return self

    def stop(self, grace: float | None = None) -> None:
        self._server.stop(grace)

    def wait(self) -> None:
        self._server.wait_for_termination()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
