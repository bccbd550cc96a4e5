#!/usr/bin/env python3
"""Serve the in-memory block world over gRPC until interrupted.

    python scripts/run_mock_server.py --port 5001
    nca3d deploy --structure house.json --endpoint localhost:5001
"""
import argparse
import logging

from nca3d.evocraft import MockServer


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=5001)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO)

    with MockServer(args.host, args.port) as srv:
        print(f"mock block server on {srv.endpoint}, ctrl-c to stop", flush=True)
        try:
            srv.wait()
        except KeyboardInterrupt:
            pass
        print(f"{len(srv.world.blocks)} blocks in the world at shutdown")


if __name__ == "__main__":
    main()
