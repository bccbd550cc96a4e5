"""The 3D neural cellular automaton: parameters, update rule and rollouts.

Cell state channel layout for ``M`` block types and ``H`` hidden channels::

    [0, M)          block logits (channel 0 is air)
    M               alive alpha
    (M, M + H]      hidden
"""

from __future__ import annotations

import base64
import contextlib
import dataclasses
import hashlib
import json
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor
from .voxels import BlockPalette, write_atomic

CHECKPOINT_FORMAT = "nca3d-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class NcaConfig:
    num_block_channels: int
    num_hidden: int = 10
    layer1_channels: int = 32
    layer2_channels: int = 32
    init_stdev: float = 0.1
    alive_threshold: float = 0.1
    update_dropout: float = 0.5
    activation: str = "relu"
    # states are clamped to [-state_clip, state_clip] after each update; None disables
    state_clip: float | None = 5.0

    def __post_init__(self):
        if self.num_block_channels < 2:
            raise ValueError("num_block_channels must be >= 2 (air plus at least one block type)")
        if self.num_hidden < 1 or self.layer1_channels < 1 or self.layer2_channels < 1:
            raise ValueError("hidden and layer channel counts must be >= 1")
        if not 0 <= self.alive_threshold < 1:
            raise ValueError("alive_threshold must lie in [0, 1)")
        if not 0 <= self.update_dropout < 1:
            raise ValueError("update_dropout must lie in [0, 1)")
        if self.init_stdev <= 0:
            raise ValueError("init_stdev must be positive")
        if self.activation not in ("relu", "none"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.state_clip is not None and self.state_clip <= 1:
            raise ValueError("state_clip must exceed 1 so the seed and dead encodings fit")

    @property
    def channels(self) -> int:
        return self.num_block_channels + 1 + self.num_hidden

    @property
    def alpha_channel(self) -> int:
        return self.num_block_channels

    @property
    def keep_prob(self) -> float:
        return 1.0 - self.update_dropout


class RngStream:
    """Seeded PCG64 stream (numpy ``Generator``); all stochastic choices draw from it in call order."""

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.gen = np.random.Generator(np.random.PCG64(self.seed))

    def normal(self, shape, std: float, dtype=np.float32) -> np.ndarray:
        return (self.gen.standard_normal(shape) * std).astype(dtype)

    def bernoulli(self, shape, p: float) -> np.ndarray:
        if p >= 1.0:
            return np.ones(shape, dtype=bool)
        return self.gen.random(shape) < p

    def integers(self, low: int, high_inclusive: int) -> int:
        return int(self.gen.integers(low, high_inclusive + 1))

    def choice(self, n: int, k: int) -> np.ndarray:
        return self.gen.choice(n, size=k, replace=False)


PARAM_NAMES = (
    "perception.weight",
    "perception.bias",
    "layer1.weight",
    "layer1.bias",
    "layer2.weight",
    "layer2.bias",
    "update.weight",
    "update.bias",
)


@dataclass
class NcaParameters:
    tensors: dict[str, Tensor]

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def items(self):
        return [(n, self.tensors[n]) for n in PARAM_NAMES]

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.grad = None

    def copy(self, dtype=None, requires_grad: bool = True) -> NcaParameters:
        return NcaParameters(
            {n: Tensor(np.array(t.data, dtype=dtype or t.dtype), requires_grad=requires_grad) for n, t in self.items()}
        )

    def num_values(self) -> int:
        return sum(t.data.size for t in self.tensors.values())

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {n: t.shape for n, t in self.items()}


def param_shapes(cfg: NcaConfig) -> dict[str, tuple[int, ...]]:
    C = cfg.channels
    L1, L2 = cfg.layer1_channels, cfg.layer2_channels
    return {
        "perception.weight": (3 * C, C, 3, 3, 3),
        "perception.bias": (3 * C,),
        "layer1.weight": (L1, 3 * C, 1, 1, 1),
        "layer1.bias": (L1,),
        "layer2.weight": (L2, L1, 1, 1, 1),
        "layer2.bias": (L2,),
        "update.weight": (C, L2, 1, 1, 1),
        "update.bias": (C,),
    }


def init_parameters(cfg: NcaConfig, rng: RngStream, dtype=np.float32) -> NcaParameters:
    """Normal(0, init_stdev^2) weights, zero biases."""
    tensors = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith("bias"):
            data = np.zeros(shape, dtype=dtype)
        else:
            data = rng.normal(shape, cfg.init_stdev, dtype)
        tensors[name] = Tensor(data, requires_grad=True)
    return NcaParameters(tensors)


# ---------------------------------------------------------------- update rule


def _check_channels(state: Tensor, params: NcaParameters) -> None:
    expected = params["perception.weight"].shape[1]
    got = state.shape[state.ndim - 4]
    if got != expected:
        raise T.DimensionError(f"state has {got} channels, parameters expect {expected}")


def perceive(state: Tensor, params: NcaParameters) -> Tensor:
    _check_channels(state, params)
    return T.conv3d(state, params["perception.weight"], params["perception.bias"], padding=1)


def compute_update(perception: Tensor, params: NcaParameters, activation: str = "relu") -> Tensor:
    act = T.relu if activation == "relu" else (lambda t: t)
    h = act(T.conv3d(perception, params["layer1.weight"], params["layer1.bias"]))
    h = act(T.conv3d(h, params["layer2.weight"], params["layer2.bias"]))
    return T.conv3d(h, params["update.weight"], params["update.bias"])


def stochastic_mask(dims, rng: RngStream, keep_prob: float = 0.5, batch: int | None = None) -> np.ndarray:
    """Per-cell 0/1 mask of shape ``[1,W,D,H]`` (or ``[B,1,W,D,H]``)."""
    if not 0 < keep_prob <= 1:
        raise ValueError("keep_prob must lie in (0, 1]")
    shape = (1,) + tuple(dims) if batch is None else (batch, 1) + tuple(dims)
    return rng.bernoulli(shape, keep_prob).astype(np.float32)


def alive_mask(state, alpha_channel: int, threshold: float = 0.1) -> np.ndarray:
    """1 where the 3x3x3 max of alpha exceeds ``threshold``. Constant w.r.t. gradients."""
    data = state.data if isinstance(state, Tensor) else np.asarray(state)
    ax = data.ndim - 4
    alpha = np.take(data, [alpha_channel], axis=ax)
    return (T.maxpool3d_window(alpha).data > threshold).astype(data.dtype)


def dead_encoding(shape, dtype=np.float32) -> np.ndarray:
    """State array with air=1 and every other channel 0."""
    out = np.zeros(shape, dtype=dtype)
    ax = len(shape) - 4
    out[(slice(None),) * ax + (0,)] = 1
    return out


def nca_step(
    state: Tensor,
    params: NcaParameters,
    cfg: NcaConfig,
    rng: RngStream | None = None,
    update_mask: np.ndarray | None = None,
) -> Tensor:
    """One automaton update.

    The delta is gated by the stochastic mask and the alive mask of the
    incoming state and the result is clamped to ``cfg.state_clip``;
    afterwards any cell dead in the new state is reset to the air encoding.
    Both masks are constants for backward.
    """
    ax = state.ndim - 4
    spatial = state.shape[-3:]
    alive_pre = alive_mask(state, cfg.alpha_channel, cfg.alive_threshold)
    delta = compute_update(perceive(state, params), params, cfg.activation)
    if update_mask is None:
        if rng is None:
            raise ValueError("either rng or update_mask is required")
        update_mask = stochastic_mask(spatial, rng, cfg.keep_prob, batch=state.shape[0] if ax else None)
    gate = (update_mask * alive_pre).astype(state.dtype)
    nxt = state + delta * gate
    if cfg.state_clip is not None:
        nxt = T.clip(nxt, -cfg.state_clip, cfg.state_clip)
    alive_post = alive_mask(nxt, cfg.alpha_channel, cfg.alive_threshold)
    dead = dead_encoding((1,) * ax + (cfg.channels,) + (1, 1, 1), state.dtype) * (1 - alive_post)
    return nxt * alive_post + dead


def make_seed(dims, cfg: NcaConfig, dtype=np.float32) -> np.ndarray:
    """Dead grid with one living centre cell (alpha 1, all other channels 0)."""
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise ValueError(f"seed dims must be three positive extents, got {dims}")
    state = dead_encoding((cfg.channels,) + dims, dtype)
    cx, cy, cz = (d // 2 for d in dims)
    state[:, cx, cy, cz] = 0
    state[cfg.alpha_channel, cx, cy, cz] = 1.0
    return state


def rollout(
    state,
    params: NcaParameters,
    cfg: NcaConfig,
    steps: int,
    rng: RngStream | None = None,
    snapshot_every: int = 0,
    record_grad: bool = False,
    update_masks: list[np.ndarray] | None = None,
) -> tuple[Tensor, list[tuple[int, np.ndarray]]]:
    """Apply ``steps`` updates; returns the final state and ``(step, state)`` snapshots.

    With ``record_grad`` the whole chain stays on the graph for backward;
    otherwise no graph is built.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = state if isinstance(state, Tensor) else Tensor(np.asarray(state))
    snaps: list[tuple[int, np.ndarray]] = []
    with T.no_grad() if not record_grad else contextlib.nullcontext():
        for i in range(steps):
            mask = None if update_masks is None else update_masks[i]
            x = nca_step(x, params, cfg, rng, mask)
            if snapshot_every and (i + 1) % snapshot_every == 0:
                snaps.append((i + 1, x.data.copy()))
    return x, snaps


# ---------------------------------------------------------------- checkpoints


@dataclass
class Checkpoint:
    config: NcaConfig
    palette: BlockPalette
    params: NcaParameters
    meta: dict = dataclasses.field(default_factory=dict)


def _encode_array(a: np.ndarray) -> dict:
    le = np.ascontiguousarray(a, dtype=a.dtype.newbyteorder("<"))
    return {"shape": list(a.shape), "dtype": a.dtype.name, "data": base64.b64encode(le.tobytes()).decode("ascii")}


def _decode_array(obj: dict) -> np.ndarray:
    dt = np.dtype(obj["dtype"]).newbyteorder("<")
    arr = np.frombuffer(base64.b64decode(obj["data"]), dtype=dt).reshape(obj["shape"])
    return arr.astype(arr.dtype.newbyteorder("="))


class CheckpointError(ValueError):
    pass


def checkpoint_to_bytes(ck: Checkpoint) -> bytes:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": dataclasses.asdict(ck.config),
        "palette": list(ck.palette.entries),
        "params": {n: _encode_array(t.data) for n, t in ck.params.items()},
        "meta": ck.meta,
    }
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    payload["checksum"] = hashlib.sha256(body.encode("utf-8")).hexdigest()
    return (json.dumps(payload, sort_keys=True, indent=1) + "\n").encode("utf-8")


def checkpoint_from_bytes(raw: bytes) -> Checkpoint:
    try:
        payload = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint: {exc}") from exc
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError("not an nca3d checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {payload.get('version')}")
    checksum = payload.pop("checksum", None)
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    if hashlib.sha256(body.encode("utf-8")).hexdigest() != checksum:
        raise CheckpointError("checkpoint checksum mismatch (file corrupted?)")
    cfg = NcaConfig(**payload["config"])
    tensors = {n: Tensor(_decode_array(v), requires_grad=True) for n, v in payload["params"].items()}
    expected = param_shapes(cfg)
    for n, shape in expected.items():
        if n not in tensors or tensors[n].shape != shape:
            raise CheckpointError(f"parameter {n} missing or mis-shaped")
    return Checkpoint(cfg, BlockPalette(tuple(payload["palette"])), NcaParameters(tensors), payload.get("meta", {}))


def save_checkpoint(ck: Checkpoint, path) -> None:
    write_atomic(path, checkpoint_to_bytes(ck))


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return checkpoint_from_bytes(fh.read())
