"""Small define-by-run autodiff engine over dense numpy arrays.

Only the handful of operations the automaton and its loss need are provided.
Tensors are 1- to 5-dimensional; volumetric ops take either ``[C, W, D, H]``
or batched ``[B, C, W, D, H]`` arrays and the channel axis is always
``ndim - 4``.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

DEFAULT_DTYPE = np.float32

_grad_enabled = True


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible."""


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data, dtype=dtype)
        if dtype is None and arr.dtype.kind != "f":
            arr = arr.astype(DEFAULT_DTYPE)
        if arr.ndim > 5:
            raise DimensionError(f"tensors have at most 5 extents, got shape {arr.shape}")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None
        self.op = "leaf"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"expected a scalar tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def backward(self) -> None:
        backward(self)


def _as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype if dtype is not None else DEFAULT_DTYPE))


def _make(data: np.ndarray, parents: Iterable[Tensor], backward_fn, op: str) -> Tensor:
    out = Tensor(data)
    parents = tuple(parents)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    out.op = op
    return out


def _check_broadcast(a: tuple[int, ...], b: tuple[int, ...], op: str) -> None:
    # equal shapes, a scalar, or size-1 axes on one side (the per-cell mask case)
    if a == b or a == () or b == ():
        return
    if len(a) != len(b) or any(x != y and x != 1 and y != 1 for x, y in zip(a, b)):
        raise DimensionError(f"{op}: shape mismatch {a} vs {b}")


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    if shape == ():
        return grad.sum()
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    return grad.sum(axis=axes, keepdims=True)


# ---------------------------------------------------------------- pointwise


def add(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b, a.dtype)
    _check_broadcast(a.shape, b.shape, "add")

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(a.data + b.data, (a, b), bw, "add")


def sub(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b, a.dtype)
    _check_broadcast(a.shape, b.shape, "sub")

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make(a.data - b.data, (a, b), bw, "sub")


def mul(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b, a.dtype)
    _check_broadcast(a.shape, b.shape, "mul")

    def bw(g):
        ga = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return _make(a.data * b.data, (a, b), bw, "mul")


def div(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b, a.dtype)
    _check_broadcast(a.shape, b.shape, "div")
    out = a.data / b.data

    def bw(g):
        ga = _unbroadcast(g / b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(-g * out / b.data, b.shape) if b.requires_grad else None
        return ga, gb

    return _make(out, (a, b), bw, "div")


def scale(a, s: float) -> Tensor:
    a = _as_tensor(a)
    s = a.dtype.type(s)
    return _make(a.data * s, (a,), lambda g: (g * s,), "scale")


def relu(a) -> Tensor:
    a = _as_tensor(a)
    pos = a.data > 0
    return _make(np.where(pos, a.data, 0).astype(a.dtype), (a,), lambda g: (g * pos,), "relu")


def exp(a) -> Tensor:
    a = _as_tensor(a)
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,), "exp")


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp to ``[lo, hi]``; gradient passes only where the input was inside."""
    a = _as_tensor(a)
    inside = (a.data >= lo) & (a.data <= hi)
    return _make(np.clip(a.data, lo, hi).astype(a.dtype), (a,), lambda g: (g * inside,), "clip")


def pointwise(op: str, a, b=None) -> Tensor:
    """Dispatch by name: add, sub, mul, scale, relu."""
    if op == "relu":
        return relu(a)
    if op == "scale":
        return scale(a, b)
    fns = {"add": add, "sub": sub, "mul": mul}
    if op not in fns:
        raise ValueError(f"unknown pointwise op {op!r}")
    return fns[op](a, b)


# ---------------------------------------------------------------- shape ops


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    src = a.shape
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(src),), "reshape")


def channels(a: Tensor, start: int, stop: int) -> Tensor:
    """Slice ``[start, stop)`` along the channel axis."""
    ax = a.ndim - 4
    if ax < 0:
        raise DimensionError(f"channels() needs a volumetric tensor, got {a.shape}")
    idx = (slice(None),) * ax + (slice(start, stop),)

    def bw(g):
        full = np.zeros_like(a.data)
        full[idx] = g
        return (full,)

    return _make(a.data[idx], (a,), bw, "channels")


# ---------------------------------------------------------------- reductions


def _norm_axes(axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    if any(ax >= ndim or ax < -ndim for ax in axis):
        raise DimensionError(f"axis {axis} out of range for {ndim}-d tensor")
    return tuple(sorted(ax % ndim for ax in axis))


def reduce(op: str, a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    """Sum or mean over all axes (``axis=None``) or the given axes."""
    if op not in ("sum", "mean"):
        raise ValueError(f"unknown reduction {op!r}")
    axes = _norm_axes(axis, a.ndim)
    n = int(np.prod([a.shape[ax] for ax in axes])) if axes else 1
    if a.data.size == 0 or n == 0:
        raise DimensionError("empty reduction")
    out = a.data.sum(axis=axes, keepdims=keepdims)
    factor = 1.0 if op == "sum" else 1.0 / n
    if op == "mean":
        out = out * a.dtype.type(factor)
    src_shape = a.shape

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        g = np.broadcast_to(g, src_shape)
        if op == "mean":
            g = g * a.dtype.type(factor)
        return (np.array(g, dtype=a.dtype),)

    return _make(np.asarray(out, dtype=a.dtype), (a,), bw, op)


# ---------------------------------------------------------------- softmax


def log_softmax_channels(a: Tensor) -> Tensor:
    """Numerically stable log-softmax over the channel axis."""
    ax = a.ndim - 4
    if ax < 0:
        raise DimensionError(f"expected [C,W,D,H] or [B,C,W,D,H], got {a.shape}")
    if a.shape[ax] < 2:
        raise DimensionError("log_softmax needs at least 2 channels")
    x = a.data
    shifted = x - x.max(axis=ax, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=ax, keepdims=True))
    out = shifted - lse

    def bw(g):
        soft = np.exp(out)
        return (g - soft * g.sum(axis=ax, keepdims=True),)

    return _make(out, (a,), bw, "log_softmax")


# ---------------------------------------------------------------- conv / pool


def _batched(x: np.ndarray) -> np.ndarray:
    if x.ndim == 4:
        return x[None]
    if x.ndim == 5:
        return x
    raise DimensionError(f"expected [C,W,D,H] or [B,C,W,D,H], got {x.shape}")


def _check_conv(x: np.ndarray, w: np.ndarray, b: np.ndarray | None, stride: int, padding: int) -> int:
    if w.ndim != 5 or w.shape[2] != w.shape[3] or w.shape[3] != w.shape[4]:
        raise DimensionError(f"weight must be [C_out, C_in, k, k, k], got {w.shape}")
    k = w.shape[2]
    if x.shape[1] != w.shape[1]:
        raise DimensionError(f"input has {x.shape[1]} channels, weight expects {w.shape[1]}")
    if b is not None and b.shape != (w.shape[0],):
        raise DimensionError(f"bias must have shape ({w.shape[0]},), got {b.shape}")
    if stride != 1:
        raise ValueError("only stride 1 is supported")
    if k not in (1, 3) or padding not in (0, (k - 1) // 2):
        raise ValueError(f"unsupported kernel/padding combination k={k}, padding={padding}")
    if min(x.shape[2:]) + 2 * padding < k:
        raise DimensionError(f"spatial extents {x.shape[2:]} smaller than kernel {k}")
    return k


def _pad3(x: np.ndarray, p: int) -> np.ndarray:
    B, C, W, D, H = x.shape
    out = np.zeros((B, C, W + 2 * p, D + 2 * p, H + 2 * p), dtype=x.dtype)
    out[:, :, p:p + W, p:p + D, p:p + H] = x
    return out


def _im2col(x: np.ndarray, k: int, padding: int) -> tuple[np.ndarray, tuple[int, int, int]]:
    """Columns laid out as ``[B, C*k^3, N]`` so the conv is one batched matmul."""
    if padding:
        x = _pad3(x, padding)
    view = sliding_window_view(x, (k, k, k), axis=(2, 3, 4))
    B, C, W, D, H = view.shape[:5]
    cols = view.transpose(0, 1, 5, 6, 7, 2, 3, 4).reshape(B, C * k ** 3, W * D * H)
    return cols, (W, D, H)


def _col2im(dcols: np.ndarray, grid, C: int, k: int, padding: int) -> np.ndarray:
    B = dcols.shape[0]
    W, D, H = grid
    p = padding
    dcols = dcols.reshape(B, C, k, k, k, W, D, H)
    gx = np.zeros((B, C, W + k - 1, D + k - 1, H + k - 1), dtype=dcols.dtype)
    for a in range(k):
        for b in range(k):
            for c in range(k):
                gx[:, :, a:a + W, b:b + D, c:c + H] += dcols[:, :, a, b, c]
    if p:
        gx = gx[:, :, p:-p, p:-p, p:-p]
    return gx


def conv3d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """3D cross-correlation with zero padding; kernel sizes 1 and 3."""
    single = x.ndim == 4
    xd = _batched(x.data)
    w = weight.data
    k = _check_conv(xd, w, None if bias is None else bias.data, stride, padding)
    O, C = w.shape[:2]
    B = xd.shape[0]
    wf = w.reshape(O, C * k ** 3)
    if k == 1:
        grid = xd.shape[2:]
        cols = xd.reshape(B, C, -1)
    else:
        cols, grid = _im2col(xd, k, padding)
    out = np.matmul(wf, cols)
    if bias is not None:
        out += bias.data[:, None]
    out = out.reshape((B, O) + tuple(grid))
    if single:
        out = out[0]

    def bw(g):
        g = _batched(g).reshape(B, O, -1)
        gx = gw = gb = None
        if weight.requires_grad:
            gw = np.matmul(g, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2))
        if x.requires_grad:
            dcols = np.matmul(wf.T, g)
            if k == 1:
                gx = dcols.reshape(xd.shape)
            else:
                gx = _col2im(dcols, grid, C, k, padding)
            if single:
                gx = gx[0]
        return (gx, gw) if bias is None else (gx, gw, gb)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _make(out, parents, bw, "conv3d")


def conv3d_reference(x: np.ndarray, weight: np.ndarray, bias: np.ndarray | None = None, padding: int = 0) -> np.ndarray:
    """Plain nested-loop convolution kept as the correctness oracle for ``conv3d``."""
    x = np.asarray(x, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    C, W, D, H = x.shape
    O, Ci, k = weight.shape[0], weight.shape[1], weight.shape[2]
    if Ci != C:
        raise DimensionError(f"input has {C} channels, weight expects {Ci}")
    Wo, Do, Ho = W + 2 * padding - k + 1, D + 2 * padding - k + 1, H + 2 * padding - k + 1
    out = np.zeros((O, Wo, Do, Ho))
    xs = x.tolist()
    ws = weight.tolist()
    for o in range(O):
        b0 = 0.0 if bias is None else float(bias[o])
        for ox in range(Wo):
            for oy in range(Do):
                for oz in range(Ho):
                    acc = b0
                    for i in range(C):
                        for a in range(k):
                            px = ox + a - padding
                            if px < 0 or px >= W:
                                continue
                            for b in range(k):
                                py = oy + b - padding
                                if py < 0 or py >= D:
                                    continue
                                for c in range(k):
                                    pz = oz + c - padding
                                    if 0 <= pz < H:
                                        acc += ws[o][i][a][b][c] * xs[i][px][py][pz]
                    out[o, ox, oy, oz] = acc
    return out


def maxpool3d_window(x, window: int = 3) -> Tensor:
    """Max over each cell's 3x3x3 neighbourhood, out-of-grid neighbours read as 0.

    Never records a graph: the result is a constant for backward purposes.
    """
    data = x.data if isinstance(x, Tensor) else np.asarray(x)
    if window != 3:
        raise ValueError("only window=3 is supported")
    if data.ndim not in (4, 5) or data.shape[data.ndim - 4] != 1:
        raise DimensionError(f"expected a single-channel volume, got {data.shape}")
    out = data
    # separable: a 3-wide max along each spatial axis in turn
    for ax in range(data.ndim - 3, data.ndim):
        n = out.shape[ax]
        pad = [(0, 0)] * data.ndim
        pad[ax] = (1, 1)
        p = np.pad(out, pad)
        lo = np.take(p, range(0, n), axis=ax)
        mid = np.take(p, range(1, n + 1), axis=ax)
        hi = np.take(p, range(2, n + 2), axis=ax)
        out = np.maximum(np.maximum(lo, mid), hi)
    return Tensor(out)


# ---------------------------------------------------------------- backward


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every requires_grad leaf.

    Intermediate gradients live only for the duration of the call, so calling
    backward twice on the same graph doubles the leaf gradients.
    """
    if loss.data.size != 1:
        raise DimensionError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topo_order(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.astype(node.dtype, copy=True) if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg


# ---------------------------------------------------------------- oracle


def finite_diff_check(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-3) -> float:
    """Max relative error between backward() and central differences of ``f`` at ``x``.

    ``x`` is copied to float64; ``f`` must map a Tensor to a scalar Tensor.
    """
    base = np.array(x.data, dtype=np.float64)
    probe = Tensor(base.copy(), requires_grad=True)
    out = f(probe)
    backward(out)
    analytic = np.zeros_like(base) if probe.grad is None else probe.grad.astype(np.float64)

    numeric = np.zeros_like(base)
    flat = base.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        with no_grad():
            fp = float(f(Tensor(base.copy())).data)
        flat[i] = orig - eps
        with no_grad():
            fm = float(f(Tensor(base.copy())).data)
        flat[i] = orig
        numeric.reshape(-1)[i] = (fp - fm) / (2 * eps)

    err = np.abs(analytic - numeric) / (np.abs(analytic) + np.abs(numeric) + 1e-8)
    return float(err.max()) if err.size else 0.0
