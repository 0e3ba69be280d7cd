"""Minimal reverse-mode autodiff over numpy float64 arrays.

Every op records a node with a monotonically increasing sequence number, so
``backward`` can replay the recorded graph in exact reverse execution order.
Gradients accumulate into ``.grad``; callers reset them with ``zero_grad``.
"""

from __future__ import annotations

import contextlib
import itertools
import threading
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

DTYPE = np.float64

_seq = itertools.count()
_state = threading.local()


def grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (thread-local)."""
    prev = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


@contextlib.contextmanager
def frozen(params: Iterable[Tensor]):
    """Treat ``params`` as constants inside the block; gradients still flow past them."""
    params = list(params)
    prev = [p.requires_grad for p in params]
    for p in params:
        p.requires_grad = False
    try:
        yield
    finally:
        for p, r in zip(params, prev):
            p.requires_grad = r


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward", "_seq")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.array(data, dtype=DTYPE)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self._seq = next(_seq)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self) -> str:
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"expected a scalar tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=DTYPE, copy=True).reshape(self.data.shape)
        else:
            self.grad += g

    def backward(self) -> None:
        backward(self)

    # arithmetic; tensors must share a shape, python scalars broadcast
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)


def _make(data: np.ndarray, parents: Sequence[Tensor], backward_fn) -> Tensor:
    out = Tensor(data)
    if grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data, name: str | None = None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` on every tensor reachable from ``loss``."""
    if loss.data.size != 1:
        raise ValueError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    nodes = {}
    stack = [loss]
    while stack:
        node = stack.pop()
        if node._seq in nodes:
            continue
        nodes[node._seq] = node
        stack.extend(node._parents)
    # interior nodes start clean; leaves keep accumulating across calls
    for node in nodes.values():
        if node._backward is not None:
            node.grad = None
    loss._accumulate(np.ones_like(loss.data))
    for seq in sorted(nodes, reverse=True):
        node = nodes[seq]
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None


# ---------------------------------------------------------------- elementwise


def _binary_operands(a, b) -> tuple[Tensor, Tensor]:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim and b.data.ndim and a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape} (no broadcasting)")
    return a, b


def _reduce_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    return g if g.shape == shape else np.asarray(g.sum()).reshape(shape)


def add(a, b) -> Tensor:
    a, b = _binary_operands(a, b)

    def _bw(g):
        if a.requires_grad:
            a._accumulate(_reduce_to(g, a.shape))
        if b.requires_grad:
            b._accumulate(_reduce_to(g, b.shape))

    return _make(a.data + b.data, (a, b), _bw)


def sub(a, b) -> Tensor:
    a, b = _binary_operands(a, b)

    def _bw(g):
        if a.requires_grad:
            a._accumulate(_reduce_to(g, a.shape))
        if b.requires_grad:
            b._accumulate(_reduce_to(-g, b.shape))

    return _make(a.data - b.data, (a, b), _bw)


def mul(a, b) -> Tensor:
    a, b = _binary_operands(a, b)

    def _bw(g):
        if a.requires_grad:
            a._accumulate(_reduce_to(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_reduce_to(g * a.data, b.shape))

    return _make(a.data * b.data, (a, b), _bw)


def log(x: Tensor) -> Tensor:
    if np.any(x.data <= 0):
        raise ValueError("log() of a non-positive value; clamp the argument first")

    def _bw(g):
        x._accumulate(g / x.data)

    return _make(np.log(x.data), (x,), _bw)


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    inside = (x.data >= lo) & (x.data <= hi)

    def _bw(g):
        x._accumulate(g * inside)

    return _make(np.clip(x.data, lo, hi), (x,), _bw)


def elu(x: Tensor, alpha: float = 1.0) -> Tensor:
    pos = x.data > 0
    out = np.where(pos, x.data, alpha * np.expm1(np.minimum(x.data, 0.0)))

    def _bw(g):
        x._accumulate(g * np.where(pos, 1.0, out + alpha))

    return _make(out, (x,), _bw)


def relu(x: Tensor) -> Tensor:
    pos = x.data > 0

    def _bw(g):
        x._accumulate(g * pos)

    return _make(np.where(pos, x.data, 0.0), (x,), _bw)


def sigmoid(x: Tensor) -> Tensor:
    out = 0.5 * (1.0 + np.tanh(0.5 * x.data))

    def _bw(g):
        x._accumulate(g * out * (1.0 - out))

    return _make(out, (x,), _bw)


_ACTIVATIONS = {"elu": elu, "relu": relu, "sigmoid": sigmoid}


def activation(kind: str, x: Tensor, alpha: float = 1.0) -> Tensor:
    if kind not in _ACTIVATIONS:
        raise ValueError(f"unknown activation {kind!r}; expected one of {sorted(_ACTIVATIONS)}")
    if kind == "elu":
        return elu(x, alpha)
    return _ACTIVATIONS[kind](x)


# ------------------------------------------------------------------ reductions


def mean(x: Tensor) -> Tensor:
    n = x.data.size

    def _bw(g):
        x._accumulate(np.full(x.shape, g.reshape(()) / n))

    return _make(np.asarray(x.data.mean()), (x,), _bw)


def sum_(x: Tensor) -> Tensor:
    def _bw(g):
        x._accumulate(np.full(x.shape, g.reshape(())))

    return _make(np.asarray(x.data.sum()), (x,), _bw)


# ------------------------------------------------------------------- reshaping


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    def _bw(g):
        x._accumulate(g.reshape(x.shape))

    return _make(x.data.reshape(shape), (x,), _bw)


def flatten(x: Tensor) -> Tensor:
    return reshape(x, (x.shape[0], -1))


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def _bw(g):
        for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t._accumulate(g[tuple(idx)])

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tensors, _bw)


def upsample_nn(x: Tensor, factor: int) -> Tensor:
    """Nearest-neighbour upsampling of an NCHW tensor by an integer factor."""
    if factor < 1:
        raise ValueError(f"upsample factor must be >= 1, got {factor}")
    if factor == 1:
        return reshape(x, x.shape)
    out = x.data.repeat(factor, axis=2).repeat(factor, axis=3)
    n, c, h, w = x.shape

    def _bw(g):
        x._accumulate(g.reshape(n, c, h, factor, w, factor).sum(axis=(3, 5)))

    return _make(out, (x,), _bw)


# -------------------------------------------------------------- linear layers


def dense(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    if x.data.ndim != 2 or w.data.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ValueError(f"dense: input {x.shape} incompatible with weights {w.shape}")
    if b.shape != (w.shape[1],):
        raise ValueError(f"dense: bias {b.shape} does not match weights {w.shape}")

    def _bw(g):
        if x.requires_grad:
            x._accumulate(g @ w.data.T)
        if w.requires_grad:
            w._accumulate(x.data.T @ g)
        if b.requires_grad:
            b._accumulate(g.sum(axis=0))

    return _make(x.data @ w.data + b.data, (x, w, b), _bw)


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of NCHW input with FCkk weights plus per-filter bias."""
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ValueError(f"conv2d expects 4-d input and weights, got {x.shape} and {w.shape}")
    n, c, h, wd = x.shape
    f, wc, kh, kw = w.shape
    if c != wc:
        raise ValueError(
            f"conv2d channel mismatch: input {x.shape} has {c} channels, kernel {w.shape} expects {wc}"
        )
    if b.shape != (f,):
        raise ValueError(f"conv2d: bias {b.shape} does not match {f} filters")
    if stride < 1 or padding < 0:
        raise ValueError(f"conv2d: invalid stride={stride} padding={padding}")
    if kh > h + 2 * padding or kw > wd + 2 * padding:
        raise ValueError(f"conv2d: kernel {kh}x{kw} larger than padded input {x.shape}")
    ho = conv_output_size(h, kh, stride, padding)
    wo = conv_output_size(wd, kw, stride, padding)

    # channel-major padded input (c, n, hp, wp) so each tap copy moves whole rows
    xp = np.pad(x.data.transpose(1, 0, 2, 3), ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    h_end = stride * (ho - 1) + 1
    w_end = stride * (wo - 1) + 1
    # im2col: rows (c, kh, kw), columns (n, ho, wo)
    cols = np.empty((c, kh, kw, n, ho, wo))
    for i in range(kh):
        for j in range(kw):
            cols[:, i, j] = xp[:, :, i : i + h_end : stride, j : j + w_end : stride]
    cols = cols.reshape(c * kh * kw, n * ho * wo)
    wmat = w.data.reshape(f, -1)
    out = (wmat @ cols).reshape(f, n, ho, wo).transpose(1, 0, 2, 3) + b.data[None, :, None, None]

    def _bw(g):
        g2 = g.transpose(1, 0, 2, 3).reshape(f, -1)
        if b.requires_grad:
            b._accumulate(g2.sum(axis=1))
        if w.requires_grad:
            w._accumulate((g2 @ cols.T).reshape(w.shape))
        if x.requires_grad:
            gcols = (wmat.T @ g2).reshape(c, kh, kw, n, ho, wo)
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i : i + h_end : stride, j : j + w_end : stride] += gcols[:, i, j]
            x._accumulate(gxp[:, :, padding : padding + h, padding : padding + wd].transpose(1, 0, 2, 3))

    return _make(np.ascontiguousarray(out), (x, w, b), _bw)


# ----------------------------------------------------------- gradient checking


def grad_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor],
    epsilon: float = 1e-5,
    max_per_param: int | None = None,
    seed: int = 0,
) -> float:
    """Max relative error between backprop and central differences.

    ``f`` must rebuild its graph from the current contents of ``params`` on
    every call. The relative error per element is
    ``|a - n| / max(1e-8, |a| + |n|)``. With ``max_per_param`` only a seeded
    random subset of each parameter's elements is perturbed.
    """
    rng = np.random.default_rng(seed)
    zero_grad(params)
    for p in params:
        p.requires_grad = True
    loss = f()
    backward(loss)
    analytic = [np.zeros(p.shape) if p.grad is None else p.grad.copy() for p in params]

    worst = 0.0
    with no_grad():
        for p, a in zip(params, analytic):
            flat = p.data.reshape(-1)
            a_flat = a.reshape(-1)
            idx = np.arange(flat.size)
            if max_per_param is not None and flat.size > max_per_param:
                idx = rng.choice(flat.size, size=max_per_param, replace=False)
            for i in idx:
                orig = flat[i]
                flat[i] = orig + epsilon
                plus = f().item()
                flat[i] = orig - epsilon
                minus = f().item()
                flat[i] = orig
                numeric = (plus - minus) / (2 * epsilon)
                err = abs(a_flat[i] - numeric) / max(1e-8, abs(a_flat[i]) + abs(numeric))
                worst = max(worst, err)
    zero_grad(params)
    return worst
