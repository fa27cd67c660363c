"""Small reverse-mode autodiff over numpy arrays, plus Adam.

Only the handful of primitives needed by the projection heads, the
cross-attention fusion block and the losses are provided.  Every op records
its parents and a closure that pushes the output gradient back to them;
``Tensor.backward`` walks the recorded graph in reverse topological order.

Arrays keep the dtype they were created with, so the model runs in float32
and ``grad_check`` can re-run the very same graph in float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, NumericError

_GELU_C = float(np.sqrt(2.0 / np.pi))
NORM_EPS = 1e-12


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False, parents: tuple = (), op: str = ""):
        arr = np.asarray(data)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward: Callable[[np.ndarray], None] | None = None
        self.op = op

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, op={self.op!r}, requires_grad={self.requires_grad})"

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise DimensionError("backward() without a seed gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
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
        self._accumulate(grad)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar for the common cases
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, parents: Sequence[Tensor], op: str) -> Tensor:
    out = Tensor(data, parents=tuple(parents), op=op)
    out.requires_grad = any(p.requires_grad for p in parents)
    return out


def _check_trailing(a: np.ndarray, b: np.ndarray, op: str) -> None:
    # b may be a full-shape operand or a trailing "bias" block of a
    if a.shape == b.shape:
        return
    if b.ndim < a.ndim and a.shape[a.ndim - b.ndim:] == b.shape:
        return
    raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} are incompatible")


def _reduce_to(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    lead = g.ndim - len(shape)
    return g.sum(axis=tuple(range(lead)))


# ---------------------------------------------------------------------------
# primitives

def matmul(a, b) -> Tensor:
    """``a @ b`` for 2-D/2-D, 3-D/2-D (shared weight) and 3-D/3-D (batched)."""
    a, b = as_tensor(a), as_tensor(b)
    A, B = a.data, b.data
    if A.ndim not in (2, 3) or B.ndim not in (2, 3) or (A.ndim == 2 and B.ndim == 3):
        raise DimensionError(f"matmul: unsupported ranks {A.shape} @ {B.shape}")
    if A.shape[-1] != B.shape[-2] or (A.ndim == 3 and B.ndim == 3 and A.shape[0] != B.shape[0]):
        raise DimensionError(f"matmul: shapes {A.shape} @ {B.shape} do not align")
    out = _result(A @ B, (a, b), "matmul")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g @ np.swapaxes(B, -1, -2))
        if b.requires_grad:
            if A.ndim == 3 and B.ndim == 2:
                b._accumulate(A.reshape(-1, A.shape[-1]).T @ g.reshape(-1, g.shape[-1]))
            else:
                b._accumulate(np.swapaxes(A, -1, -2) @ g)

    out._backward = backward
    return out


def transpose(a) -> Tensor:
    """Swap the last two axes."""
    a = as_tensor(a)
    if a.data.ndim < 2:
        raise DimensionError("transpose needs rank >= 2")
    out = _result(np.swapaxes(a.data, -1, -2), (a,), "transpose")
    out._backward = lambda g: a._accumulate(np.swapaxes(g, -1, -2))
    return out


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_trailing(a.data, b.data, "add")
    out = _result(a.data + b.data, (a, b), "add")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(_reduce_to(g, b.data.shape))

    out._backward = backward
    return out


def sub(a, b) -> Tensor:
    return add(a, scale(b, -1.0))


def mul(a, b) -> Tensor:
    """Elementwise product; ``b`` may be a trailing block broadcast over ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    _check_trailing(a.data, b.data, "mul")
    A, B = a.data, b.data
    out = _result(A * B, (a, b), "mul")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * B)
        if b.requires_grad:
            b._accumulate(_reduce_to(g * A, B.shape))

    out._backward = backward
    return out


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    c = a.data.dtype.type(c)
    out = _result(a.data * c, (a,), "scale")
    out._backward = lambda g: a._accumulate(g * c)
    return out


def row_softmax(a) -> Tensor:
    """Softmax over the last axis."""
    a = as_tensor(a)
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)
    out = _result(y, (a,), "row_softmax")
    out._backward = lambda g: a._accumulate(y * (g - (g * y).sum(axis=-1, keepdims=True)))
    return out


def log_softmax(a) -> Tensor:
    a = as_tensor(a)
    z = a.data - a.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    y = z - lse
    sm = np.exp(y)
    out = _result(y, (a,), "log_softmax")
    out._backward = lambda g: a._accumulate(g - sm * g.sum(axis=-1, keepdims=True))
    return out


def gelu(a) -> Tensor:
    """GELU, tanh approximation."""
    a = as_tensor(a)
    x = a.data
    u = _GELU_C * (x + 0.044715 * x ** 3)
    t = np.tanh(u)
    out = _result(0.5 * x * (1.0 + t), (a,), "gelu")

    def backward(g):
        du = _GELU_C * (1.0 + 3 * 0.044715 * x ** 2)
        a._accumulate(g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * du))

    out._backward = backward
    return out


def layer_norm(a, eps: float = 1e-5) -> Tensor:
    """Normalise the last axis to zero mean / unit variance (no affine)."""
    a = as_tensor(a)
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc ** 2).mean(axis=-1, keepdims=True) + eps)
    y = xc * inv
    out = _result(y, (a,), "layer_norm")

    def backward(g):
        gm = g.mean(axis=-1, keepdims=True)
        gy = (g * y).mean(axis=-1, keepdims=True)
        a._accumulate(inv * (g - gm - y * gy))

    out._backward = backward
    return out


def dropout(a, p: float, seed: int, train: bool = True) -> Tensor:
    """Inverted dropout; the identity when ``train`` is false or ``p == 0``."""
    a = as_tensor(a)
    if not train or p <= 0.0:
        return a
    if p >= 1.0:
        raise ValueError("dropout rate must be < 1")
    keep = np.random.default_rng(seed).random(a.data.shape) >= p
    m = keep.astype(a.data.dtype) / a.data.dtype.type(1.0 - p)
    out = _result(a.data * m, (a,), "dropout")
    out._backward = lambda g: a._accumulate(g * m)
    return out


def mean_rows(a) -> Tensor:
    """Average over the token axis (second to last)."""
    a = as_tensor(a)
    if a.data.ndim < 2:
        raise DimensionError("mean_rows needs rank >= 2")
    n = a.data.shape[-2]
    out = _result(a.data.mean(axis=-2), (a,), "mean_rows")
    out._backward = lambda g: a._accumulate(np.repeat(np.expand_dims(g, -2), n, axis=-2) / n)
    return out


def concat_rows(parts: Sequence) -> Tensor:
    """Concatenate along the token axis."""
    parts = [as_tensor(p) for p in parts]
    tails = {p.data.shape[:-2] + p.data.shape[-1:] for p in parts}
    if len(tails) != 1:
        raise DimensionError(f"concat_rows: mismatched shapes {[p.data.shape for p in parts]}")
    sizes = [p.data.shape[-2] for p in parts]
    out = _result(np.concatenate([p.data for p in parts], axis=-2), parts, "concat_rows")

    def backward(g):
        start = 0
        for p, n in zip(parts, sizes):
            if p.requires_grad:
                p._accumulate(g[..., start:start + n, :])
            start += n

    out._backward = backward
    return out


def row_normalize(a, eps: float = NORM_EPS) -> Tensor:
    """Divide each row by its L2 norm; rows with norm below ``eps`` map to ~0."""
    a = as_tensor(a)
    x = a.data
    n = np.sqrt((x ** 2).sum(axis=-1, keepdims=True))
    safe = np.maximum(n, eps)
    y = x / safe
    small = n < eps
    out = _result(y, (a,), "row_normalize")

    def backward(g):
        proj = (y * g).sum(axis=-1, keepdims=True)
        dx = np.where(small, g, g - y * proj) / safe
        a._accumulate(dx)

    out._backward = backward
    return out


def cosine_similarity(x, y) -> Tensor:
    """All-pairs cosine similarity of the rows of ``x`` (B×D) and ``y`` (C×D)."""
    x, y = as_tensor(x), as_tensor(y)
    if x.data.ndim != 2 or y.data.ndim != 2 or x.data.shape[1] != y.data.shape[1]:
        raise DimensionError(f"cosine_similarity: shapes {x.data.shape} and {y.data.shape}")
    return matmul(row_normalize(x), transpose(row_normalize(y)))


def log(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    out = _result(np.log(x), (a,), "log")
    out._backward = lambda g: a._accumulate(g / x)
    return out


def exp(a) -> Tensor:
    a = as_tensor(a)
    y = np.exp(a.data)
    out = _result(y, (a,), "exp")
    out._backward = lambda g: a._accumulate(g * y)
    return out


def sum_all(a) -> Tensor:
    a = as_tensor(a)
    shape = a.data.shape
    out = _result(np.asarray(a.data.sum(), dtype=a.data.dtype), (a,), "sum_all")
    out._backward = lambda g: a._accumulate(np.broadcast_to(g, shape))
    return out


def mean_all(a) -> Tensor:
    a = as_tensor(a)
    return scale(sum_all(a), 1.0 / a.data.size)


# ---------------------------------------------------------------------------
# gradient checking

def grad_check(f: Callable[[], Tensor], params: Sequence[Tensor], h: float = 1e-4) -> float:
    """Worst relative error between backprop and central differences.

    ``f`` rebuilds the graph from ``params`` on every call and must be
    deterministic.  The parameters are promoted to float64 for the check
    and restored afterwards.
    """
    originals = [p.data for p in params]
    try:
        for p in params:
            p.data = p.data.astype(np.float64)
            p.grad = None
        loss = f()
        loss.backward()
        analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
        worst = 0.0
        for p, ga in zip(params, analytic):
            flat = p.data.reshape(-1)
            gflat = ga.reshape(-1)
            for i in range(flat.size):
                old = flat[i]
                flat[i] = old + h
                fp = float(f().data)
                flat[i] = old - h
                fm = float(f().data)
                flat[i] = old
                num = (fp - fm) / (2 * h)
                an = float(gflat[i])
                err = abs(an - num) / max(abs(an), abs(num), 1e-8)
                worst = max(worst, err)
        return worst
    finally:
        for p, orig in zip(params, originals):
            p.data = orig
            p.grad = None


# ---------------------------------------------------------------------------
# Adam

@dataclass
class AdamState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    step: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], lr: float = 1e-4) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params], lr=lr)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray | None],
              state: AdamState) -> Sequence[np.ndarray]:
    """Bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise DimensionError("adam_step: params, grads and state lengths differ")
    for i, g in enumerate(grads):
        if g is not None and not np.all(np.isfinite(g)):
            bad = int(np.count_nonzero(~np.isfinite(g)))
            raise NumericError(
                f"non-finite gradient for parameter {i} (shape {np.shape(g)}): "
                f"{bad} bad entries at step {state.step + 1}")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != m.shape:
            raise DimensionError("adam_step: moment shape does not match parameter")
        if g is None:
            g = np.zeros_like(p)
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= (state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)).astype(p.dtype)
    return params
