"""Tape-based reverse-mode automatic differentiation over float64 numpy arrays.

Every operation computes its forward value eagerly and, while gradient
recording is enabled, remembers its parents together with a closure that maps
the output gradient to one gradient per parent.  ``backward`` walks the graph
in reverse topological order exactly once.

Leaf tensors (``requires_grad=True`` and no parents) accumulate into
``.grad`` across calls; intermediate gradients live only for one traversal.
"""

from __future__ import annotations

import itertools
import math
import threading
from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import erf

__all__ = [
    "Tensor",
    "Graph",
    "ShapeError",
    "tensor",
    "no_grad",
    "is_grad_enabled",
    "backward",
    "grad_check",
    "GradCheckResult",
    "matmul",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "exp",
    "log",
    "tanh",
    "relu",
    "gelu",
    "softmax",
    "log_softmax",
    "layer_norm",
    "embedding",
    "concat",
    "stack",
    "reshape",
    "transpose",
    "sum",
    "mean",
    "squared_error",
    "backward_calls",
]

_state = threading.local()
_ids = itertools.count()
_backward_counter = itertools.count()
_backward_total = 0


class ShapeError(ValueError):
    """Raised when operand shapes do not conform for an operation."""


def is_grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextmanager
def no_grad():
    """Disable graph recording on the current thread."""
    previous = is_grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = previous


def backward_calls() -> int:
    """Number of ``backward`` invocations in this process (instrumentation)."""
    return _backward_total


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "parents", "backward_fn", "op", "node_id")
    # make ndarray <op> Tensor dispatch to the Tensor's reflected operator
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False, *, parents=(), backward_fn=None, op: str = "leaf"):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.parents: tuple[Tensor, ...] = tuple(parents)
        self.backward_fn = backward_fn
        self.op = op
        self.node_id = next(_ids)

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return not self.parents

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _raise_nonscalar(self)

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    # -- operator sugar ---------------------------------------------------
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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take(self, index)

    def sum(self, axis=None, keepdims=False):
        return sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    @property
    def T(self):
        return transpose(self, None)


def _raise_nonscalar(t: Tensor):
    raise ShapeError(f"item() needs a single-element tensor, got shape {t.shape}")


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents: Sequence[Tensor], backward_fn: Callable, op: str) -> Tensor:
    if is_grad_enabled() and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, parents=parents, backward_fn=backward_fn, op=op)
    return Tensor(data, op=op)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _broadcast_shape(op: str, *shapes) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(*shapes)
    except ValueError:
        raise ShapeError(f"{op}: shapes {' and '.join(map(str, shapes))} do not broadcast") from None


# -- elementwise -----------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape("add", a.shape, b.shape)
    sa, sb = a.shape, b.shape
    return _make(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add")


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape("sub", a.shape, b.shape)
    sa, sb = a.shape, b.shape
    return _make(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)), "sub")


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape("mul", a.shape, b.shape)
    ad, bd = a.data, b.data
    return _make(
        ad * bd,
        (a, b),
        lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)),
        "mul",
    )


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape("div", a.shape, b.shape)
    ad, bd = a.data, b.data
    out = ad / bd
    return _make(
        out,
        (a, b),
        lambda g: (_unbroadcast(g / bd, ad.shape), _unbroadcast(-g * out / bd, bd.shape)),
        "div",
    )


def neg(a) -> Tensor:
    a = _as_tensor(a)
    return _make(-a.data, (a,), lambda g: (-g,), "neg")


def exp(a) -> Tensor:
    a = _as_tensor(a)
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,), "exp")


def log(a) -> Tensor:
    a = _as_tensor(a)
    ad = a.data
    return _make(np.log(ad), (a,), lambda g: (g / ad,), "log")


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def relu(a) -> Tensor:
    a = _as_tensor(a)
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(a) -> Tensor:
    """Exact (erf-based) GELU."""
    a = _as_tensor(a)
    x = a.data
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))

    def grads(g):
        pdf = _INV_SQRT2PI * np.exp(-0.5 * x * x)
        return (g * (cdf + x * pdf),)

    return _make(x * cdf, (a,), grads, "gelu")


def squared_error(pred, target) -> Tensor:
    """Elementwise ``(pred - target) ** 2``."""
    pred, target = _as_tensor(pred), _as_tensor(target)
    _broadcast_shape("squared_error", pred.shape, target.shape)
    diff = pred.data - target.data
    sp, st = pred.shape, target.shape
    return _make(
        diff * diff,
        (pred, target),
        lambda g: (_unbroadcast(2.0 * g * diff, sp), _unbroadcast(-2.0 * g * diff, st)),
        "squared_error",
    )


# -- linear algebra / shape ------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} are not aligned")
    ad, bd = a.data, b.data

    def grads(g):
        ga = g @ np.swapaxes(bd, -1, -2)
        if bd.ndim == 2:
            # activations (..., k) times a weight matrix: contract all leading axes at once
            gb = ad.reshape(-1, ad.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            return _unbroadcast(ga, ad.shape), gb
        gb = np.swapaxes(ad, -1, -2) @ g
        return _unbroadcast(ga, ad.shape), _unbroadcast(gb, bd.shape)

    return _make(ad @ bd, (a, b), grads, "matmul")


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    original = a.shape
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {original} into {tuple(shape)}") from None
    return _make(out, (a,), lambda g: (g.reshape(original),), "reshape")


def transpose(a, axes=None) -> Tensor:
    a = _as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    axes = tuple(axes)
    if sorted(axes) != list(range(a.ndim)):
        raise ShapeError(f"transpose: axes {axes} invalid for shape {a.shape}")
    inverse = tuple(np.argsort(axes))
    return _make(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inverse),), "transpose")


def take(a, index) -> Tensor:
    """``a[index]`` with scatter-add backward (handles repeated indices)."""
    a = _as_tensor(a)
    shape = a.shape
    out = a.data[index]

    def grads(g):
        full = np.zeros(shape)
        np.add.at(full, index, g)
        return (full,)

    return _make(out, (a,), grads, "take")


def embedding(weight, ids) -> Tensor:
    """Row lookup ``weight[ids]`` for an integer id array of any shape."""
    weight = _as_tensor(weight)
    ids = np.asarray(ids)
    if weight.ndim != 2:
        raise ShapeError(f"embedding: weight must be 2-D, got {weight.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= weight.shape[0]):
        raise ShapeError(f"embedding: ids outside [0, {weight.shape[0]}) for table {weight.shape}")
    shape = weight.shape

    def grads(g):
        full = np.zeros(shape)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, shape[1]))
        return (full,)

    return _make(weight.data[ids], (weight,), grads, "embedding")


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat: no inputs")
    ndim = tensors[0].ndim
    ax = axis % ndim if ndim else 0
    for t in tensors[1:]:
        if t.ndim != ndim or any(t.shape[i] != tensors[0].shape[i] for i in range(ndim) if i != ax):
            raise ShapeError(f"concat: shapes {[x.shape for x in tensors]} differ off axis {axis}")
    sizes = [t.shape[ax] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def grads(g):
        return tuple(np.split(g, bounds, axis=ax))

    return _make(np.concatenate([t.data for t in tensors], axis=ax), tensors, grads, "concat")


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    if len({t.shape for t in tensors}) > 1:
        raise ShapeError(f"stack: shapes {[t.shape for t in tensors]} differ")
    out = np.stack([t.data for t in tensors], axis=axis)
    ax = axis % out.ndim

    def grads(g):
        return tuple(np.moveaxis(g, ax, 0))

    return _make(out, tensors, grads, "stack")


# -- reductions --------------------------------------------------------------

def sum(a, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = _as_tensor(a)
    shape = a.shape

    def grads(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), grads, "sum")


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    count = a.size if axis is None else int(np.prod([a.shape[i] for i in np.atleast_1d(axis)]))
    return div(sum(a, axis=axis, keepdims=keepdims), float(count))


# -- normalisation -----------------------------------------------------------

def softmax(a, axis: int = -1) -> Tensor:
    a = _as_tensor(a)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def grads(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _make(out, (a,), grads, "softmax")


def log_softmax(a, axis: int = -1) -> Tensor:
    a = _as_tensor(a)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=axis, keepdims=True))

    def grads(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return _make(out, (a,), grads, "log_softmax")


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis, then scale and shift."""
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    n = x.shape[-1]
    if gamma.shape != (n,) or beta.shape != (n,):
        raise ShapeError(f"layer_norm: input {x.shape} needs gamma/beta of shape ({n},), got {gamma.shape}, {beta.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    gd = gamma.data

    def grads(g):
        gx_hat = g * gd
        gx = inv * (gx_hat - gx_hat.mean(axis=-1, keepdims=True)
                    - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True))
        flat = g.reshape(-1, n)
        return gx, (flat * xhat.reshape(-1, n)).sum(axis=0), flat.sum(axis=0)

    return _make(xhat * gd + beta.data, (x, gamma, beta), grads, "layer_norm")


# -- graph traversal ---------------------------------------------------------

class Graph:
    """Topologically ordered view of the nodes reachable from a root tensor."""

    def __init__(self, root: Tensor):
        self.root = root
        self.nodes: list[Tensor] = _topological_order(root)

    def __len__(self) -> int:
        return len(self.nodes)

    def leaves(self) -> list[Tensor]:
        return [n for n in self.nodes if n.is_leaf and n.requires_grad]


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if node.node_id in seen:
            continue
        seen.add(node.node_id)
        stack.append((node, True))
        for parent in node.parents:
            if parent.requires_grad and parent.node_id not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``leaf.grad`` for every reachable leaf."""
    global _backward_total
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    _backward_total += 1
    if not loss.requires_grad:
        return
    grads: dict[int, np.ndarray] = {loss.node_id: np.ones(loss.shape)}
    for node in reversed(Graph(loss).nodes):
        g = grads.pop(node.node_id, None)
        if g is None:
            continue
        if node.is_leaf:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if not parent.requires_grad:
                continue
            prev = grads.get(parent.node_id)
            grads[parent.node_id] = pg if prev is None else prev + pg


# -- finite-difference checking ---------------------------------------------

class GradCheckResult(float):
    """Max relative error, with the location of the worst entry attached."""

    param_index: int
    entry: int
    failure: str | None

    def __new__(cls, value: float, param_index: int = -1, entry: int = -1, failure: str | None = None):
        obj = super().__new__(cls, value)
        obj.param_index = param_index
        obj.entry = entry
        obj.failure = failure
        return obj

    @property
    def ok(self) -> bool:
        return self.failure is None


def grad_check(
    f: Callable[[], Tensor],
    params: Iterable[Tensor],
    h: float = 1e-5,
    max_entries: int | None = None,
    rng: np.random.Generator | None = None,
) -> GradCheckResult:
    """Compare analytic gradients of scalar ``f()`` against central differences.

    ``f`` must rebuild its graph from the current values of ``params`` on every
    call.  With ``max_entries`` set, that many entries per parameter are
    sampled instead of sweeping all of them.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    params = list(params)
    for p in params:
        p.zero_grad()
    out = f()
    if not np.all(np.isfinite(out.data)):
        return GradCheckResult(math.inf, -1, -1, "non-finite value at the base point")
    backward(out)
    analytic = [np.zeros(p.shape) if p.grad is None else p.grad.copy() for p in params]

    worst = GradCheckResult(0.0)
    for pi, p in enumerate(params):
        flat = p.data.reshape(-1)
        entries = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            entries = (rng or np.random.default_rng(0)).choice(flat.size, max_entries, replace=False)
        for k in entries:
            orig = flat[k]
            flat[k] = orig + h
            with no_grad():
                fp = f().item()
            flat[k] = orig - h
            with no_grad():
                fm = f().item()
            flat[k] = orig
            if not (math.isfinite(fp) and math.isfinite(fm)):
                return GradCheckResult(math.inf, pi, int(k), f"non-finite value perturbing parameter {pi}")
            numeric = (fp - fm) / (2.0 * h)
            a = analytic[pi].reshape(-1)[k]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            if err > worst:
                worst = GradCheckResult(err, pi, int(k))
    return worst
