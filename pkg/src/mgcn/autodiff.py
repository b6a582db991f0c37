"""Dense float64 tensors with reverse-mode automatic differentiation.

The library is deliberately small: 2-D matrices (plus 1-D bias vectors and
0-D reduction results), explicit shapes, and no broadcasting beyond adding
a trailing bias vector. Every operation that sees a grad-requiring input
records a vector-Jacobian product closure; ``backward()`` on a scalar
replays them in reverse topological order and accumulates gradients into
the requires_grad leaves. Repeated backward calls accumulate additively
until ``zero_grad()``.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "ShapeError",
    "GradientError",
    "no_grad",
    "matmul",
    "add",
    "sub",
    "mul",
    "scale",
    "neg",
    "tanh",
    "exp",
    "absolute",
    "square",
    "softmax_rows",
    "transpose",
    "reshape",
    "concat_cols",
    "concat_rows",
    "slice_cols",
    "take_rows",
]


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class GradientError(RuntimeError):
    """backward() was called on an unsupported target."""


_grad_enabled = True


class no_grad:
    """Context manager that disables tape recording for cheap forward-only runs."""

    def __enter__(self) -> "no_grad":
        global _grad_enabled
        self._saved = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc) -> bool:
        global _grad_enabled
        _grad_enabled = self._saved
        return False


class Tensor:
    """A float64 array with an optional gradient and tape participation.

    Data is conceptually immutable after creation; only ``grad`` changes
    through backward passes, and only the optimizer replaces parameter
    data between steps.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple["Tensor", ...] = ()
        self._vjp: Callable[[np.ndarray], Iterable[tuple["Tensor", np.ndarray]]] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.data.shape}")
        return self.data.item()

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every reachable requires_grad leaf."""
        if self.data.size != 1:
            raise GradientError(f"backward target must be scalar, got shape {self.data.shape}")
        topo = _topo_order(self)
        pending: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            if node._vjp is None:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in node._vjp(g):
                if not parent.requires_grad:
                    continue
                prev = pending.get(id(parent))
                pending[id(parent)] = pg if prev is None else prev + pg

    # -- operator sugar -------------------------------------------------

    def __matmul__(self, other) -> "Tensor":
        return matmul(self, other)

    def __add__(self, other) -> "Tensor":
        return add(self, other)

    def __sub__(self, other) -> "Tensor":
        return sub(self, other)

    def __mul__(self, other) -> "Tensor":
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    def __rmul__(self, other) -> "Tensor":
        return self.__mul__(other)

    def __truediv__(self, other) -> "Tensor":
        if not isinstance(other, (int, float)):
            raise TypeError("tensor division only supports scalar divisors")
        return scale(self, 1.0 / float(other))

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __abs__(self) -> "Tensor":
        return absolute(self)

    def sum(self) -> "Tensor":
        return _sum_all(self)

    def mean(self) -> "Tensor":
        return _mean_all(self)

    def reshape(self, shape: Sequence[int]) -> "Tensor":
        return reshape(self, shape)

    def transpose(self) -> "Tensor":
        return transpose(self)

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"


def _wrap(data: np.ndarray) -> Tensor:
    """Fast constructor for op outputs (already float64 ndarrays)."""
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = False
    out.grad = None
    out._parents = ()
    out._vjp = None
    return out


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(out: Tensor, parents: tuple[Tensor, ...], vjp) -> Tensor:
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._vjp = vjp
    return out


# -- primitives ----------------------------------------------------------


def matmul(a, b) -> Tensor:
    """Matrix product; backward is dA = dC @ B^T, dB = A^T @ dC."""
    a, b = _as_tensor(a), _as_tensor(b)
    ad, bd = a.data, b.data
    if ad.ndim != 2 or bd.ndim != 2 or ad.shape[1] != bd.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {ad.shape} @ {bd.shape}")
    out = _wrap(ad @ bd)

    def vjp(g):
        return ((a, g @ bd.T), (b, ad.T @ g))

    return _record(out, (a, b), vjp)


def add(a, b) -> Tensor:
    """Elementwise sum; also accepts a trailing bias vector for ``b``."""
    a, b = _as_tensor(a), _as_tensor(b)
    ad, bd = a.data, b.data
    if ad.shape == bd.shape:
        out = _wrap(ad + bd)

        def vjp(g):
            return ((a, g), (b, g))

    elif ad.ndim == 2 and bd.ndim == 1 and bd.shape[0] == ad.shape[1]:
        out = _wrap(ad + bd)

        def vjp(g):
            return ((a, g), (b, g.sum(axis=0)))

    else:
        raise ShapeError(f"add: incompatible shapes {ad.shape} + {bd.shape}")
    return _record(out, (a, b), vjp)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape != b.data.shape:
        raise ShapeError(f"sub: incompatible shapes {a.data.shape} - {b.data.shape}")
    out = _wrap(a.data - b.data)

    def vjp(g):
        return ((a, g), (b, -g))

    return _record(out, (a, b), vjp)


def mul(a, b) -> Tensor:
    """Elementwise product of same-shape tensors."""
    a, b = _as_tensor(a), _as_tensor(b)
    ad, bd = a.data, b.data
    if ad.shape != bd.shape:
        raise ShapeError(f"mul: incompatible shapes {ad.shape} * {bd.shape}")
    out = _wrap(ad * bd)

    def vjp(g):
        return ((a, g * bd), (b, g * ad))

    return _record(out, (a, b), vjp)


def scale(a, s: float) -> Tensor:
    a = _as_tensor(a)
    s = float(s)
    out = _wrap(a.data * s)

    def vjp(g):
        return ((a, g * s),)

    return _record(out, (a,), vjp)


def neg(a) -> Tensor:
    return scale(a, -1.0)


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    y = np.tanh(a.data)
    out = _wrap(y)

    def vjp(g):
        return ((a, g * (1.0 - y * y)),)

    return _record(out, (a,), vjp)


def exp(a) -> Tensor:
    a = _as_tensor(a)
    y = np.exp(a.data)
    out = _wrap(y)

    def vjp(g):
        return ((a, g * y),)

    return _record(out, (a,), vjp)


def absolute(a) -> Tensor:
    """|a| with subgradient 0 at 0."""
    a = _as_tensor(a)
    out = _wrap(np.abs(a.data))

    def vjp(g):
        return ((a, g * np.sign(a.data)),)

    return _record(out, (a,), vjp)


def square(a) -> Tensor:
    a = _as_tensor(a)
    out = _wrap(a.data * a.data)

    def vjp(g):
        return ((a, g * (2.0 * a.data)),)

    return _record(out, (a,), vjp)


def softmax_rows(a) -> Tensor:
    """Row-wise softmax of a matrix, stabilized by row-max subtraction."""
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError(f"softmax_rows expects a matrix, got shape {a.data.shape}")
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)
    out = _wrap(y)

    def vjp(g):
        inner = (g * y).sum(axis=1, keepdims=True)
        return ((a, y * (g - inner)),)

    return _record(out, (a,), vjp)


def transpose(a) -> Tensor:
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got shape {a.data.shape}")
    out = _wrap(a.data.T)

    def vjp(g):
        return ((a, g.T),)

    return _record(out, (a,), vjp)


def reshape(a, shape: Sequence[int]) -> Tensor:
    a = _as_tensor(a)
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape)) != a.data.size:
        raise ShapeError(f"reshape: cannot view {a.data.shape} as {shape}")
    src_shape = a.data.shape
    out = _wrap(a.data.reshape(shape))

    def vjp(g):
        return ((a, g.reshape(src_shape)),)

    return _record(out, (a,), vjp)


def concat_cols(*tensors) -> Tensor:
    """Horizontal concatenation of matrices with equal row counts."""
    ts = tuple(_as_tensor(t) for t in tensors)
    if not ts:
        raise ShapeError("concat_cols needs at least one tensor")
    rows = ts[0].data.shape[0]
    for t in ts:
        if t.data.ndim != 2 or t.data.shape[0] != rows:
            raise ShapeError(f"concat_cols: row counts differ ({[t.data.shape for t in ts]})")
    out = _wrap(np.concatenate([t.data for t in ts], axis=1))
    widths = [t.data.shape[1] for t in ts]
    edges = np.cumsum([0] + widths)

    def vjp(g):
        return tuple((t, g[:, edges[i]:edges[i + 1]]) for i, t in enumerate(ts))

    return _record(out, ts, vjp)


def concat_rows(*tensors) -> Tensor:
    """Vertical concatenation of matrices with equal column counts."""
    ts = tuple(_as_tensor(t) for t in tensors)
    if not ts:
        raise ShapeError("concat_rows needs at least one tensor")
    cols = ts[0].data.shape[1]
    for t in ts:
        if t.data.ndim != 2 or t.data.shape[1] != cols:
            raise ShapeError(f"concat_rows: column counts differ ({[t.data.shape for t in ts]})")
    out = _wrap(np.concatenate([t.data for t in ts], axis=0))
    heights = [t.data.shape[0] for t in ts]
    edges = np.cumsum([0] + heights)

    def vjp(g):
        return tuple((t, g[edges[i]:edges[i + 1]]) for i, t in enumerate(ts))

    return _record(out, ts, vjp)


def slice_cols(a, start: int, stop: int) -> Tensor:
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError(f"slice_cols expects a matrix, got shape {a.data.shape}")
    n = a.data.shape[1]
    if not (0 <= start < stop <= n):
        raise IndexError(f"slice_cols: range [{start}, {stop}) out of bounds for {n} columns")
    out = _wrap(a.data[:, start:stop])
    src_shape = a.data.shape

    def vjp(g):
        full = np.zeros(src_shape)
        full[:, start:stop] = g
        return ((a, full),)

    return _record(out, (a,), vjp)


def take_rows(a, indices) -> Tensor:
    """Gather rows by index; backward scatter-adds into the source rows."""
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError(f"take_rows expects a matrix, got shape {a.data.shape}")
    if isinstance(indices, np.ndarray) and indices.dtype == np.intp:
        idx = indices
    else:
        idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1:
        raise ShapeError("take_rows expects a flat index list")
    n = a.data.shape[0]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"take_rows: index out of range for {n} rows: {idx.tolist()}")
    out = _wrap(a.data[idx])
    src_shape = a.data.shape

    def vjp(g):
        full = np.zeros(src_shape)
        np.add.at(full, idx, g)
        return ((a, full),)

    return _record(out, (a,), vjp)


def _sum_all(a) -> Tensor:
    a = _as_tensor(a)
    out = _wrap(np.asarray(a.data.sum()))

    def vjp(g):
        return ((a, np.full(a.data.shape, float(g))),)

    return _record(out, (a,), vjp)


def _mean_all(a) -> Tensor:
    a = _as_tensor(a)
    out = _wrap(np.asarray(a.data.mean()))
    inv = 1.0 / a.data.size

    def vjp(g):
        return ((a, np.full(a.data.shape, float(g) * inv)),)

    return _record(out, (a,), vjp)
