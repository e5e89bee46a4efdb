"""Dense float64 tensors with reverse-mode automatic differentiation.

A ``Tensor`` wraps a numpy array. While a ``Tape`` is active, every
operation that involves a grad-requiring input appends a record (output
reference plus a gradient closure) to the tape; ``Tape.backward`` replays
the records in exact reverse order of recording, which is always a valid
reverse topological order because inputs are recorded before the outputs
that consume them.

Broadcasting is deliberately restricted: apart from same-shape operands,
only a 1-D row vector against a 2-D matrix (per-row bias) and a 0-d scalar
against anything are supported. This keeps every gradient rule small enough
to audit by hand.
"""

from __future__ import annotations

import math
from typing import Callable, Optional, Sequence, Union

import numpy as np

from ..errors import DimensionError, NumericError

Scalarish = Union["Tensor", float, int]


class Tensor:
    """A float64 array with an optional gradient slot."""

    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.flat[0])

    def zero_grad(self) -> None:
        self.grad = None

    def copy(self) -> "Tensor":
        t = Tensor(self.data.copy(), requires_grad=self.requires_grad, name=self.name)
        return t

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    # operator sugar; floats/ints are lifted to constant tensors
    def __add__(self, other: Scalarish) -> "Tensor":
        return add(self, _lift(other))

    def __sub__(self, other: Scalarish) -> "Tensor":
        return sub(self, _lift(other))

    def __mul__(self, other: Scalarish) -> "Tensor":
        return mul(self, _lift(other))

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __neg__(self) -> "Tensor":
        return scale(self, -1.0)


def _lift(x: Scalarish) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(float(x))


class Tape:
    """Ordered record of differentiable operations.

    Used as a context manager around a forward computation; ``backward``
    seeds the loss gradient with 1 and replays the gradient closures in
    reverse recording order, accumulating into ``Tensor.grad``.
    """

    _active: Optional["Tape"] = None

    def __init__(self):
        self._records: list[tuple[Tensor, Callable[[np.ndarray], None]]] = []

    def __enter__(self) -> "Tape":
        if Tape._active is not None:
            raise RuntimeError("tapes do not nest; close the active tape first")
        Tape._active = self
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        Tape._active = None

    def __len__(self) -> int:
        return len(self._records)

    def record(self, out: Tensor, backward_fn: Callable[[np.ndarray], None]) -> None:
        self._records.append((out, backward_fn))

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(leaf) into every grad-requiring leaf."""
        if loss.data.size != 1:
            raise DimensionError(f"backward needs a scalar loss, got shape {loss.shape}")
        if not np.isfinite(loss.data):
            raise NumericError("backward called on a non-finite loss")
        loss.grad = np.ones_like(loss.data)
        for out, fn in reversed(self._records):
            if out.grad is not None:
                fn(out.grad)


def _active_tape() -> Optional[Tape]:
    return Tape._active


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad = t.grad + g


def _record(out: Tensor, inputs: Sequence[Tensor], backward_fn) -> Tensor:
    tape = _active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.record(out, backward_fn)
    return out


def _reduce_to(shape: tuple, g: np.ndarray) -> np.ndarray:
    # undo the row-vector / scalar broadcast used on the forward pass
    if g.shape == shape:
        return g
    if shape == ():
        return np.asarray(g.sum())
    if len(shape) == 1 and g.ndim == 2 and g.shape[1] == shape[0]:
        return g.sum(axis=0)
    raise DimensionError(f"cannot reduce gradient of shape {g.shape} to {shape}")


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape == b.shape:
        return
    if a.shape == () or b.shape == ():
        return
    # 1-D row vector against a matrix with matching width, either order
    if a.ndim == 2 and b.ndim == 1 and a.shape[1] == b.shape[0]:
        return
    if a.ndim == 1 and b.ndim == 2 and b.shape[1] == a.shape[0]:
        return
    raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} are not compatible")


# ---------------------------------------------------------------------------
# binary arithmetic

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "add")
    out = Tensor(a.data + b.data)

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, _reduce_to(a.shape, g))
        if b.requires_grad:
            _accumulate(b, _reduce_to(b.shape, g))

    return _record(out, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "sub")
    out = Tensor(a.data - b.data)

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, _reduce_to(a.shape, g))
        if b.requires_grad:
            _accumulate(b, _reduce_to(b.shape, -g))

    return _record(out, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Hadamard product (same shape, or scalar/row-vector broadcast)."""
    _check_broadcast(a, b, "mul")
    out = Tensor(a.data * b.data)

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, _reduce_to(a.shape, g * b.data))
        if b.requires_grad:
            _accumulate(b, _reduce_to(b.shape, g * a.data))

    return _record(out, (a, b), backward)


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply by a non-differentiable python constant."""
    c = float(c)
    out = Tensor(a.data * c)

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, g * c)

    return _record(out, (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: inner dimensions disagree, {a.shape} x {b.shape}")
    out = Tensor(a.data @ b.data)

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, g @ b.data.T)
        if b.requires_grad:
            _accumulate(b, a.data.T @ g)

    return _record(out, (a, b), backward)


# ---------------------------------------------------------------------------
# elementwise nonlinearities

def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.data, 0.0))

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            _accumulate(x, g * (x.data > 0.0))

    return _record(out, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    y = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))), np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))
    out = Tensor(y)

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            _accumulate(x, g * y * (1.0 - y))

    return _record(out, (x,), backward)


def log(x: Tensor) -> Tensor:
    with np.errstate(invalid="ignore", divide="ignore"):
        out = Tensor(np.log(x.data))

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            _accumulate(x, g / x.data)

    return _record(out, (x,), backward)


def clamp_min(x: Tensor, floor: float) -> Tensor:
    """max(x, floor); gradient passes only where x > floor."""
    out = Tensor(np.maximum(x.data, floor))

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            _accumulate(x, g * (x.data > floor))

    return _record(out, (x,), backward)


def square(x: Tensor) -> Tensor:
    out = Tensor(x.data * x.data)

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            _accumulate(x, g * 2.0 * x.data)

    return _record(out, (x,), backward)


# ---------------------------------------------------------------------------
# reductions and row-wise ops

def softmax(x: Tensor) -> Tensor:
    """Row-softmax of a 2-D tensor; every output row sums to 1."""
    if x.ndim != 2:
        raise DimensionError(f"softmax needs a 2-D tensor, got {x.shape}")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)
    out = Tensor(y)

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            dot = (g * y).sum(axis=1, keepdims=True)
            _accumulate(x, y * (g - dot))

    return _record(out, (x,), backward)


def row_mean(x: Tensor) -> Tensor:
    """Mean over rows of a 2-D tensor (axis 0), giving a 1-D vector.

    Columns are summed with math.fsum, so the result is bit-identical
    under any permutation of the input rows.
    """
    if x.ndim != 2:
        raise DimensionError(f"row_mean needs a 2-D tensor, got {x.shape}")
    n = x.shape[0]
    out = Tensor(np.array([math.fsum(col) for col in x.data.T]) / n)

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            _accumulate(x, np.broadcast_to(g / n, x.shape))

    return _record(out, (x,), backward)


def sum_all(x: Tensor) -> Tensor:
    out = Tensor(x.data.sum())

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            _accumulate(x, np.broadcast_to(g, x.shape))

    return _record(out, (x,), backward)


def frobenius_sq(x: Tensor) -> Tensor:
    """Sum of squared entries (squared Frobenius norm), as a 0-d tensor."""
    out = Tensor((x.data * x.data).sum())

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            _accumulate(x, g * 2.0 * x.data)

    return _record(out, (x,), backward)


def index_scalar(x: Tensor, i: int, j: int) -> Tensor:
    """Read entry (i, j) of a 2-D tensor as a 0-d tensor."""
    if x.ndim != 2:
        raise DimensionError(f"index_scalar needs a 2-D tensor, got {x.shape}")
    out = Tensor(x.data[i, j])

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            contrib = np.zeros(x.shape)
            contrib[i, j] = g
            _accumulate(x, contrib)

    return _record(out, (x,), backward)
