"""A small dense reverse-mode autodiff engine over 2-D float64 arrays.

Operations record themselves on the active :class:`Tape` (entered with
``with Tape() as tape:``) whenever one of their inputs requires a gradient.
Recording order is creation order, which is already topological, so
``backward`` simply walks the tape in reverse and accumulates parent
gradients by summation in that order.
"""
from __future__ import annotations

import threading
from typing import Callable, Iterable, Sequence

import numpy as np

from tact.errors import ContractViolation, NumericError, ShapeError

_state = threading.local()


class Tensor:
    __slots__ = ("data", "requires_grad", "name", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got shape {arr.shape}")
        self.data = arr
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def item(self) -> float:
        if self.data.shape != (1, 1):
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        tag = f" {self.name}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        if isinstance(other, (int, float)):
            return add_scalar(self, float(other))
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            return add_scalar(self, -float(other))
        return add(self, scale(other, -1.0))

    def __neg__(self):
        return scale(self, -1.0)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return hadamard(self, other)

    __rmul__ = __mul__


def const(data) -> Tensor:
    return data if isinstance(data, Tensor) else Tensor(data)


class _Node:
    __slots__ = ("out", "parents", "backward")

    def __init__(self, out: Tensor, parents: tuple[Tensor, ...], backward):
        self.out = out
        self.parents = parents
        self.backward = backward


class Tape:
    """Ordered record of operations; single-threaded, one per worker."""

    def __init__(self):
        self.nodes: list[_Node] = []
        self._prev = None

    def __enter__(self) -> "Tape":
        self._prev = getattr(_state, "tape", None)
        _state.tape = self
        return self

    def __exit__(self, *exc):
        _state.tape = self._prev
        self._prev = None
        return False

    def __len__(self) -> int:
        return len(self.nodes)


def active_tape() -> Tape | None:
    return getattr(_state, "tape", None)


def _result(op: str, value: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    if not np.isfinite(value).all():
        raise NumericError(f"non-finite value produced by {op}")
    needs = any(p.requires_grad for p in parents)
    out = Tensor.__new__(Tensor)
    out.data = value
    out.name = None
    tape = active_tape()
    out.requires_grad = needs and tape is not None
    if out.requires_grad:
        tape.nodes.append(_Node(out, parents, backward))
    return out


def _check_same(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# ---------------------------------------------------------------- primitives


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shape mismatch {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    return _result("matmul", ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g))


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    _check_same("hadamard", a, b)
    ad, bd = a.data, b.data
    return _result("hadamard", ad * bd, (a, b), lambda g: (g * bd, g * ad))


def add(*ts: Tensor) -> Tensor:
    if not ts:
        raise ContractViolation("add needs at least one tensor")
    for t in ts[1:]:
        _check_same("add", ts[0], t)
    value = ts[0].data.copy()
    for t in ts[1:]:
        value += t.data
    return _result("add", value, tuple(ts), lambda g: tuple(g for _ in ts))


def scale(a: Tensor, c: float) -> Tensor:
    return _result("scale", a.data * c, (a,), lambda g: (g * c,))


def add_scalar(a: Tensor, c: float) -> Tensor:
    return _result("add_scalar", a.data + c, (a,), lambda g: (g,))


def concat_cols(*ts: Tensor) -> Tensor:
    if not ts:
        raise ContractViolation("concat_cols needs at least one tensor")
    rows = ts[0].shape[0]
    for t in ts:
        if t.shape[0] != rows:
            raise ShapeError(f"concat_cols: row mismatch {ts[0].shape} vs {t.shape}")
    widths = np.cumsum([0] + [t.shape[1] for t in ts])

    def back(g):
        return tuple(g[:, widths[i] : widths[i + 1]] for i in range(len(ts)))

    return _result("concat_cols", np.concatenate([t.data for t in ts], axis=1), tuple(ts), back)


def relu(x: Tensor) -> Tensor:
    active = x.data > 0  # relu'(0) = 0
    return _result("relu", np.where(active, x.data, 0.0), (x,), lambda g: (g * active,))


def mean_rows(m: Tensor) -> Tensor:
    n = m.shape[0]
    if n == 0:
        raise ShapeError("mean_rows of an empty matrix")
    return _result(
        "mean_rows",
        m.data.mean(axis=0, keepdims=True),
        (m,),
        lambda g: (np.repeat(g / n, n, axis=0),),
    )


def sum_all(m: Tensor) -> Tensor:
    shape = m.shape
    return _result("sum_all", np.array([[m.data.sum()]]), (m,), lambda g: (np.full(shape, g[0, 0]),))


def transpose(m: Tensor) -> Tensor:
    return _result("transpose", m.data.T.copy(), (m,), lambda g: (g.T,))


def masked_softmax(scores: Tensor, mask) -> Tensor:
    """Row-wise softmax restricted to ``mask``; rows with an empty mask are zero."""
    mask = np.asarray(mask, dtype=bool).reshape(scores.shape) if np.ndim(mask) else None
    if mask is None or mask.shape != scores.shape:
        raise ShapeError(f"masked_softmax: mask shape does not match {scores.shape}")
    s = np.where(mask, scores.data, -np.inf)
    top = s.max(axis=1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    e = np.where(mask, np.exp(s - top), 0.0)
    z = e.sum(axis=1, keepdims=True)
    y = np.divide(e, z, out=np.zeros_like(e), where=z > 0)

    def back(g):
        inner = (g * y).sum(axis=1, keepdims=True)
        return (y * (g - inner),)

    return _result("masked_softmax", y, (scores,), back)


def gather_rows(m: Tensor, index) -> Tensor:
    idx = np.asarray(index, dtype=np.int64).reshape(-1)
    rows, cols = m.shape
    if idx.size and (idx.min() < 0 or idx.max() >= rows):
        raise ShapeError(f"gather_rows: index out of range for {m.shape}")

    def back(g):
        out = np.zeros((rows, cols))
        np.add.at(out, idx, g)
        return (out,)

    return _result("gather_rows", m.data[idx], (m,), back)


def index_row(m: Tensor, i: int) -> Tensor:
    return gather_rows(m, [i])


def scatter_rows(m: Tensor, index, n_out: int, coef=None) -> Tensor:
    """``out[index[j]] += coef[j] * m[j]`` into an ``n_out``-row matrix."""
    idx = np.asarray(index, dtype=np.int64).reshape(-1)
    if idx.shape[0] != m.shape[0]:
        raise ShapeError(f"scatter_rows: {idx.shape[0]} indices for {m.shape[0]} rows")
    if idx.size and (idx.min() < 0 or idx.max() >= n_out):
        raise ShapeError(f"scatter_rows: index out of range for {n_out} rows")
    c = None if coef is None else np.asarray(coef, dtype=np.float64).reshape(-1, 1)
    src = m.data if c is None else m.data * c
    out = np.zeros((n_out, m.shape[1]))
    np.add.at(out, idx, src)

    def back(g):
        gm = g[idx]
        return (gm if c is None else gm * c,)

    return _result("scatter_rows", out, (m,), back)


# ---------------------------------------------------------------- backward


def backward(tape: Tape, loss: Tensor, params: Iterable[Tensor] | None = None) -> dict[Tensor, np.ndarray]:
    """Gradients of the 1x1 ``loss`` for every leaf reached on ``tape``.

    With ``params`` given, the result has exactly those keys (zeros for
    parameters the loss does not depend on).
    """
    if loss.shape != (1, 1):
        raise ContractViolation(f"backward needs a 1x1 loss, got {loss.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
    interior = {id(n.out) for n in tape.nodes}
    leaves: dict[int, Tensor] = {}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node.out), None)
        if g is None:
            continue
        for parent, pg in zip(node.parents, node.backward(g)):
            if not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = np.array(pg, dtype=np.float64)
            if key not in interior:
                leaves[key] = parent
    out = {leaves[k]: grads[k] for k in leaves}
    if params is not None:
        out = {p: out.get(p, np.zeros_like(p.data)) for p in params}
    return out


def grad_check(
    closure: Callable[[], Tensor],
    params: Sequence[Tensor],
    eps: float = 1e-5,
    coords: int = 50,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Up to ``coords`` coordinates per parameter are checked (all of them when
    the parameter is smaller). Relative error uses
    ``max(|analytic|, |numeric|, 1e-8)`` as denominator.
    """
    with Tape() as tape:
        loss = closure()
    if loss.requires_grad:
        analytic = backward(tape, loss, params)
    else:
        analytic = {p: np.zeros_like(p.data) for p in params}
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p in params:
        flat = p.data.reshape(-1)
        n = flat.size
        picks = np.arange(n) if n <= coords else rng.choice(n, size=coords, replace=False)
        a_flat = analytic[p].reshape(-1)
        for i in picks:
            orig = flat[i]
            flat[i] = orig + eps
            fp = closure().item()
            flat[i] = orig - eps
            fm = closure().item()
            flat[i] = orig
            num = (fp - fm) / (2 * eps)
            a = a_flat[i]
            err = abs(a - num) / max(abs(a), abs(num), 1e-8)
            worst = max(worst, err)
    return worst


def sum_unordered(*ts: Tensor) -> Tensor:
    """Elementwise sum whose value does not depend on argument order.

    Terms are sorted per element before accumulating, so any permutation of
    the arguments gives a bit-identical result.
    """
    if not ts:
        raise ContractViolation("sum_unordered needs at least one tensor")
    for t in ts[1:]:
        _check_same("sum_unordered", ts[0], t)
    stacked = np.sort(np.stack([t.data for t in ts]), axis=0)
    value = stacked[0].copy()
    for layer in stacked[1:]:
        value += layer
    return _result("sum_unordered", value, tuple(ts), lambda g: tuple(g for _ in ts))
