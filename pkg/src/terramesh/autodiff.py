"""Small reverse-mode autodiff over float64 numpy arrays.

A :class:`Tape` records every operation in creation order; ``backward`` walks
it once in reverse. Operands must have identical shapes, or one of them is a
scalar, or one matches the other's trailing shape (a broadcast over the
leading batch axis, e.g. adding a bias row to an ``(n, k)`` matrix).
"""
from __future__ import annotations

import itertools

import numpy as np
import scipy.sparse as sp


class ShapeError(ValueError):
    pass


class TapeError(RuntimeError):
    pass


class Var:
    __slots__ = ("value", "grad", "node_id", "tape", "requires_grad", "parents", "backward_fn", "op")

    def __init__(self, value, tape, node_id, requires_grad, parents=(), backward_fn=None, op="leaf"):
        self.value = value
        self.grad = None
        self.node_id = node_id
        self.tape = tape
        self.requires_grad = requires_grad
        self.parents = parents
        self.backward_fn = backward_fn
        self.op = op

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var(op={self.op}, shape={self.value.shape}, id={self.node_id})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


class Tape:
    """Records operations; single use."""

    _ids = itertools.count()

    def __init__(self):
        self.nodes = []
        self.used = False
        self.tape_id = next(Tape._ids)

    def _push(self, value, requires_grad, parents=(), backward_fn=None, op="leaf"):
        if self.used:
            raise TapeError("tape already consumed by backward(); record on a fresh tape")
        v = Var(value, self, len(self.nodes), requires_grad, parents, backward_fn, op)
        self.nodes.append(v)
        return v

    def leaf(self, value):
        """Differentiable input. float64 arrays are wrapped without copying."""
        return self._push(np.asarray(value, dtype=np.float64), True)

    def constant(self, value):
        return self._push(np.asarray(value, dtype=np.float64), False, op="const")

    def record(self, op, value, parents, backward_fn):
        """Append an op result. ``backward_fn(g)`` returns one gradient (or None) per parent."""
        for p in parents:
            if p.tape is not self:
                raise TapeError(f"{op}: operand recorded on a different tape")
        needs = any(p.requires_grad for p in parents)
        return self._push(value, needs, tuple(parents), backward_fn if needs else None, op)

    def backward(self, root):
        if root.tape is not self:
            raise TapeError("root belongs to another tape")
        if self.used:
            raise TapeError("backward() already ran on this tape")
        if root.value.size != 1:
            raise ShapeError(f"backward needs a scalar root, got shape {root.value.shape}")
        self.used = True
        grads = {root.node_id: np.ones_like(root.value)}
        for node in reversed(self.nodes[: root.node_id + 1]):
            g = grads.get(node.node_id)
            if g is None or not node.requires_grad:
                continue
            node.grad = g
            if node.backward_fn is None:
                continue
            for parent, pg in zip(node.parents, node.backward_fn(g)):
                if pg is None or not parent.requires_grad:
                    continue
                acc = grads.get(parent.node_id)
                grads[parent.node_id] = pg if acc is None else acc + pg


def backward(root):
    root.tape.backward(root)


def _tape_of(*xs):
    tape = None
    for x in xs:
        if isinstance(x, Var):
            if tape is None:
                tape = x.tape
            elif x.tape is not tape:
                raise TapeError("operands recorded on different tapes")
    if tape is None:
        raise TapeError("at least one operand must be a Var")
    return tape


def _wrap(x, tape):
    return x if isinstance(x, Var) else tape.constant(x)


def _broadcast_kind(op, a, b):
    if a.shape == b.shape:
        return "same"
    if b.ndim == 0 or (b.size == 1 and b.ndim <= 1):
        return "b_scalar"
    if a.ndim == 0 or (a.size == 1 and a.ndim <= 1):
        return "a_scalar"
    if a.ndim == b.ndim + 1 and a.shape[1:] == b.shape:
        return "b_batch"
    if b.ndim == a.ndim + 1 and b.shape[1:] == a.shape:
        return "a_batch"
    raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


def _reduce_to(g, shape):
    if g.shape == shape:
        return g
    if len(shape) == 0 or int(np.prod(shape)) == 1:
        return np.full(shape, g.sum())
    return g.sum(axis=0).reshape(shape)


def _binary(op, a, b, fwd, da, db):
    tape = _tape_of(a, b)
    a, b = _wrap(a, tape), _wrap(b, tape)
    _broadcast_kind(op, a.value, b.value)
    av, bv = a.value, b.value
    out = fwd(av, bv)

    def back(g):
        return _reduce_to(da(g, av, bv), av.shape), _reduce_to(db(g, av, bv), bv.shape)

    return tape.record(op, out, (a, b), back)


def add(a, b):
    return _binary("add", a, b, np.add, lambda g, x, y: g, lambda g, x, y: g)


def sub(a, b):
    return _binary("subtract", a, b, np.subtract, lambda g, x, y: g, lambda g, x, y: -g)


def mul(a, b):
    return _binary("multiply", a, b, np.multiply, lambda g, x, y: g * y, lambda g, x, y: g * x)


def matmul(a, b):
    tape = _tape_of(a, b)
    a, b = _wrap(a, tape), _wrap(b, tape)
    av, bv = a.value, b.value
    if av.ndim != 2 or bv.ndim != 2 or av.shape[1] != bv.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {av.shape} and {bv.shape}")
    return tape.record("matmul", av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def _unary(op, a, out, deriv):
    return a.tape.record(op, out, (a,), lambda g: (g * deriv,))


def relu(a):
    mask = a.value > 0
    return _unary("relu", a, np.where(mask, a.value, 0.0), mask.astype(np.float64))


def absolute(a):
    return _unary("abs", a, np.abs(a.value), np.sign(a.value))


def sqrt(a):
    """Square root; the derivative at exactly zero is taken as zero."""
    if np.any(a.value < 0):
        raise ValueError("sqrt of a negative entry")
    out = np.sqrt(a.value)
    safe = out > 1e-12
    deriv = np.where(safe, 0.5 / np.where(safe, out, 1.0), 0.0)
    return _unary("sqrt", a, out, deriv)


def scale(a, c):
    c = float(c)
    return a.tape.record("scale", a.value * c, (a,), lambda g: (g * c,))


def sum(a, axis=None):  # noqa: A001 - mirrors numpy
    shape = a.value.shape

    def back(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return a.tape.record("sum", np.asarray(a.value.sum(axis=axis)), (a,), back)


def mean(a, axis=None):
    count = a.value.size if axis is None else a.value.shape[axis]
    if count == 0:
        raise ShapeError("mean over an empty axis")
    return scale(sum(a, axis=axis), 1.0 / count)


def concat(xs, axis=-1):
    tape = _tape_of(*xs)
    xs = [_wrap(x, tape) for x in xs]
    ref = xs[0].value
    ax = axis % ref.ndim
    for x in xs[1:]:
        if x.value.ndim != ref.ndim or x.value.shape[:ax] + x.value.shape[ax + 1:] != ref.shape[:ax] + ref.shape[ax + 1:]:
            raise ShapeError(f"concat: incompatible shapes {ref.shape} and {x.value.shape}")
    sizes = [x.value.shape[ax] for x in xs]
    splits = np.cumsum(sizes)[:-1]
    out = np.concatenate([x.value for x in xs], axis=ax)
    return tape.record("concat", out, tuple(xs), lambda g: tuple(np.split(g, splits, axis=ax)))


def gather(a, index, axis=0):
    """Index select along ``axis``; repeated indices accumulate in backward."""
    index = np.asarray(index, dtype=np.int64)
    if index.size and (index.min() < -a.value.shape[axis] or index.max() >= a.value.shape[axis]):
        raise ShapeError(f"gather: index out of range for axis of size {a.value.shape[axis]}")
    shape = a.value.shape
    out = np.take(a.value, index, axis=axis)

    def back(g):
        full = np.zeros(shape)
        moved = np.moveaxis(full, axis, 0)
        np.add.at(moved, index, np.moveaxis(g, axis, 0) if index.ndim == 1 else g)
        return (full,)

    return a.tape.record("gather", out, (a,), back)


def reshape(a, shape):
    src = a.value.shape
    return a.tape.record("reshape", a.value.reshape(shape), (a,), lambda g: (g.reshape(src),))


def min_index(a, axis=-1):
    """Minimum along ``axis`` plus the argmin; the index is a constant for backward."""
    idx = np.argmin(a.value, axis=axis)
    out = np.take_along_axis(a.value, np.expand_dims(idx, axis), axis=axis).squeeze(axis)
    shape = a.value.shape

    def back(g):
        full = np.zeros(shape)
        np.put_along_axis(full, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis=axis)
        return (full,)

    return a.tape.record("min_index", out, (a,), back), idx


def norm_rows(a):
    """Euclidean norm of each row; rows with norm below 1e-12 get zero gradient."""
    v = a.value
    if v.ndim != 2:
        raise ShapeError(f"norm_rows expects a matrix, got {v.shape}")
    n = np.sqrt(np.einsum("ij,ij->i", v, v))
    safe = n >= 1e-12
    inv = np.where(safe, 1.0 / np.where(safe, n, 1.0), 0.0)
    return a.tape.record("norm_rows", n, (a,), lambda g: ((g * inv)[:, None] * v,))


def spmm(m, x):
    """Constant (sparse or dense) matrix times a Var."""
    if m.shape[1] != x.value.shape[0]:
        raise ShapeError(f"spmm: incompatible shapes {m.shape} and {x.value.shape}")
    mt = m.T.tocsr() if sp.issparse(m) else m.T
    out = np.asarray(m @ x.value)
    return x.tape.record("spmm", out, (x,), lambda g: (np.asarray(mt @ g),))


OPS = {
    "add": add,
    "subtract": sub,
    "multiply": mul,
    "matmul": matmul,
    "relu": relu,
    "abs": absolute,
    "sqrt": sqrt,
    "sum": sum,
    "mean": mean,
    "concat": lambda *xs, axis=-1: concat(xs, axis=axis),
    "gather": gather,
    "scale": scale,
    "min_index": min_index,
    "reshape": reshape,
    "norm_rows": norm_rows,
}


def forward_op(kind, *inputs, **kwargs):
    try:
        fn = OPS[kind]
    except KeyError:
        raise ValueError(f"unknown op kind {kind!r}") from None
    return fn(*inputs, **kwargs)
