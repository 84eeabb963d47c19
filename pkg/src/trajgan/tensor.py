"""Reverse-mode automatic differentiation on float64 numpy arrays.

Gradients are computed by recording every differentiable operation on an
explicit tape (a Wengert list) and replaying it backwards.  The op set is
deliberately small: 2-D matmul, elementwise arithmetic with row/column
vector broadcasting, concat/slice/gather, row softmax, reductions, and the
handful of nonlinearities the models need.  There is no general
broadcasting and no dtype other than float64.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Operands have shapes the operation does not accept."""


class ContractError(RuntimeError):
    """An operation was called outside its contract (missing grad, non-scalar loss, ...)."""


class NumericError(ArithmeticError):
    """NaN or Inf produced while debug validation is enabled."""


_debug_checks = False


def set_debug_checks(enabled):
    """Validate every op output for NaN/Inf. Slow; meant for tests and debugging."""
    global _debug_checks
    _debug_checks = bool(enabled)


# ---------------------------------------------------------------------------
# Tape

class _Node:
    __slots__ = ("out", "inputs", "bwd")

    def __init__(self, out, inputs, bwd):
        self.out = out
        self.inputs = inputs
        self.bwd = bwd


class Tape:
    """Ordered record of operations, topologically sorted by construction.

    Use as a context manager; ops executed inside record themselves when any
    input requires grad.  Outside any tape (or inside ``no_grad``) ops run as
    plain numpy and produce constants.
    """

    def __init__(self):
        self.nodes = []

    def __len__(self):
        return len(self.nodes)

    def __enter__(self):
        _tape_stack.append(self)
        return self

    def __exit__(self, *exc):
        popped = _tape_stack.pop()
        assert popped is self
        return False


class no_grad:
    """Context manager that disables tape recording."""

    def __enter__(self):
        _tape_stack.append(None)
        return self

    def __exit__(self, *exc):
        _tape_stack.pop()
        return False


_tape_stack = []


def _active_tape():
    return _tape_stack[-1] if _tape_stack else None


# ---------------------------------------------------------------------------
# Tensor

class Tensor:
    """A float64 array plus the bookkeeping needed for reverse-mode autodiff.

    ``data`` is the value (row-major ndarray), ``grad`` accumulates gradients
    across backward calls until explicitly zeroed, ``node_id`` is the index of
    the tape entry that produced this tensor (None for leaves).
    """

    __slots__ = ("data", "requires_grad", "grad", "tape", "node_id")

    def __init__(self, data, requires_grad=False):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.tape = None
        self.node_id = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # operator sugar; scalars are folded into dedicated constant ops
    def __add__(self, other):
        return add_scalar(self, other) if _is_number(other) else add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add_scalar(self, -other) if _is_number(other) else sub(self, other)

    def __rsub__(self, other):
        return add_scalar(neg(self), other)

    def __mul__(self, other):
        return mul_scalar(self, other) if _is_number(other) else mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not _is_number(other):
            raise ShapeError("tensor division only supports scalar divisors")
        return mul_scalar(self, 1.0 / other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)


def _is_number(x):
    return isinstance(x, (int, float, np.integer, np.floating))


def constant(data):
    return Tensor(data, requires_grad=False)


def zeros(shape):
    return Tensor(np.zeros(shape), requires_grad=False)


def _make(data, inputs, bwd):
    """Wrap an op result, recording it on the active tape when grads flow."""
    if _debug_checks and not np.all(np.isfinite(data)):
        raise NumericError("non-finite value produced by an operation")
    out = Tensor(data, requires_grad=False)
    tape = _active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.tape = tape
        out.node_id = len(tape.nodes)
        tape.nodes.append(_Node(out, tuple(inputs), bwd))
    return out


# ---------------------------------------------------------------------------
# Broadcasting rules: same shape, scalar, or a 2-D operand against a
# (n,), (1,n) row or (m,1) column vector.  Anything else is rejected.

def _check_broadcast(sa, sb):
    if sa == sb:
        return
    pa, pb = int(np.prod(sa, dtype=np.int64)), int(np.prod(sb, dtype=np.int64))
    if pa == 1 or pb == 1:
        return
    if len(sa) == 2 and sb in ((sa[1],), (1, sa[1]), (sa[0], 1)):
        return
    if len(sb) == 2 and sa in ((sb[1],), (1, sb[1]), (sb[0], 1)):
        return
    raise ShapeError(f"cannot broadcast shapes {sa} and {sb}")


def _reduce_to(grad, shape):
    """Sum a broadcast gradient back down to the original operand shape."""
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] > 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def add(a, b):
    _check_broadcast(a.shape, b.shape)
    data = a.data + b.data

    def bwd(g):
        return _reduce_to(g, a.shape), _reduce_to(g, b.shape)

    return _make(data, (a, b), bwd)


def sub(a, b):
    _check_broadcast(a.shape, b.shape)
    data = a.data - b.data

    def bwd(g):
        return _reduce_to(g, a.shape), _reduce_to(-g, b.shape)

    return _make(data, (a, b), bwd)


def mul(a, b):
    _check_broadcast(a.shape, b.shape)
    data = a.data * b.data

    def bwd(g):
        return _reduce_to(g * b.data, a.shape), _reduce_to(g * a.data, b.shape)

    return _make(data, (a, b), bwd)


def neg(a):
    return _make(-a.data, (a,), lambda g: (-g,))


def add_scalar(a, s):
    s = float(s)
    return _make(a.data + s, (a,), lambda g: (g,))


def mul_scalar(a, s):
    s = float(s)
    return _make(a.data * s, (a,), lambda g: (g * s,))


def matmul(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul requires 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def bwd(g):
        return g @ b.data.T, a.data.T @ g

    return _make(data, (a, b), bwd)


def transpose(a):
    if a.data.ndim != 2:
        raise ShapeError(f"transpose requires a 2-D tensor, got {a.shape}")
    return _make(a.data.T.copy(), (a,), lambda g: (g.T,))


def concat(tensors, axis=0):
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("concat of an empty sequence")
    nd = tensors[0].data.ndim
    if any(t.data.ndim != nd for t in tensors) or not 0 <= axis < nd:
        raise ShapeError(
            f"concat axis {axis} invalid for shapes {[t.shape for t in tensors]}")
    ref = list(tensors[0].shape)
    for t in tensors:
        s = list(t.shape)
        s[axis] = ref[axis]
        if s != ref:
            raise ShapeError(f"concat shapes incompatible: {[t.shape for t in tensors]}")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]

    def bwd(g):
        outs, start = [], 0
        for n in sizes:
            idx = [slice(None)] * nd
            idx[axis] = slice(start, start + n)
            outs.append(g[tuple(idx)])
            start += n
        return tuple(outs)

    return _make(data, tuple(tensors), bwd)


def narrow(a, axis, start, length):
    """Contiguous slice [start, start+length) along one axis."""
    nd = a.data.ndim
    if not 0 <= axis < nd:
        raise ShapeError(f"narrow axis {axis} invalid for shape {a.shape}")
    if start < 0 or length < 1 or start + length > a.shape[axis]:
        raise ShapeError(f"narrow [{start}:{start + length}) out of range for shape {a.shape}")
    idx = [slice(None)] * nd
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)

    def bwd(g):
        full = np.zeros_like(a.data)
        full[idx] = g
        return (full,)

    return _make(a.data[idx].copy(), (a,), bwd)


def take_rows(a, indices):
    """Gather rows of a 2-D tensor; rows may repeat. Backward scatter-adds."""
    if a.data.ndim != 2:
        raise ShapeError(f"take_rows requires a 2-D tensor, got {a.shape}")
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1 or (idx.size and (idx.min() < 0 or idx.max() >= a.shape[0])):
        raise ShapeError(f"take_rows indices out of range for shape {a.shape}")

    def bwd(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        return (full,)

    return _make(a.data[idx].copy(), (a,), bwd)


def blockwise_max(a, block):
    """Elementwise max over consecutive row blocks: (m*block, n) -> (m, n).

    Backward routes each gradient entry to the first row attaining the max
    within its block.
    """
    if a.data.ndim != 2:
        raise ShapeError(f"blockwise_max requires a 2-D tensor, got {a.shape}")
    rows, cols = a.shape
    if block < 1 or rows % block != 0:
        raise ShapeError(f"block size {block} does not divide row count {rows}")
    m = rows // block
    r = a.data.reshape(m, block, cols)
    amax = r.argmax(axis=1)
    data = np.take_along_axis(r, amax[:, None, :], axis=1)[:, 0, :]

    def bwd(g):
        full = np.zeros((m, block, cols))
        np.put_along_axis(full, amax[:, None, :], g[:, None, :], axis=1)
        return (full.reshape(rows, cols),)

    return _make(data, (a,), bwd)


def tsum(a, axis=None, keepdims=False):
    if axis is None:
        data = a.data.sum()

        def bwd(g):
            return (np.broadcast_to(g, a.shape).copy(),)
    else:
        data = a.data.sum(axis=axis, keepdims=keepdims)

        def bwd(g):
            if not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, a.shape).copy(),)

    return _make(data, (a,), bwd)


def tmean(a, axis=None, keepdims=False):
    n = a.data.size if axis is None else a.shape[axis]
    if n == 0:
        raise ShapeError("mean of an empty tensor")
    return mul_scalar(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


# ---------------------------------------------------------------------------
# Nonlinearities.  Kinked ops take their subgradient from the positive branch.

def relu(a):
    mask = a.data >= 0.0

    def bwd(g):
        return (g * mask,)

    return _make(np.where(mask, a.data, 0.0), (a,), bwd)


def leaky_relu(a, slope=0.2):
    slope = float(slope)
    mask = a.data >= 0.0

    def bwd(g):
        return (g * np.where(mask, 1.0, slope),)

    return _make(np.where(mask, a.data, slope * a.data), (a,), bwd)


def tanh(a):
    out = np.tanh(a.data)

    def bwd(g):
        return (g * (1.0 - out * out),)

    return _make(out, (a,), bwd)


def sigmoid(a):
    # numerically stable two-sided form
    x = a.data
    out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                   np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def bwd(g):
        return (g * out * (1.0 - out),)

    return _make(out, (a,), bwd)


def exp(a):
    out = np.exp(a.data)

    def bwd(g):
        return (g * out,)

    return _make(out, (a,), bwd)


def log(a):
    def bwd(g):
        return (g / a.data,)

    return _make(np.log(a.data), (a,), bwd)


def sqrt(a):
    out = np.sqrt(a.data)

    def bwd(g):
        return (g * 0.5 / out,)

    return _make(out, (a,), bwd)


def powf(a, p):
    p = float(p)
    out = a.data ** p

    def bwd(g):
        return (g * p * a.data ** (p - 1.0),)

    return _make(out, (a,), bwd)


def clamp_min(a, lo):
    lo = float(lo)
    mask = a.data >= lo

    def bwd(g):
        return (g * mask,)

    return _make(np.maximum(a.data, lo), (a,), bwd)


ACTIVATIONS = ("relu", "leaky_relu", "tanh", "sigmoid")


def activation(a, kind, slope=0.2):
    """Apply one of the supported nonlinearities by name."""
    if kind == "relu":
        return relu(a)
    if kind == "leaky_relu":
        return leaky_relu(a, slope)
    if kind == "tanh":
        return tanh(a)
    if kind == "sigmoid":
        return sigmoid(a)
    raise ValueError(f"unknown activation kind {kind!r}; expected one of {ACTIVATIONS}")


def softmax_rows(a):
    """Row-wise softmax of a 2-D tensor; each output row sums to 1."""
    if a.data.ndim != 2:
        raise ShapeError(f"softmax_rows requires a 2-D tensor, got {a.shape}")
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)

    def bwd(g):
        dot = (g * out).sum(axis=1, keepdims=True)
        return (out * (g - dot),)

    return _make(out, (a,), bwd)


# ---------------------------------------------------------------------------
# Backward

def backward(loss):
    """Propagate d(loss)/d(tensor) to every requires_grad tensor reachable
    from ``loss``.  Gradients accumulate across calls until zeroed.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward requires a scalar loss, got shape {loss.shape}")
    seed = np.ones_like(loss.data)
    tape = loss.tape
    if tape is None:
        # constant or bare leaf; nothing upstream of it
        if loss.requires_grad:
            loss.grad = seed if loss.grad is None else loss.grad + seed
        return
    pending = {id(loss): seed}
    for node in reversed(tape.nodes[: loss.node_id + 1]):
        g = pending.pop(id(node.out), None)
        if g is None:
            continue
        if node.out.requires_grad:
            node.out.grad = g.copy() if node.out.grad is None else node.out.grad + g
        for t, ig in zip(node.inputs, node.bwd(g)):
            if ig is None or not t.requires_grad:
                continue
            if t.tape is tape and t.node_id is not None:
                key = id(t)
                if key in pending:
                    pending[key] = pending[key] + ig
                else:
                    pending[key] = ig
            else:
                t.grad = ig.copy() if t.grad is None else t.grad + ig
