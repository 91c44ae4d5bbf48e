"""Dense float64 tensors with reverse-mode autodiff on an explicit tape.

The tape is rebuilt every training step: ops executed while a ``Tape`` is
active append one node each, and ``Tape.backward`` replays the nodes in
exact reverse append order. Parameters are plain ``Tensor`` objects with
``requires_grad=True`` that outlive any tape. Fused kernels (``gru_step``,
``attend``, ``masked_max``, the softmax family) keep tapes short enough
for pure-Python dispatch to stay off the critical path.

Every forward op validates that its output is finite; NaN/Inf raises
``NonFiniteError`` instead of propagating silently.
"""

from __future__ import annotations

import os
from contextlib import contextmanager

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import numpy as np

try:
    # the workload is all small GEMMs; BLAS thread fan-out only adds latency.
    # the limiter object must stay referenced or the limit is rolled back.
    from threadpoolctl import threadpool_limits

    _BLAS_SINGLE_THREAD = threadpool_limits(limits=1, user_api="blas")
except Exception:  # pragma: no cover - threadpoolctl is optional
    _BLAS_SINGLE_THREAD = None

__all__ = [
    "Tensor",
    "Tape",
    "DimensionError",
    "DegenerateInputError",
    "NonFiniteError",
    "no_grad",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "maximum",
    "tsum",
    "tmean",
    "exp",
    "log",
    "sqrt",
    "tanh",
    "sigmoid",
    "reshape",
    "concat",
    "stack",
    "slice_axis",
    "take_rows",
    "gather",
    "softmax",
    "log_softmax",
    "scaled_softmax",
    "cosine",
    "gru_step",
    "attend",
    "masked_max",
]


class DimensionError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class DegenerateInputError(ValueError):
    """Structurally valid input that is mathematically degenerate (zero norm, empty)."""


class NonFiniteError(FloatingPointError):
    """A forward operation produced NaN or Inf."""


def _as_f64(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _check_finite(data: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"{op} produced non-finite values")


class Tensor:
    """Dense float64 array that can participate in gradient recording.

    ``grad`` is allocated lazily by the backward pass; ``tape_id`` is the
    index of the producing node in the tape that recorded this tensor
    (None for leaves and for tensors built outside any tape).
    """

    __slots__ = ("data", "grad", "requires_grad", "tape_id")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_f64(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.tape_id: int | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _scalar_error()

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # arithmetic sugar; full contracts live on the module-level functions
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

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def _scalar_error():
    raise DimensionError("item() requires a single-element tensor")


class _Node:
    __slots__ = ("out", "inputs", "bwd")

    def __init__(self, out: Tensor, inputs: tuple[Tensor, ...], bwd):
        self.out = out
        self.inputs = inputs
        self.bwd = bwd


_ACTIVE: Tape | None = None


class Tape:
    """Ordered record of differentiable operations.

    Used as a context manager; ops executed inside the block are recorded.
    ``backward`` walks the record once, strictly in reverse append order,
    and returns the number of nodes visited (for conservation checks).
    """

    def __init__(self):
        self.nodes: list[_Node] = []
        self._prev: Tape | None = None

    def __enter__(self) -> "Tape":
        global _ACTIVE
        self._prev = _ACTIVE
        _ACTIVE = self
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        global _ACTIVE
        _ACTIVE = self._prev
        return False

    def __len__(self) -> int:
        return len(self.nodes)

    def backward(self, root: Tensor) -> int:
        if root.data.size != 1:
            raise DimensionError("backward root must be a scalar")
        if root.grad is None:
            root.grad = np.ones_like(root.data)
        visited = 0
        for node in reversed(self.nodes):
            og = node.out.grad
            if og is None:
                continue
            visited += 1
            grads = node.bwd(og)
            for t, g in zip(node.inputs, grads):
                if g is None or not t.requires_grad:
                    continue
                if t.grad is None:
                    # own the buffer: copy views and pass-through references
                    t.grad = g.copy() if (g is og or g.base is not None) else g
                else:
                    t.grad += g
        return visited

    def clear(self) -> None:
        self.nodes.clear()


@contextmanager
def no_grad():
    """Temporarily suspend recording on the active tape."""
    global _ACTIVE
    prev, _ACTIVE = _ACTIVE, None
    try:
        yield
    finally:
        _ACTIVE = prev


def _record(out: Tensor, inputs: tuple[Tensor, ...], bwd) -> Tensor:
    tape = _ACTIVE
    if tape is not None and any(i.requires_grad for i in inputs):
        out.requires_grad = True
        out.tape_id = len(tape.nodes)
        tape.nodes.append(_Node(out, inputs, bwd))
    return out


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back to the shape of its source operand."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise and linear algebra


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.data + b.data)
    _check_finite(out.data, "add")

    def bwd(og):
        return _unbroadcast(og, a.data.shape), _unbroadcast(og, b.data.shape)

    return _record(out, (a, b), bwd)


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.data - b.data)
    _check_finite(out.data, "sub")

    def bwd(og):
        return _unbroadcast(og, a.data.shape), _unbroadcast(-og, b.data.shape)

    return _record(out, (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.data * b.data)
    _check_finite(out.data, "mul")

    def bwd(og):
        return (
            _unbroadcast(og * b.data, a.data.shape),
            _unbroadcast(og * a.data, b.data.shape),
        )

    return _record(out, (a, b), bwd)


def div(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = Tensor(a.data / b.data)
    _check_finite(out.data, "div")

    def bwd(og):
        return (
            _unbroadcast(og / b.data, a.data.shape),
            _unbroadcast(-og * a.data / (b.data * b.data), b.data.shape),
        )

    return _record(out, (a, b), bwd)


def neg(a: Tensor) -> Tensor:
    out = Tensor(-a.data)

    def bwd(og):
        return (-og,)

    return _record(out, (a,), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Strict 2-D matrix product; inner dimensions must agree."""
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise DimensionError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    out = Tensor(a.data @ b.data)
    _check_finite(out.data, "matmul")

    def bwd(og):
        return og @ b.data.T, a.data.T @ og

    return _record(out, (a, b), bwd)


def maximum(a: Tensor, b: Tensor) -> Tensor:
    """Element-wise max. Subgradient routes each element to the argmax input;
    exact ties route to the first argument."""
    a, b = _wrap(a), _wrap(b)
    if a.data.shape != b.data.shape:
        raise DimensionError(f"maximum expects identical shapes, got {a.shape} vs {b.shape}")
    first = a.data >= b.data
    out = Tensor(np.where(first, a.data, b.data))
    _check_finite(out.data, "maximum")

    def bwd(og):
        return og * first, og * ~first

    return _record(out, (a, b), bwd)


def tsum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = Tensor(x.data.sum(axis=axis, keepdims=keepdims))

    def bwd(og):
        g = og
        if axis is not None and not keepdims:
            g = np.expand_dims(og, axis)
        return (np.broadcast_to(g, x.data.shape),)

    return _record(out, (x,), bwd)


def tmean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = Tensor(x.data.mean(axis=axis, keepdims=keepdims))
    n = x.data.size / out.data.size

    def bwd(og):
        g = og
        if axis is not None and not keepdims:
            g = np.expand_dims(og, axis)
        return (np.broadcast_to(g, x.data.shape) / n,)

    return _record(out, (x,), bwd)


def exp(x: Tensor) -> Tensor:
    out = Tensor(np.exp(x.data))
    _check_finite(out.data, "exp")

    def bwd(og):
        return (og * out.data,)

    return _record(out, (x,), bwd)


def log(x: Tensor) -> Tensor:
    with np.errstate(divide="ignore", invalid="ignore"):
        out = Tensor(np.log(x.data))
    _check_finite(out.data, "log")

    def bwd(og):
        return (og / x.data,)

    return _record(out, (x,), bwd)


def sqrt(x: Tensor) -> Tensor:
    out = Tensor(np.sqrt(x.data))
    _check_finite(out.data, "sqrt")

    def bwd(og):
        return (og * 0.5 / out.data,)

    return _record(out, (x,), bwd)


def tanh(x: Tensor) -> Tensor:
    out = Tensor(np.tanh(x.data))

    def bwd(og):
        return (og * (1.0 - out.data * out.data),)

    return _record(out, (x,), bwd)


def _sigmoid_raw(x: np.ndarray) -> np.ndarray:
    # tanh form: numpy's vectorized tanh is several times faster than
    # its float64 exp on this stack, and it cannot overflow
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(x: Tensor) -> Tensor:
    out = Tensor(_sigmoid_raw(x.data))

    def bwd(og):
        return (og * out.data * (1.0 - out.data),)

    return _record(out, (x,), bwd)


# ---------------------------------------------------------------------------
# shape manipulation


def reshape(x: Tensor, shape) -> Tensor:
    out = Tensor(x.data.reshape(shape))

    def bwd(og):
        return (og.reshape(x.data.shape),)

    return _record(out, (x,), bwd)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = tuple(tensors)
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(og):
        return tuple(np.split(og, splits, axis=axis))

    return _record(out, tensors, bwd)


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = tuple(tensors)
    out = Tensor(np.stack([t.data for t in tensors], axis=axis))

    def bwd(og):
        return tuple(np.moveaxis(og, axis, 0))

    return _record(out, tensors, bwd)


def slice_axis(x: Tensor, axis: int, start: int, stop: int) -> Tensor:
    idx = [slice(None)] * x.data.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    out = Tensor(x.data[idx])

    def bwd(og):
        g = np.zeros_like(x.data)
        g[idx] = og
        return (g,)

    return _record(out, (x,), bwd)


def take_rows(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup (embedding gather); duplicate ids accumulate in backward."""
    ids = np.asarray(ids)
    out = Tensor(table.data[ids])

    def bwd(og):
        g = np.zeros_like(table.data)
        np.add.at(g, ids, og)
        return (g,)

    return _record(out, (table,), bwd)


def gather(x: Tensor, idx: np.ndarray) -> Tensor:
    """Pick entries along the last axis at constant integer positions."""
    idx = np.asarray(idx)
    out = Tensor(np.take_along_axis(x.data, idx, axis=-1))

    def bwd(og):
        g = np.zeros_like(x.data)
        np.put_along_axis(g, idx, og, axis=-1)
        return (g,)

    return _record(out, (x,), bwd)


# ---------------------------------------------------------------------------
# softmax family


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    m = x.data.max(axis=axis, keepdims=True)
    e = np.exp(x.data - m)
    out = Tensor(e / e.sum(axis=axis, keepdims=True))

    def bwd(og):
        s = out.data
        return (s * (og - (og * s).sum(axis=axis, keepdims=True)),)

    return _record(out, (x,), bwd)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    m = x.data.max(axis=axis, keepdims=True)
    s = x.data - m
    lse = np.log(np.exp(s).sum(axis=axis, keepdims=True))
    out = Tensor(s - lse)

    def bwd(og):
        return (og - np.exp(out.data) * og.sum(axis=axis, keepdims=True),)

    return _record(out, (x,), bwd)


def scaled_softmax(scores: Tensor, inv_temperature: float, axis: int = -1) -> Tensor:
    """Softmax of ``inv_temperature * scores`` with max-subtraction.

    ``inv_temperature`` sharpens (large) or flattens (small) the
    distribution; it must be positive. Output rows sum to 1 within 1e-12.
    """
    if not inv_temperature > 0:
        raise ValueError(f"inv_temperature must be positive, got {inv_temperature}")
    scores = _wrap(scores)
    if scores.data.shape[axis] < 1:
        raise DimensionError("scaled_softmax needs at least one score")
    lam = float(inv_temperature)
    z = lam * scores.data
    m = z.max(axis=axis, keepdims=True)
    e = np.exp(z - m)
    out = Tensor(e / e.sum(axis=axis, keepdims=True))

    def bwd(og):
        s = out.data
        return (lam * s * (og - (og * s).sum(axis=axis, keepdims=True)),)

    return _record(out, (scores,), bwd)


def cosine(a: Tensor, b: Tensor) -> Tensor:
    """Cosine similarity along the last axis, broadcasting leading axes.

    Raises ``DegenerateInputError`` if any participating vector has zero
    norm. Output lies in [-1, 1] up to rounding.
    """
    a, b = _wrap(a), _wrap(b)
    na2 = (a.data * a.data).sum(axis=-1, keepdims=True)
    nb2 = (b.data * b.data).sum(axis=-1, keepdims=True)
    if np.any(na2 == 0.0) or np.any(nb2 == 0.0):
        raise DegenerateInputError("cosine of a zero-norm vector")
    na = np.sqrt(na2)
    nb = np.sqrt(nb2)
    dot = (a.data * b.data).sum(axis=-1, keepdims=True)
    val = dot / (na * nb)
    out = Tensor(val[..., 0])
    _check_finite(out.data, "cosine")

    def bwd(og):
        g = og[..., None]
        ga = g * (b.data / (na * nb) - val * a.data / na2)
        gb = g * (a.data / (na * nb) - val * b.data / nb2)
        return (
            _unbroadcast(ga, a.data.shape),
            _unbroadcast(gb, b.data.shape),
        )

    return _record(out, (a, b), bwd)


# ---------------------------------------------------------------------------
# fused sequence-model kernels


def gru_step(x, h, w_ih, b_ih, w_hh, b_hh, mask: np.ndarray | None = None) -> Tensor:
    """One gated-recurrence step on a batch, with hand-written backward.

    Gate layout along the last weight axis is [reset | update | candidate].
    ``mask`` (B, 1), when given, freezes the hidden state of finished rows:
    out = mask * h_new + (1 - mask) * h; gradients route accordingly, so
    padded positions contribute exactly zero to every parameter gradient.
    """
    x, h = _wrap(x), _wrap(h)
    d = h.data.shape[-1]
    if w_ih.data.shape[1] != 3 * d or w_hh.data.shape != (d, 3 * d):
        raise DimensionError("gru_step weight shapes do not match the hidden size")
    if x.data.shape[-1] != w_ih.data.shape[0]:
        raise DimensionError("gru_step input width does not match w_ih")
    gi = x.data @ w_ih.data
    gi += b_ih.data
    gh = h.data @ w_hh.data
    gh += b_hh.data
    rz = _sigmoid_raw(gi[:, : 2 * d] + gh[:, : 2 * d])  # one call covers both gates
    r = rz[:, :d]
    z = rz[:, d:]
    gh_n = gh[:, 2 * d :]
    n = np.tanh(gi[:, 2 * d :] + r * gh_n)
    h_new = (1.0 - z) * n + z * h.data
    if mask is not None:
        h_new = mask * h_new + (1.0 - mask) * h.data
    out = Tensor(h_new)
    _check_finite(out.data, "gru_step")

    def bwd(og):
        if mask is not None:
            og_new = og * mask
            extra_h = og * (1.0 - mask)
        else:
            og_new = og
            extra_h = 0.0
        # gate-space gradients written straight into the fused buffers
        dgi = np.empty_like(gi)
        da_r = dgi[:, :d]
        da_z = dgi[:, d : 2 * d]
        da_n = dgi[:, 2 * d :]
        np.multiply(og_new, 1.0 - z, out=da_n)
        da_n *= 1.0 - n * n
        np.multiply(da_n, gh_n, out=da_r)
        da_r *= r
        da_r *= 1.0 - r
        np.multiply(og_new, h.data - n, out=da_z)
        da_z *= z
        da_z *= 1.0 - z
        dgh = dgi.copy()
        dgh[:, 2 * d :] *= r
        dh = og_new * z
        dh += extra_h
        dh += dgh @ w_hh.data.T
        dx = dgi @ w_ih.data.T
        return (dx, dh, x.data.T @ dgi, dgi.sum(axis=0),
                h.data.T @ dgh, dgh.sum(axis=0))

    return _record(out, (x, h, w_ih, b_ih, w_hh, b_hh), bwd)


def attend(query: Tensor, keys: Tensor, mask: np.ndarray) -> Tensor:
    """Dot-product attention: softmax(query . keys) pooled over keys.

    query (B, d), keys (B, T, d), mask (B, T) boolean marking valid
    positions (at least one per row). Returns the context vector (B, d).
    """
    scores = np.einsum("bd,btd->bt", query.data, keys.data)
    scores = np.where(mask, scores, -1e30)
    m = scores.max(axis=1, keepdims=True)
    e = np.exp(scores - m)
    att = e / e.sum(axis=1, keepdims=True)
    out = Tensor(np.einsum("bt,btd->bd", att, keys.data))
    _check_finite(out.data, "attend")

    def bwd(og):
        datt = np.einsum("bd,btd->bt", og, keys.data)
        dscores = att * (datt - (datt * att).sum(axis=1, keepdims=True))
        dq = np.einsum("bt,btd->bd", dscores, keys.data)
        dk = dscores[:, :, None] * query.data[:, None, :] + att[:, :, None] * og[:, None, :]
        return dq, dk

    return _record(out, (query, keys), bwd)


def masked_max(x: Tensor, mask: np.ndarray) -> Tensor:
    """Max over the time axis of (B, T, d), restricted to valid positions.

    mask (B, T) boolean; every row must have at least one valid position.
    Gradient flows to the first (lowest-t) argmax of each coordinate.
    """
    if not mask.any(axis=1).all():
        raise DegenerateInputError("masked_max row with no valid positions")
    neg = np.where(mask[:, :, None], x.data, -np.inf)
    arg = neg.argmax(axis=1)
    out = Tensor(np.take_along_axis(neg, arg[:, None, :], axis=1)[:, 0, :])
    _check_finite(out.data, "masked_max")

    def bwd(og):
        g = np.zeros_like(x.data)
        np.put_along_axis(g, arg[:, None, :], og[:, None, :], axis=1)
        return (g,)

    return _record(out, (x,), bwd)
