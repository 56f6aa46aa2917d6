"""Dense float64 tensors with a minimal reverse-mode differentiation tape.

Ops executed while a Tape is active are recorded in execution order
(which is already a topological order); backward() replays the records
once, in reverse, accumulating vector-Jacobian products. Ops executed
with no active tape run forward-only, which is what decoding uses.

Everything is float64. Every op checks its output for NaN/Inf and
raises NumericError rather than letting poison propagate.
"""

from __future__ import annotations

import threading
from typing import Callable, Sequence

import numpy as np

from .errors import NumericError, ShapeError, TapeError, UsageError

_LOCAL = threading.local()


def _tape_stack() -> list:
    stack = getattr(_LOCAL, "stack", None)
    if stack is None:
        stack = []
        _LOCAL.stack = stack
    return stack


def active_tape():
    """The innermost active Tape on this thread, or None."""
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """A dense float64 array plus an optional gradient accumulator."""

    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if g.shape != self.data.shape:
            raise ShapeError(
                f"gradient shape {g.shape} does not match tensor shape {self.data.shape}"
            )
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"


class _Record:
    __slots__ = ("output", "inputs", "vjp")

    def __init__(self, output: Tensor, inputs: tuple[Tensor, ...], vjp: Callable):
        self.output = output
        self.inputs = inputs
        self.vjp = vjp


class Tape:
    """Ordered record of differentiable ops. Confined to one thread."""

    def __init__(self):
        self._records: list[_Record] = []
        self._closed = False

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        popped = _tape_stack().pop()
        if popped is not self:  # pragma: no cover - indicates interleaved misuse
            raise TapeError("tape context exited out of order")

    def record(self, output: Tensor, inputs: tuple[Tensor, ...], vjp: Callable) -> None:
        if self._closed:
            raise TapeError("cannot record onto a cleared tape")
        self._records.append(_Record(output, inputs, vjp))

    def clear(self) -> None:
        """Drop all records; the tape can no longer be differentiated."""
        self._records.clear()
        self._closed = True

    def __len__(self) -> int:
        return len(self._records)


def backward(loss: Tensor, tape: Tape) -> None:
    """Populate .grad on every requires_grad leaf reachable from loss.

    Gradients accumulate: callers zero them between steps. Calling twice
    on the same tape therefore doubles every gradient.
    """
    if tape._closed:
        raise TapeError("backward through a cleared tape")
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    flowing: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    produced = {id(rec.output) for rec in tape._records}
    seen: dict[int, Tensor] = {id(loss): loss}
    for rec in reversed(tape._records):
        g = flowing.pop(id(rec.output), None)
        if g is None:
            continue
        for tensor, grad in zip(rec.inputs, rec.vjp(g)):
            if grad is None:
                continue
            key = id(tensor)
            if key in flowing:
                flowing[key] = flowing[key] + grad
            else:
                flowing[key] = grad
            seen[key] = tensor
    for key, grad in flowing.items():
        tensor = seen[key]
        if tensor.requires_grad and key not in produced:
            tensor.accumulate_grad(np.asarray(grad, dtype=np.float64))


def _finite_or_raise(arr: np.ndarray, op: str) -> None:
    if not np.isfinite(arr).all():
        raise NumericError(f"non-finite values produced by {op}")


def _emit(op: str, out_data: np.ndarray, inputs: Sequence[Tensor], vjp: Callable) -> Tensor:
    _finite_or_raise(out_data, op)
    needs = False
    stack = _tape_stack()
    if stack:
        for t in inputs:
            if t.requires_grad:
                needs = True
                break
    out = Tensor(out_data, requires_grad=needs)
    if needs:
        stack[-1].record(out, tuple(inputs), vjp)
    return out


# ---------------------------------------------------------------------------
# core ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def vjp(g):
        return (
            g @ b.data.T if a.requires_grad else None,
            a.data.T @ g if b.requires_grad else None,
        )

    return _emit("matmul", out, (a, b), vjp)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise add; also accepts a 1-D bias broadcast over 2-D rows."""
    if a.shape == b.shape:
        out = a.data + b.data

        def vjp(g):
            return (g if a.requires_grad else None, g if b.requires_grad else None)

    elif a.data.ndim == 2 and b.data.ndim == 1 and b.shape[0] == a.shape[1]:
        out = a.data + b.data

        def vjp(g):
            return (
                g if a.requires_grad else None,
                g.sum(axis=0) if b.requires_grad else None,
            )

    else:
        raise ShapeError(f"add: incompatible shapes {a.shape} + {b.shape}")
    return _emit("add", out, (a, b), vjp)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise multiply; either side may be a (B,1) column broadcast."""
    sa, sb = a.data.shape, b.data.shape
    if sa == sb:
        reduce_a = reduce_b = False
    elif len(sa) == 2 and sb == (sa[0], 1):
        reduce_a, reduce_b = False, True
    elif len(sb) == 2 and sa == (sb[0], 1):
        reduce_a, reduce_b = True, False
    else:
        raise ShapeError(f"mul: incompatible shapes {a.shape} * {b.shape}")
    out = a.data * b.data

    def vjp(g):
        ga = gb = None
        if a.requires_grad:
            ga = g * b.data
            if reduce_a:
                ga = ga.sum(axis=1, keepdims=True)
        if b.requires_grad:
            gb = g * a.data
            if reduce_b:
                gb = gb.sum(axis=1, keepdims=True)
        return ga, gb

    return _emit("mul", out, (a, b), vjp)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def vjp(g):
        return ((1.0 - out * out) * g,)

    return _emit("tanh", out, (x,), vjp)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # exp(-log(1 + e^-z)) is overflow-free on both tails
    return np.exp(-np.logaddexp(0.0, -z))


def sigmoid(x: Tensor) -> Tensor:
    out = _sigmoid(x.data)

    def vjp(g):
        return (out * (1.0 - out) * g,)

    return _emit("sigmoid", out, (x,), vjp)


def softmax(x: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Row softmax over the last axis, optionally excluding masked lanes.

    mask is a boolean array of x's shape; False lanes get weight exactly
    0.0 and receive zero gradient. Uses max-subtraction for stability.
    """
    data = x.data
    if data.ndim not in (1, 2):
        raise ShapeError(f"softmax expects 1-D or 2-D input, got {x.shape}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != data.shape:
            raise ShapeError(f"softmax mask shape {mask.shape} != input {data.shape}")
        if not mask.any(axis=-1).all():
            raise NumericError("softmax: a row is fully masked")
        scored = np.where(mask, data, -np.inf)
    else:
        scored = data
    peak = scored.max(axis=-1, keepdims=True)
    weights = np.exp(scored - peak)
    out = weights / weights.sum(axis=-1, keepdims=True)

    def vjp(g):
        inner = (g * out).sum(axis=-1, keepdims=True)
        return (out * (g - inner),)

    return _emit("softmax", out, (x,), vjp)


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    if not tensors:
        raise ShapeError("concat of no tensors")
    parts = [t.data for t in tensors]
    try:
        out = np.concatenate(parts, axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat axis={axis}: {[t.shape for t in tensors]}") from exc
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        moved = np.moveaxis(g, axis, 0)
        return tuple(
            np.moveaxis(moved[offsets[i] : offsets[i + 1]], 0, axis)
            if t.requires_grad
            else None
            for i, t in enumerate(tensors)
        )

    return _emit("concat", out, tuple(tensors), vjp)


def slice_axis(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    dim = x.data.shape[axis]
    if not (0 <= start and start + length <= dim):
        raise ShapeError(f"slice [{start}:{start + length}) out of range for axis {axis} of {x.shape}")
    index = [slice(None)] * x.data.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)
    out = x.data[index].copy()

    def vjp(g):
        full = np.zeros_like(x.data)
        full[index] = g
        return (full,)

    return _emit("slice", out, (x,), vjp)


def embedding_lookup(table: Tensor, ids: np.ndarray) -> Tensor:
    """Gather rows of table (V, d) at integer ids (n,)."""
    ids = np.asarray(ids)
    if table.data.ndim != 2 or ids.ndim != 1:
        raise ShapeError(f"embedding_lookup: table {table.shape}, ids {ids.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        bad = int(np.argmax((ids < 0) | (ids >= table.shape[0])))
        raise ShapeError(
            f"embedding_lookup: id {int(ids[bad])} at position {bad} "
            f"outside table of {table.shape[0]} rows"
        )
    out = table.data[ids]

    def vjp(g):
        grad = np.zeros_like(table.data)
        np.add.at(grad, ids, g)
        return (grad,)

    return _emit("embedding_lookup", out, (table,), vjp)


def dropout_apply(x: Tensor, keep_mask: np.ndarray, scale: float) -> Tensor:
    """Inverted dropout: multiply by a 0/1 mask and rescale kept lanes."""
    keep_mask = np.asarray(keep_mask, dtype=np.float64)
    if keep_mask.shape != x.data.shape:
        raise ShapeError(f"dropout mask shape {keep_mask.shape} != input {x.shape}")
    out = x.data * keep_mask * scale

    def vjp(g):
        return (g * keep_mask * scale,)

    return _emit("dropout", out, (x,), vjp)


def make_dropout_mask(shape, drop_p: float, rng: np.random.Generator):
    """Sample a keep mask and its inverted-dropout scale for drop probability drop_p."""
    if not 0.0 <= drop_p < 1.0:
        raise UsageError(f"drop probability must be in [0, 1), got {drop_p}")
    keep = 1.0 - drop_p
    mask = (rng.random(shape) < keep).astype(np.float64)
    return mask, 1.0 / keep


def masked_nll(logits: Tensor, targets: np.ndarray, mask: np.ndarray) -> Tensor:
    """Sum of -log softmax(logits)[target] over unmasked rows (scalar).

    Computed through a fused log-sum-exp so no explicit probability ever
    under/overflows.
    """
    targets = np.asarray(targets)
    maskf = np.asarray(mask, dtype=np.float64)
    n, v = logits.shape if logits.data.ndim == 2 else (None, None)
    if n is None or targets.shape != (n,) or maskf.shape != (n,):
        raise ShapeError(
            f"masked_nll: logits {logits.shape}, targets {targets.shape}, mask {np.shape(mask)}"
        )
    if targets.size and (targets.min() < 0 or targets.max() >= v):
        raise ShapeError(f"masked_nll: target id outside 0..{v - 1}")
    rows = np.arange(n)
    peak = logits.data.max(axis=1, keepdims=True)
    stable = logits.data - peak
    lse = peak[:, 0] + np.log(np.exp(stable).sum(axis=1))
    out = np.asarray(((lse - logits.data[rows, targets]) * maskf).sum())

    def vjp(g):
        probs = np.exp(stable)
        probs /= probs.sum(axis=1, keepdims=True)
        probs[rows, targets] -= 1.0
        return (probs * maskf[:, None] * float(g),)

    return _emit("masked_nll", out, (logits,), vjp)


def bmm_scores(query: Tensor, keys: Tensor) -> Tensor:
    """Per-row dot products: (B,K) x (B,L,K) -> (B,L)."""
    if (
        query.data.ndim != 2
        or keys.data.ndim != 3
        or query.shape[0] != keys.shape[0]
        or query.shape[1] != keys.shape[2]
    ):
        raise ShapeError(f"bmm_scores: query {query.shape} vs keys {keys.shape}")
    out = np.einsum("bk,blk->bl", query.data, keys.data)

    def vjp(g):
        return (
            np.einsum("bl,blk->bk", g, keys.data) if query.requires_grad else None,
            np.einsum("bl,bk->blk", g, query.data) if keys.requires_grad else None,
        )

    return _emit("bmm_scores", out, (query, keys), vjp)


def bmm_context(weights: Tensor, values: Tensor) -> Tensor:
    """Per-row weighted sums: (B,L) x (B,L,K) -> (B,K)."""
    if (
        weights.data.ndim != 2
        or values.data.ndim != 3
        or weights.shape[0] != values.shape[0]
        or weights.shape[1] != values.shape[1]
    ):
        raise ShapeError(f"bmm_context: weights {weights.shape} vs values {values.shape}")
    out = np.einsum("bl,blk->bk", weights.data, values.data)

    def vjp(g):
        return (
            np.einsum("bk,blk->bl", g, values.data) if weights.requires_grad else None,
            np.einsum("bl,bk->blk", weights.data, g) if values.requires_grad else None,
        )

    return _emit("bmm_context", out, (weights, values), vjp)


def stack_steps(steps: Sequence[Tensor]) -> Tensor:
    """Stack L tensors of shape (B,K) into (B,L,K)."""
    if not steps:
        raise ShapeError("stack_steps of no tensors")
    shape = steps[0].shape
    if any(t.shape != shape for t in steps):
        raise ShapeError(f"stack_steps: mixed shapes {[t.shape for t in steps]}")
    out = np.stack([t.data for t in steps], axis=1)

    def vjp(g):
        return tuple(g[:, j, :] if t.requires_grad else None for j, t in enumerate(steps))

    return _emit("stack_steps", out, tuple(steps), vjp)


# ---------------------------------------------------------------------------
# parameter utilities


def uniform_init(shape, low: float = -0.1, high: float = 0.1, rng: np.random.Generator | None = None) -> Tensor:
    """I.i.d. uniform values in [low, high), as a trainable tensor."""
    if low >= high:
        raise UsageError(f"uniform_init: low {low} must be < high {high}")
    if rng is None:
        raise UsageError("uniform_init: a seeded Generator is required")
    return Tensor(rng.uniform(low, high, size=shape), requires_grad=True)


def clip_by_global_norm(grads: Sequence[np.ndarray], max_norm: float = 1.0):
    """Scale grads in place so their global L2 norm is at most max_norm.

    Returns (grads, pre_clip_norm).
    """
    total = 0.0
    for g in grads:
        total += float((g * g).sum())
    norm = float(np.sqrt(total))
    if not np.isfinite(norm):
        raise NumericError("clip_by_global_norm: non-finite gradient norm")
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads:
            g *= scale
    return grads, norm


def global_norm(grads: Sequence[np.ndarray]) -> float:
    total = 0.0
    for g in grads:
        total += float((g * g).sum())
    return float(np.sqrt(total))


def grad_check(f: Callable[[], Tensor], params: Sequence[Tensor], eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    f must be a pure, deterministic scalar-valued function of params
    (dropout disabled). Relative error per coordinate is
    |a - n| / max(|a|, |n|, 1e-8).
    """
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        loss = f()
    backward(loss, tape)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.data.reshape(-1)
        aflat = a.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = f().item()
            flat[i] = orig - eps
            f_minus = f().item()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            rel = abs(aflat[i] - numeric) / max(abs(aflat[i]), abs(numeric), 1e-8)
            if rel > worst:
                worst = rel
    return worst
