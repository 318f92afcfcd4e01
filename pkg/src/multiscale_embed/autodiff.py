"""Dense float64 tensors with reverse-mode differentiation.

A ``Tape`` records every op applied to tensors that (transitively) depend on
a ``Parameter``; ``Tape.backward`` replays the records in reverse, summing
local gradients into ``Parameter.grad``. Ops run as plain numpy when no tape
is active, so the same forward code serves training, inference, and
finite-difference checks.

All ops are deterministic given identical inputs. A tape is single-threaded;
independent tapes may run concurrently as long as they share no parameters.
"""

from __future__ import annotations

import numpy as np

from .exceptions import TrainingError, ZeroNormError

_TAPE_STACK: list["Tape"] = []


class Tensor:
    """Constant (or intermediate) array value. ``grad`` is tape-lifetime."""

    __slots__ = ("data", "grad", "_track")

    def __init__(self, data):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._track = False

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"


class Parameter(Tensor):
    """Trainable tensor with a persistent gradient buffer.

    ``grad`` accumulates across ``backward`` calls and is zeroed by the
    optimizer at the end of each step.
    """

    __slots__ = ("name",)

    def __init__(self, data, name):
        super().__init__(np.array(data, dtype=np.float64))
        self.name = name
        self.grad = np.zeros_like(self.data)
        self._track = True

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


class Tape:
    """Recorded ops in execution (hence topological) order.

    Use as a context manager; ops called inside record themselves when any
    input tracks gradients. ``backward`` visits each record exactly once, in
    reverse order, then clears the tape.
    """

    def __init__(self):
        self._records = []  # (output tensor, pull-back closure)

    def __enter__(self):
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        if _TAPE_STACK and _TAPE_STACK[-1] is self:
            _TAPE_STACK.pop()
        return False

    def backward(self, loss):
        """Accumulate d(loss)/d(parameter) into every reachable Parameter."""
        if not isinstance(loss, Tensor):
            raise ValueError("backward expects a Tensor loss")
        if loss.data.size != 1:
            raise ValueError(f"backward requires a scalar loss, got shape {loss.data.shape}")
        loss.grad = np.ones_like(loss.data)
        for out, pull in reversed(self._records):
            if out.grad is not None:
                pull(out.grad)
        for out, _ in self._records:
            if not isinstance(out, Parameter):
                out.grad = None
        self._records.clear()


def _active_tape():
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _as_tensor(x):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def _accumulate(t: Tensor, g):
    if isinstance(t, Parameter):
        t.grad += g
    elif t._track:
        t.grad = g.copy() if t.grad is None else t.grad + g


def _record(out: Tensor, inputs, pull):
    """Mark ``out`` tracked and register the pull-back if a tape is active."""
    tape = _active_tape()
    if tape is None or not any(i._track for i in inputs):
        return out
    out._track = True
    tape._records.append((out, pull))
    return out


def _unbroadcast(g, shape):
    """Reduce gradient ``g`` back to ``shape`` after numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# primitive ops


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    out = Tensor(a.data @ b.data)

    def pull(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    return _record(out, (a, b), pull)


def transpose(a):
    a = _as_tensor(a)
    out = Tensor(a.data.T)

    def pull(g):
        _accumulate(a, g.T)

    return _record(out, (a,), pull)


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data + b.data)

    def pull(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _record(out, (a, b), pull)


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data - b.data)

    def pull(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(-g, b.data.shape))

    return _record(out, (a, b), pull)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data * b.data)

    def pull(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _record(out, (a, b), pull)


def scale(a, c):
    a = _as_tensor(a)
    c = float(c)
    out = Tensor(a.data * c)

    def pull(g):
        _accumulate(a, g * c)

    return _record(out, (a,), pull)


def tanh(a):
    a = _as_tensor(a)
    out = Tensor(np.tanh(a.data))

    def pull(g):
        _accumulate(a, g * (1.0 - out.data * out.data))

    return _record(out, (a,), pull)


def sigmoid(a):
    a = _as_tensor(a)
    x = a.data
    out = Tensor(np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                          np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x)))))

    def pull(g):
        _accumulate(a, g * out.data * (1.0 - out.data))

    return _record(out, (a,), pull)


def leaky_relu(a, slope=0.2):
    a = _as_tensor(a)
    out = Tensor(np.where(a.data > 0, a.data, slope * a.data))

    def pull(g):
        _accumulate(a, g * np.where(a.data > 0, 1.0, slope))

    return _record(out, (a,), pull)


def hinge(a):
    """Elementwise max(0, x)."""
    a = _as_tensor(a)
    out = Tensor(np.maximum(a.data, 0.0))

    def pull(g):
        _accumulate(a, g * (a.data > 0))

    return _record(out, (a,), pull)


def log(a):
    a = _as_tensor(a)
    out = Tensor(np.log(a.data))

    def pull(g):
        _accumulate(a, g / a.data)

    return _record(out, (a,), pull)


def clip(a, lo, hi):
    """Clamp values into [lo, hi]; gradient passes only where unclamped."""
    a = _as_tensor(a)
    out = Tensor(np.clip(a.data, lo, hi))

    def pull(g):
        _accumulate(a, g * ((a.data >= lo) & (a.data <= hi)))

    return _record(out, (a,), pull)


def softmax(a):
    """Softmax along the last axis, computed with max subtraction."""
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = Tensor(e / e.sum(axis=-1, keepdims=True))

    def pull(g):
        y = out.data
        inner = (g * y).sum(axis=-1, keepdims=True)
        _accumulate(a, y * (g - inner))

    return _record(out, (a,), pull)


def dot(u, v):
    u, v = _as_tensor(u), _as_tensor(v)
    if u.data.ndim != 1 or v.data.ndim != 1 or u.data.shape != v.data.shape:
        raise ValueError(f"dot shape mismatch: {u.data.shape} vs {v.data.shape}")
    out = Tensor(np.dot(u.data, v.data))

    def pull(g):
        _accumulate(u, g * v.data)
        _accumulate(v, g * u.data)

    return _record(out, (u, v), pull)


def tsum(a):
    """Sum of all elements, as a scalar tensor."""
    a = _as_tensor(a)
    out = Tensor(a.data.sum())

    def pull(g):
        _accumulate(a, np.broadcast_to(g, a.data.shape))

    return _record(out, (a,), pull)


def mean(a):
    return scale(tsum(a), 1.0 / _as_tensor(a).data.size)


def mean_rows(a):
    """Column-wise mean of a 2-D tensor (average over rows)."""
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise ValueError("mean_rows expects a 2-D tensor")
    n = a.data.shape[0]
    out = Tensor(a.data.mean(axis=0))

    def pull(g):
        _accumulate(a, np.broadcast_to(g / n, a.data.shape))

    return _record(out, (a,), pull)


def rowwise_dot(a, b):
    """Per-row inner products of two equally shaped 2-D tensors."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape != b.data.shape or a.data.ndim != 2:
        raise ValueError(f"rowwise_dot shape mismatch: {a.data.shape} vs {b.data.shape}")
    out = Tensor(np.einsum("ij,ij->i", a.data, b.data))

    def pull(g):
        _accumulate(a, g[:, None] * b.data)
        _accumulate(b, g[:, None] * a.data)

    return _record(out, (a, b), pull)


def unit_rows(a, eps=1e-12):
    """Normalize each row to unit L2 norm. Raises ZeroNormError on zero rows."""
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise ValueError("unit_rows expects a 2-D tensor")
    norms = np.sqrt(np.einsum("ij,ij->i", a.data, a.data))
    if np.any(norms < eps):
        raise ZeroNormError(f"{int((norms < eps).sum())} row(s) have zero norm")
    out = Tensor(a.data / norms[:, None])

    def pull(g):
        inner = np.einsum("ij,ij->i", g, out.data)
        _accumulate(a, (g - inner[:, None] * out.data) / norms[:, None])

    return _record(out, (a,), pull)


def repeat_rows(a, times):
    """Repeat each row (or element, for 1-D) ``times`` times consecutively."""
    a = _as_tensor(a)
    out = Tensor(np.repeat(a.data, times, axis=0))

    def pull(g):
        _accumulate(a, g.reshape((a.data.shape[0], times) + a.data.shape[1:]).sum(axis=1))

    return _record(out, (a,), pull)


def stack_cols(vectors):
    """Stack 1-D tensors of equal length into the columns of a 2-D tensor."""
    vectors = [_as_tensor(v) for v in vectors]
    out = Tensor(np.stack([v.data for v in vectors], axis=1))

    def pull(g):
        for i, v in enumerate(vectors):
            _accumulate(v, g[:, i])

    return _record(out, tuple(vectors), pull)


def col(a, k):
    """Column ``k`` of a 2-D tensor, kept as shape (rows, 1)."""
    a = _as_tensor(a)
    out = Tensor(a.data[:, k : k + 1].copy())

    def pull(g):
        full = np.zeros_like(a.data)
        full[:, k : k + 1] = g
        _accumulate(a, full)

    return _record(out, (a,), pull)


def reshape(a, shape):
    a = _as_tensor(a)
    out = Tensor(a.data.reshape(shape))

    def pull(g):
        _accumulate(a, g.reshape(a.data.shape))

    return _record(out, (a,), pull)


# ---------------------------------------------------------------------------
# optimizer


class Adam:
    """Adaptive-moment optimizer over a fixed parameter list.

    Moment buffers and the step counter persist across calls; ``step``
    consumes and then zeroes each parameter's gradient.
    """

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient for parameter '{p.name}'")
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            p.data -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
            p.zero_grad()

    def state_arrays(self, prefix):
        """Flat name -> array view of the optimizer state, for checkpoints."""
        out = {f"{prefix}/t": np.array([float(self.t)])}
        for p, m, v in zip(self.params, self.m, self.v):
            out[f"{prefix}/m/{p.name}"] = m
            out[f"{prefix}/v/{p.name}"] = v
        return out

    def load_state_arrays(self, prefix, arrays):
        self.t = int(arrays[f"{prefix}/t"][0])
        for i, p in enumerate(self.params):
            self.m[i][...] = arrays[f"{prefix}/m/{p.name}"].reshape(self.m[i].shape)
            self.v[i][...] = arrays[f"{prefix}/v/{p.name}"].reshape(self.v[i].shape)
