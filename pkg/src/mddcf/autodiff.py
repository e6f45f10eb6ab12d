"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

A Tape records every primitive in execution order; backward replays the
records in exact reverse order, accumulating analytic vector-Jacobian
products. Just enough machinery to train the power-allocation GNN: matrix
multiply, broadcasted elementwise arithmetic, activations, batch
normalization, softmax, concatenation, reductions, plus an Adam optimizer.
No graphs survive a tape; tapes are single-owner and cheap.
"""

from __future__ import annotations

from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np


class Tensor:
    """Dense float64 value plus a gradient buffer filled in by backward()."""

    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.data.shape}, grad={self.requires_grad})"

    # operator sugar; every arithmetic route goes through the op functions
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))

    def __neg__(self):
        return scale(self, -1.0)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class _Node:
    __slots__ = ("inputs", "output", "pullback", "op")

    def __init__(self, op: str, inputs: Sequence[Tensor], output: Tensor, pullback):
        self.op = op
        self.inputs = tuple(inputs)
        self.output = output
        self.pullback = pullback   # grad_out -> tuple of grads aligned with inputs


class Tape:
    """Execution-ordered record of primitives; context manager activates it."""

    def __init__(self):
        self.nodes: List[_Node] = []

    def __enter__(self):
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _TAPE_STACK.pop()
        assert popped is self
        return False

    def backward(self, loss: Tensor) -> None:
        """Accumulate d loss / d tensor into .grad of every recorded tensor."""
        if loss.data.ndim != 0 and loss.data.size != 1:
            raise ValueError(f"loss must be scalar, got shape {loss.data.shape}")
        grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            g_out = grads.pop(id(node.output), None)
            if g_out is None:
                continue
            for tensor, g in zip(node.inputs, node.pullback(g_out)):
                if g is None:
                    continue
                key = id(tensor)
                if key in grads:
                    grads[key] = grads[key] + g
                else:
                    grads[key] = g
                if tensor.requires_grad:
                    tensor.grad = grads[key]


_TAPE_STACK: List[Tape] = []


def backward(tape: Tape, loss: Tensor) -> None:
    tape.backward(loss)


def _record(op: str, inputs: Sequence[Tensor], out_data: np.ndarray, pullback) -> Tensor:
    if not np.all(np.isfinite(out_data)):
        raise FloatingPointError(f"non-finite value produced by op {op!r}")
    out = Tensor(out_data)
    # propagate the need for gradients so pullbacks can skip constant operands
    out.requires_grad = any(t.requires_grad for t in inputs)
    if _TAPE_STACK and out.requires_grad:
        _TAPE_STACK[-1].nodes.append(_Node(op, inputs, out, pullback))
    return out


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum a broadcasted gradient back down to the original operand shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    out = a.data @ b.data

    def pullback(g):
        return (g @ b.data.T if a.requires_grad else None,
                a.data.T @ g if b.requires_grad else None)

    return _record("matmul", (a, b), out, pullback)


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data
    return _record("add", (a, b), out,
                   lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.data - b.data
    return _record("sub", (a, b), out,
                   lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data
    return _record("mul", (a, b), out,
                   lambda g: (_unbroadcast(g * b.data, a.data.shape),
                              _unbroadcast(g * a.data, b.data.shape)))


def div(a: Tensor, b: Tensor) -> Tensor:
    out = a.data / b.data
    return _record("div", (a, b), out,
                   lambda g: (_unbroadcast(g / b.data, a.data.shape),
                              _unbroadcast(-g * a.data / b.data**2, b.data.shape)))


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _record("scale", (a,), a.data * c, lambda g: (g * c,))


def square(a: Tensor) -> Tensor:
    return _record("square", (a,), a.data**2, lambda g: (2.0 * a.data * g,))


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return _record("sqrt", (a,), out, lambda g: (0.5 * g / out,))


def log1p(a: Tensor) -> Tensor:
    return _record("log1p", (a,), np.log1p(a.data), lambda g: (g / (1.0 + a.data),))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0.0
    return _record("relu", (a,), np.where(mask, a.data, 0.0), lambda g: (g * mask,))


def leaky_relu(a: Tensor, slope: float = 0.01) -> Tensor:
    mask = a.data > 0.0
    factor = np.where(mask, 1.0, slope)
    return _record("leaky_relu", (a,), a.data * factor, lambda g: (g * factor,))


def softmax(a: Tensor) -> Tensor:
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def pullback(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        return (out * (g - dot),)

    return _record("softmax", (a,), out, pullback)


def concat(tensors: Iterable[Tensor], axis: int = -1) -> Tensor:
    ts = list(tensors)
    out = np.concatenate([t.data for t in ts], axis=axis)
    sizes = [t.data.shape[axis] for t in ts]
    splits = np.cumsum(sizes)[:-1]

    def pullback(g):
        return tuple(np.split(g, splits, axis=axis))

    return _record("concat", ts, out, pullback)


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def pullback(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).copy(),)

    return _record("sum", (a,), out, pullback)


def mean_rows(a: Tensor) -> Tensor:
    """Mean over the leading (row) axis."""
    n = a.data.shape[0]
    out = a.data.mean(axis=0)

    def pullback(g):
        return (np.broadcast_to(g / n, a.data.shape).copy(),)

    return _record("mean_rows", (a,), out, pullback)


def reshape(a: Tensor, shape) -> Tensor:
    out = a.data.reshape(shape)
    return _record("reshape", (a,), out, lambda g: (g.reshape(a.data.shape),))


class BatchNormState:
    """Running statistics buffers; mutated only by training-mode forwards."""

    def __init__(self, width: int, momentum: float = 0.9, eps: float = 1e-5):
        self.running_mean = np.zeros(width)
        self.running_var = np.ones(width)
        self.momentum = momentum
        self.eps = eps


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, state: BatchNormState,
               training: bool) -> Tensor:
    """Row-batch normalization over axis 0 of a 2-D tensor."""
    if x.data.ndim != 2:
        raise ValueError(f"batch_norm expects 2-D rows, got {x.data.shape}")
    if training:
        mean = x.data.mean(axis=0)
        var = x.data.var(axis=0)
        state.running_mean = state.momentum * state.running_mean + (1 - state.momentum) * mean
        state.running_var = state.momentum * state.running_var + (1 - state.momentum) * var
    else:
        mean = state.running_mean
        var = state.running_var
    inv_std = 1.0 / np.sqrt(var + state.eps)
    x_hat = (x.data - mean) * inv_std
    out = gamma.data * x_hat + beta.data
    n = x.data.shape[0]

    def pullback(g):
        d_gamma = (g * x_hat).sum(axis=0)
        d_beta = g.sum(axis=0)
        if training:
            # batch statistics depend on x, so their gradients flow back too
            dxhat = g * gamma.data
            dx = inv_std * (dxhat - dxhat.mean(axis=0)
                            - x_hat * (dxhat * x_hat).mean(axis=0))
        else:
            dx = g * gamma.data * inv_std
        return dx, d_gamma, d_beta

    return _record("batch_norm", (x, gamma, beta), out, pullback)


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

class AdamState:
    """Standard bias-corrected Adam over a named parameter dict."""

    def __init__(self, params: Dict[str, Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items() if p.requires_grad}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items() if p.requires_grad}


def adam_step(params: Dict[str, Tensor], grads: Dict[str, np.ndarray],
              state: AdamState) -> None:
    state.step_count += 1
    t = state.step_count
    for key, m in state.m.items():
        g = grads.get(key)
        if g is None:
            continue
        p = params[key]
        if g.shape != p.data.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter "
                             f"{key!r} of shape {p.data.shape}")
        m *= state.beta1
        m += (1 - state.beta1) * g
        v = state.v[key]
        v *= state.beta2
        v += (1 - state.beta2) * g**2
        m_hat = m / (1 - state.beta1**t)
        v_hat = v / (1 - state.beta2**t)
        p.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
