"""A small reverse-mode differentiation engine over numpy arrays.

Each op returns a new :class:`Tensor` that remembers its parents and a
closure that pushes the output gradient back to them.  Ops are coarse (a
whole LSTM cell, a whole convolution) so a forward pass over a batch builds
only a few dozen nodes.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import EmptyBatchError, ShapeError, StateError


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward", "_consumed")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self._consumed = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Reverse-mode sweep from this node.

        Gradients are kept only on leaf tensors with ``requires_grad``; the
        graph is released afterwards, so a second call raises ``StateError``.
        """
        if self._consumed:
            raise StateError("graph already consumed by a previous backward()")
        if self._backward is None:
            raise StateError("backward() called on a tensor that no forward op produced")
        if grad is None:
            if self.data.size != 1:
                raise ShapeError("backward() without a seed gradient needs a scalar output")
            grad = np.ones_like(self.data)

        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))

        self.grad = np.asarray(grad, dtype=np.float64).reshape(self.shape).copy()
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
        for node in order:
            if node._backward is not None:
                node.grad = None
                node._parents = ()
                node._backward = None
                node._consumed = True


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    out = Tensor(data)
    live = tuple(p for p in parents if p.requires_grad)
    if live:
        out.requires_grad = True
        out._parents = live
        out._backward = backward
    return out


def _push(t: Tensor, g: np.ndarray) -> None:
    if t.requires_grad:
        t._accumulate(g)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# ---------------------------------------------------------------- elementwise


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} differ")

    def backward(g):
        _push(a, g)
        _push(b, g)

    return _node(a.data + b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} differ")

    def backward(g):
        _push(a, g * b.data)
        _push(b, g * a.data)

    return _node(a.data * b.data, (a, b), backward)


def total(a) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    a = as_tensor(a)

    def backward(g):
        _push(a, np.broadcast_to(g, a.shape))

    return _node(np.asarray(a.data.sum()), (a,), backward)


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0

    def backward(g):
        _push(a, g * mask)

    return _node(np.where(mask, a.data, 0.0), (a,), backward)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    s = _sigmoid(a.data)

    def backward(g):
        _push(a, g * s * (1.0 - s))

    return _node(s, (a,), backward)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    t = np.tanh(a.data)

    def backward(g):
        _push(a, g * (1.0 - t * t))

    return _node(t, (a,), backward)


# ------------------------------------------------------------------ structure


def concat(tensors: Sequence, axis: int) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    sizes = [p.shape[axis] for p in parts]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g):
        for p, gp in zip(parts, np.split(g, bounds, axis=axis)):
            _push(p, gp)

    return _node(np.concatenate([p.data for p in parts], axis=axis), parts, backward)


def take(a, index: int, axis: int) -> Tensor:
    """Select one position along ``axis`` (dropping that axis)."""
    a = as_tensor(a)

    def backward(g):
        full = np.zeros(a.shape)
        sl = [slice(None)] * a.data.ndim
        sl[axis] = index
        full[tuple(sl)] = g
        _push(a, full)

    return _node(np.take(a.data, index, axis=axis), (a,), backward)


def narrow(a, start: int, length: int, axis: int = -1) -> Tensor:
    """Contiguous slice ``[start, start + length)`` along ``axis``."""
    a = as_tensor(a)
    sl = [slice(None)] * a.data.ndim
    sl[axis] = slice(start, start + length)
    sl = tuple(sl)

    def backward(g):
        full = np.zeros(a.shape)
        full[sl] = g
        _push(a, full)

    return _node(a.data[sl], (a,), backward)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        _push(a, g.reshape(a.shape))

    return _node(a.data.reshape(shape), (a,), backward)


# --------------------------------------------------------------------- layers


def linear(x, weight, bias) -> Tensor:
    """``x @ weight.T + bias`` for ``x`` of shape ``(B, d)``."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    if x.data.ndim != 2 or weight.data.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"linear: input {x.shape} incompatible with weight {weight.shape}")
    if bias.shape != (weight.shape[0],):
        raise ShapeError(f"linear: bias {bias.shape} does not match weight {weight.shape}")

    def backward(g):
        _push(weight, g.T @ x.data)
        _push(bias, g.sum(axis=0))
        _push(x, g @ weight.data)

    return _node(x.data @ weight.data.T + bias.data, (x, weight, bias), backward)


def lstm_cell(x, state, weight, bias) -> Tensor:
    """One LSTM step for a batch.

    ``state`` packs ``[h, c]`` along the last axis (shape ``(B, 2H)``);
    ``weight`` stacks the forget, input, output and candidate blocks as
    ``(4H, H + d)`` acting on ``[h_prev, x]``; ``bias`` is ``(4H,)``.
    Returns the new packed state.
    """
    x, state, weight, bias = (as_tensor(t) for t in (x, state, weight, bias))
    H = state.shape[-1] // 2
    B, d = x.shape
    if state.shape != (B, 2 * H) or weight.shape != (4 * H, H + d) or bias.shape != (4 * H,):
        raise ShapeError(
            f"lstm_cell: x {x.shape}, state {state.shape}, weight {weight.shape}, "
            f"bias {bias.shape} are inconsistent"
        )
    h_prev = state.data[:, :H]
    c_prev = state.data[:, H:]
    hx = np.concatenate([h_prev, x.data], axis=1)
    z = hx @ weight.data.T + bias.data
    gates = _sigmoid(z[:, : 3 * H])
    f, i, o = gates[:, :H], gates[:, H : 2 * H], gates[:, 2 * H :]
    g_c = np.tanh(z[:, 3 * H :])
    c = f * c_prev + i * g_c
    tc = np.tanh(c)
    h = o * tc

    def backward(g):
        dh, dc = g[:, :H], g[:, H:]
        dc = dc + dh * o * (1.0 - tc * tc)
        dz = np.empty_like(z)
        dz[:, :H] = dc * c_prev * f * (1.0 - f)
        dz[:, H : 2 * H] = dc * g_c * i * (1.0 - i)
        dz[:, 2 * H : 3 * H] = dh * tc * o * (1.0 - o)
        dz[:, 3 * H :] = dc * i * (1.0 - g_c * g_c)
        _push(weight, dz.T @ hx)
        _push(bias, dz.sum(axis=0))
        if state.requires_grad or x.requires_grad:
            dhx = dz @ weight.data
            _push(state, np.concatenate([dhx[:, :H], dc * f], axis=1))
            _push(x, dhx[:, H:])

    return _node(np.concatenate([h, c], axis=1), (x, state, weight, bias), backward)


def conv_time(x, weight, bias) -> Tensor:
    """Full-height convolution along time with zero "same" padding.

    ``x`` is ``(B, K, L)``, ``weight`` is ``(J, K, w)``, ``bias`` is ``(J,)``;
    ``out[b, j, t] = sum_{k, s} weight[j, k, s] * x[b, k, t + s - w // 2] + bias[j]``.
    """
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    B, K, L = x.shape
    J, Kw, w = weight.shape
    if Kw != K:
        raise ShapeError(f"conv_time: kernel height {Kw} does not match input height {K}")
    if bias.shape != (J,):
        raise ShapeError(f"conv_time: bias {bias.shape} does not match {J} kernels")
    left = w // 2
    padded = np.zeros((B, K, L + w - 1))
    padded[:, :, left : left + L] = x.data
    cols = np.lib.stride_tricks.sliding_window_view(padded, w, axis=2)  # (B, K, L, w)
    out = np.einsum("bktw,jkw->bjt", cols, weight.data, optimize=True) + bias.data[None, :, None]

    def backward(g):
        _push(weight, np.einsum("bjt,bktw->jkw", g, cols, optimize=True))
        _push(bias, g.sum(axis=(0, 2)))
        if x.requires_grad:
            dcols = np.einsum("bjt,jkw->bktw", g, weight.data, optimize=True)
            dpad = np.zeros_like(padded)
            for s in range(w):
                dpad[:, :, s : s + L] += dcols[..., s]
            _push(x, dpad[:, :, left : left + L])

    return _node(out, (x, weight, bias), backward)


def mse_loss(pred, target) -> Tensor:
    pred = as_tensor(pred)
    target = np.asarray(target, dtype=np.float64)
    if pred.size == 0:
        raise EmptyBatchError("mse_loss on an empty batch")
    if pred.size != target.size:
        raise ShapeError(f"mse_loss: {pred.size} predictions vs {target.size} targets")
    diff = pred.data.reshape(-1) - target.reshape(-1)
    n = diff.size

    def backward(g):
        _push(pred, (g * 2.0 / n * diff).reshape(pred.shape))

    return _node(np.asarray(np.mean(diff * diff)), (pred,), backward)
