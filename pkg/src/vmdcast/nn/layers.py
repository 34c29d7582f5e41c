"""Layers of the decomposition-reconstruction-ensemble network.

Every layer owns its parameters as leaf :class:`Tensor` objects and exposes
them through ``parameters()`` as an ordered ``{name: Tensor}`` mapping, which
is what the optimizer and the checkpoint writer consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from . import tensor as T
from .tensor import Tensor

GATES = ("f", "i", "o", "c")


def uniform_init(rng: np.random.Generator, shape, fan_in: int, name: str) -> Tensor:
    bound = 1.0 / math.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, name=name)


def zeros_param(shape, name: str) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True, name=name)


@dataclass
class LstmState:
    h: Tensor
    c: Tensor


class LstmLayer:
    """One LSTM layer; each weight acts on the concatenation ``[h_prev, x]``."""

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator, prefix: str = ""):
        self.input_size = input_size
        self.hidden_size = hidden_size
        fan_in = hidden_size + input_size
        self.weights = {
            g: uniform_init(rng, (hidden_size, fan_in), fan_in, f"{prefix}w_{g}") for g in GATES
        }
        # gate biases start at zero; only the candidate bias is drawn
        self.biases = {g: zeros_param(hidden_size, f"{prefix}b_{g}") for g in GATES[:3]}
        self.biases["c"] = uniform_init(rng, hidden_size, fan_in, f"{prefix}b_c")

    def parameters(self) -> dict[str, Tensor]:
        out = {f"w_{g}": self.weights[g] for g in GATES}
        out.update({f"b_{g}": self.biases[g] for g in GATES})
        return out

    def stacked(self) -> tuple[Tensor, Tensor]:
        w = T.concat([self.weights[g] for g in GATES], axis=0)
        b = T.concat([self.biases[g] for g in GATES], axis=0)
        return w, b

    def run(self, inputs: list[Tensor], batch: int) -> list[Tensor]:
        """Unroll over a list of ``(B, d)`` inputs; returns the hidden states."""
        w, b = self.stacked()
        state = Tensor(np.zeros((batch, 2 * self.hidden_size)))
        hidden = []
        for x in inputs:
            state = T.lstm_cell(x, state, w, b)
            hidden.append(T.narrow(state, 0, self.hidden_size, axis=1))
        return hidden


def lstm_cell_forward(x_t, prev: LstmState, layer: LstmLayer) -> LstmState:
    """Single step: gates, new cell state and new hidden state."""
    x_t = T.as_tensor(x_t)
    h, c = T.as_tensor(prev.h), T.as_tensor(prev.c)
    squeeze = x_t.data.ndim == 1
    if squeeze:
        x_t = T.reshape(x_t, (1, -1))
        h = T.reshape(h, (1, -1))
        c = T.reshape(c, (1, -1))
    H = layer.hidden_size
    if x_t.shape[1] != layer.input_size or h.shape[1] != H or c.shape[1] != H:
        raise ShapeError(
            f"lstm_cell_forward: x {x_t.shape}, h {h.shape}, c {c.shape} do not fit "
            f"layer (input {layer.input_size}, hidden {H})"
        )
    w, b = layer.stacked()
    state = T.lstm_cell(x_t, T.concat([h, c], axis=1), w, b)
    h_new, c_new = T.narrow(state, 0, H, axis=1), T.narrow(state, H, H, axis=1)
    if squeeze:
        h_new, c_new = T.reshape(h_new, (H,)), T.reshape(c_new, (H,))
    return LstmState(h_new, c_new)


class LstmStack:
    def __init__(self, input_size: int, hidden_size: int, num_layers: int, rng: np.random.Generator):
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.layers = [
            LstmLayer(input_size if i == 0 else hidden_size, hidden_size, rng, prefix=f"lstm.{i}.")
            for i in range(num_layers)
        ]

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def parameters(self) -> dict[str, Tensor]:
        out = {}
        for i, layer in enumerate(self.layers):
            out.update({f"lstm.{i}.{k}": v for k, v in layer.parameters().items()})
        return out

    def forward(self, sequence: Tensor) -> Tensor:
        """``sequence`` is ``(B, d, L)``; returns the top layer's last hidden state."""
        B, d, L = sequence.shape
        if d != self.input_size:
            raise ShapeError(f"LSTM expects {self.input_size} input channels, got {d}")
        steps = [T.take(sequence, t, axis=2) for t in range(L)]
        for layer in self.layers:
            steps = layer.run(steps, B)
        return steps[-1]


class ReconstructionLayer:
    """Full-height kernels over the K mode rows, sliding along time."""

    def __init__(self, num_kernels: int, kernel_height: int, kernel_width: int, rng: np.random.Generator):
        self.num_kernels = num_kernels
        self.kernel_height = kernel_height
        self.kernel_width = kernel_width
        fan_in = kernel_height * kernel_width
        self.weight = uniform_init(rng, (num_kernels, kernel_height, kernel_width), fan_in, "recon.weight")
        self.bias = uniform_init(rng, num_kernels, fan_in, "recon.bias")

    def parameters(self) -> dict[str, Tensor]:
        return {"recon.weight": self.weight, "recon.bias": self.bias}

    def forward(self, windows) -> Tensor:
        return T.relu(T.conv_time(windows, self.weight, self.bias))


def reconstruction_forward(window, layer: ReconstructionLayer) -> Tensor:
    """ReLU reconstructed sub-signals for a ``(K, L)`` window (or a batch)."""
    window = T.as_tensor(window)
    if window.data.ndim == 2:
        if window.shape[0] != layer.kernel_height:
            raise ShapeError(f"window height {window.shape[0]} != kernel height {layer.kernel_height}")
        out = layer.forward(T.reshape(window, (1,) + window.shape))
        return T.reshape(out, out.shape[1:])
    if window.data.ndim != 3 or window.shape[1] != layer.kernel_height:
        raise ShapeError(f"window shape {window.shape} incompatible with kernel height {layer.kernel_height}")
    return layer.forward(window)


class LinearHead:
    def __init__(self, in_features: int, rng: np.random.Generator):
        self.weight = uniform_init(rng, (1, in_features), in_features, "head.weight")
        self.bias = uniform_init(rng, 1, in_features, "head.bias")

    def parameters(self) -> dict[str, Tensor]:
        return {"head.weight": self.weight, "head.bias": self.bias}

    def forward(self, h: Tensor) -> Tensor:
        out = T.linear(h, self.weight, self.bias)
        return T.reshape(out, (out.shape[0],))
