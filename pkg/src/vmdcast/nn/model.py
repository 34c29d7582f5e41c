"""The assembled forecasting network.

``window (K, L) -> [modes; ReLU(conv(modes))] -> LSTM stack -> affine head``.
Without kernels (``num_kernels == 0``) the reconstruction branch is absent
and the LSTM sees the K mode rows only; a raw LSTM is simply ``K == 1`` fed
with the normalized series window.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError, SpecError
from . import tensor as T
from .layers import LinearHead, LstmStack, ReconstructionLayer
from .tensor import Tensor


class Model:
    def __init__(
        self,
        num_rows: int,
        seq_len: int,
        hidden_size: int,
        num_layers: int,
        num_kernels: int = 0,
        kernel_width: int | None = None,
        rng: np.random.Generator | None = None,
    ):
        for label, v, lo in (
            ("num_rows", num_rows, 1),
            ("seq_len", seq_len, 1),
            ("hidden_size", hidden_size, 1),
            ("num_layers", num_layers, 1),
            ("num_kernels", num_kernels, 0),
        ):
            if int(v) != v or v < lo:
                raise SpecError(f"{label} must be an integer >= {lo}, got {v}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.num_rows = num_rows
        self.seq_len = seq_len
        self.kernel_width = kernel_width if kernel_width is not None else seq_len
        if self.kernel_width < 1:
            raise SpecError(f"kernel_width must be >= 1, got {self.kernel_width}")
        self.recon = (
            ReconstructionLayer(num_kernels, num_rows, self.kernel_width, rng) if num_kernels else None
        )
        self.lstm = LstmStack(num_rows + num_kernels, hidden_size, num_layers, rng)
        self.head = LinearHead(hidden_size, rng)

    @property
    def num_kernels(self) -> int:
        return self.recon.num_kernels if self.recon else 0

    @property
    def lstm_input_size(self) -> int:
        return self.lstm.input_size

    def parameters(self) -> dict[str, Tensor]:
        params = {}
        if self.recon:
            params.update(self.recon.parameters())
        params.update(self.lstm.parameters())
        params.update(self.head.parameters())
        return params

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters().values())

    def zero_grad(self) -> None:
        for p in self.parameters().values():
            p.grad = None

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.parameters().items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        if set(arrays) != set(params):
            missing = sorted(set(params) - set(arrays))
            extra = sorted(set(arrays) - set(params))
            raise ShapeError(f"parameter names differ: missing {missing}, unexpected {extra}")
        for k, p in params.items():
            a = np.asarray(arrays[k], dtype=np.float64)
            if a.shape != p.shape:
                raise ShapeError(f"parameter {k}: shape {a.shape} != {p.shape}")
            p.data = a.copy()

    def forward(self, windows) -> Tensor:
        """Batch forward: ``windows`` is ``(B, K, L)``; returns ``(B,)``."""
        x = np.asarray(windows.data if isinstance(windows, Tensor) else windows, dtype=np.float64)
        if x.ndim != 3 or x.shape[1:] != (self.num_rows, self.seq_len):
            raise ShapeError(
                f"expected windows of shape (B, {self.num_rows}, {self.seq_len}), got {x.shape}"
            )
        seq = Tensor(x)
        if self.recon:
            seq = T.concat([seq, self.recon.forward(seq)], axis=1)
        return self.head.forward(self.lstm.forward(seq))

    def predict(self, windows, batch_size: int = 1024) -> np.ndarray:
        x = np.asarray(windows, dtype=np.float64)
        if len(x) == 0:
            return np.zeros(0)
        return np.concatenate(
            [self.forward(x[i : i + batch_size]).data for i in range(0, len(x), batch_size)]
        )


def forward_predict(window, model: Model) -> float:
    """Scalar prediction (normalized units) for one ``(K, L)`` window."""
    w = np.asarray(window, dtype=np.float64)
    if w.shape != (model.num_rows, model.seq_len):
        raise ShapeError(f"window shape {w.shape} != ({model.num_rows}, {model.seq_len})")
    return float(model.forward(w[None]).data[0])
