"""Scaling, chronological split and sliding windows."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateScaleError, ShapeError, SignalTooShortError, SpecError
from ..vmd import MIN_SIGNAL_LENGTH, VmdConfig, decompose


@dataclass(frozen=True)
class Scaler:
    """Min-max map fitted on the in-sample range; extrapolates linearly."""

    min: float
    max: float

    def __post_init__(self):
        if not (math.isfinite(self.min) and math.isfinite(self.max)) or not self.max > self.min:
            raise DegenerateScaleError(f"scaler needs max > min, got [{self.min}, {self.max}]")

    def apply(self, x):
        return (np.asarray(x, dtype=np.float64) - self.min) / (self.max - self.min)

    def invert(self, z):
        return np.asarray(z, dtype=np.float64) * (self.max - self.min) + self.min


def fit_scaler(series, in_sample_len: int | None = None) -> Scaler:
    x = np.asarray(series, dtype=np.float64)
    n = len(x) if in_sample_len is None else in_sample_len
    if n < 2 or n > len(x):
        raise SpecError(f"in_sample_len must be in [2, {len(x)}], got {n}")
    head = x[:n]
    lo, hi = float(head.min()), float(head.max())
    if not hi > lo:
        raise DegenerateScaleError("fit range is constant; min-max scaling undefined")
    return Scaler(lo, hi)


def chronological_split(n_samples: int, in_fraction: float = 0.8) -> tuple[int, int]:
    """``(floor(in_fraction * n), remainder)``, in time order."""
    if n_samples < 5:
        raise SpecError(f"need at least 5 samples to split, got {n_samples}")
    if not 0 < in_fraction < 1:
        raise SpecError(f"in_fraction must be in (0, 1), got {in_fraction}")
    # the epsilon guards against 0.8 * 2023 style products landing just under an integer
    n_in = int(math.floor(in_fraction * n_samples + 1e-9))
    n_in = min(max(n_in, 1), n_samples - 1)
    return n_in, n_samples - n_in


@dataclass
class WindowedDataset:
    inputs: np.ndarray  # (N_s, K, L)
    targets: np.ndarray  # (N_s,)
    target_indices: np.ndarray  # (N_s,) int

    def __len__(self) -> int:
        return len(self.targets)

    def subset(self, mask_or_index) -> "WindowedDataset":
        return WindowedDataset(
            self.inputs[mask_or_index], self.targets[mask_or_index], self.target_indices[mask_or_index]
        )


def window_inputs(mode_matrix, L: int) -> np.ndarray:
    """All contiguous ``(K, L)`` windows whose successor index exists."""
    m = np.asarray(mode_matrix, dtype=np.float64)
    if m.ndim == 1:
        m = m[None, :]
    N = m.shape[1]
    if N <= L:
        raise SignalTooShortError(f"series of length {N} gives no windows of length {L}")
    views = np.lib.stride_tricks.sliding_window_view(m, L, axis=1)  # (K, N-L+1, L)
    return np.ascontiguousarray(views[:, : N - L].transpose(1, 0, 2))


def make_windows(mode_matrix, normalized_series, L: int) -> WindowedDataset:
    """One-step-ahead samples: columns ``s..s+L-1`` predict value ``s+L``."""
    y = np.asarray(normalized_series, dtype=np.float64)
    m = np.asarray(mode_matrix, dtype=np.float64)
    if m.ndim == 1:
        m = m[None, :]
    if m.shape[1] != len(y):
        raise ShapeError(f"mode matrix has {m.shape[1]} columns but series has {len(y)} values")
    inputs = window_inputs(m, L)
    idx = np.arange(L, len(y))
    return WindowedDataset(inputs, y[idx].copy(), idx)


def causal_windows(
    normalized_series, L: int, vmd_config: VmdConfig, history: int = 256
) -> WindowedDataset:
    """Windows whose modes come from decomposing only the past.

    For target index ``j`` the trailing ``history`` values before ``j`` are
    decomposed and the last ``L`` mode columns form the input.  Indices
    without enough history to decompose are skipped, so the dataset starts
    later than the non-causal one.
    """
    y = np.asarray(normalized_series, dtype=np.float64)
    min_len = max(MIN_SIGNAL_LENGTH, 4 * vmd_config.num_modes, L)
    if history < min_len:
        raise SpecError(f"causal history must be >= {min_len}, got {history}")
    start = min_len
    if len(y) <= start:
        raise SignalTooShortError(f"series of length {len(y)} too short for causal windows")
    idx = np.arange(start, len(y))
    inputs = np.empty((len(idx), vmd_config.num_modes, L))
    for s, j in enumerate(idx):
        past = y[max(0, j - history) : j]
        inputs[s] = decompose(past, vmd_config).modes[:, -L:]
    return WindowedDataset(inputs, y[idx].copy(), idx)
