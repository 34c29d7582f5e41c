from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from ..nn import Model
from .preprocess import Scaler, window_inputs


def forecast_series(model: Model, mode_matrix, scaler: Scaler) -> np.ndarray:
    """One-step-ahead predictions in original units for targets ``L..N-1``."""
    m = np.asarray(mode_matrix, dtype=np.float64)
    if m.ndim == 1:
        m = m[None, :]
    if m.shape[0] != model.num_rows:
        raise ShapeError(f"model expects {model.num_rows} input rows, got {m.shape[0]}")
    return scaler.invert(model.predict(window_inputs(m, model.seq_len)))
