from .forecasting import forecast_series
from .models import PRESETS, ModelSpec, Variant, assemble, preset_spec
from .preprocess import (
    Scaler,
    WindowedDataset,
    causal_windows,
    chronological_split,
    fit_scaler,
    make_windows,
)
from .training import (
    CurvePoint,
    GridSearchResult,
    TrainConfig,
    TrainResult,
    grid_points,
    grid_search,
    train,
)

__all__ = [
    "PRESETS",
    "CurvePoint",
    "GridSearchResult",
    "ModelSpec",
    "Scaler",
    "TrainConfig",
    "TrainResult",
    "Variant",
    "WindowedDataset",
    "assemble",
    "causal_windows",
    "chronological_split",
    "fit_scaler",
    "forecast_series",
    "grid_points",
    "grid_search",
    "make_windows",
    "preset_spec",
    "train",
]
