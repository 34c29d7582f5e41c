"""End-to-end flow: normalize, decompose, window, split, train, forecast.

The scaler is fitted on the in-sample prefix only.  In the default
(non-causal) mode the whole normalized series is decomposed once before
windowing, so out-of-sample inputs carry information from the full series;
``causal=True`` decomposes a trailing history per window instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_io import ModelCheckpoint
from .errors import SpecError
from .nn import Model
from .pipeline import (
    ModelSpec,
    Scaler,
    TrainConfig,
    Variant,
    WindowedDataset,
    assemble,
    causal_windows,
    chronological_split,
    fit_scaler,
    grid_search,
    make_windows,
    train,
)
from .pipeline.training import CurvePoint, GridSearchResult
from .vmd import ModeSet, VmdConfig, decompose


@dataclass
class Prepared:
    scaler: Scaler
    normalized: np.ndarray
    in_sample_len: int
    dataset: WindowedDataset
    modes: ModeSet | None = None

    @property
    def in_sample_mask(self) -> np.ndarray:
        return self.dataset.target_indices < self.in_sample_len

    def in_sample(self) -> WindowedDataset:
        return self.dataset.subset(self.in_sample_mask)


def prepare(
    values,
    spec: ModelSpec,
    vmd_config: VmdConfig | None = None,
    split_fraction: float = 0.8,
    causal: bool = False,
    causal_history: int = 256,
) -> Prepared:
    values = np.asarray(values, dtype=np.float64)
    in_len, _ = chronological_split(len(values), split_fraction)
    scaler = fit_scaler(values, in_len)
    norm = scaler.apply(values)
    modes = None
    if spec.variant is Variant.LSTM:
        dataset = make_windows(norm[None, :], norm, spec.L)
    else:
        vmd_config = vmd_config or VmdConfig(num_modes=spec.K)
        if vmd_config.num_modes != spec.K:
            raise SpecError(f"VMD config has {vmd_config.num_modes} modes but the model expects {spec.K}")
        if causal:
            dataset = causal_windows(norm, spec.L, vmd_config, history=causal_history)
        else:
            modes = decompose(norm, vmd_config)
            dataset = make_windows(modes.modes, norm, spec.L)
    return Prepared(scaler, norm, in_len, dataset, modes)


def _checkpoint(spec, prepared: Prepared, vmd_config, model: Model, meta: dict) -> ModelCheckpoint:
    return ModelCheckpoint(
        spec=spec,
        scaler=prepared.scaler,
        vmd_config=vmd_config if spec.variant.uses_vmd else None,
        params=model.state_arrays(),
        metadata=meta,
    )


def _meta(config: TrainConfig, split_fraction, causal, causal_history, curve) -> dict:
    return {
        "seed": int(config.seed),
        "epochs": int(config.epochs),
        "batch_size": int(config.batch_size),
        "schedule": {
            "eta_max": config.schedule.eta_max,
            "eta_min": config.schedule.eta_min,
            "period": config.schedule.period,
            "period_mult": config.schedule.period_mult,
        },
        "split_fraction": float(split_fraction),
        "causal": bool(causal),
        "causal_history": int(causal_history),
        "final_loss": float(curve[-1].train_mse) if curve else None,
    }


def fit(
    values,
    spec: ModelSpec,
    config: TrainConfig,
    vmd_config: VmdConfig | None = None,
    split_fraction: float = 0.8,
    causal: bool = False,
    causal_history: int = 256,
) -> tuple[ModelCheckpoint, list[CurvePoint], Prepared]:
    """Train ``spec`` on the in-sample windows of ``values``."""
    if spec.variant.uses_vmd:
        vmd_config = vmd_config or VmdConfig(num_modes=spec.K)
    prepared = prepare(values, spec, vmd_config, split_fraction, causal, causal_history)
    model = assemble(spec, seed=config.seed)
    result = train(model, prepared.in_sample(), config)
    meta = _meta(config, split_fraction, causal, causal_history, result.curve)
    return _checkpoint(spec, prepared, vmd_config, result.model, meta), result.curve, prepared


def fit_grid(
    values,
    variant,
    config: TrainConfig,
    grids=None,
    vmd_config: VmdConfig | None = None,
    L: int = 12,
    K: int = 4,
    split_fraction: float = 0.8,
    causal: bool = False,
    causal_history: int = 256,
    jobs: int = 1,
) -> tuple[ModelCheckpoint, GridSearchResult, Prepared]:
    variant = Variant.parse(variant)
    probe = ModelSpec(variant=variant, n_h=1, n_l=1, n_k=1, L=L, K=K)
    if variant.uses_vmd:
        vmd_config = vmd_config or VmdConfig(num_modes=probe.K)
    prepared = prepare(values, probe, vmd_config, split_fraction, causal, causal_history)
    result = grid_search(variant, prepared.in_sample(), config, grids, jobs=jobs)
    meta = _meta(config, split_fraction, causal, causal_history, result.final.curve)
    return _checkpoint(result.best_spec, prepared, vmd_config, result.final.model, meta), result, prepared


def model_from_checkpoint(ckpt: ModelCheckpoint) -> Model:
    model = assemble(ckpt.spec, seed=0)
    model.load_arrays(ckpt.params)
    return model


@dataclass
class Forecast:
    target_indices: np.ndarray
    actual: np.ndarray
    predicted: np.ndarray
    in_sample_len: int

    @property
    def splits(self) -> list[str]:
        return ["in" if i < self.in_sample_len else "out" for i in self.target_indices]

    def part(self, split: str) -> tuple[np.ndarray, np.ndarray]:
        mask = self.target_indices < self.in_sample_len
        if split == "out":
            mask = ~mask
        return self.actual[mask], self.predicted[mask]


def forecast(ckpt: ModelCheckpoint, values) -> Forecast:
    """Re-derive the inputs the checkpoint was trained on and predict every window.

    The scaler stored in the checkpoint is reused, so forecasting the
    training series reproduces training-time inputs exactly.
    """
    values = np.asarray(values, dtype=np.float64)
    meta = ckpt.metadata
    in_len, _ = chronological_split(len(values), meta.get("split_fraction", 0.8))
    norm = ckpt.scaler.apply(values)
    spec = ckpt.spec
    if spec.variant is Variant.LSTM:
        dataset = make_windows(norm[None, :], norm, spec.L)
    elif meta.get("causal"):
        dataset = causal_windows(norm, spec.L, ckpt.vmd_config, history=meta.get("causal_history", 256))
    else:
        dataset = make_windows(decompose(norm, ckpt.vmd_config).modes, norm, spec.L)
    model = model_from_checkpoint(ckpt)
    predicted = ckpt.scaler.invert(model.predict(dataset.inputs))
    idx = dataset.target_indices
    return Forecast(idx, values[idx], predicted, in_len)
