"""Mini-batch training and hyper-parameter grid search."""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..errors import SpecError, TrainingDivergedError
from ..nn import AdamState, CosineRestartSchedule, Model, adam_step, lr_at, mse_loss
from .models import HIDDEN_GRID, KERNEL_GRID, LAYER_GRID, ModelSpec, Variant, assemble
from .preprocess import WindowedDataset, chronological_split

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 2000
    batch_size: int = 128
    schedule: CosineRestartSchedule = field(default_factory=CosineRestartSchedule)
    seed: int = 0
    validation_fraction: float = 0.2

    def __post_init__(self):
        if self.epochs < 0:
            raise SpecError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise SpecError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0 < self.validation_fraction < 1:
            raise SpecError(f"validation_fraction must be in (0, 1), got {self.validation_fraction}")


@dataclass
class CurvePoint:
    epoch: int
    lr: float
    train_mse: float


@dataclass
class TrainResult:
    model: Model
    curve: list[CurvePoint]

    @property
    def final_loss(self) -> float:
        return self.curve[-1].train_mse if self.curve else math.nan


def train(model: Model, dataset: WindowedDataset, config: TrainConfig) -> TrainResult:
    """Adam on shuffled mini-batches with the cosine warm-restart schedule.

    The per-epoch MSE is the sample-weighted mean of the batch losses seen
    during that epoch.  The last short batch is kept.
    """
    n = len(dataset)
    if n == 0:
        raise SpecError("cannot train on an empty dataset")
    rng = np.random.default_rng(config.seed)
    params = model.parameters()
    state = AdamState()
    curve: list[CurvePoint] = []
    for epoch in range(config.epochs):
        lr = lr_at(epoch, config.schedule)
        order = rng.permutation(n)
        weighted = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            model.zero_grad()
            loss = mse_loss(model.forward(dataset.inputs[batch]), dataset.targets[batch])
            value = float(loss.data)
            if not math.isfinite(value):
                raise TrainingDivergedError(f"non-finite training loss at epoch {epoch}", epoch)
            loss.backward()
            grads = {k: p.grad for k, p in params.items() if p.grad is not None}
            try:
                adam_step(params, grads, state, lr)
            except TrainingDivergedError as exc:
                raise TrainingDivergedError(f"{exc} at epoch {epoch}", epoch) from None
            weighted += value * len(batch)
        curve.append(CurvePoint(epoch, lr, weighted / n))
    return TrainResult(model, curve)


def rmse_on(model: Model, dataset: WindowedDataset) -> float:
    pred = model.predict(dataset.inputs)
    return float(np.sqrt(np.mean((pred - dataset.targets) ** 2)))


# ---------------------------------------------------------------- grid search


def grid_points(variant, grids: Mapping[str, Sequence[int]] | None = None, L: int = 12, K: int = 4):
    """Cartesian product of the grids relevant to ``variant``."""
    variant = Variant.parse(variant)
    grids = dict(grids or {})
    n_k = list(grids.get("n_k", KERNEL_GRID))
    n_h = list(grids.get("n_h", HIDDEN_GRID))
    n_l = list(grids.get("n_l", LAYER_GRID))
    if not n_h or not n_l or (variant is Variant.VMD_CNN_LSTM and not n_k):
        raise SpecError("every grid used by the variant must be non-empty")
    if variant is not Variant.VMD_CNN_LSTM:
        n_k = [0]
    return [
        ModelSpec(variant=variant, n_k=k, n_h=h, n_l=l, L=L, K=K)
        for k, h, l in itertools.product(n_k, n_h, n_l)
    ]


@dataclass
class GridScore:
    spec: ModelSpec
    validation_rmse: float
    job_index: int


@dataclass
class GridSearchResult:
    best_spec: ModelSpec
    scores: list[GridScore]
    final: TrainResult


def _tie_key(score: GridScore):
    s = score.spec
    rmse = score.validation_rmse if math.isfinite(score.validation_rmse) else math.inf
    return (rmse, s.n_l, s.n_h, s.n_k)


def _grid_job(job):
    index, spec, fit_set, val_set, config, warm = job
    model = assemble(spec, seed=config.seed + index)
    if warm is not None:
        model.load_arrays(warm)
    job_config = TrainConfig(
        epochs=config.epochs,
        batch_size=config.batch_size,
        schedule=config.schedule,
        seed=config.seed + index,
        validation_fraction=config.validation_fraction,
    )
    try:
        trained = train(model, fit_set, job_config).model
        score = rmse_on(trained, val_set)
    except TrainingDivergedError:
        score = math.inf
    return GridScore(spec, score, index)


def grid_search(
    variant,
    dataset: WindowedDataset,
    config: TrainConfig,
    grids: Mapping[str, Sequence[int]] | None = None,
    *,
    L: int | None = None,
    K: int | None = None,
    jobs: int = 1,
    warm_start: Mapping[ModelSpec, dict[str, np.ndarray]] | None = None,
) -> GridSearchResult:
    """Select hyper-parameters on a chronological hold-out of ``dataset``.

    Every grid point trains on the first ``1 - validation_fraction`` of the
    windows and is scored by RMSE on the rest.  Job ``i`` uses seed
    ``config.seed + i``.  Ties go to fewer layers, then fewer hidden units,
    then fewer kernels.  The winner is retrained on the whole dataset.

    ``warm_start`` maps a spec to initial parameter arrays used instead of a
    random initialization for that grid point.
    """
    L = dataset.inputs.shape[2] if L is None else L
    K = dataset.inputs.shape[1] if K is None else K
    specs = grid_points(variant, grids, L=L, K=K)
    n_fit, _ = chronological_split(len(dataset), 1.0 - config.validation_fraction)
    fit_set = dataset.subset(slice(0, n_fit))
    val_set = dataset.subset(slice(n_fit, None))
    warm_start = warm_start or {}
    work = [(i, s, fit_set, val_set, config, warm_start.get(s)) for i, s in enumerate(specs)]

    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            scores = list(pool.map(_grid_job, work))
    else:
        scores = [_grid_job(w) for w in work]
    for sc in scores:
        log.info("grid %s n_k=%d n_h=%d n_l=%d rmse=%.6g", sc.spec.variant.value,
                 sc.spec.n_k, sc.spec.n_h, sc.spec.n_l, sc.validation_rmse)

    best = min(scores, key=_tie_key)
    if not math.isfinite(best.validation_rmse):
        raise TrainingDivergedError("every grid point diverged")
    model = assemble(best.spec, seed=config.seed)
    if best.spec in warm_start:
        model.load_arrays(warm_start[best.spec])
    final = train(model, dataset, config)
    return GridSearchResult(best.spec, scores, final)
