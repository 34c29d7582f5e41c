from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError, SpecError, TrainingDivergedError
from .tensor import Tensor


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> None:
    """One bias-corrected Adam update, in place on ``params`` and ``state``.

    Parameters without an entry in ``grads`` are treated as having zero
    gradient.  Raises ``TrainingDivergedError`` before touching anything if a
    gradient is non-finite.
    """
    if not lr >= 0:
        raise SpecError(f"learning rate must be >= 0, got {lr}")
    for name, g in grads.items():
        if g.shape != params[name].shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, expected {params[name].shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingDivergedError(f"non-finite gradient for parameter {name}")

    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros(p.shape)
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros(p.shape)
            state.v[name] = np.zeros(p.shape)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + state.epsilon)


@dataclass(frozen=True)
class CosineRestartSchedule:
    eta_max: float = 1e-3
    eta_min: float = 0.0
    period: int = 200
    period_mult: int = 1

    def __post_init__(self):
        if not (0 <= self.eta_min <= self.eta_max):
            raise SpecError("need 0 <= eta_min <= eta_max")
        if self.period < 1 or self.period_mult < 1:
            raise SpecError("period and period multiplier must be >= 1")


def lr_at(epoch: int, schedule: CosineRestartSchedule | None = None) -> float:
    """Cosine-annealed learning rate with warm restarts."""
    s = schedule or CosineRestartSchedule()
    if epoch < 0:
        raise SpecError(f"epoch must be >= 0, got {epoch}")
    t_cur, t_i = epoch, s.period
    if s.period_mult == 1:
        t_cur = epoch % s.period
    else:
        while t_cur >= t_i:
            t_cur -= t_i
            t_i *= s.period_mult
    return s.eta_min + 0.5 * (s.eta_max - s.eta_min) * (1.0 + math.cos(math.pi * t_cur / t_i))
