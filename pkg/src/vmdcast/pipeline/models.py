"""Model variants, hyper-parameter presets and network assembly."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import SpecError
from ..nn import Model

KERNEL_GRID = (1, 3, 5, 7)
HIDDEN_GRID = (6, 8, 10, 12)
LAYER_GRID = (1, 2, 3)


class Variant(str, enum.Enum):
    LSTM = "lstm"
    VMD_LSTM = "vmd-lstm"
    VMD_CNN_LSTM = "vmd-cnn-lstm"

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for v in cls:
            if v.value == key:
                return v
        raise SpecError(f"unknown variant {value!r}; choose from {[v.value for v in cls]}")

    @property
    def uses_vmd(self) -> bool:
        return self is not Variant.LSTM

    @property
    def label(self) -> str:
        return self.value.upper()


@dataclass(frozen=True)
class ModelSpec:
    """Architecture of one network.

    Fields that a variant does not use are normalized away: a raw LSTM always
    has ``K == 1`` and ``n_k == 0``; VMD-LSTM always has ``n_k == 0``.
    """

    variant: Variant
    n_h: int
    n_l: int
    n_k: int = 0
    L: int = 12
    K: int = 4
    kernel_width: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        if self.variant is Variant.LSTM:
            object.__setattr__(self, "K", 1)
        if self.variant is not Variant.VMD_CNN_LSTM:
            object.__setattr__(self, "n_k", 0)
            object.__setattr__(self, "kernel_width", None)
        for name in ("n_h", "n_l", "L", "K"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise SpecError(f"{name} must be a positive integer, got {v!r}")
        if self.variant is Variant.VMD_CNN_LSTM and (
            not isinstance(self.n_k, (int, np.integer)) or self.n_k < 1
        ):
            raise SpecError(f"VMD-CNN-LSTM needs n_k >= 1, got {self.n_k!r}")
        if self.kernel_width is not None and self.kernel_width < 1:
            raise SpecError(f"kernel_width must be >= 1, got {self.kernel_width}")

    @property
    def lstm_input_size(self) -> int:
        return self.K + self.n_k

    def to_dict(self) -> dict:
        d = asdict(self)
        d["variant"] = self.variant.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(**d)


# optimal hyper-parameters per dataset: (n_h, n_l) or (n_k, n_h, n_l)
PRESETS: dict[str, dict[Variant, dict[str, int]]] = {
    "dataset1": {
        Variant.LSTM: dict(n_h=10, n_l=2),
        Variant.VMD_LSTM: dict(n_h=12, n_l=3),
        Variant.VMD_CNN_LSTM: dict(n_k=5, n_h=12, n_l=2),
    },
    "dataset2": {
        Variant.LSTM: dict(n_h=8, n_l=2),
        Variant.VMD_LSTM: dict(n_h=10, n_l=2),
        Variant.VMD_CNN_LSTM: dict(n_k=7, n_h=10, n_l=2),
    },
    "dataset3": {
        Variant.LSTM: dict(n_h=6, n_l=1),
        Variant.VMD_LSTM: dict(n_h=12, n_l=2),
        Variant.VMD_CNN_LSTM: dict(n_k=3, n_h=12, n_l=2),
    },
    "dataset4": {
        Variant.LSTM: dict(n_h=10, n_l=1),
        Variant.VMD_LSTM: dict(n_h=10, n_l=2),
        Variant.VMD_CNN_LSTM: dict(n_k=1, n_h=12, n_l=3),
    },
}


def preset_spec(name: str, variant, L: int = 12, K: int = 4) -> ModelSpec:
    if name not in PRESETS:
        raise SpecError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    variant = Variant.parse(variant)
    return ModelSpec(variant=variant, L=L, K=K, **PRESETS[name][variant])


def assemble(spec: ModelSpec, seed: int = 0) -> Model:
    """Freshly initialized network for ``spec``; deterministic in ``seed``."""
    return Model(
        num_rows=spec.K,
        seq_len=spec.L,
        hidden_size=spec.n_h,
        num_layers=spec.n_l,
        num_kernels=spec.n_k,
        kernel_width=spec.kernel_width,
        rng=np.random.default_rng(seed),
    )
