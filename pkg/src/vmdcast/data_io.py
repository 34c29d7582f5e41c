"""Series ingestion, synthetic data, checkpoints and report files.

CSV dialect: comma separated, exactly one header row, no quoting.  Floats
are written with ``repr`` so they round-trip exactly.  Checkpoints are JSON
with every parameter value stored as ``float.hex`` text.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    CorruptCheckpointError,
    CsvParseError,
    DataError,
    EmptySeriesError,
    IncompatibleCheckpointError,
    SpecError,
)
from .pipeline.models import ModelSpec
from .pipeline.preprocess import Scaler
from .vmd import ModeSet, VmdConfig

CHECKPOINT_FORMAT = "vmdcast-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class TimeSeries:
    timestamps: list[str]
    values: np.ndarray
    name: str = "value"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if len(self.values) == 0:
            raise EmptySeriesError("time series has no observations")
        if len(self.timestamps) != len(self.values):
            raise DataError("timestamps and values differ in length")
        if not np.all(np.isfinite(self.values)):
            raise DataError("time series contains non-finite values")

    def __len__(self) -> int:
        return len(self.values)


# ------------------------------------------------------------------- writing


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary sibling and rename, so no partial file survives."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    atomic_write_text(path, csv_text(header, rows))


def write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2) + "\n")


# ------------------------------------------------------------------- reading


def _split(line: str) -> list[str]:
    return [c.strip() for c in line.rstrip("\r\n").split(",")]


def read_csv_table(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise DataError(f"no such file: {path}") from None
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise EmptySeriesError(f"{path} is empty")
    return _split(lines[0]), [_split(ln) for ln in lines[1:]]


def load_csv(path, value_column: str | int | None = None, skip_missing: bool = False) -> TimeSeries:
    """Load ``timestamp,value`` style files.

    ``value_column`` is a header name or a 0-based index (default: the last
    column).  The first column holds the timestamps unless it is the value
    column itself, in which case row numbers are used.  With
    ``skip_missing`` rows whose value is empty or unparseable are dropped.
    """
    header, rows = read_csv_table(path)
    if value_column is None:
        col = len(header) - 1
    elif isinstance(value_column, int) or str(value_column).isdigit():
        col = int(value_column)
    elif value_column in header:
        col = header.index(value_column)
    else:
        raise DataError(f"column {value_column!r} not in header {header}")
    if not 0 <= col < len(header):
        raise DataError(f"column index {col} out of range for header {header}")

    stamps, values = [], []
    for lineno, row in enumerate(rows, start=2):
        raw = row[col] if col < len(row) else ""
        try:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
        except ValueError:
            if skip_missing:
                continue
            raise CsvParseError(f"{path}: row {lineno}: cannot parse {raw!r} as a number") from None
        stamps.append(row[0] if col != 0 else str(lineno - 2))
        values.append(v)
    if not values:
        raise EmptySeriesError(f"{path}: no usable rows")
    return TimeSeries(stamps, np.array(values), name=header[col] or "value")


def save_series(path, series: TimeSeries) -> None:
    write_csv(path, ["timestamp", series.name], zip(series.timestamps, series.values))


# ----------------------------------------------------------------- synthetic


@dataclass(frozen=True)
class SyntheticSpec:
    n: int
    tones: tuple[tuple[float, float], ...] = ()
    trend_slope: float = 0.0
    ar1_coeff: float = 0.0
    noise_std: float = 0.0
    offset: float = 0.0
    seed: int = 0


def generate_synthetic(spec: SyntheticSpec) -> TimeSeries:
    """``offset + sum a sin(2 pi f t) + slope t + AR(1) noise``, t = 0..n-1.

    The AR(1) noise starts from its stationary distribution.
    """
    if spec.n < 32:
        raise SpecError(f"n must be >= 32, got {spec.n}")
    if not abs(spec.ar1_coeff) < 1:
        raise SpecError(f"|ar1_coeff| must be < 1, got {spec.ar1_coeff}")
    if not spec.noise_std >= 0:
        raise SpecError(f"noise_std must be >= 0, got {spec.noise_std}")
    t = np.arange(spec.n, dtype=np.float64)
    values = np.full(spec.n, float(spec.offset))
    for freq, amp in spec.tones:
        values += amp * np.sin(2 * np.pi * freq * t)
    values += spec.trend_slope * t
    if spec.noise_std > 0:
        z = np.random.default_rng(spec.seed).standard_normal(spec.n) * spec.noise_std
        noise = np.empty(spec.n)
        noise[0] = z[0] / math.sqrt(1.0 - spec.ar1_coeff**2)
        for i in range(1, spec.n):
            noise[i] = spec.ar1_coeff * noise[i - 1] + z[i]
        values += noise
    return TimeSeries([str(i) for i in range(spec.n)], values, name="value")


# --------------------------------------------------------------------- modes


def write_modes(path, timestamps: Sequence[str], modes: ModeSet, meta_path=None) -> Path:
    """Mode CSV plus a JSON metadata sidecar; returns the sidecar path."""
    K = modes.num_modes
    header = ["t"] + [f"mode_{k + 1}" for k in range(K)] + ["residual"]
    rows = (
        [str(timestamps[i])] + [modes.modes[k, i] for k in range(K)] + [modes.residual[i]]
        for i in range(len(modes))
    )
    write_csv(path, header, rows)
    meta_path = Path(meta_path) if meta_path else Path(str(path) + ".meta.json")
    write_json(
        meta_path,
        {
            "config": modes.config.to_dict(),
            "center_frequencies": [float(w) for w in modes.center_frequencies],
            "iterations_used": int(modes.iterations_used),
            "converged": bool(modes.converged),
            "final_change": float(modes.final_change),
        },
    )
    return meta_path


def read_modes(path) -> tuple[list[str], np.ndarray, np.ndarray]:
    header, rows = read_csv_table(path)
    if header[0] != "t" or header[-1] != "residual":
        raise DataError(f"{path} is not a mode file")
    try:
        data = np.array([[float(v) for v in r[1:]] for r in rows])
    except ValueError as exc:
        raise CsvParseError(f"{path}: {exc}") from None
    return [r[0] for r in rows], data[:, :-1].T.copy(), data[:, -1].copy()


# --------------------------------------------------------------- checkpoints


@dataclass
class ModelCheckpoint:
    spec: ModelSpec
    scaler: Scaler
    vmd_config: VmdConfig | None
    params: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> str:
        blocks = [
            {
                "name": name,
                "shape": list(a.shape),
                "data": [float(x).hex() for x in np.asarray(a, dtype=np.float64).reshape(-1)],
            }
            for name, a in self.params.items()
        ]
        doc = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "spec": self.spec.to_dict(),
            "scaler": {"min": float(self.scaler.min).hex(), "max": float(self.scaler.max).hex()},
            "vmd_config": self.vmd_config.to_dict() if self.vmd_config else None,
            "metadata": self.metadata,
            "parameters": blocks,
        }
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ModelCheckpoint":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CorruptCheckpointError(f"checkpoint is not valid JSON: {exc}") from None
        if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
            raise CorruptCheckpointError("not a vmdcast checkpoint")
        if doc.get("version") != CHECKPOINT_VERSION:
            raise IncompatibleCheckpointError(
                f"checkpoint version {doc.get('version')!r}, this build reads {CHECKPOINT_VERSION}"
            )
        try:
            spec = ModelSpec.from_dict(doc["spec"])
            scaler = Scaler(float.fromhex(doc["scaler"]["min"]), float.fromhex(doc["scaler"]["max"]))
            vmd = VmdConfig.from_dict(doc["vmd_config"]) if doc["vmd_config"] is not None else None
            params = {}
            for block in doc["parameters"]:
                shape = tuple(int(s) for s in block["shape"])
                flat = np.array([float.fromhex(v) for v in block["data"]], dtype=np.float64)
                if flat.size != int(np.prod(shape)):
                    raise CorruptCheckpointError(f"block {block['name']}: size does not match shape")
                params[block["name"]] = flat.reshape(shape)
            metadata = doc["metadata"]
        except CorruptCheckpointError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptCheckpointError(f"malformed checkpoint: {exc!r}") from None
        return cls(spec, scaler, vmd, params, metadata)


def save_checkpoint(ckpt: ModelCheckpoint, path) -> None:
    atomic_write_text(path, ckpt.to_json())


def load_checkpoint(path) -> ModelCheckpoint:
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise DataError(f"no such checkpoint: {path}") from None
    return ModelCheckpoint.from_json(text)


# ------------------------------------------------------- curves, predictions


def write_curve(path, curve) -> None:
    write_csv(path, ["epoch", "lr", "train_mse"], ((p.epoch, p.lr, p.train_mse) for p in curve))


PREDICTION_HEADER = ["t", "index", "split", "actual", "prediction"]


def write_predictions(path, timestamps, indices, splits, actual, predicted) -> None:
    rows = (
        (str(timestamps[i]), int(i), s, a, p)
        for i, s, a, p in zip(indices, splits, actual, predicted)
    )
    write_csv(path, PREDICTION_HEADER, rows)


@dataclass
class PredictionTable:
    timestamps: list[str]
    indices: np.ndarray
    splits: list[str]
    actual: np.ndarray
    predicted: np.ndarray

    def select(self, split: str) -> tuple[np.ndarray, np.ndarray]:
        mask = np.array([s == split for s in self.splits], dtype=bool)
        return self.actual[mask], self.predicted[mask]


def read_predictions(path) -> PredictionTable:
    header, rows = read_csv_table(path)
    if header != PREDICTION_HEADER:
        raise DataError(f"{path}: expected header {','.join(PREDICTION_HEADER)}")
    try:
        return PredictionTable(
            [r[0] for r in rows],
            np.array([int(r[1]) for r in rows], dtype=np.int64),
            [r[2] for r in rows],
            np.array([float(r[3]) for r in rows]),
            np.array([float(r[4]) for r in rows]),
        )
    except (ValueError, IndexError) as exc:
        raise CsvParseError(f"{path}: {exc}") from None
