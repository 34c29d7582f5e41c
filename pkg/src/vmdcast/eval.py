"""Forecast accuracy metrics, Diebold-Mariano comparison and table emitters.

MAE divides by the number of points.  DM p-values default to a Student-t
reference with ``T - 1`` degrees of freedom; ``distribution="normal"``
gives the asymptotic standard-normal mapping.  For T in the hundreds the
two differ in the fourth decimal.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .errors import ShapeError, SpecError, ZeroVarianceError

MIN_DM_LENGTH = 10


@dataclass(frozen=True)
class MetricReport:
    rmse: float
    mae: float
    mape: float | None  # percent; None when some actual is zero
    n: int

    @property
    def mape_defined(self) -> bool:
        return self.mape is not None

    def formatted(self, digits: int = 4) -> dict[str, str]:
        mape = "undefined" if self.mape is None else f"{self.mape:.2f}%"
        return {"rmse": f"{self.rmse:.{digits}f}", "mae": f"{self.mae:.{digits}f}", "mape": mape}


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ShapeError(f"length mismatch: {a.size} vs {b.size}")
    return a, b


def compute_metrics(actuals, predictions) -> MetricReport:
    y, yhat = _pair(actuals, predictions)
    if y.size == 0:
        raise ShapeError("metrics need at least one point")
    err = y - yhat
    mae = float(np.mean(np.abs(err)))
    # rescaling by the largest error keeps tiny errors from underflowing when squared
    peak = float(np.max(np.abs(err)))
    rmse = peak * math.sqrt(float(np.mean((err / peak) ** 2))) if peak > 0 else 0.0
    mape = None
    if np.all(y != 0):
        with np.errstate(over="ignore"):  # near-zero actuals may legitimately give inf
            mape = float(np.mean(100.0 * np.abs(err) / np.abs(y)))
    return MetricReport(rmse, mae, mape, int(y.size))


@dataclass(frozen=True)
class DmResult:
    """Negative ``statistic`` means method A has the lower squared loss."""

    statistic: float
    p_two_sided: float
    p_one_sided_less: float
    n: int
    distribution: str = "t"
    loss: str = "squared"


def _cdf(x: float, n: int, distribution: str) -> float:
    if distribution == "normal":
        return 0.5 * math.erfc(-x / math.sqrt(2.0))
    if distribution == "t":
        return float(stats.t.cdf(x, df=n - 1))
    raise SpecError(f"distribution must be 't' or 'normal', got {distribution!r}")


def dm_pvalues(statistic: float, n: int, distribution: str = "t") -> tuple[float, float]:
    """``(two_sided, one_sided_less)`` for a DM statistic on ``n`` points."""
    if n < 2:
        raise SpecError(f"need n >= 2 for p-values, got {n}")
    if distribution == "normal":
        # erfc keeps precision in the far tail where 1 - cdf would cancel
        two = math.erfc(abs(statistic) / math.sqrt(2.0))
    elif distribution == "t":
        two = float(2.0 * stats.t.sf(abs(statistic), df=n - 1))
    else:
        raise SpecError(f"distribution must be 't' or 'normal', got {distribution!r}")
    return min(1.0, two), _cdf(statistic, n, distribution)


def dm_test(errors_a, errors_b, distribution: str = "t") -> DmResult:
    """One-step DM test under squared loss with lag-0 variance."""
    a, b = _pair(errors_a, errors_b)
    n = a.size
    if n < MIN_DM_LENGTH:
        raise ShapeError(f"DM test needs at least {MIN_DM_LENGTH} points, got {n}")
    d = a * a - b * b
    var = float(np.var(d, ddof=1))
    if not var > 0:
        raise ZeroVarianceError("loss differential has zero variance; DM statistic undefined")
    stat = float(np.mean(d)) / math.sqrt(var / n)
    two, less = dm_pvalues(stat, n, distribution)
    return DmResult(stat, two, less, n, distribution)


def format_dm(result: DmResult) -> str:
    return f"{result.statistic:.4f} ({result.p_two_sided:.4f})"


# ------------------------------------------------------------------- tables


@dataclass
class MetricRow:
    model: str
    in_sample: MetricReport
    out_of_sample: MetricReport


_METRIC_COLS = ["model", "in_rmse", "in_mae", "in_mape", "out_rmse", "out_mae", "out_mape"]


def _metric_cells(rows: Sequence[MetricRow], digits: int) -> list[list[str]]:
    body = []
    for r in rows:
        a, b = r.in_sample.formatted(digits), r.out_of_sample.formatted(digits)
        body.append([r.model, a["rmse"], a["mae"], a["mape"], b["rmse"], b["mae"], b["mape"]])
    return body


def _dm_cells(names: Sequence[str], pairs: Mapping[tuple[str, str], DmResult]) -> list[list[str]]:
    # upper triangle: row i compared against column j > i
    body = []
    for i, ni in enumerate(names[:-1]):
        row = [ni]
        for j, nj in enumerate(names[1:], start=1):
            res = pairs.get((ni, nj)) if j > i else None
            row.append(format_dm(res) if res is not None else "")
        body.append(row)
    return body


def _csv(header, body) -> str:
    out = io.StringIO()
    for line in [header] + body:
        out.write(",".join(line) + "\n")
    return out.getvalue()


def _aligned(header, body) -> str:
    widths = [max(len(r[c]) for r in [header] + body) for c in range(len(header))]
    lines = []
    for r in [header] + body:
        cells = [r[0].ljust(widths[0])] + [v.rjust(w) for v, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def _markdown(header, body) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join(["---"] + ["---:"] * (len(header) - 1)) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in body]
    return "\n".join(lines) + "\n"


_EMITTERS = {"csv": _csv, "text": _aligned, "markdown": _markdown}


def metrics_table(rows: Sequence[MetricRow], fmt: str = "text", digits: int = 4) -> str:
    """Rows are models; columns are in- and out-of-sample RMSE, MAE, MAPE."""
    if fmt not in _EMITTERS:
        raise SpecError(f"unknown table format {fmt!r}")
    return _EMITTERS[fmt](list(_METRIC_COLS), _metric_cells(rows, digits))


def dm_table(
    names: Sequence[str], pairs: Mapping[tuple[str, str], DmResult], fmt: str = "text"
) -> str:
    """Pairwise ``stat (p)`` cells, upper triangular, p two-sided."""
    if fmt not in _EMITTERS:
        raise SpecError(f"unknown table format {fmt!r}")
    if len(names) < 2:
        raise SpecError("DM table needs at least two models")
    header = ["model"] + list(names[1:])
    return _EMITTERS[fmt](header, _dm_cells(names, pairs))


def pairwise_dm(errors: Mapping[str, np.ndarray], distribution: str = "t") -> dict[tuple[str, str], DmResult]:
    names = list(errors)
    return {
        (a, b): dm_test(errors[a], errors[b], distribution)
        for i, a in enumerate(names)
        for b in names[i + 1 :]
    }
