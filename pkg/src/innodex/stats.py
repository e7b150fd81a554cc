"""Pearson correlation with pairwise deletion, and the log-log slope diagnostic."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import ValidationError

MIN_PAIRS = 3


def _complete_pairs(x, y) -> tuple[list[float], list[float]]:
    if len(x) != len(y):
        raise ValidationError(f"length mismatch: {len(x)} vs {len(y)}")
    xs, ys = [], []
    for a, b in zip(x, y):
        if a is None or b is None:
            continue
        a, b = float(a), float(b)
        if math.isnan(a) or math.isnan(b):
            continue
        xs.append(a)
        ys.append(b)
    return xs, ys


def _unit(v: list[float]) -> list[float] | None:
    m = math.fsum(v) / len(v)
    d = [a - m for a in v]
    norm = math.sqrt(math.fsum(a * a for a in d))
    if norm == 0.0:
        return None
    return [a / norm for a in d]


def pearson(x: Sequence, y: Sequence) -> float | None:
    """Pearson r over the pairs where both values are present.

    None when fewer than three complete pairs remain or either side has zero
    variance. r is computed from the centred unit vectors u, v as
    1 - |u - v|^2 / 2 (or |u + v|^2 / 2 - 1 when they point apart), which keeps
    exact linear relations at exactly +-1 instead of one ulp short.
    """
    xs, ys = _complete_pairs(x, y)
    return _pearson_complete(xs, ys)


def _pearson_complete(xs: list[float], ys: list[float]) -> float | None:
    if len(xs) < MIN_PAIRS:
        return None
    u, v = _unit(xs), _unit(ys)
    if u is None or v is None:
        return None
    dot = math.fsum(a * b for a, b in zip(u, v))
    if dot >= 0:
        r = 1.0 - math.fsum((a - b) ** 2 for a, b in zip(u, v)) / 2.0
    else:
        r = math.fsum((a + b) ** 2 for a, b in zip(u, v)) / 2.0 - 1.0
    return min(1.0, max(-1.0, r))


@dataclass
class CorrelationMatrix:
    columns: list[str]
    r: list[list[float | None]]
    n: list[list[int]]

    def get(self, a: str, b: str) -> float | None:
        return self.r[self.columns.index(a)][self.columns.index(b)]


def _column(rows, name):
    out = []
    for row in rows:
        out.append(row[name] if isinstance(row, dict) else getattr(row, name))
    return out


def correlation_matrix(rows: Sequence, columns: Sequence[str]) -> CorrelationMatrix:
    """All pairwise r values, with the number of complete pairs behind each."""
    if not columns:
        raise ValidationError("correlation_matrix needs at least one column")
    if len(rows) < MIN_PAIRS:
        raise ValidationError(f"correlation_matrix needs >= {MIN_PAIRS} rows, got {len(rows)}")
    data = {c: _column(rows, c) for c in columns}
    k = len(columns)
    r: list[list[float | None]] = [[None] * k for _ in range(k)]
    n = [[0] * k for _ in range(k)]
    for i in range(k):
        for j in range(i, k):
            xs, ys = _complete_pairs(data[columns[i]], data[columns[j]])
            n[i][j] = n[j][i] = len(xs)
            if i == j:
                val = 1.0 if len(xs) >= MIN_PAIRS and _unit(xs) is not None else None
            else:
                val = _pearson_complete(xs, ys)
            r[i][j] = r[j][i] = val
    return CorrelationMatrix(list(columns), r, n)


def column_summary(rows: Sequence, columns: Sequence[str]) -> dict[str, dict]:
    """n, mean and sample (n-1) standard deviation per column."""
    out = {}
    for c in columns:
        vals = [float(v) for v in _column(rows, c) if v is not None]
        m = math.fsum(vals) / len(vals) if vals else None
        sd = math.sqrt(math.fsum((v - m) ** 2 for v in vals) / (len(vals) - 1)) if len(vals) > 1 else None
        out[c] = {"n": len(vals), "mean": m, "std": sd}
    return out


def write_matrix_csv(path: str | Path, m: CorrelationMatrix) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + m.columns)
        for name, row in zip(m.columns, m.r):
            w.writerow([name] + ["" if v is None else repr(v) for v in row])


def write_matrix_json(path: str | Path, m: CorrelationMatrix, summary: dict | None = None) -> None:
    doc = {"columns": m.columns, "r": m.r, "n": m.n}
    if summary is not None:
        doc["summary"] = summary
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def read_matrix_json(path: str | Path) -> CorrelationMatrix:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return CorrelationMatrix(doc["columns"], doc["r"], doc["n"])


@dataclass(frozen=True)
class LogLogFit:
    slope: float | None
    intercept: float | None
    r2: float | None
    n: int
    reason: str | None = None

    @property
    def superlinear(self) -> bool | None:
        return None if self.slope is None else self.slope > 1.0


def loglog_slope(x: Sequence, y: Sequence) -> LogLogFit:
    """OLS of ln(y) on ln(x) over pairs with both values positive."""
    if len(x) != len(y):
        raise ValidationError(f"length mismatch: {len(x)} vs {len(y)}")
    lx, ly = [], []
    for a, b in zip(x, y):
        if a is not None and b is not None and a > 0 and b > 0:
            lx.append(math.log(a))
            ly.append(math.log(b))
    n = len(lx)
    if n < MIN_PAIRS:
        return LogLogFit(None, None, None, n, f"need >= {MIN_PAIRS} positive pairs, got {n}")
    mx, my = math.fsum(lx) / n, math.fsum(ly) / n
    sxx = math.fsum((a - mx) ** 2 for a in lx)
    if sxx == 0.0:
        return LogLogFit(None, None, None, n, "x is constant")
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(lx, ly))
    syy = math.fsum((b - my) ** 2 for b in ly)
    slope = sxy / sxx
    intercept = my - slope * mx
    if syy == 0.0:
        r2 = 1.0
    else:
        sse = math.fsum((b - intercept - slope * a) ** 2 for a, b in zip(lx, ly))
        r2 = 1.0 - sse / syy
    return LogLogFit(slope, intercept, r2, n)
