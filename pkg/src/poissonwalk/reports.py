"""Result containers with deterministic JSON/CSV serialisation."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np


def jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays and nested containers to plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return None
        return x
    if hasattr(obj, "to_json"):
        return jsonable(obj.to_json())
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_csv(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


@dataclass
class EstimatorReport:
    """Point estimate with standard error, ensemble size and a per-n trace."""
    estimate: float
    stderr: float
    n: int
    trace: np.ndarray
    method: str
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.trace = np.asarray(self.trace, dtype=float)
        if not self.stderr >= 0:
            raise ValueError("stderr must be non-negative")

    @property
    def ci(self) -> tuple[float, float]:
        return (self.estimate - 1.96 * self.stderr, self.estimate + 1.96 * self.stderr)

    def to_json(self) -> dict:
        return {"estimate": self.estimate, "stderr": self.stderr, "n": self.n, "method": self.method,
                "ci95": list(self.ci), "trace": self.trace, "extra": self.extra}

    def trace_csv(self) -> str:
        return csv_text(["n", "value"], ((i + 1, v) for i, v in enumerate(self.trace)))


def mean_stderr(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    if v.size == 1:
        return float(v[0]), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))
