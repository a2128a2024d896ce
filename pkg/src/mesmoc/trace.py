"""Run traces and their CSV serialization.

CSV layout (one row per expensive evaluation, in order)::

    iter,x_0..x_{d-1},f_0..f_{K-1},c_0..c_{L-1},feasible,acq,hv,wall_ms

``f_*`` are objectives in the problem's native senses, ``c_*`` constraint
values (``>= 0`` is satisfied), ``feasible`` is 0/1, ``acq`` is empty for
initial/baseline rows, ``hv`` is the front hypervolume after the row.
Floats are written with 17 significant digits.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .problem import Dataset, OutputVector, ProblemSpec, to_canonical

__all__ = ["IterationRecord", "RunTrace", "TraceWriter", "csv_header", "read_trace_csv"]


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    x: np.ndarray
    y: OutputVector
    feasible: bool
    acquisition: float
    hypervolume: float
    wall_ms: float
    initial: bool = False


@dataclass
class RunTrace:
    spec: ProblemSpec
    records: list[IterationRecord] = field(default_factory=list)
    final_front: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    @property
    def hypervolumes(self) -> np.ndarray:
        return np.array([r.hypervolume for r in self.records])

    @property
    def X(self) -> np.ndarray:
        return np.array([r.x for r in self.records]).reshape(len(self.records), self.spec.dim)

    def dataset(self) -> Dataset:
        data = Dataset(self.spec)
        for r in self.records:
            data.append(r.x, r.y)
        return data


def _fmt(v: float) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return f"{float(v):.17g}"


def csv_header(spec: ProblemSpec) -> list[str]:
    return (
        ["iter"]
        + [f"x_{i}" for i in range(spec.dim)]
        + [f"f_{i}" for i in range(spec.num_objectives)]
        + [f"c_{i}" for i in range(spec.num_constraints)]
        + ["feasible", "acq", "hv", "wall_ms"]
    )


def _row(spec: ProblemSpec, r: IterationRecord) -> list[str]:
    f_native = to_canonical(r.y.objectives, spec.senses)
    return (
        [str(r.iteration)]
        + [_fmt(v) for v in r.x]
        + [_fmt(v) for v in f_native]
        + [_fmt(v) for v in r.y.constraints]
        + [str(int(r.feasible)), _fmt(r.acquisition), _fmt(r.hypervolume), f"{r.wall_ms:.3f}"]
    )


class TraceWriter:
    """Append records to a CSV file, flushing after every row."""

    def __init__(self, path, spec: ProblemSpec):
        self.path = Path(path)
        self.spec = spec
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", newline="")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(csv_header(spec))
        self._fh.flush()

    def write(self, record: IterationRecord) -> None:
        self._writer.writerow(_row(self.spec, record))
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_trace_csv(path, spec: ProblemSpec, n_init: int | None = None) -> RunTrace:
    """Load a trace written by :class:`TraceWriter` (objectives back in canonical form).

    Rows with ``iter <= n_init`` are marked initial; without ``n_init`` a row
    is initial when its ``acq`` cell is empty.
    """
    trace = RunTrace(spec)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != csv_header(spec):
            raise ValueError(f"{path}: header does not match the problem")
        for row in reader:
            x = np.array([float(row[f"x_{i}"]) for i in range(spec.dim)])
            f = np.array([float(row[f"f_{i}"]) for i in range(spec.num_objectives)])
            c = np.array([float(row[f"c_{i}"]) for i in range(spec.num_constraints)])
            acq = float(row["acq"]) if row["acq"] else float("nan")
            hv = float(row["hv"]) if row["hv"] else float("nan")
            trace.records.append(IterationRecord(
                int(row["iter"]), x, OutputVector(to_canonical(f, spec.senses), c),
                bool(int(row["feasible"])), acq, hv, float(row["wall_ms"]),
                initial=math.isnan(acq) if n_init is None else int(row["iter"]) <= n_init,
            ))
    return trace
