"""Built-in constrained bi-objective test problems.

Each benchmark exposes a vectorized ``raw(X)`` returning native-sense
objectives and ``c >= 0`` constraints, a reference point for hypervolume in
canonical (maximization) form, and an ``hv_mode`` flag:

``"strict"``
    only feasible points count towards hypervolume.
``"lenient"``
    every evaluated point counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .problem import Blackbox, ProblemSpec, to_canonical

__all__ = ["Benchmark", "BenchmarkBlackbox", "get_benchmark", "BENCHMARKS"]


@dataclass(frozen=True)
class Benchmark:
    name: str
    spec: ProblemSpec
    raw: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    ref_point: np.ndarray
    hv_mode: str = "strict"

    def canonical(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized canonical outputs ``(F, C)`` for rows of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        F, C = self.raw(X)
        return to_canonical(F, self.spec.senses), C

    def blackbox(self) -> "BenchmarkBlackbox":
        return BenchmarkBlackbox(self)


class BenchmarkBlackbox(Blackbox):
    def __init__(self, bench: Benchmark):
        super().__init__(bench.spec)
        self.bench = bench

    def _raw(self, x):
        F, C = self.bench.raw(x[None, :])
        return F[0], C[0]


def _bnh(X):
    x1, x2 = X[:, 0], X[:, 1]
    f1 = 4 * x1**2 + 4 * x2**2
    f2 = (x1 - 5) ** 2 + (x2 - 5) ** 2
    c1 = 25 - (x1 - 5) ** 2 - x2**2
    c2 = (x1 - 8) ** 2 + (x2 + 3) ** 2 - 7.7
    return np.column_stack([f1, f2]), np.column_stack([c1, c2])


def _srn(X):
    x1, x2 = X[:, 0], X[:, 1]
    f1 = 2 + (x1 - 2) ** 2 + (x2 - 1) ** 2
    f2 = 9 * x1 - (x2 - 1) ** 2
    c1 = 225 - x1**2 - x2**2
    c2 = -(x1 - 3 * x2 + 10)
    return np.column_stack([f1, f2]), np.column_stack([c1, c2])


def _tnk(X):
    x1, x2 = X[:, 0], X[:, 1]
    c1 = x1**2 + x2**2 - 1 - 0.1 * np.cos(16 * np.arctan2(x1, x2))
    c2 = 0.5 - (x1 - 0.5) ** 2 - (x2 - 0.5) ** 2
    return np.column_stack([x1, x2]), np.column_stack([c1, c2])


def _osy(X):
    x1, x2, x3, x4, x5, x6 = X.T
    f1 = -(25 * (x1 - 2) ** 2 + (x2 - 2) ** 2 + (x3 - 1) ** 2 + (x4 - 4) ** 2 + (x5 - 1) ** 2)
    f2 = np.sum(X**2, axis=1)
    c = np.column_stack([
        x1 + x2 - 2,
        6 - x1 - x2,
        2 - x2 + x1,
        2 - x1 + 3 * x2,
        4 - (x3 - 3) ** 2 - x4,
        (x5 - 3) ** 2 + x6 - 4,
    ])
    return np.column_stack([f1, f2]), c


_GRID_SIDE = 30
_DISK_CENTER = np.array([0.5, 0.4])
_DISK_RADIUS2 = 0.06


def _grid_problem(X):
    # Two quadratic bowls whose unconstrained trade-off lies outside the
    # feasible region; feasibility is a disk cut by a wavy boundary.
    a = np.array([0.1, 0.9])
    b = np.array([0.9, 0.9])
    f1 = np.sum((X - a) ** 2, axis=1)
    f2 = np.sum((X - b) ** 2, axis=1)
    c1 = _DISK_RADIUS2 - np.sum((X - _DISK_CENTER) ** 2, axis=1)
    c2 = 0.45 + 0.08 * np.sin(3 * np.pi * X[:, 0]) - X[:, 1]
    return np.column_stack([f1, f2]), np.column_stack([c1, c2])


def _grid_points(side: int = _GRID_SIDE) -> np.ndarray:
    t = np.linspace(0.0, 1.0, side)
    g1, g2 = np.meshgrid(t, t, indexing="ij")
    return np.column_stack([g1.ravel(), g2.ravel()])


BENCHMARKS: dict[str, Callable[[], Benchmark]] = {
    "bnh": lambda: Benchmark(
        "bnh",
        ProblemSpec(dim=2, num_objectives=2, num_constraints=2, bounds=[[0, 5], [0, 3]]),
        _bnh,
        ref_point=np.array([-140.0, -50.0]),
    ),
    "srn": lambda: Benchmark(
        "srn",
        ProblemSpec(dim=2, num_objectives=2, num_constraints=2, bounds=[[-20, 20], [-20, 20]]),
        _srn,
        ref_point=np.array([-250.0, -50.0]),
    ),
    "tnk": lambda: Benchmark(
        "tnk",
        ProblemSpec(dim=2, num_objectives=2, num_constraints=2, bounds=[[1e-12, np.pi], [1e-12, np.pi]]),
        _tnk,
        ref_point=np.array([-1.2, -1.2]),
    ),
    "osy": lambda: Benchmark(
        "osy",
        ProblemSpec(
            dim=6,
            num_objectives=2,
            num_constraints=6,
            bounds=[[0, 10], [0, 10], [1, 5], [0, 6], [1, 5], [0, 10]],
        ),
        _osy,
        ref_point=np.array([0.0, -80.0]),
    ),
    "grid": lambda: Benchmark(
        "grid",
        ProblemSpec(dim=2, num_objectives=2, num_constraints=2, grid=_grid_points()),
        _grid_problem,
        ref_point=np.array([-1.5, -1.5]),
    ),
}


def get_benchmark(name: str) -> Benchmark:
    try:
        return BENCHMARKS[name.lower()]()
    except KeyError:
        raise KeyError(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}") from None
