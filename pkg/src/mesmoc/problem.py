"""Problem contract, dominance relations and black-box evaluators.

Everything inside the package works in a canonical form: all objectives are
maximized and a constraint value ``c`` is satisfied iff ``c >= 0``.  User
problems declared with ``"min"`` senses are negated once, at the evaluator
boundary.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ProblemSpec",
    "OutputVector",
    "Observation",
    "Dataset",
    "EvaluationError",
    "Blackbox",
    "FunctionBlackbox",
    "ExternalEvaluator",
    "is_feasible",
    "total_violation",
    "pareto_dominates",
    "constraint_dominates",
    "to_canonical",
    "evaluate",
]


class EvaluationError(RuntimeError):
    """Raised when a black-box evaluation fails.

    ``payload`` carries whatever raw data the evaluator produced, so callers
    can log it.
    """

    def __init__(self, message: str, payload: object = None):
        super().__init__(message)
        self.payload = payload


@dataclass(frozen=True)
class ProblemSpec:
    """Static description of a constrained multi-objective problem.

    Parameters
    ----------
    dim : int
        Number of input variables.
    num_objectives : int
        Number of objectives, at least two.
    num_constraints : int
        Number of black-box constraints (may be zero).
    bounds : array_like, shape (dim, 2), optional
        Box bounds of a continuous space.
    grid : array_like, shape (M, dim), optional
        Explicit candidate set of a discrete space.  Exactly one of
        ``bounds`` and ``grid`` must be given.
    senses : sequence of {"min", "max"}, optional
        Direction of each objective as returned by the raw evaluator.
        Defaults to all ``"min"``.
    """

    dim: int
    num_objectives: int
    num_constraints: int = 0
    bounds: np.ndarray | None = None
    grid: np.ndarray | None = None
    senses: tuple[str, ...] = ()

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.num_objectives < 2:
            raise ValueError("need at least two objectives")
        if self.num_constraints < 0:
            raise ValueError("num_constraints must be >= 0")
        if (self.bounds is None) == (self.grid is None):
            raise ValueError("give exactly one of bounds or grid")
        if self.bounds is not None:
            b = np.array(self.bounds, dtype=float).reshape(self.dim, 2)
            if not np.all(b[:, 0] < b[:, 1]):
                raise ValueError("every lower bound must be below its upper bound")
            b.setflags(write=False)
            object.__setattr__(self, "bounds", b)
        else:
            g = np.array(self.grid, dtype=float).reshape(-1, self.dim)
            if len(g) == 0:
                raise ValueError("grid must be non-empty")
            g.setflags(write=False)
            object.__setattr__(self, "grid", g)
        senses = tuple(self.senses) or ("min",) * self.num_objectives
        if len(senses) != self.num_objectives or not set(senses) <= {"min", "max"}:
            raise ValueError("senses must hold one of 'min'/'max' per objective")
        object.__setattr__(self, "senses", senses)

    @property
    def is_discrete(self) -> bool:
        return self.grid is not None

    @property
    def num_outputs(self) -> int:
        return self.num_objectives + self.num_constraints

    @property
    def lower(self) -> np.ndarray:
        if self.is_discrete:
            return self.grid.min(axis=0)
        return self.bounds[:, 0]

    @property
    def upper(self) -> np.ndarray:
        if self.is_discrete:
            return self.grid.max(axis=0)
        return self.bounds[:, 1]

    def contains(self, x, atol: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,) or not np.all(np.isfinite(x)):
            return False
        if self.is_discrete:
            return bool(np.any(np.all(np.abs(self.grid - x) <= atol, axis=1)))
        return bool(np.all(x >= self.bounds[:, 0] - atol) and np.all(x <= self.bounds[:, 1] + atol))

    def to_unit(self, x):
        """Map inputs affinely onto the unit hypercube."""
        span = self.upper - self.lower
        span = np.where(span > 0, span, 1.0)
        return (np.asarray(x, dtype=float) - self.lower) / span

    def from_unit(self, u):
        span = self.upper - self.lower
        return self.lower + np.asarray(u, dtype=float) * span


@dataclass(frozen=True, eq=False)
class OutputVector:
    """Objective and constraint values of one evaluation, in canonical form."""

    objectives: np.ndarray
    constraints: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        f = np.array(self.objectives, dtype=float).ravel()
        c = np.array(self.constraints, dtype=float).ravel()
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(c))):
            raise ValueError("output entries must be finite")
        f.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "objectives", f)
        object.__setattr__(self, "constraints", c)

    def __eq__(self, other):
        if not isinstance(other, OutputVector):
            return NotImplemented
        return (np.array_equal(self.objectives, other.objectives)
                and np.array_equal(self.constraints, other.constraints))

    def __hash__(self):
        return hash((self.objectives.tobytes(), self.constraints.tobytes()))

    @property
    def values(self) -> np.ndarray:
        """Concatenated ``(objectives, constraints)`` vector."""
        return np.concatenate([self.objectives, self.constraints])

    @property
    def feasible(self) -> bool:
        return is_feasible(self)


@dataclass(frozen=True)
class Observation:
    x: np.ndarray
    y: OutputVector


class Dataset:
    """Append-only history of observations."""

    def __init__(self, spec: ProblemSpec, observations: Sequence[Observation] = ()):
        self.spec = spec
        self._obs: list[Observation] = []
        for ob in observations:
            self.append(ob.x, ob.y)

    def append(self, x, y: OutputVector) -> None:
        x = np.array(x, dtype=float)
        if not self.spec.contains(x):
            raise ValueError(f"observation outside the design space: {x}")
        if len(y.objectives) != self.spec.num_objectives or len(y.constraints) != self.spec.num_constraints:
            raise ValueError("output vector has the wrong shape for this problem")
        x.setflags(write=False)
        self._obs.append(Observation(x, y))

    def __len__(self) -> int:
        return len(self._obs)

    def __iter__(self):
        return iter(self._obs)

    def __getitem__(self, i) -> Observation:
        return self._obs[i]

    @property
    def X(self) -> np.ndarray:
        if not self._obs:
            return np.zeros((0, self.spec.dim))
        return np.array([ob.x for ob in self._obs])

    @property
    def Y(self) -> np.ndarray:
        """Outputs as an ``(n, K + L)`` array."""
        if not self._obs:
            return np.zeros((0, self.spec.num_outputs))
        return np.array([ob.y.values for ob in self._obs])

    @property
    def feasible(self) -> np.ndarray:
        return np.array([ob.y.feasible for ob in self._obs], dtype=bool)

    def copy(self) -> "Dataset":
        return Dataset(self.spec, self._obs)


def is_feasible(y: OutputVector) -> bool:
    return bool(np.all(y.constraints >= 0))


def total_violation(constraints) -> np.ndarray | float:
    """Sum of ``max(0, -c_i)`` over the last axis."""
    c = np.asarray(constraints, dtype=float)
    return np.sum(np.maximum(0.0, -c), axis=-1)


def pareto_dominates(a: OutputVector, b: OutputVector) -> bool:
    fa, fb = a.objectives, b.objectives
    if fa.shape != fb.shape:
        raise ValueError("objective dimension mismatch")
    return bool(np.all(fa >= fb) and np.any(fa > fb))


def constraint_dominates(a: OutputVector, b: OutputVector) -> bool:
    """Deb's constrained-domination rule."""
    if a.objectives.shape != b.objectives.shape or a.constraints.shape != b.constraints.shape:
        raise ValueError("output dimension mismatch")
    fa, fb = is_feasible(a), is_feasible(b)
    if fa and not fb:
        return True
    if fb and not fa:
        return False
    if not fa:
        return bool(total_violation(a.constraints) < total_violation(b.constraints))
    return pareto_dominates(a, b)


def to_canonical(objectives, senses: Sequence[str]) -> np.ndarray:
    """Convert raw objectives to maximization form.

    Applying it twice with the same senses returns the input.
    """
    f = np.asarray(objectives, dtype=float)
    sign = np.array([-1.0 if s == "min" else 1.0 for s in senses])
    return f * sign


class Blackbox:
    """Base class for expensive evaluators.

    Subclasses implement :meth:`_raw` returning ``(objectives, constraints)``
    in the problem's native senses with constraints already in ``c >= 0``
    form.  :meth:`__call__` validates, canonicalizes and counts.
    """

    def __init__(self, spec: ProblemSpec):
        self.spec = spec
        self.num_evaluations = 0
        self._lock = threading.Lock()

    def _raw(self, x: np.ndarray) -> tuple[Sequence[float], Sequence[float]]:
        raise NotImplementedError

    def __call__(self, x) -> OutputVector:
        x = np.asarray(x, dtype=float)
        if not self.spec.contains(x):
            raise EvaluationError(f"x outside the design space: {x}", payload=x)
        f, c = self._raw(x)
        f = np.asarray(f, dtype=float).ravel()
        c = np.asarray(c, dtype=float).ravel()
        if f.shape != (self.spec.num_objectives,) or c.shape != (self.spec.num_constraints,):
            raise EvaluationError("evaluator returned outputs of the wrong length", payload=(f, c))
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(c))):
            raise EvaluationError("evaluator returned non-finite outputs", payload=(f, c))
        with self._lock:
            self.num_evaluations += 1
        return OutputVector(to_canonical(f, self.spec.senses), c)


class FunctionBlackbox(Blackbox):
    """Wrap a Python callable ``x -> (objectives, constraints)``."""

    def __init__(self, spec: ProblemSpec, func: Callable):
        super().__init__(spec)
        self.func = func

    def _raw(self, x):
        try:
            return self.func(x)
        except Exception as exc:  # noqa: BLE001 - re-raised with context
            raise EvaluationError(f"evaluator raised {exc!r}", payload=x) from exc


class ExternalEvaluator(Blackbox):
    """Evaluate through a long-lived child process speaking line-delimited JSON.

    For every evaluation one line ``{"x": [...]}`` is written to the child's
    stdin and one line ``{"objectives": [...], "constraints": [...]}`` is read
    back from its stdout.  Objectives are in the problem's native senses;
    constraints use the ``c >= 0`` convention.
    """

    def __init__(self, spec: ProblemSpec, command: str | Sequence[str], timeout: float | None = None):
        super().__init__(spec)
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self._proc: subprocess.Popen | None = None
        self._io_lock = threading.Lock()

    def _ensure_started(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        return self._proc

    def _raw(self, x):
        with self._io_lock:
            proc = self._ensure_started()
            request = json.dumps({"x": [float(v) for v in x]})
            try:
                proc.stdin.write(request + "\n")
                proc.stdin.flush()
                line = proc.stdout.readline()
            except (BrokenPipeError, OSError) as exc:
                raise EvaluationError(f"evaluator process died: {exc}", payload=request) from exc
            if not line:
                code = proc.wait(timeout=self.timeout)
                raise EvaluationError(f"evaluator exited with code {code} before replying", payload=request)
        try:
            reply = json.loads(line)
            return reply["objectives"], reply.get("constraints", [])
        except (ValueError, KeyError, TypeError) as exc:
            raise EvaluationError("malformed evaluator reply", payload=line) from exc

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
        self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:  # noqa: BLE001
            pass


def evaluate(problem: Blackbox, x) -> OutputVector:
    """Evaluate ``x`` on ``problem`` (canonical form, counted)."""
    return problem(x)
