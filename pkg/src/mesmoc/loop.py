"""The sequential MESMOC optimization loop."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .acquisition import AcquisitionState, OptimizerConfig, optimize_acquisition, sample_maxima
from .gp import FitConfig, GPModel, fit, refit_fixed
from .metrics import front_hypervolume
from .moo import NSGA2Config, pareto_filter
from .problem import Blackbox, Dataset, EvaluationError, ProblemSpec
from .trace import IterationRecord, RunTrace, TraceWriter

__all__ = ["LoopConfig", "RunAborted", "initialize", "fit_models", "run", "iteration_rng"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LoopConfig:
    n_init: int = 5
    t_max: int = 60
    refit_every: int = 5
    num_samples: int = 10
    num_features: int = 500
    cheap: NSGA2Config = field(default_factory=NSGA2Config)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    seed: int = 0
    constraint_bound: str = "front"

    def __post_init__(self):
        if self.n_init < 2:
            raise ValueError("n_init must be >= 2")
        if self.t_max < self.n_init:
            raise ValueError("t_max must be >= n_init")
        if self.refit_every < 1:
            raise ValueError("refit_every must be >= 1")
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")
        if self.constraint_bound not in ("front", "observed"):
            raise ValueError("constraint_bound must be 'front' or 'observed'")


class RunAborted(RuntimeError):
    """An evaluator failed mid-run; ``trace`` holds everything recorded so far."""

    def __init__(self, message, trace: RunTrace):
        super().__init__(message)
        self.trace = trace


def iteration_rng(seed: int, iteration: int) -> np.random.Generator:
    """Independent generator for one iteration, reproducible from ``(seed, iteration)``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(iteration,)))


def initialize(problem: Blackbox, n_init: int, rng=None) -> tuple[np.ndarray, list]:
    """Draw ``n_init`` random inputs (distinct on grids) and evaluate them.

    Returns the inputs and their outputs; evaluation errors propagate.
    """
    spec = problem.spec
    if n_init < 2:
        raise ValueError("n_init must be >= 2")
    rng = np.random.default_rng(rng)
    if spec.is_discrete:
        if len(spec.grid) < n_init:
            raise ValueError(f"grid has {len(spec.grid)} points, fewer than n_init={n_init}")
        X = spec.grid[rng.choice(len(spec.grid), n_init, replace=False)]
    else:
        X = spec.from_unit(rng.random((n_init, spec.dim)))
    return X, [problem(x) for x in X]


def fit_models(data: Dataset, cfg: FitConfig, rng, previous: list[GPModel] | None = None) -> list[GPModel]:
    """Estimate hyperparameters of one GP per output column."""
    spec = data.spec
    X, Y = data.X, data.Y
    models = []
    for j, child in enumerate(np.random.default_rng(rng).spawn(spec.num_outputs)):
        init = previous[j].hyperparams if previous else None
        models.append(fit(X, Y[:, j], spec.lower, spec.upper, cfg, child, init))
    return models


def _record(trace, writer, data, t, acq, t0, ref_point, hv_mode, initial):
    ob = data[-1]
    hv = float("nan") if ref_point is None else front_hypervolume(
        data.Y[:, : data.spec.num_objectives], data.Y[:, data.spec.num_objectives:], ref_point, hv_mode)
    rec = IterationRecord(t, ob.x, ob.y, ob.y.feasible, acq, hv, (time.perf_counter() - t0) * 1e3, initial)
    trace.records.append(rec)
    if writer is not None:
        writer.write(rec)


def run(problem: Blackbox, cfg: LoopConfig = LoopConfig(), ref_point=None, hv_mode: str = "strict",
        trace_path=None, resume: RunTrace | None = None) -> RunTrace:
    """Run MESMOC for ``cfg.t_max`` expensive evaluations.

    Parameters
    ----------
    problem : Blackbox
        Expensive evaluator; its ``spec`` defines the design space.
    cfg : LoopConfig
    ref_point : array_like, optional
        Canonical-form hypervolume reference point; without it the trace
        hypervolume column is NaN.
    hv_mode : {"strict", "lenient"}
        Whether infeasible evaluations count towards the trace hypervolume.
    trace_path : path-like, optional
        CSV file written row by row as the run progresses.
    resume : RunTrace, optional
        Previously recorded trace to continue from.

    Returns
    -------
    RunTrace
        One record per evaluation plus ``final_front``, the feasible
        Pareto-optimal observations of the final dataset.

    Raises
    ------
    RunAborted
        If the evaluator fails; the partial trace is attached and already
        flushed to ``trace_path``.
    """
    spec: ProblemSpec = problem.spec
    trace = RunTrace(spec)
    data = Dataset(spec)
    writer = TraceWriter(trace_path, spec) if trace_path is not None else None
    try:
        if resume is not None:
            for rec in resume.records:
                data.append(rec.x, rec.y)
                trace.records.append(rec)
                if writer is not None:
                    writer.write(rec)
        try:
            if len(data) < cfg.n_init:
                rng = iteration_rng(cfg.seed, 0)
                X0, Y0 = initialize(problem, cfg.n_init, rng)
                for x, y in zip(X0[len(data):], Y0[len(data):]):
                    t0 = time.perf_counter()
                    data.append(x, y)
                    _record(trace, writer, data, len(data), float("nan"), t0, ref_point, hv_mode, True)

            models = None
            for t in range(len(data) + 1, cfg.t_max + 1):
                t0 = time.perf_counter()
                rng = iteration_rng(cfg.seed, t)
                fit_rng, sample_rng, opt_rng = rng.spawn(3)
                if models is None or (len(data) - cfg.n_init) % cfg.refit_every == 0:
                    models = fit_models(data, cfg.fit, fit_rng, models)
                else:
                    models = [refit_fixed(m, data.X, data.Y[:, j]) for j, m in enumerate(models)]
                maxima = sample_maxima(models, spec, cfg.num_samples, cfg.cheap, sample_rng, cfg.num_features,
                                       cfg.constraint_bound)
                state = AcquisitionState(models, maxima, spec.num_objectives)
                x, acq = optimize_acquisition(state, spec, cfg.optimizer, opt_rng, evaluated=data.X)
                y = problem(x)
                data.append(x, y)
                _record(trace, writer, data, t, acq, t0, ref_point, hv_mode, False)
                log.debug("iter %d acq=%.4g feasible=%s hv=%.6g", t, acq, y.feasible, trace.records[-1].hypervolume)
        except EvaluationError as exc:
            raise RunAborted(f"evaluation failed after {len(data)} observations: {exc}", trace) from exc
    finally:
        if writer is not None:
            writer.close()
    trace.final_front = _final_front(data)
    return trace


def _final_front(data: Dataset) -> list:
    keep = pareto_filter([ob.y for ob in data])
    ids = {id(y) for y in keep}
    return [ob for ob in data if id(ob.y) in ids]
