"""Constrained multi-objective Bayesian optimization with output-space max-value entropy search."""

from mesmoc.acquisition import (
    AcquisitionState,
    MaximaSample,
    OptimizerConfig,
    acquisition_values,
    conditional_entropy,
    gaussian_entropy,
    mesmoc_acquisition,
    optimize_acquisition,
    sample_maxima,
    truncated_entropy_term,
)
from mesmoc.benchmarks import Benchmark, get_benchmark
from mesmoc.experiment import ExperimentConfig, baseline_nsga2_direct, baseline_random, run_experiment
from mesmoc.gp import (
    FitConfig,
    GPModel,
    KernelHyperparams,
    PosteriorMoments,
    SampledFunction,
    condition,
    fit,
    fit_output,
    posterior,
    sample_posterior_function,
)
from mesmoc.loop import LoopConfig, RunAborted, initialize, run
from mesmoc.metrics import feasible_fraction, front_hypervolume, hypervolume, hypervolume_mc
from mesmoc.moo import NSGA2Config, ParetoFrontSample, non_dominated_sort, nsga2, pareto_filter, solve_cheap
from mesmoc.problem import (
    Blackbox,
    Dataset,
    EvaluationError,
    ExternalEvaluator,
    FunctionBlackbox,
    Observation,
    OutputVector,
    ProblemSpec,
    constraint_dominates,
    evaluate,
    pareto_dominates,
)
from mesmoc.trace import IterationRecord, RunTrace, read_trace_csv

__all__ = [name for name in dir() if not name.startswith("_")]
