"""Experiment harness: baselines, repeated runs, CSV/JSON outputs and the CLI.

Outputs of :func:`run_experiment` in ``out_dir``:

``<problem>_<algo>_seed<k>.csv``
    one trace per run (layout documented in :mod:`mesmoc.trace`).
``<problem>_<algo>_summary.json``
    keys ``problem``, ``algorithm``, ``seeds``, ``n_init``, ``t_max``,
    ``num_samples``, ``ref_point``, ``hv_mode``, ``hv_mean``, ``hv_std``
    (per evaluation, across seeds), ``final_hv_mean``, ``final_hv_std``,
    ``feasible_fraction_mean``, ``runs`` (list of ``{"seed", "trace",
    "final_hv", "feasible_fraction", "evaluations"}``), ``status``
    (``"ok"`` or ``"aborted"``).
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .acquisition import OptimizerConfig
from .benchmarks import BENCHMARKS, Benchmark, get_benchmark
from .loop import LoopConfig, RunAborted, iteration_rng, run
from .metrics import feasible_fraction, front_hypervolume
from .moo import NSGA2Config, evolve, pareto_filter
from .problem import Blackbox, Dataset, EvaluationError, ExternalEvaluator, ProblemSpec
from .trace import IterationRecord, RunTrace, TraceWriter

__all__ = [
    "ALGORITHMS",
    "ExperimentConfig",
    "baseline_random",
    "baseline_nsga2_direct",
    "run_single",
    "run_experiment",
    "main",
]

log = logging.getLogger(__name__)

ALGORITHMS = ("mesmoc", "random", "nsga2-direct")


@dataclass(frozen=True)
class ExperimentConfig:
    """One algorithm on one problem, repeated over ``seeds``.

    ``problem`` names a built-in benchmark unless ``evaluator`` (a shell
    command) is given, in which case ``spec`` and ``ref_point`` describe the
    external problem.
    """

    problem: str = "bnh"
    algorithm: str = "mesmoc"
    loop: LoopConfig = field(default_factory=LoopConfig)
    seeds: tuple[int, ...] = (0,)
    out_dir: Path = Path("results")
    evaluator: str | None = None
    spec: ProblemSpec | None = None
    ref_point: tuple[float, ...] | None = None
    hv_mode: str | None = None
    direct_pop_size: int = 10

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if self.evaluator is None and self.problem.lower() not in BENCHMARKS:
            raise ValueError(f"unknown problem {self.problem!r}; choose from {sorted(BENCHMARKS)}")
        if self.evaluator is not None and self.spec is None:
            raise ValueError("an external evaluator needs a problem spec")

    @property
    def repetitions(self) -> int:
        return len(self.seeds)


class _Recorder:
    """Evaluate-and-record helper shared by the baselines."""

    def __init__(self, problem: Blackbox, ref_point, hv_mode, writer, n_init):
        self.problem = problem
        self.spec = problem.spec
        self.trace = RunTrace(self.spec)
        self.data = Dataset(self.spec)
        self.ref_point = ref_point
        self.hv_mode = hv_mode
        self.writer = writer
        self.n_init = n_init

    def __call__(self, x):
        t0 = time.perf_counter()
        y = self.problem(x)
        self.data.append(x, y)
        K = self.spec.num_objectives
        Y = self.data.Y
        hv = float("nan") if self.ref_point is None else front_hypervolume(Y[:, :K], Y[:, K:], self.ref_point, self.hv_mode)
        t = len(self.data)
        rec = IterationRecord(t, np.asarray(x, dtype=float), y, y.feasible, float("nan"), hv,
                              (time.perf_counter() - t0) * 1e3, initial=t <= self.n_init)
        self.trace.records.append(rec)
        if self.writer is not None:
            self.writer.write(rec)
        return y

    def finish(self) -> RunTrace:
        keep = {id(y) for y in pareto_filter([ob.y for ob in self.data])}
        self.trace.final_front = [ob for ob in self.data if id(ob.y) in keep]
        return self.trace


def baseline_random(problem: Blackbox, cfg: LoopConfig = LoopConfig(), ref_point=None, hv_mode="strict",
                    trace_path=None) -> RunTrace:
    """Uniform random search with the same budget and trace schema as :func:`mesmoc.loop.run`."""
    spec = problem.spec
    rng = iteration_rng(cfg.seed, 0)
    if spec.is_discrete:
        if len(spec.grid) < cfg.t_max:
            raise ValueError("grid smaller than the evaluation budget")
        X = spec.grid[rng.choice(len(spec.grid), cfg.t_max, replace=False)]
    else:
        X = spec.from_unit(rng.random((cfg.t_max, spec.dim)))
    writer = TraceWriter(trace_path, spec) if trace_path is not None else None
    rec = _Recorder(problem, ref_point, hv_mode, writer, cfg.n_init)
    try:
        for x in X:
            rec(x)
    except EvaluationError as exc:
        raise RunAborted(str(exc), rec.trace) from exc
    finally:
        if writer is not None:
            writer.close()
    return rec.finish()


def baseline_nsga2_direct(problem: Blackbox, cfg: LoopConfig = LoopConfig(), ref_point=None, hv_mode="strict",
                          trace_path=None, pop_size: int = 10) -> RunTrace:
    """NSGA-II run directly on the expensive problem until ``cfg.t_max`` evaluations."""
    spec = problem.spec
    writer = TraceWriter(trace_path, spec) if trace_path is not None else None
    rec = _Recorder(problem, ref_point, hv_mode, writer, n_init=pop_size)
    K = spec.num_objectives

    def evaluate_batch(X):
        Y = np.array([rec(x).values for x in X])
        return Y[:, :K], Y[:, K:]

    nsga_cfg = replace(cfg.cheap, pop_size=pop_size, generations=max(1, -(-cfg.t_max // pop_size)),
                       exhaustive_grid_limit=0)
    try:
        evolve(evaluate_batch, spec, nsga_cfg, iteration_rng(cfg.seed, 0), max_evals=cfg.t_max)
    except EvaluationError as exc:
        raise RunAborted(str(exc), rec.trace) from exc
    finally:
        if writer is not None:
            writer.close()
    return rec.finish()


def _resolve_problem(cfg: ExperimentConfig) -> tuple[Blackbox, np.ndarray | None, str]:
    if cfg.evaluator is not None:
        ref = None if cfg.ref_point is None else np.asarray(cfg.ref_point, dtype=float)
        return ExternalEvaluator(cfg.spec, cfg.evaluator), ref, cfg.hv_mode or "strict"
    bench: Benchmark = get_benchmark(cfg.problem)
    ref = bench.ref_point if cfg.ref_point is None else np.asarray(cfg.ref_point, dtype=float)
    return bench.blackbox(), ref, cfg.hv_mode or bench.hv_mode


def run_single(cfg: ExperimentConfig, seed: int, trace_path=None) -> RunTrace:
    problem, ref, hv_mode = _resolve_problem(cfg)
    loop_cfg = replace(cfg.loop, seed=seed)
    try:
        if cfg.algorithm == "mesmoc":
            return run(problem, loop_cfg, ref, hv_mode, trace_path)
        if cfg.algorithm == "random":
            return baseline_random(problem, loop_cfg, ref, hv_mode, trace_path)
        return baseline_nsga2_direct(problem, loop_cfg, ref, hv_mode, trace_path, cfg.direct_pop_size)
    finally:
        if isinstance(problem, ExternalEvaluator):
            problem.close()


def _final_feasible_hv(trace: RunTrace, ref) -> float:
    if ref is None or not trace.records:
        return float("nan")
    K = trace.spec.num_objectives
    Y = np.array([r.y.values for r in trace.records])
    return front_hypervolume(Y[:, :K], Y[:, K:], ref, "strict")


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run every seed, write traces and the summary JSON, and return the summary."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = cfg.problem if cfg.evaluator is None else "external"
    _, ref, hv_mode = _resolve_problem(cfg)
    stem = f"{name}_{cfg.algorithm}"
    runs, curves, status = [], [], "ok"
    for seed in cfg.seeds:
        path = out / f"{stem}_seed{seed}.csv"
        try:
            trace = run_single(cfg, seed, path)
        except RunAborted as exc:
            log.error("seed %d aborted: %s", seed, exc)
            trace, status = exc.trace, "aborted"
        hv = trace.hypervolumes
        curves.append(hv)
        post = [r for r in trace.records if not r.initial]
        runs.append({
            "seed": seed,
            "trace": path.name,
            "evaluations": len(trace),
            "final_hv": _final_feasible_hv(trace, ref),
            "feasible_fraction": feasible_fraction(trace) if post else float("nan"),
        })
        if status != "ok":
            break
    n = min(len(c) for c in curves)
    H = np.array([c[:n] for c in curves])
    summary = {
        "problem": name,
        "algorithm": cfg.algorithm,
        "seeds": list(cfg.seeds),
        "n_init": cfg.loop.n_init,
        "t_max": cfg.loop.t_max,
        "num_samples": cfg.loop.num_samples,
        "ref_point": None if ref is None else [float(v) for v in ref],
        "hv_mode": hv_mode,
        "hv_mean": H.mean(axis=0).tolist(),
        "hv_std": H.std(axis=0).tolist(),
        "final_hv_mean": float(np.mean([r["final_hv"] for r in runs])),
        "final_hv_std": float(np.std([r["final_hv"] for r in runs])),
        "feasible_fraction_mean": float(np.mean([r["feasible_fraction"] for r in runs])),
        "runs": runs,
        "status": status,
    }
    with open(out / f"{stem}_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, allow_nan=True)
    return summary


# --- command line -----------------------------------------------------------

_CONFIG_KEYS = {
    "problem", "algo", "seed", "tmax", "n0", "samples", "out", "refit_every", "features",
    "pop_size", "generations", "direct_pop_size", "evaluator", "bounds", "senses",
    "num_constraints", "ref_point", "hv_mode", "constraint_bound",
}


def _read_config_file(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    with open(path) as fh:
        parser.read_string("[experiment]\n" + fh.read())
    values = dict(parser["experiment"])
    unknown = set(values) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return values


def _parse_bounds(text: str) -> list[list[float]]:
    # "0:1, -5:5"
    return [[float(v) for v in part.split(":")] for part in text.split(",")]


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mesmoc",
        description="Run constrained multi-objective BO experiments and write CSV traces.",
    )
    p.add_argument("--config", help="flat key = value file; flags override its keys")
    p.add_argument("--problem", help=f"built-in benchmark: {', '.join(sorted(BENCHMARKS))}")
    p.add_argument("--algo", help=f"one of {', '.join(ALGORITHMS)}")
    p.add_argument("--seed", help="comma/space separated seeds, one run each")
    p.add_argument("--tmax", type=int, help="total expensive evaluations per run")
    p.add_argument("--n0", type=int, help="initial random evaluations")
    p.add_argument("--samples", type=int, help="sampled Pareto fronts per iteration")
    p.add_argument("--out", help="output directory")
    p.add_argument("--refit-every", dest="refit_every", type=int)
    p.add_argument("--features", type=int, help="random Fourier features per sampled function")
    p.add_argument("--pop-size", dest="pop_size", type=int, help="cheap NSGA-II population")
    p.add_argument("--generations", type=int, help="cheap NSGA-II generations")
    p.add_argument("--direct-pop-size", dest="direct_pop_size", type=int)
    p.add_argument("--evaluator", help="external evaluator command (JSON lines over stdin/stdout)")
    p.add_argument("--bounds", help='external problem bounds, e.g. "0:1,0:1"')
    p.add_argument("--senses", help='external objective senses, e.g. "min,max"')
    p.add_argument("--num-constraints", dest="num_constraints", type=int)
    p.add_argument("--ref-point", dest="ref_point", help="hypervolume reference point (canonical, maximized form)")
    p.add_argument("--hv-mode", dest="hv_mode", choices=("strict", "lenient"))
    p.add_argument("--constraint-bound", dest="constraint_bound", choices=("front", "observed"),
                   help="upper bound for constraint outputs in the acquisition")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(argv: Sequence[str] | None = None) -> ExperimentConfig:
    args = build_parser().parse_args(argv)
    values = _read_config_file(args.config) if args.config else {}
    for key, val in vars(args).items():
        if key in _CONFIG_KEYS and val is not None:
            values[key] = str(val)
    if args.verbose:
        logging.basicConfig(level=logging.INFO)

    defaults = LoopConfig()
    cheap = NSGA2Config(
        pop_size=int(values.get("pop_size", defaults.cheap.pop_size)),
        generations=int(values.get("generations", defaults.cheap.generations)),
    )
    loop = LoopConfig(
        n_init=int(values.get("n0", defaults.n_init)),
        t_max=int(values.get("tmax", defaults.t_max)),
        refit_every=int(values.get("refit_every", defaults.refit_every)),
        num_samples=int(values.get("samples", defaults.num_samples)),
        num_features=int(values.get("features", defaults.num_features)),
        cheap=cheap,
        optimizer=OptimizerConfig(),
        constraint_bound=values.get("constraint_bound", defaults.constraint_bound),
    )
    spec = None
    if "evaluator" in values:
        senses = tuple(s.strip() for s in values.get("senses", "").split(",") if s.strip())
        bounds = _parse_bounds(values["bounds"])
        spec = ProblemSpec(dim=len(bounds), num_objectives=len(senses), num_constraints=int(values.get("num_constraints", 0)),
                           bounds=bounds, senses=senses)
    return ExperimentConfig(
        problem=values.get("problem", "bnh"),
        algorithm=values.get("algo", "mesmoc"),
        loop=loop,
        seeds=tuple(int(v) for v in _floats(values.get("seed", "0"))),
        out_dir=Path(values.get("out", "results")),
        evaluator=values.get("evaluator"),
        spec=spec,
        ref_point=_floats(values["ref_point"]) if "ref_point" in values else None,
        hv_mode=values.get("hv_mode"),
        direct_pop_size=int(values.get("direct_pop_size", 10)),
    )


def main(argv: Sequence[str] | None = None) -> int:
    try:
        cfg = config_from_args(argv)
    except (ValueError, KeyError) as exc:
        print(f"mesmoc: error: {exc}", file=sys.stderr)
        return 2
    summary = run_experiment(cfg)
    print(json.dumps({k: summary[k] for k in ("problem", "algorithm", "final_hv_mean", "final_hv_std",
                                              "feasible_fraction_mean", "status")}))
    return 0 if summary["status"] == "ok" else 1


if __name__ == "__main__":
    sys.exit(main())
