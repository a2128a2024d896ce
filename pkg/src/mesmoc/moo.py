"""Constrained NSGA-II and Pareto utilities.

Populations are stored as arrays: ``F`` holds canonical (maximized)
objectives, ``C`` constraint values with ``c >= 0`` meaning satisfied.
Comparisons follow Deb's constrained-domination rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .gp import SampledFunction, stack_sampled
from .problem import OutputVector, ProblemSpec, total_violation

__all__ = [
    "Individual",
    "NSGA2Config",
    "ParetoFrontSample",
    "domination_matrix",
    "non_dominated_sort",
    "crowding_distance",
    "rank_individuals",
    "evolve",
    "nsga2",
    "solve_cheap",
    "pareto_filter",
    "pareto_mask",
]


@dataclass
class Individual:
    x: np.ndarray
    y: OutputVector
    rank: int = -1
    crowding: float = 0.0


@dataclass(frozen=True)
class NSGA2Config:
    pop_size: int = 100
    generations: int = 100
    crossover_prob: float = 0.9
    crossover_eta: float = 15.0
    mutation_eta: float = 20.0
    mutation_prob: float | None = None  # per variable; None means 1/d
    # grids with at most this many points are enumerated instead of evolved
    exhaustive_grid_limit: int = 10_000

    def __post_init__(self):
        if self.pop_size < 4 or self.pop_size % 2:
            raise ValueError("pop_size must be even and >= 4")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")


@dataclass(frozen=True)
class ParetoFrontSample:
    """One sampled constrained Pareto front and its per-output maxima.

    ``points`` has one row per front member holding all K + L sampled
    outputs; ``maxima[j]`` is the column maximum.  ``feasible`` is False when
    no sampled-feasible point was found and the front is the
    least-violating set instead.
    """

    points: np.ndarray
    maxima: np.ndarray
    x: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    feasible: bool = True
    # column maxima over every point the solver evaluated, front or not
    observed_maxima: np.ndarray | None = None


def _pareto_matrix(F):
    """``P[i, j]`` iff row i Pareto-dominates row j (maximization)."""
    n, k = F.shape
    ge = np.ones((n, n), dtype=bool)
    gt = np.zeros((n, n), dtype=bool)
    for j in range(k):
        col = F[:, j]
        ge &= col[:, None] >= col[None, :]
        gt |= col[:, None] > col[None, :]
    return ge & gt


def domination_matrix(F, C=None) -> np.ndarray:
    """``D[i, j]`` is True iff row i constraint-dominates row j."""
    F = np.asarray(F, dtype=float)
    n = len(F)
    C = np.zeros((n, 0)) if C is None else np.asarray(C, dtype=float).reshape(n, -1)
    v = total_violation(C)
    feas = v == 0
    if feas.all():
        return _pareto_matrix(F)
    D = (v[:, None] < v[None, :]) & ~feas[None, :]
    both = np.flatnonzero(feas)
    if len(both):
        D[np.ix_(both, both)] = _pareto_matrix(F[both])
    return D


def non_dominated_sort(F, C=None) -> list[np.ndarray]:
    """Partition row indices into successive constraint-nondominated fronts."""
    D = domination_matrix(F, C)
    count = D.sum(axis=0)
    assigned = np.zeros(len(D), dtype=bool)
    fronts = []
    while not assigned.all():
        front = np.flatnonzero((count == 0) & ~assigned)
        fronts.append(front)
        assigned[front] = True
        count -= D[front].sum(axis=0)
    return fronts


def crowding_distance(F) -> np.ndarray:
    """Crowding distance of each row of one front."""
    F = np.asarray(F, dtype=float)
    n, k = F.shape
    dist = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for j in range(k):
        order = np.argsort(F[:, j], kind="stable")
        col = F[order, j]
        span = col[-1] - col[0]
        dist[order[0]] = dist[order[-1]] = np.inf
        if span > 0:
            dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist


def rank_individuals(pop: Sequence[Individual]) -> list[list[Individual]]:
    """Assign ``rank`` and ``crowding`` in place and return the fronts."""
    F = np.array([ind.y.objectives for ind in pop])
    C = np.array([ind.y.constraints for ind in pop]).reshape(len(pop), -1)
    fronts = []
    for r, idx in enumerate(non_dominated_sort(F, C)):
        cd = crowding_distance(F[idx])
        for i, c in zip(idx, cd):
            pop[i].rank = r
            pop[i].crowding = float(c)
        fronts.append([pop[i] for i in idx])
    return fronts


def _rank_and_crowding(F, C):
    n = len(F)
    rank = np.empty(n, dtype=int)
    crowd = np.empty(n)
    for r, idx in enumerate(non_dominated_sort(F, C)):
        rank[idx] = r
        crowd[idx] = crowding_distance(F[idx])
    return rank, crowd


def _tournament(rank, crowd, n_select, rng):
    a = rng.integers(0, len(rank), n_select)
    b = rng.integers(0, len(rank), n_select)
    a_wins = (rank[a] < rank[b]) | ((rank[a] == rank[b]) & (crowd[a] >= crowd[b]))
    return np.where(a_wins, a, b)


def _sbx(p1, p2, eta, prob, rng):
    """Bounded simulated binary crossover on the unit cube."""
    n, d = p1.shape
    c1, c2 = p1.copy(), p2.copy()
    do_pair = rng.random(n) < prob
    do_var = (rng.random((n, d)) < 0.5) & do_pair[:, None] & (np.abs(p1 - p2) > 1e-14)
    u = rng.random((n, d))
    swap = rng.random((n, d)) < 0.5
    y1 = np.minimum(p1, p2)
    y2 = np.maximum(p1, p2)
    delta = np.where(y2 - y1 > 1e-14, y2 - y1, 1.0)

    def child(beta_bound):
        alpha = 2.0 - beta_bound ** (-(eta + 1.0))
        betaq = np.where(
            u <= 1.0 / alpha,
            (u * alpha) ** (1.0 / (eta + 1.0)),
            (1.0 / np.maximum(2.0 - u * alpha, 1e-300)) ** (1.0 / (eta + 1.0)),
        )
        return betaq

    beta_lo = 1.0 + 2.0 * y1 / delta
    beta_hi = 1.0 + 2.0 * (1.0 - y2) / delta
    ch1 = 0.5 * ((y1 + y2) - child(beta_lo) * delta)
    ch2 = 0.5 * ((y1 + y2) + child(beta_hi) * delta)
    ch1 = np.clip(ch1, 0.0, 1.0)
    ch2 = np.clip(ch2, 0.0, 1.0)
    first = np.where(swap, ch2, ch1)
    second = np.where(swap, ch1, ch2)
    c1[do_var] = first[do_var]
    c2[do_var] = second[do_var]
    return c1, c2


def _polynomial_mutation(X, eta, prob, rng):
    X = X.copy()
    mask = rng.random(X.shape) < prob
    u = rng.random(X.shape)
    d1 = X
    d2 = 1.0 - X
    mpow = 1.0 / (eta + 1.0)
    lo = u < 0.5
    xy = np.where(lo, 1.0 - d1, 1.0 - d2)
    val = np.where(
        lo,
        2.0 * u + (1.0 - 2.0 * u) * xy ** (eta + 1.0),
        2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy ** (eta + 1.0),
    )
    deltaq = np.where(lo, val**mpow - 1.0, 1.0 - val**mpow)
    X[mask] = np.clip(X[mask] + deltaq[mask], 0.0, 1.0)
    return X


class _GridOps:
    """Variation operators acting on an explicit candidate grid."""

    def __init__(self, spec: ProblemSpec):
        self.U = spec.to_unit(spec.grid)
        self.tree = cKDTree(self.U)
        self.values = [np.unique(self.U[:, k]) for k in range(spec.dim)]

    def snap(self, U):
        _, idx = self.tree.query(U)
        return self.U[idx]

    def crossover(self, p1, p2, prob, rng):
        n, d = p1.shape
        swap = (rng.random((n, d)) < 0.5) & (rng.random(n) < prob)[:, None]
        return np.where(swap, p2, p1), np.where(swap, p1, p2)

    def mutate(self, U, prob, rng):
        U = U.copy()
        mask = rng.random(U.shape) < prob
        for k, vals in enumerate(self.values):
            rows = np.flatnonzero(mask[:, k])
            U[rows, k] = vals[rng.integers(0, len(vals), len(rows))]
        return self.snap(U)


def evolve(evaluate_batch: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]], spec: ProblemSpec,
           cfg: NSGA2Config = NSGA2Config(), rng=None, max_evals: int | None = None,
           callback: Callable | None = None):
    """Run constrained NSGA-II with (mu + lambda) survivor selection.

    Parameters
    ----------
    evaluate_batch : callable
        Maps an ``(n, d)`` array of inputs to canonical ``(F, C)`` arrays.
    spec : ProblemSpec
    cfg : NSGA2Config
    rng : numpy.random.Generator or int, optional
    max_evals : int, optional
        Total evaluation budget; the last generation is truncated to fit.
    callback : callable, optional
        Called as ``callback(generation, X, F, C)`` after each survivor
        selection (generation 0 is the initial population).

    Returns
    -------
    X, F, C : numpy.ndarray
        Final population.
    """
    rng = np.random.default_rng(rng)
    P = cfg.pop_size
    if max_evals is not None:
        P = min(P, max_evals)
    pm = cfg.mutation_prob if cfg.mutation_prob is not None else 1.0 / spec.dim
    grid = _GridOps(spec) if spec.is_discrete else None

    if grid is not None:
        M = len(grid.U)
        idx = rng.choice(M, P, replace=P > M)
        U = grid.U[idx]
    else:
        U = rng.random((P, spec.dim))
    F, C = evaluate_batch(spec.from_unit(U))
    used = P
    if callback is not None:
        callback(0, spec.from_unit(U), F, C)

    rank, crowd = _rank_and_crowding(F, C)
    gen = 0
    while gen < cfg.generations:
        n_off = P if max_evals is None else min(P, max_evals - used)
        if n_off <= 0:
            break
        gen += 1
        n_pairs = (n_off + 1) // 2
        parents = _tournament(rank, crowd, 2 * n_pairs, rng)
        p1, p2 = U[parents[:n_pairs]], U[parents[n_pairs:]]
        if grid is not None:
            c1, c2 = grid.crossover(p1, p2, cfg.crossover_prob, rng)
            kids = grid.mutate(np.vstack([c1, c2]), pm, rng)
        else:
            c1, c2 = _sbx(p1, p2, cfg.crossover_eta, cfg.crossover_prob, rng)
            kids = _polynomial_mutation(np.vstack([c1, c2]), cfg.mutation_eta, pm, rng)
        kids = kids[:n_off]
        Fk, Ck = evaluate_batch(spec.from_unit(kids))
        used += n_off

        U = np.vstack([U, kids])
        F = np.vstack([F, Fk])
        C = np.vstack([C, Ck])
        # survivors keep the rank and crowding from the combined sort
        keep, rank, crowd = [], [], []
        for r, front in enumerate(non_dominated_sort(F, C)):
            cd = crowding_distance(F[front])
            if len(keep) + len(front) > P:
                order = np.argsort(-cd, kind="stable")[: P - len(keep)]
                front, cd = front[order], cd[order]
            keep.extend(front)
            rank.extend([r] * len(front))
            crowd.extend(cd)
            if len(keep) == P:
                break
        keep = np.array(keep)
        rank, crowd = np.array(rank), np.array(crowd)
        U, F, C = U[keep], F[keep], C[keep]
        if callback is not None:
            callback(gen, spec.from_unit(U), F, C)
    return spec.from_unit(U), F, C


def _front_sample(X, F, C, observed=None) -> ParetoFrontSample:
    C = C.reshape(len(F), -1)
    first = non_dominated_sort(F, C)[0]
    pts = np.hstack([F[first], C[first]])
    feasible = bool(np.all(C[first] >= 0))
    maxima = pts.max(axis=0)
    observed = maxima if observed is None else np.maximum(observed, maxima)
    return ParetoFrontSample(points=pts, maxima=maxima, x=X[first], feasible=feasible, observed_maxima=observed)


def _batch_evaluator(objectives, constraints, fast=False):
    fns = list(objectives) + list(constraints)
    if fns and all(isinstance(f, SampledFunction) for f in fns):
        stacked = stack_sampled(fns, single_precision=fast)
        K = len(objectives)

        def evaluate_stacked(X):
            Y = stacked(X)
            return Y[:, :K], Y[:, K:]
        return evaluate_stacked

    def evaluate_batch(X):
        F = np.column_stack([f(X) for f in objectives])
        C = np.column_stack([c(X) for c in constraints]) if constraints else np.zeros((len(X), 0))
        return F, C
    return evaluate_batch


class _ArgmaxTracker:
    """Wrap a batch evaluator and remember, per output column, the best input seen."""

    def __init__(self, evaluate_batch):
        self.evaluate_batch = evaluate_batch
        self.best_val = None
        self.best_x = None

    def __call__(self, X):
        F, C = self.evaluate_batch(X)
        Y = np.hstack([F, C.reshape(len(F), -1)])
        i = np.argmax(Y, axis=0)
        vals = Y[i, np.arange(Y.shape[1])]
        if self.best_val is None:
            self.best_val, self.best_x = vals, X[i].copy()
        else:
            better = vals > self.best_val
            self.best_val = np.where(better, vals, self.best_val)
            self.best_x[better] = X[i[better]]
        return F, C

    def exact_maxima(self, exact_evaluator):
        F, C = exact_evaluator(self.best_x)
        Y = np.hstack([F, C.reshape(len(F), -1)])
        return np.diag(Y).copy()


def nsga2(objectives: Sequence[Callable], constraints: Sequence[Callable], spec: ProblemSpec,
          cfg: NSGA2Config = NSGA2Config(), rng=None, extra=None) -> ParetoFrontSample:
    """Solve a cheap constrained MOO over vectorized callables with NSGA-II.

    Objectives are maximized and constraints must satisfy ``c >= 0``.  The
    returned sample is the rank-0 set of the final population, which is the
    least-violating set when nothing feasible was found.  Sampled functions
    are searched in single precision; the final population is re-scored in
    double precision before the front is extracted.  Inputs in ``extra``
    (e.g. already evaluated designs) join the final population as candidates.
    """
    tracker = _ArgmaxTracker(_batch_evaluator(objectives, constraints, fast=True))
    exact = _batch_evaluator(objectives, constraints)
    X, _, _ = evolve(tracker, spec, cfg, rng)
    if extra is not None and len(extra):
        X = np.vstack([X, np.asarray(extra, dtype=float).reshape(-1, spec.dim)])
    F, C = exact(X)
    return _front_sample(X, F, C, tracker.exact_maxima(exact))


def solve_cheap(objectives: Sequence[Callable], constraints: Sequence[Callable], spec: ProblemSpec,
                cfg: NSGA2Config = NSGA2Config(), rng=None, extra=None) -> ParetoFrontSample:
    """Like :func:`nsga2`, but small grids are enumerated exhaustively."""
    if spec.is_discrete and len(spec.grid) <= cfg.exhaustive_grid_limit:
        X = spec.grid
        tracker = _ArgmaxTracker(_batch_evaluator(objectives, constraints, fast=True))
        exact = _batch_evaluator(objectives, constraints)
        F, C = tracker(X)
        first = non_dominated_sort(F, C)[0]
        F, C = exact(X[first])
        return _front_sample(X[first], F, C, tracker.exact_maxima(exact))
    return nsga2(objectives, constraints, spec, cfg, rng, extra)


def pareto_mask(F, C=None) -> np.ndarray:
    """Boolean mask of feasible rows not Pareto-dominated by another feasible row."""
    F = np.asarray(F, dtype=float)
    n = len(F)
    C = np.zeros((n, 0)) if C is None else np.asarray(C, dtype=float).reshape(n, -1)
    feas = np.all(C >= 0, axis=1)
    mask = np.zeros(n, dtype=bool)
    if not feas.any():
        return mask
    idx = np.flatnonzero(feas)
    Ff = F[idx]
    dominated = (np.all(Ff[:, None, :] >= Ff[None, :, :], axis=2)
                 & np.any(Ff[:, None, :] > Ff[None, :, :], axis=2)).any(axis=0)
    mask[idx[~dominated]] = True
    return mask


def pareto_filter(points: Sequence[OutputVector]) -> list[OutputVector]:
    if not points:
        return []
    F = np.array([p.objectives for p in points])
    C = np.array([p.constraints for p in points]).reshape(len(points), -1)
    return [p for p, keep in zip(points, pareto_mask(F, C)) if keep]
