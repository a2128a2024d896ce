"""Output-space max-value entropy search acquisition for constrained MOO.

For every output j (objectives first, then constraints) the GP predictive
distribution at x is truncated from above at a sampled front maximum
``y*_j``.  With ``g = (y*_j - mu_j(x)) / sigma_j(x)``, the entropy removed by
the truncation is ``g * pdf(g) / (2 * cdf(g)) - log cdf(g)``; the acquisition
value averages the sum of these terms over the sampled fronts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import erfcx, log_ndtr

from .gp import GPModel, PosteriorMoments, sample_posterior_function
from .moo import NSGA2Config, solve_cheap
from .problem import ProblemSpec

__all__ = [
    "MaximaSample",
    "AcquisitionState",
    "OptimizerConfig",
    "GAUSSIAN_ENTROPY_CONST",
    "gaussian_entropy",
    "truncated_entropy_term",
    "conditional_entropy",
    "mesmoc_acquisition",
    "acquisition_values",
    "sample_maxima",
    "optimize_acquisition",
]

GAUSSIAN_ENTROPY_CONST = 0.5 * (1.0 + math.log(2 * math.pi))
_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


@dataclass(frozen=True)
class MaximaSample:
    maxima: np.ndarray
    feasible: bool = True

    def __post_init__(self):
        m = np.array(self.maxima, dtype=float).ravel()
        if not np.all(np.isfinite(m)):
            raise ValueError("maxima must be finite")
        m.setflags(write=False)
        object.__setattr__(self, "maxima", m)


@dataclass(frozen=True)
class AcquisitionState:
    """Fitted models (objectives then constraints) plus sampled front maxima."""

    models: tuple[GPModel, ...]
    maxima_samples: tuple[MaximaSample, ...]
    num_objectives: int

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "maxima_samples", tuple(self.maxima_samples))
        if not self.maxima_samples:
            raise ValueError("need at least one maxima sample")
        if any(len(s.maxima) != len(self.models) for s in self.maxima_samples):
            raise ValueError("every maxima sample needs one entry per model")

    @property
    def num_samples(self) -> int:
        return len(self.maxima_samples)

    @property
    def maxima(self) -> np.ndarray:
        return np.array([s.maxima for s in self.maxima_samples])

    def predict(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Posterior means and standard deviations, each of shape ``(n, K + L)``."""
        X = np.atleast_2d(X)
        mus, sds = [], []
        for m in self.models:
            mu, var = m.predict(X)
            mus.append(mu)
            sds.append(np.sqrt(var))
        return np.column_stack(mus), np.column_stack(sds)


def _sigmas(moments: Sequence[PosteriorMoments]) -> np.ndarray:
    s = np.array([m.variance for m in moments], dtype=float)
    if np.any(~(s > 0)):
        raise ValueError("all predictive variances must be positive")
    return np.sqrt(s)


def gaussian_entropy(moments: Sequence[PosteriorMoments]) -> float:
    """Differential entropy of independent Gaussians with the given moments."""
    sig = _sigmas(moments)
    return float(len(sig) * GAUSSIAN_ENTROPY_CONST + np.sum(np.log(sig)))


def _hazard(g):
    """``pdf(g) / cdf(g)`` without underflow, via the scaled complementary error function."""
    return math.sqrt(2 / math.pi) / erfcx(-g / math.sqrt(2))


# below this the closed form cancels catastrophically; the asymptotic series is exact to ~1e-11
_ASYMPTOTIC_CUTOFF = -1e3


def truncated_entropy_term(gamma):
    """Entropy reduction from upper-truncating a unit Gaussian at ``gamma``.

    Equals ``gamma * pdf(gamma) / (2 * cdf(gamma)) - log cdf(gamma)``; finite
    and non-negative for every finite ``gamma``.
    """
    g = np.asarray(gamma, dtype=float)
    far = g < _ASYMPTOTIC_CUTOFF
    gn = np.where(far, 0.0, g)
    out = 0.5 * gn * _hazard(gn) - log_ndtr(gn)
    if np.any(far):
        t = -g[far] if g.ndim else -g
        out = np.where(far, 0.0, out)
        out[far] = np.log(t) + _LOG_SQRT_2PI - 0.5 + 2.0 / t**2
    return float(out) if out.ndim == 0 else out


def conditional_entropy(moments: Sequence[PosteriorMoments], maxima: MaximaSample) -> float:
    """Entropy of the outputs given that each lies below its sampled maximum."""
    sig = _sigmas(moments)
    mu = np.array([m.mean for m in moments])
    g = (maxima.maxima - mu) / sig
    if np.any(g < _ASYMPTOTIC_CUTOFF):
        return float(np.sum(GAUSSIAN_ENTROPY_CONST + np.log(sig) - truncated_entropy_term(g)))
    return float(np.sum(GAUSSIAN_ENTROPY_CONST + np.log(sig) + log_ndtr(g) - 0.5 * g * _hazard(g)))


_SIGMA_FLOOR = 1e-12


def acquisition_values(X, state: AcquisitionState) -> np.ndarray:
    """Vectorized acquisition over the rows of ``X``."""
    mu, sd = state.predict(X)
    sd = np.maximum(sd, _SIGMA_FLOOR)
    gamma = (state.maxima[None, :, :] - mu[:, None, :]) / sd[:, None, :]
    return truncated_entropy_term(gamma).sum(axis=2).mean(axis=1)


def mesmoc_acquisition(x, state: AcquisitionState) -> float:
    return float(acquisition_values(np.asarray(x, dtype=float)[None, :], state)[0])


def sample_maxima(models: Sequence[GPModel], spec: ProblemSpec, num_samples: int = 10,
                  cheap_cfg: NSGA2Config = NSGA2Config(), rng=None, num_features: int = 500,
                  constraint_bound: str = "front") -> list[MaximaSample]:
    """Sample constrained Pareto fronts of posterior draws and keep their maxima.

    Parameters
    ----------
    models : sequence of GPModel
        One model per output, objectives first.
    spec : ProblemSpec
    num_samples : int
        Number of sampled fronts.
    cheap_cfg : NSGA2Config
        Budget of the cheap solver run on every draw.
    rng : numpy.random.Generator or int, optional
        Each sample uses its own child generator spawned from it.
    num_features : int
        Random Fourier features per sampled function.  The training inputs
        always join the cheap solver's candidates, so a sampled maximum is
        never below what the draw attains at an evaluated design.
    constraint_bound : {"front", "observed"}
        Upper bound used for constraint outputs.  ``"front"`` takes the
        maximum over the sampled front's members.  ``"observed"`` takes the
        largest sampled constraint value reached anywhere: over every point
        the cheap solver evaluated and over the training inputs.  Objective
        bounds always come from the front.
    """
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    if constraint_bound not in ("front", "observed"):
        raise ValueError(f"unknown constraint_bound {constraint_bound!r}")
    rng = np.random.default_rng(rng)
    K = spec.num_objectives
    X_train = models[0].X if models else np.zeros((0, spec.dim))
    out = []
    for child in rng.spawn(num_samples):
        fns = [sample_posterior_function(m, num_features, child) for m in models]
        front = solve_cheap(fns[:K], fns[K:], spec, cheap_cfg, child, extra=X_train)
        maxima = front.maxima.copy()
        if constraint_bound == "observed" and len(fns) > K:
            reached = front.observed_maxima[K:]
            if len(X_train):
                reached = np.maximum(reached, np.column_stack([f(X_train) for f in fns[K:]]).max(axis=0))
            maxima[K:] = np.maximum(maxima[K:], reached)
        out.append(MaximaSample(maxima, front.feasible))
    return out


@dataclass(frozen=True)
class OptimizerConfig:
    num_probes: int = 1000
    num_starts: int = 5
    initial_step: float = 0.1
    min_step: float = 1e-4
    max_polls: int = 200
    max_grid_candidates: int = 100_000


def _mean_violation(state: AcquisitionState, mu: np.ndarray) -> np.ndarray:
    return np.sum(np.maximum(0.0, -mu[:, state.num_objectives:]), axis=1)


def _pattern_search(u0, f0, score, step, min_step, max_polls):
    """Compass search on the unit cube maximizing ``score`` (vectorized polls)."""
    u, best = u0.copy(), f0
    d = len(u)
    dirs = np.vstack([np.eye(d), -np.eye(d)])
    for _ in range(max_polls):
        if step < min_step:
            break
        cand = np.clip(u + step * dirs, 0.0, 1.0)
        vals = score(cand)
        i = int(np.argmax(vals))
        if vals[i] > best:
            u, best = cand[i], vals[i]
        else:
            step *= 0.5
    return u, best


def optimize_acquisition(state: AcquisitionState, spec: ProblemSpec, opt_cfg: OptimizerConfig = OptimizerConfig(),
                         rng=None, evaluated=None) -> tuple[np.ndarray, float]:
    """Maximize the acquisition subject to non-negative constraint posterior means.

    Parameters
    ----------
    state : AcquisitionState
    spec : ProblemSpec
    opt_cfg : OptimizerConfig
    rng : numpy.random.Generator or int, optional
    evaluated : array_like, optional
        Already evaluated inputs; excluded from the candidates on grids.

    Returns
    -------
    x : numpy.ndarray
        Selected input.
    value : float
        Its acquisition value.

    Notes
    -----
    When no candidate has all constraint means non-negative, the candidate
    with the smallest total mean violation is returned, ties broken by
    acquisition value.
    """
    rng = np.random.default_rng(rng)
    if spec.is_discrete:
        cand = spec.grid
        if evaluated is not None and len(evaluated):
            seen = {tuple(r) for r in np.asarray(evaluated, dtype=float)}
            cand = cand[np.array([tuple(r) not in seen for r in cand], dtype=bool)]
        if len(cand) == 0:
            raise ValueError("no unevaluated candidates left")
        if len(cand) > opt_cfg.max_grid_candidates:
            cand = cand[rng.choice(len(cand), opt_cfg.max_grid_candidates, replace=False)]
        mu, _ = state.predict(cand)
        acq = acquisition_values(cand, state)
        viol = _mean_violation(state, mu)
        ok = viol == 0
        if ok.any():
            i = np.flatnonzero(ok)[np.argmax(acq[ok])]
        else:
            i = np.lexsort((-acq, viol))[0]
        return cand[i].copy(), float(acq[i])

    U = rng.random((opt_cfg.num_probes, spec.dim))
    X = spec.from_unit(U)
    mu, _ = state.predict(X)
    acq = acquisition_values(X, state)
    viol = _mean_violation(state, mu)
    ok = viol == 0
    if not ok.any():
        i = np.lexsort((-acq, viol))[0]
        return X[i].copy(), float(acq[i])

    def score(Uc):
        Xc = spec.from_unit(Uc)
        m, _ = state.predict(Xc)
        a = acquisition_values(Xc, state)
        return np.where(_mean_violation(state, m) == 0, a, -np.inf)

    feas_idx = np.flatnonzero(ok)
    starts = feas_idx[np.argsort(-acq[feas_idx], kind="stable")[: opt_cfg.num_starts]]
    best_u, best_val = U[starts[0]], acq[starts[0]]
    for s in starts:
        u, v = _pattern_search(U[s], acq[s], score, opt_cfg.initial_step, opt_cfg.min_step, opt_cfg.max_polls)
        if v > best_val:
            best_u, best_val = u, v
    return spec.from_unit(best_u), float(best_val)
