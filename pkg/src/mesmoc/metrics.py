"""Pareto hypervolume and feasibility statistics (maximization convention)."""

from __future__ import annotations

import warnings

import numpy as np

__all__ = ["hypervolume", "hypervolume_mc", "feasible_fraction", "front_hypervolume"]


def _prepare(front, ref, warn):
    P = np.asarray(front, dtype=float)
    ref = np.asarray(ref, dtype=float).ravel()
    if P.size == 0:
        return np.zeros((0, len(ref))), ref
    P = P.reshape(-1, len(ref))
    if not np.all(np.isfinite(P)):
        raise ValueError("front contains non-finite values")
    ok = np.all(P >= ref, axis=1)
    if warn and not ok.all():
        warnings.warn(f"{int((~ok).sum())} point(s) do not dominate the reference point and were dropped",
                      RuntimeWarning, stacklevel=3)
    P = P[ok]
    # strictly positive extent only; degenerate boxes have zero measure
    P = P[np.all(P > ref, axis=1)]
    return np.unique(P, axis=0), ref


def _hv2d(P, ref):
    order = np.argsort(-P[:, 0], kind="stable")
    total, best_y = 0.0, ref[1]
    for x, y in P[order]:
        if y > best_y:
            total += (x - ref[0]) * (y - best_y)
            best_y = y
    return total


def _nondominated(P):
    ge = np.all(P[:, None, :] >= P[None, :, :], axis=2)
    gt = np.any(P[:, None, :] > P[None, :, :], axis=2)
    return P[~(ge & gt).any(axis=0)]


def _hv_recursive(P, ref):
    k = P.shape[1]
    if len(P) == 0:
        return 0.0
    if k == 1:
        return float(P[:, 0].max() - ref[0])
    if k == 2:
        return _hv2d(P, ref)
    P = _nondominated(P)
    # slice along the last objective, from the top down
    order = np.argsort(-P[:, -1], kind="stable")
    P = P[order]
    levels = np.append(P[:, -1], ref[-1])
    total = 0.0
    for i in range(len(P)):
        height = levels[i] - levels[i + 1]
        if height > 0:
            total += height * _hv_recursive(P[: i + 1, :-1], ref[:-1])
    return total


def hypervolume_mc(front, ref, num_samples: int = 10**6, rng=None, warn: bool = True):
    """Monte-Carlo hypervolume estimate and its standard error."""
    P, ref = _prepare(front, ref, warn)
    if len(P) == 0:
        return 0.0, 0.0
    rng = np.random.default_rng(rng)
    upper = P.max(axis=0)
    box = float(np.prod(upper - ref))
    hits = 0
    chunk = 50_000
    done = 0
    while done < num_samples:
        m = min(chunk, num_samples - done)
        S = ref + rng.random((m, len(ref))) * (upper - ref)
        hits += int(np.any(np.all(P[None, :, :] >= S[:, None, :], axis=2), axis=1).sum())
        done += m
    p = hits / num_samples
    return box * p, box * np.sqrt(p * (1 - p) / num_samples)


def hypervolume(front, ref, warn: bool = True, num_samples: int = 10**6, rng=None) -> float:
    """Volume of the region dominated by ``front`` and bounded below by ``ref``.

    Exact for up to four objectives; above that a Monte-Carlo estimate is
    returned (use :func:`hypervolume_mc` to also get its standard error).
    Points that do not dominate ``ref`` contribute nothing and trigger a
    ``RuntimeWarning`` when ``warn`` is set.
    """
    ref = np.asarray(ref, dtype=float).ravel()
    if len(ref) >= 5:
        return hypervolume_mc(front, ref, num_samples, rng, warn)[0]
    P, ref = _prepare(front, ref, warn)
    return float(_hv_recursive(P, ref))


def front_hypervolume(F, C, ref, mode: str = "strict") -> float:
    """Hypervolume of evaluated outputs; ``mode="strict"`` keeps only feasible rows."""
    F = np.asarray(F, dtype=float).reshape(-1, len(ref))
    if mode == "strict":
        C = np.asarray(C, dtype=float).reshape(len(F), -1)
        F = F[np.all(C >= 0, axis=1)]
    elif mode != "lenient":
        raise ValueError(f"unknown hypervolume mode {mode!r}")
    return hypervolume(F, ref, warn=False)


def feasible_fraction(trace) -> float:
    """Share of post-initialization selections that turned out feasible."""
    flags = [r.feasible for r in trace.records if not r.initial]
    if not flags:
        raise ValueError("trace has no post-initialization selections")
    return float(np.mean(flags))
