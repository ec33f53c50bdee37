"""Task distances, ranking and rank-to-weight strategies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .core import TaskDataset

BEST_N_MEAN = "best_n_mean"
OPTIMAL_POINT = "optimal_point"
BEST_N_PERCENT = "best_n_percent"
KENDALL = "kendall"
KL_DIVERGENCE = "kl_divergence"
MEASURES = (BEST_N_MEAN, OPTIMAL_POINT, BEST_N_PERCENT, KENDALL, KL_DIVERGENCE)

LINEAR = "linear"
EXPONENTIAL = "exponential"
ALL_ONE = "all_one"
STRATEGIES = (LINEAR, EXPONENTIAL, ALL_ONE)

DENSITY_FLOOR = 1e-12


@dataclass
class SimilarityConfig:
    measure: str = BEST_N_MEAN
    N: int = 5
    percent: float = 0.30
    strategy: str = LINEAR
    alpha: float = 0.5
    beta: float = 0.5
    kl_mc_samples: int = 1024
    recompute_every: int = 1

    def __post_init__(self):
        if self.measure not in MEASURES:
            raise ValueError(f"unknown similarity measure {self.measure!r}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown weight strategy {self.strategy!r}")
        if not (0 < self.alpha <= 1) or not (0 < self.beta <= 1):
            raise ValueError("alpha and beta must lie in (0, 1]")
        if self.N < 1:
            raise ValueError("N must be positive")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SimilarityState:
    task_ids: List[str]
    distances: np.ndarray
    global_order: List[int]
    computed_at_t: int = 0

    def rank_of(self) -> Dict[int, int]:
        return {task: r for r, task in enumerate(self.global_order)}


def best_n_mean(dataset: TaskDataset, N: int) -> np.ndarray:
    """Mean location of the ``min(N, |D|)`` best samples (ties by insertion order)."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    k = min(int(N), len(dataset))
    order = np.argsort(-dataset.y, kind="stable")[:k]
    return dataset.X[order].mean(axis=0)


def distance_points(source: TaskDataset, target: TaskDataset, config: SimilarityConfig) -> float:
    if config.measure == OPTIMAL_POINT:
        ns, nt = 1, 1
    elif config.measure == BEST_N_PERCENT:
        ns = max(1, math.ceil(config.percent * len(source)))
        nt = max(1, math.ceil(config.percent * len(target)))
    else:
        ns = nt = config.N
    a = best_n_mean(source, ns)
    b = best_n_mean(target, nt)
    return float(np.linalg.norm(a - b))


def concordance(pred, truth) -> float:
    """Fraction of pairs whose order under ``pred`` agrees with ``truth``.

    A pair counts when ``(pred_j < pred_k)`` and ``(truth_j < truth_k)`` have
    the same truth value.
    """
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    n = len(pred)
    if n < 2:
        raise ValueError("need at least two points")
    j, k = np.triu_indices(n, k=1)
    agree = (pred[j] < pred[k]) == (truth[j] < truth[k])
    return 2.0 * agree.sum() / (n * (n - 1))


def _default_surrogate(X, y):
    from .surrogate import fit_gp

    model = fit_gp(X, y)
    return lambda Z: model.predict(Z)[0]


def distance_kendall(source: TaskDataset, target: TaskDataset,
                     surrogate_fit: Optional[Callable] = None) -> float:
    """``1 - concordance`` of a surrogate fitted on ``source`` against the
    target's observed values.

    ``surrogate_fit(X, y)`` must return a callable mapping points to
    predictions; the default is the optimiser's GP.  A failing fit yields the
    maximal distance 1.
    """
    if len(target) < 2:
        raise ValueError("Kendall distance needs at least two target samples")
    fit = surrogate_fit or _default_surrogate
    try:
        predict = fit(source.X, source.y)
        pred = np.asarray(predict(target.X), dtype=float)
    except (np.linalg.LinAlgError, ValueError, FloatingPointError):
        return 1.0
    if not np.all(np.isfinite(pred)):
        return 1.0
    return float(1.0 - concordance(pred, target.y))


def _kde(points: np.ndarray):
    """Product-Gaussian KDE with Scott's per-axis bandwidth."""
    n, d = points.shape
    sd = points.std(axis=0, ddof=1) if n > 1 else np.zeros(d)
    h = sd * n ** (-1.0 / (d + 4))
    h = np.maximum(h, 1e-3)
    norm = n * np.prod(h) * (2 * math.pi) ** (d / 2)

    def density(Z):
        Z = np.atleast_2d(Z)
        out = np.zeros(len(Z))
        # chunk to keep the (m, n, d) temporary small
        for s in range(0, len(Z), 512):
            u = (Z[s:s + 512, None, :] - points[None, :, :]) / h
            out[s:s + 512] = np.exp(-0.5 * np.sum(u * u, axis=2)).sum(axis=1)
        return out / norm

    return density


def distance_kl(source: TaskDataset, target: TaskDataset, dim: int, config: SimilarityConfig,
                rng: np.random.Generator) -> float:
    """Monte-Carlo KL(p || q) with p the target density, q the source density.

    Both densities are evaluated at ``config.kl_mc_samples`` uniform points of
    the unit cube, floored and normalised into discrete distributions.
    """
    if len(source) < 2 or len(target) < 2:
        raise ValueError("KL distance needs at least two points per dataset")
    Z = rng.random((config.kl_mc_samples, dim))
    p = np.maximum(_kde(target.X)(Z), DENSITY_FLOOR)
    q = np.maximum(_kde(source.X)(Z), DENSITY_FLOOR)
    p /= p.sum()
    q /= q.sum()
    return float(np.sum(p * np.log(p / q)))


def task_distance(source: TaskDataset, target: TaskDataset, config: SimilarityConfig,
                  rng: Optional[np.random.Generator] = None,
                  surrogate_fit: Optional[Callable] = None) -> float:
    if config.measure in (BEST_N_MEAN, OPTIMAL_POINT, BEST_N_PERCENT):
        return distance_points(source, target, config)
    if config.measure == KENDALL:
        if len(target) < 2:
            return 0.0
        return distance_kendall(source, target, surrogate_fit)
    if len(target) < 2 or len(source) < 2:
        return 0.0
    return distance_kl(source, target, target.dim, config, rng or np.random.default_rng(0))


def compute_similarity(sources: Sequence[TaskDataset], target: TaskDataset, config: SimilarityConfig,
                       t: int = 0, rng: Optional[np.random.Generator] = None) -> SimilarityState:
    """Distances from every source task to the target plus their ascending order.

    An empty target makes all distances equal, so the order falls back to
    task position.
    """
    ids = [s.task_id for s in sources]
    if len(target) == 0:
        dist = np.zeros(len(sources))
    else:
        dist = np.array([task_distance(s, target, config, rng) for s in sources], dtype=float)
    return SimilarityState(ids, dist, rank_order(dist, ids), t)


def rank_order(distances, task_ids: Optional[Sequence[str]] = None) -> List[int]:
    """Task indices sorted by ascending distance; ties broken by task id."""
    distances = list(map(float, distances))
    ids = list(task_ids) if task_ids is not None else [f"{i:09d}" for i in range(len(distances))]
    return sorted(range(len(distances)), key=lambda i: (distances[i], ids[i], i))


def weight_for_rank(rank: int, n_tasks: int, config: SimilarityConfig) -> float:
    if config.strategy == ALL_ONE:
        return 1.0
    if config.strategy == EXPONENTIAL:
        return float(config.beta ** rank)
    cut = config.alpha * n_tasks
    return 1.0 - rank / cut if rank < cut else 0.1


def assign_weights(local_ranks: Sequence[int], n_tasks: int, config: SimilarityConfig) -> np.ndarray:
    """Weights for 0-indexed ranks among ``n_tasks`` contributing tasks."""
    if n_tasks == 0:
        return np.zeros(0)
    return np.array([weight_for_rank(int(r), n_tasks, config) for r in local_ranks], dtype=float)


def local_weights(contributing: Sequence[int], state_order: Sequence[int],
                  config: SimilarityConfig) -> Dict[int, float]:
    """Re-rank the contributing tasks densely by the global order and weight them."""
    present = set(contributing)
    ordered = [task for task in state_order if task in present]
    ranks = {task: r for r, task in enumerate(ordered)}
    w = assign_weights([ranks[t] for t in ordered], len(ordered), config)
    return dict(zip(ordered, w))
