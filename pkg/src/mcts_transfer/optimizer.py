"""The transfer tree-search loop and the comparison baselines."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .core import TARGET, SearchDomain, TaskDataset, denormalize_point, minmax_normalize
from .partition import LOGISTIC, RegionPath, sample_in_region
from .regions import FullRegion, derive_transfer_region
from .similarity import SimilarityConfig, compute_similarity
from .surrogate import fit_gp, propose_candidate
from .tree import OPTIMIZE, PartitionTree, TreeConfig, prelearn

log = logging.getLogger(__name__)

METHODS = ("mcts_transfer", "gp_ei", "la_mcts", "box_gp", "ellipsoid_gp")


class EvaluationError(RuntimeError):
    pass


@dataclass
class OptimizerConfig:
    method: str = "mcts_transfer"
    gamma: float = 0.99
    cp: float = 0.1
    theta: int = 10
    similarity: SimilarityConfig = field(default_factory=SimilarityConfig)
    eval_budget: int = 100
    seed: int = 0
    normalize_objectives: bool = True
    n_init: int = 5
    classifier: str = LOGISTIC
    cluster_features: str = "xy"
    literal_ucb: bool = False
    center_target: bool = True
    # "objective": exploration bonus in raw objective units; "unit": on the potential scale
    ucb_scale: str = "unit"
    local_model: bool = False
    gp_restarts: int = 5

    def __post_init__(self):
        if isinstance(self.similarity, dict):
            self.similarity = SimilarityConfig(**self.similarity)
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.eval_budget < 1:
            raise ValueError("eval_budget must be >= 1")
        if self.ucb_scale not in ("objective", "unit"):
            raise ValueError("ucb_scale must be 'objective' or 'unit'")

    def tree_config(self) -> TreeConfig:
        return TreeConfig(theta=self.theta, gamma=self.gamma, cp=self.cp, classifier=self.classifier,
                          cluster_features=self.cluster_features, literal_ucb=self.literal_ucb,
                          center_target=self.center_target, similarity=self.similarity)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["similarity"] = self.similarity.to_dict()
        return d


@dataclass
class RunTrace:
    method: str
    config: dict
    records: List[dict] = field(default_factory=list)
    task_ids: List[str] = field(default_factory=list)
    tree: Optional[dict] = None
    region: Optional[dict] = None
    status: str = "ok"
    error: Optional[str] = None

    def __len__(self) -> int:
        return len(self.records)

    @property
    def incumbents(self) -> np.ndarray:
        return np.array([r["incumbent"] for r in self.records])

    @property
    def X(self) -> np.ndarray:
        return np.array([r["x"] for r in self.records])

    @property
    def y(self) -> np.ndarray:
        return np.array([r["y"] for r in self.records])

    def weight_matrix(self) -> np.ndarray:
        """(iterations, tasks) array of logged weights; NaN where absent."""
        W = np.full((len(self.records), len(self.task_ids)), np.nan)
        for i, r in enumerate(self.records):
            for j, tid in enumerate(self.task_ids):
                if tid in r.get("weights", {}):
                    W[i, j] = r["weights"][tid]
        return W

    def timing_totals(self) -> dict:
        keys = ("evaluation", "backpropagation", "reconstruction")
        return {k: float(sum(r["timings"].get(k, 0.0) for r in self.records)) for k in keys}


class _Evaluator:
    """Evaluate the objective with the retry-once policy."""

    def __init__(self, objective, domain: SearchDomain):
        self.objective = objective
        self.domain = domain

    def __call__(self, x_unit, fallback: Callable[[], np.ndarray]):
        last = None
        for attempt in range(2):
            try:
                y = float(self.objective(denormalize_point(x_unit, self.domain)))
                if not math.isfinite(y):
                    raise EvaluationError(f"non-finite objective value {y}")
                return x_unit, y
            except Exception as exc:  # noqa: BLE001 - user objectives may raise anything
                last = exc
                log.warning("evaluation failed (attempt %d): %s", attempt + 1, exc)
                x_unit = fallback()
        raise EvaluationError(str(last))


def _record(trace, t, x_unit, y, domain, incumbent, timings, **extra):
    rec = {"t": t, "x": denormalize_point(x_unit, domain).tolist(), "y": y, "incumbent": incumbent,
           "timings": timings}
    rec.update(extra)
    trace.records.append(rec)


def _value_scale(config, target, sources) -> float:
    """Objective units per potential unit, used to scale the UCB bonus."""
    if config.ucb_scale == "unit" or not config.normalize_objectives:
        return 1.0
    if len(target) >= 2 and target.y_max_raw > target.y_min_raw:
        return target.y_max_raw - target.y_min_raw
    ranges = [s.y_max_raw - s.y_min_raw for s in sources if s.y_max_raw > s.y_min_raw]
    return float(np.mean(ranges)) if ranges else 1.0


def _pick_uniform(dim, region, rng):
    cands = sample_in_region(dim, region, rng)
    return cands[int(rng.integers(len(cands)))].copy()


def run_mcts_transfer(objective, domain: SearchDomain, source_datasets: Sequence[TaskDataset],
                      config: OptimizerConfig, on_iteration: Optional[Callable] = None) -> RunTrace:
    """Transfer tree search: pre-learn a partition from the sources, then
    iterate select / propose / evaluate / re-weight / expand / back-propagate /
    reconstruct.

    ``objective`` takes original coordinates and is maximised.
    ``on_iteration(tree, t)`` is called after each completed iteration.
    """
    rng = np.random.default_rng(config.seed)
    sources = [s for s in source_datasets if len(s)]
    dim = domain.dim
    tree = prelearn(sources, config.tree_config(), rng, dim=dim,
                    normalize_objectives=config.normalize_objectives)
    target = TaskDataset.empty("target", dim, role=TARGET)
    trace = RunTrace(config.method, config.to_dict(), task_ids=[s.task_id for s in sources])
    evaluate = _Evaluator(objective, domain)
    sim_state = None
    incumbent = -math.inf

    for t in range(1, config.eval_budget + 1):
        tree.value_scale = _value_scale(config, target, sources)
        leaf = tree.select_leaf()
        t0 = time.perf_counter()
        if len(target) == 0:
            x = _pick_uniform(dim, leaf.path, rng)
        else:
            if config.local_model and len(leaf.target_idx) >= 2:
                Xm, ym = target.X[leaf.target_idx], target.y[leaf.target_idx]
            else:
                Xm, ym = target.X, target.y
            model = fit_gp(Xm, ym, n_restarts=config.gp_restarts, seed=config.seed + t)
            x = propose_candidate(model, dim, leaf.path, float(np.max(ym)), rng)
        try:
            x, y = evaluate(x, lambda: _pick_uniform(dim, leaf.path, rng))
        except EvaluationError as exc:
            trace.status, trace.error = "failed", str(exc)
            break
        t_eval = time.perf_counter() - t0

        t0 = time.perf_counter()
        target.append(x, y)
        tree.set_target(target.X, target.y_norm if config.normalize_objectives else target.y)
        index = len(target) - 1
        if sources and (sim_state is None or (t - 1) % config.similarity.recompute_every == 0):
            sim_state = compute_similarity(sources, target, config.similarity, t, rng)
            tree.global_order = list(sim_state.global_order)
        tree.update_all_potentials(OPTIMIZE)
        t_bp = time.perf_counter() - t0

        t0 = time.perf_counter()
        expanded = tree.expand(leaf, OPTIMIZE, rng) is not None
        t_rec = time.perf_counter() - t0

        t0 = time.perf_counter()
        tree.backpropagate(tree.descend(leaf, x), index)
        tree.update_all_potentials(OPTIMIZE)
        t_bp += time.perf_counter() - t0

        t0 = time.perf_counter()
        rebuilt = tree.treeify(OPTIMIZE, rng)
        t_rec += time.perf_counter() - t0

        incumbent = max(incumbent, y)
        weights = {sources[k].task_id: float(w) for k, w in tree.root_weights().items()}
        _record(trace, t, x, y, domain, incumbent,
                {"evaluation": t_eval, "backpropagation": t_bp, "reconstruction": t_rec},
                leaf=leaf.id, leaf_depth=leaf.depth, expanded=expanded, reconstructions=rebuilt,
                n_leaves=len(tree.leaves()), weights=weights,
                distances=None if sim_state is None else sim_state.distances.tolist())
        if on_iteration is not None:
            on_iteration(tree, t)

    trace.tree = tree.snapshot()
    return trace


def run_la_mcts(objective, domain: SearchDomain, config: OptimizerConfig, **kw) -> RunTrace:
    """Tree search without transfer: root-only start, target-only potentials."""
    return run_mcts_transfer(objective, domain, [], config, **kw)


def _run_gp_loop(objective, domain: SearchDomain, region, config: OptimizerConfig) -> RunTrace:
    rng = np.random.default_rng(config.seed)
    dim = domain.dim
    trace = RunTrace(config.method, config.to_dict())
    evaluate = _Evaluator(objective, domain)
    X: List[np.ndarray] = []
    Y: List[float] = []
    incumbent = -math.inf
    for t in range(1, config.eval_budget + 1):
        t0 = time.perf_counter()
        if len(Y) < config.n_init:
            x = _pick_uniform(dim, region, rng)
        else:
            model = fit_gp(np.array(X), np.array(Y), n_restarts=config.gp_restarts, seed=config.seed + t)
            x = propose_candidate(model, dim, region, max(Y), rng)
        try:
            x, y = evaluate(x, lambda: _pick_uniform(dim, region, rng))
        except EvaluationError as exc:
            trace.status, trace.error = "failed", str(exc)
            break
        X.append(x)
        Y.append(y)
        incumbent = max(incumbent, y)
        _record(trace, t, x, y, domain, incumbent,
                {"evaluation": time.perf_counter() - t0, "backpropagation": 0.0, "reconstruction": 0.0},
                weights={})
    return trace


def run_gp_ei(objective, domain: SearchDomain, config: OptimizerConfig) -> RunTrace:
    """Plain GP-EI over the whole domain after ``n_init`` uniform points."""
    return _run_gp_loop(objective, domain, RegionPath(), config)


def run_region_gp_ei(objective, domain: SearchDomain, region, config: OptimizerConfig) -> RunTrace:
    """GP-EI whose initial design and candidates are confined to ``region``."""
    region = region if region is not None else FullRegion(domain.dim)
    trace = _run_gp_loop(objective, domain, region, config)
    trace.region = region.to_dict() if hasattr(region, "to_dict") else None
    return trace


def run_method(objective, domain: SearchDomain, sources: Sequence[TaskDataset],
               config: OptimizerConfig) -> RunTrace:
    """Dispatch on ``config.method``."""
    if config.method == "mcts_transfer":
        return run_mcts_transfer(objective, domain, sources, config)
    if config.method == "la_mcts":
        return run_la_mcts(objective, domain, config)
    if config.method == "gp_ei":
        return run_gp_ei(objective, domain, config)
    kind = "box" if config.method == "box_gp" else "ellipsoid"
    region = derive_transfer_region(list(sources), kind)
    return run_region_gp_ei(objective, domain, region, config)
