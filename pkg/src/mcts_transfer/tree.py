"""Monte Carlo partition tree over the unit cube.

Nodes keep index arrays into the tree-wide sample stores instead of copies of
the samples, so re-normalising the target objective only touches one array.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .core import TaskDataset, stack_datasets
from .partition import (
    LOGISTIC,
    Classifier,
    NotClusterable,
    RegionPath,
    fit_classifier,
    kmeans_two,
    label_good_bad,
)
from .similarity import SimilarityConfig, local_weights

PRELEARN = "prelearn"
OPTIMIZE = "optimize"


# --- pure formulas -----------------------------------------------------------


def potential_prelearn(values: Sequence[float]) -> float:
    """Pooled mean of the source objective values inside a node (0 if empty)."""
    values = np.asarray(values, dtype=float)
    return float(values.mean()) if values.size else 0.0


def potential(source_means: Mapping, weights: Mapping, target_mean: Optional[float],
              gamma: float, t: int) -> float:
    """Decayed, similarity-weighted source average plus the target average.

    ``source_means`` and ``weights`` are keyed by task and only cover tasks
    with samples in the node; a missing target term counts as 0.
    """
    if t < 1:
        raise ValueError("t counts completed target evaluations and must be >= 1")
    src = 0.0
    if source_means:
        wsum = sum(weights[k] for k in source_means)
        if wsum > 0:
            src = sum(weights[k] * source_means[k] for k in source_means) / wsum
    return gamma ** (t - 1) * src + (0.0 if target_mean is None else float(target_mean))


def ucb_score(p: float, n_node: int, n_parent: int, cp: float, literal: bool = False) -> float:
    """Upper-confidence score of a child.

    By default the potential takes the place of the whole ``v/n`` term;
    ``literal=True`` divides the potential by the visit count instead.
    """
    if n_node <= 0:
        return math.inf
    explore = 2.0 * cp * math.sqrt(2.0 * math.log(max(n_parent, 1)) / n_node)
    return (p / n_node if literal else p) + explore


# --- tree --------------------------------------------------------------------


@dataclass(eq=False)
class TreeNode:
    id: int
    path: RegionPath
    source_idx: np.ndarray
    target_idx: np.ndarray
    parent: Optional["TreeNode"] = None
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    classifier: Optional[Classifier] = None
    potential: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    @property
    def n_visits(self) -> int:
        return int(len(self.source_idx) + len(self.target_idx))

    @property
    def depth(self) -> int:
        return len(self.path)

    def ancestors(self) -> Iterator["TreeNode"]:
        node = self
        while node is not None:
            yield node
            node = node.parent


@dataclass
class TreeConfig:
    theta: int = 10
    gamma: float = 0.99
    cp: float = 0.1
    classifier: str = LOGISTIC
    cluster_features: str = "xy"  # or "x"
    literal_ucb: bool = False
    # measure the target term relative to the mean target value, so that an
    # empty target pool (term 0) reads as "average" rather than "worst"
    center_target: bool = True
    similarity: SimilarityConfig = field(default_factory=SimilarityConfig)


class PartitionTree:
    """Partition tree shared by the pre-learning and optimisation stages."""

    def __init__(self, dim: int, sources: Sequence[TaskDataset] = (), config: Optional[TreeConfig] = None,
                 normalize_objectives: bool = True):
        self.dim = dim
        self.config = config or TreeConfig()
        self.normalize_objectives = normalize_objectives
        self.sources = list(sources)
        self.n_tasks = len(self.sources)
        if self.sources:
            X, y, task = stack_datasets(self.sources, normalized=normalize_objectives)
        else:
            X, y, task = np.zeros((0, dim)), np.zeros(0), np.zeros(0, dtype=int)
        self.source_X = X.reshape(-1, dim)
        self.source_y = y
        self.source_task = task
        self.target_X = np.zeros((0, dim))
        self.target_y = np.zeros(0)
        self.t = 0
        self.global_order: List[int] = list(range(self.n_tasks))
        # objective units of one potential unit; the exploration bonus is divided by it
        self.value_scale = 1.0
        self._next_id = 0
        self.root = self._new_node(RegionPath(), np.arange(len(self.source_y)), np.zeros(0, dtype=int))

    # -- bookkeeping --

    def _new_node(self, path, source_idx, target_idx, parent=None) -> TreeNode:
        node = TreeNode(self._next_id, path, np.asarray(source_idx, dtype=int),
                        np.asarray(target_idx, dtype=int), parent=parent)
        self._next_id += 1
        return node

    def nodes(self) -> List[TreeNode]:
        out, queue = [], deque([self.root])
        while queue:
            node = queue.popleft()
            out.append(node)
            if not node.is_leaf:
                queue.extend((node.left, node.right))
        return out

    def leaves(self) -> List[TreeNode]:
        return [n for n in self.nodes() if n.is_leaf]

    @property
    def depth(self) -> int:
        return max(n.depth for n in self.nodes())

    def set_target(self, X, y) -> None:
        """Replace the target store; ``y`` is already on the potential scale."""
        self.target_X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        self.target_y = np.asarray(y, dtype=float)
        self.t = len(self.target_y)

    # -- potentials --

    def stage_samples(self, node: TreeNode, stage: str) -> Tuple[np.ndarray, np.ndarray]:
        if stage == PRELEARN:
            return self.source_X[node.source_idx], self.source_y[node.source_idx]
        return self.target_X[node.target_idx], self.target_y[node.target_idx]

    def node_potential(self, node: TreeNode, stage: str) -> float:
        if stage == PRELEARN or self.t == 0:
            return potential_prelearn(self.source_y[node.source_idx])
        src_means = {}
        if len(node.source_idx):
            tasks = self.source_task[node.source_idx]
            vals = self.source_y[node.source_idx]
            for k in np.unique(tasks):
                src_means[int(k)] = float(vals[tasks == k].mean())
        weights = local_weights(list(src_means), self.global_order, self.config.similarity)
        tgt = None
        if len(node.target_idx):
            tgt = float(self.target_y[node.target_idx].mean())
            if self.config.center_target:
                tgt -= float(self.target_y.mean())
        return potential(src_means, weights, tgt, self.config.gamma, self.t)

    def update_all_potentials(self, stage: str = OPTIMIZE) -> None:
        for node in self.nodes():
            node.potential = self.node_potential(node, stage)

    def root_weights(self) -> Dict[int, float]:
        """Weights of all tasks present anywhere, ranked by the global order."""
        present = sorted(set(int(k) for k in self.source_task))
        return local_weights(present, self.global_order, self.config.similarity)

    # -- selection --

    def ucb(self, node: TreeNode) -> float:
        if node.parent is None:
            raise ValueError("the root is never scored")
        return ucb_score(node.potential, node.n_visits, node.parent.n_visits,
                         self.config.cp / self.value_scale, self.config.literal_ucb)

    def select_leaf(self) -> TreeNode:
        node = self.root
        while not node.is_leaf:
            node = node.left if self.ucb(node.left) >= self.ucb(node.right) else node.right
        return node

    # -- expansion --

    def _plan_split(self, node: TreeNode, stage: str, seed: int) -> Optional[Classifier]:
        X, y = self.stage_samples(node, stage)
        if len(y) <= self.config.theta:
            return None
        feats = np.column_stack([X, y]) if self.config.cluster_features == "xy" else X
        try:
            labels, _ = kmeans_two(feats, seed=seed)
        except NotClusterable:
            return None
        good, _ = label_good_bad(y, labels)
        target = (labels == good).astype(int)
        try:
            clf = fit_classifier(X, target, kind=self.config.classifier, good_label=1)
        except ValueError:
            return None
        if clf.train_accuracy <= 0.5:
            return None
        side = clf.is_good(X)
        if side.all() or not side.any():
            return None
        return clf

    def is_splitable(self, node: TreeNode, stage: str, seed: int = 0) -> bool:
        return self._plan_split(node, stage, seed) is not None

    def _attach(self, node: TreeNode, clf: Classifier, stage: str) -> Tuple[TreeNode, TreeNode]:
        gs = clf.is_good(self.source_X[node.source_idx]) if len(node.source_idx) else np.zeros(0, bool)
        gt = clf.is_good(self.target_X[node.target_idx]) if len(node.target_idx) else np.zeros(0, bool)
        left = self._new_node(node.path.extend(clf, "good"), node.source_idx[gs], node.target_idx[gt], node)
        right = self._new_node(node.path.extend(clf, "bad"), node.source_idx[~gs], node.target_idx[~gt], node)
        node.classifier, node.left, node.right = clf, left, right
        left.potential = self.node_potential(left, stage)
        right.potential = self.node_potential(right, stage)
        return left, right

    def expand(self, node: TreeNode, stage: str, rng: np.random.Generator):
        """Split a leaf in two; returns ``(left, right)`` or None if not splitable.

        The classifier is trained on the stage's samples (source samples while
        pre-learning, target samples afterwards) but routes every sample.  If
        the routed potentials come out with the bad side ahead, the sides are
        swapped so the left child always holds the larger potential.
        """
        if not node.is_leaf:
            raise ValueError("only leaves can be expanded")
        clf = self._plan_split(node, stage, int(rng.integers(2**31 - 1)))
        if clf is None:
            return None
        left, right = self._attach(node, clf, stage)
        if left.potential < right.potential:
            self._delete_subtree(node)
            left, right = self._attach(node, clf.flipped(), stage)
        return left, right

    def _expand_recursive(self, node: TreeNode, stage: str, rng: np.random.Generator) -> int:
        count, stack = 0, [node]
        while stack:
            cur = stack.pop()
            kids = self.expand(cur, stage, rng)
            if kids is not None:
                count += 1
                stack.extend(reversed(kids))
        return count

    def _delete_subtree(self, node: TreeNode) -> None:
        # pools of an internal node already equal the union of its subtree
        node.left = node.right = node.classifier = None

    # -- target-sample flow --

    def add_target(self, x, y: float) -> int:
        """Append a target sample to the store; returns its index."""
        self.target_X = np.vstack([self.target_X, np.asarray(x, dtype=float).reshape(1, -1)])
        self.target_y = np.append(self.target_y, float(y))
        return len(self.target_y) - 1

    def backpropagate(self, leaf: TreeNode, index: int) -> List[TreeNode]:
        """Record target sample ``index`` in ``leaf`` and every ancestor."""
        touched = []
        for node in leaf.ancestors():
            node.target_idx = np.append(node.target_idx, index)
            touched.append(node)
        return touched

    def descend(self, node: TreeNode, x) -> TreeNode:
        """Follow the classifiers from ``node`` down to the leaf containing ``x``."""
        x = np.asarray(x, dtype=float).reshape(1, -1)
        while not node.is_leaf:
            node = node.left if bool(node.classifier.is_good(x)[0]) else node.right
        return node

    # -- reconstruction --

    def treeify(self, stage: str, rng: np.random.Generator) -> int:
        """Delete every subtree whose right child beats its left child, then
        re-expand the affected nodes while they stay splitable.

        Returns the number of deleted subtrees.
        """
        queue, rebuild = deque([self.root]), []
        while queue:
            node = queue.popleft()
            if node.is_leaf:
                continue
            if node.left.potential < node.right.potential:
                self._delete_subtree(node)
                rebuild.append(node)
            else:
                queue.append(node.left)
                queue.append(node.right)
        for node in rebuild:
            self._expand_recursive(node, stage, rng)
        return len(rebuild)

    # -- diagnostics --

    def check_invariants(self, atol: float = 0.0) -> List[str]:
        """Return a list of violated structural invariants (empty if none)."""
        problems = []
        leaves = self.leaves()
        n_src = sum(len(l.source_idx) for l in leaves)
        n_tgt = sum(len(l.target_idx) for l in leaves)
        if n_src != len(self.root.source_idx) or n_tgt != len(self.root.target_idx):
            problems.append("sample conservation: leaves do not add up to the root")
        if len(self.root.target_idx) != len(self.target_y) or len(self.root.source_idx) != len(self.source_y):
            problems.append("sample conservation: root does not hold every sample")
        for node in self.nodes():
            if node.is_leaf:
                if node.classifier is not None or node.right is not None:
                    problems.append(f"node {node.id}: leaf with classifier or child")
                continue
            for attr in ("source_idx", "target_idx"):
                parent = np.sort(getattr(node, attr))
                kids = np.sort(np.concatenate([getattr(node.left, attr), getattr(node.right, attr)]))
                if not np.array_equal(parent, kids):
                    problems.append(f"node {node.id}: children do not partition {attr}")
            if node.left.potential < node.right.potential - atol:
                problems.append(f"node {node.id}: left potential {node.left.potential} "
                                f"< right potential {node.right.potential}")
            (lc, ls), (rc, rs) = node.left.path.steps[-1], node.right.path.steps[-1]
            if not (lc is node.classifier and rc is node.classifier and ls == "good" and rs == "bad"):
                problems.append(f"node {node.id}: child paths are not complementary")
        return problems

    def signature(self):
        """Id-free structural fingerprint, used to compare trees."""

        def sig(node):
            clf = None
            if node.classifier is not None:
                c = node.classifier
                clf = (tuple(np.round(c.weights, 12)), round(c.bias, 12), c.good_side)
            kids = None if node.is_leaf else (sig(node.left), sig(node.right))
            return (tuple(np.sort(node.source_idx)), tuple(np.sort(node.target_idx)),
                    float(node.potential), clf, kids)

        return sig(self.root)

    def snapshot(self) -> dict:
        out = []
        for node in self.nodes():
            out.append({
                "id": node.id,
                "parent": None if node.parent is None else node.parent.id,
                "left": None if node.is_leaf else node.left.id,
                "right": None if node.is_leaf else node.right.id,
                "depth": node.depth,
                "potential": float(node.potential),
                "n_visits": node.n_visits,
                "n_source": int(len(node.source_idx)),
                "n_target": int(len(node.target_idx)),
                "classifier": None if node.classifier is None else node.classifier.to_dict(),
            })
        return {"t": self.t, "n_tasks": self.n_tasks, "nodes": out}


def prelearn(sources: Sequence[TaskDataset], config: Optional[TreeConfig] = None,
             rng: Optional[np.random.Generator] = None, dim: Optional[int] = None,
             normalize_objectives: bool = True) -> PartitionTree:
    """Build the initial tree from source data alone."""
    sources = [s for s in sources]
    if dim is None:
        dims = [s.dim for s in sources if len(s)]
        if not dims:
            raise ValueError("cannot infer dimension without data; pass dim")
        dim = dims[0]
    rng = rng if rng is not None else np.random.default_rng(0)
    tree = PartitionTree(dim, [s for s in sources if len(s)], config, normalize_objectives)
    tree.root.potential = tree.node_potential(tree.root, PRELEARN)
    if len(tree.source_y):
        tree._expand_recursive(tree.root, PRELEARN, rng)
    return tree
