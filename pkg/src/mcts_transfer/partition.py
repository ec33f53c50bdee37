"""Space division: two-way k-means, good/bad labelling, linear boundaries and
regions built from chains of boundary tests."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

LOGISTIC = "logistic_regression"
LINEAR_SVM = "linear_svm"

N_DRAWS = 10_000
N_ROUNDS = 3
N_FALLBACK = 10


class NotClusterable(ValueError):
    """All feature vectors coincide, so no two-way split exists."""


def kmeans_two(features, seed: int = 0, max_iter: int = 100) -> Tuple[np.ndarray, np.ndarray]:
    """Two-cluster Lloyd iterations from k-means++ seeding.

    Returns ``(labels, centroids)`` with labels in {0, 1}; both clusters are
    non-empty.  Raises :class:`NotClusterable` when fewer than two distinct
    feature vectors are given.
    """
    F = np.asarray(features, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    if len(F) < 2 or len(np.unique(F, axis=0)) < 2:
        raise NotClusterable("need at least two distinct feature vectors")
    rng = np.random.default_rng(seed)

    first = int(rng.integers(len(F)))
    d2 = np.sum((F - F[first]) ** 2, axis=1)
    second = int(rng.choice(len(F), p=d2 / d2.sum()))
    centroids = np.stack([F[first], F[second]])

    labels = None
    for _ in range(max_iter):
        dist = np.sum((F[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        new = np.argmin(dist, axis=1)
        for k in (0, 1):
            if not np.any(new == k):
                # reseed the emptied cluster with the point farthest from the other centroid
                far = int(np.argmax(dist[:, 1 - k]))
                new[far] = k
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        centroids = np.stack([F[labels == k].mean(axis=0) for k in (0, 1)])
    return labels.astype(int), centroids


def label_good_bad(y, labels) -> Tuple[int, int]:
    """Return ``(good_label, bad_label)``: the cluster with the larger mean
    objective is good, ties go to the cluster holding the single best sample."""
    y = np.asarray(y, dtype=float)
    labels = np.asarray(labels)
    m0, m1 = y[labels == 0].mean(), y[labels == 1].mean()
    if m0 > m1:
        return 0, 1
    if m1 > m0:
        return 1, 0
    best = int(labels[int(np.argmax(y))])
    return best, 1 - best


@dataclass
class Classifier:
    """Linear boundary ``w.x + b``; points with score >= 0 are class 1."""

    kind: str
    weights: np.ndarray
    bias: float
    good_side: str = "positive"
    train_accuracy: float = float("nan")

    def score(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return X @ self.weights + self.bias

    def predict(self, X) -> np.ndarray:
        return (self.score(X) >= 0).astype(int)

    def is_good(self, X) -> np.ndarray:
        positive = self.score(X) >= 0
        return positive if self.good_side == "positive" else ~positive

    def flipped(self) -> "Classifier":
        side = "negative" if self.good_side == "positive" else "positive"
        return Classifier(self.kind, self.weights, self.bias, side, self.train_accuracy)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "weights": [float(v) for v in self.weights],
            "bias": float(self.bias),
            "good_side": self.good_side,
            "train_accuracy": float(self.train_accuracy),
        }


def _standardize(X):
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd < 1e-12] = 1.0
    return (X - mu) / sd, mu, sd


def _fit_logistic(Z, t, l2=1e-4, n_iter=500, lr=1.0):
    n, d = Z.shape
    w = np.zeros(d)
    b = 0.0
    for _ in range(n_iter):
        s = np.clip(Z @ w + b, -500, 500)
        p = 1.0 / (1.0 + np.exp(-s))
        r = t - p
        gw = Z.T @ r / n - l2 * w
        gb = r.mean()
        w += lr * gw
        b += lr * gb
    return w, b


def _fit_linear_svm(Z, t, l2=1e-4, n_iter=500, lr=0.1):
    n, d = Z.shape
    sgn = 2.0 * t - 1.0
    w = np.zeros(d)
    b = 0.0
    for k in range(n_iter):
        margin = sgn * (Z @ w + b)
        act = margin < 1
        gw = l2 * w - (sgn[act, None] * Z[act]).sum(axis=0) / n
        gb = -sgn[act].sum() / n
        step = lr / np.sqrt(k + 1.0)
        w -= step * gw
        b -= step * gb
    return w, b


def fit_classifier(features, labels, kind: str = LOGISTIC, good_label: int = 1) -> Classifier:
    """Fit a linear boundary separating ``labels == 1`` from ``labels == 0``.

    Parameters
    ----------
    features : (n, d) array
    labels : (n,) binary array
    kind : ``"logistic_regression"`` (gradient ascent on the L2-regularised
        log-likelihood, zero init) or ``"linear_svm"`` (hinge-loss subgradient).
    good_label : which label is the good cluster; sets ``good_side``.

    The fit happens in standardised coordinates and is folded back, so the
    returned weights act on the raw features.  Imperfect fits are returned
    as-is; ``train_accuracy`` records how well the labels were reproduced.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    t = np.asarray(labels).astype(float)
    if not (np.any(t == 1) and np.any(t == 0)):
        raise ValueError("both classes must be present")
    Z, mu, sd = _standardize(X)
    if kind == LOGISTIC:
        wz, bz = _fit_logistic(Z, t)
    elif kind == LINEAR_SVM:
        wz, bz = _fit_linear_svm(Z, t)
    else:
        raise ValueError(f"unknown classifier kind {kind!r}")
    w = wz / sd
    b = float(bz - np.dot(wz, mu / sd))
    clf = Classifier(kind, w, b, "positive" if good_label == 1 else "negative")
    clf.train_accuracy = float(np.mean(clf.predict(X) == t))
    return clf


@dataclass
class RegionPath:
    """Conjunction of ``(classifier, side)`` tests; empty means the whole cube."""

    steps: List[Tuple[Classifier, str]] = field(default_factory=list)

    def extend(self, clf: Classifier, side: str) -> "RegionPath":
        if side not in ("good", "bad"):
            raise ValueError("side must be 'good' or 'bad'")
        return RegionPath(self.steps + [(clf, side)])

    def __len__(self) -> int:
        return len(self.steps)

    def violations(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        count = np.zeros(len(X), dtype=int)
        for clf, side in self.steps:
            ok = clf.is_good(X)
            if side == "bad":
                ok = ~ok
            count += ~ok
        return count

    def contains(self, X) -> np.ndarray:
        return self.violations(X) == 0

    def to_list(self) -> list:
        return [{"classifier": clf.to_dict(), "side": side} for clf, side in self.steps]


def region_contains(path: RegionPath, x) -> bool:
    return bool(path.contains(np.asarray(x, dtype=float).reshape(1, -1))[0])


def sample_in_region(dim: int, path, rng: np.random.Generator,
                     n_draws: int = N_DRAWS, n_rounds: int = N_ROUNDS) -> np.ndarray:
    """Rejection-sample uniform points of the unit cube inside ``path``.

    Rounds of ``n_draws`` uniform points are filtered until one round keeps
    something.  If every round comes back empty, the ``N_FALLBACK`` draws
    with the fewest violated tests are returned instead.

    ``path`` may be a :class:`RegionPath` or any object with a
    ``violations`` method.
    """
    best_X, best_v = None, None
    for _ in range(n_rounds):
        X = rng.random((n_draws, dim))
        v = path.violations(X)
        keep = v == 0
        if keep.any():
            return X[keep]
        if best_X is None:
            best_X, best_v = X, v
        else:
            best_X, best_v = np.vstack([best_X, X]), np.concatenate([best_v, v])
    order = np.argsort(best_v, kind="stable")[:N_FALLBACK]
    return best_X[order]
