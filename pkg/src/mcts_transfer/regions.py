"""Box and ellipsoid search regions built from source-task optima."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .core import TaskDataset

PAD = 1e-3


def mvee(points, tol: float = 1e-6, max_iter: int = 100_000) -> Tuple[np.ndarray, np.ndarray]:
    """Minimum-volume enclosing ellipsoid by Khachiyan's algorithm with
    Wolfe-Atwood away steps (the Todd-Yildirim variant).

    Returns ``(A, c)`` with the ellipsoid ``{x : (x-c)^T A (x-c) <= 1}``.
    Iteration stops once every point's weighted leverage is within a factor
    ``1 + tol`` of ``d + 1`` (the optimality condition).  Point sets that do
    not span the space are padded with ``+-PAD`` copies along every axis
    first.  The result is rescaled at the end so every input point satisfies
    the inequality exactly.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = P.shape
    orig = P
    if n <= d or np.linalg.matrix_rank(P - P.mean(axis=0), tol=1e-9) < d:
        eye = np.eye(d) * PAD
        P = np.vstack([P] + [P + s * e for e in eye for s in (1.0, -1.0)])
        n = len(P)

    Q = np.vstack([P.T, np.ones(n)])
    u = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        X = (Q * u) @ Q.T
        M = np.einsum("ij,ji->i", Q.T, np.linalg.solve(X, Q))
        up = int(np.argmax(M))
        live = np.flatnonzero(u > 0)
        down = int(live[np.argmin(M[live])])
        grow = M[up] / (d + 1.0) - 1.0
        shrink = 1.0 - M[down] / (d + 1.0)
        if max(grow, shrink) <= tol:
            break
        j = up if grow >= shrink else down
        if j == up:
            step = (M[j] - d - 1.0) / ((d + 1.0) * (M[j] - 1.0))
        else:
            # away step, capped so the weight stops at zero
            floor = -u[j] / (1.0 - u[j])
            step = floor if M[j] <= 1.0 else max(floor, (M[j] - d - 1.0) / ((d + 1.0) * (M[j] - 1.0)))
        u = (1.0 - step) * u
        u[j] += step
        u[u < 0] = 0.0
    c = u @ P
    cov = (P.T * u) @ P - np.outer(c, c)
    A = np.linalg.inv(cov) / d
    diff = orig - c
    worst = float(np.max(np.einsum("ij,jk,ik->i", diff, A, diff)))
    if worst > 1.0:
        A = A / worst
    return A, c


def ellipsoid_membership(A, c, X) -> np.ndarray:
    diff = np.atleast_2d(X) - c
    return np.einsum("ij,jk,ik->i", diff, A, diff)


def _outside_cube(X) -> np.ndarray:
    return np.any((X < 0.0) | (X > 1.0), axis=1).astype(int)


@dataclass
class BoxRegion:
    lower: np.ndarray
    upper: np.ndarray
    kind: str = "box"

    def violations(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.sum((X < self.lower) | (X > self.upper), axis=1)

    def contains(self, X) -> np.ndarray:
        return self.violations(X) == 0

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass
class EllipsoidRegion:
    A: np.ndarray
    center: np.ndarray
    kind: str = "ellipsoid"

    def violations(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        return (ellipsoid_membership(self.A, self.center, X) > 1.0).astype(int) + _outside_cube(X)

    def contains(self, X) -> np.ndarray:
        return self.violations(X) == 0

    def to_dict(self) -> dict:
        return {"kind": self.kind, "A": self.A.tolist(), "center": self.center.tolist()}


class FullRegion:
    """The whole unit cube, expressed with the region interface."""

    kind = "full"

    def __init__(self, dim: int):
        self.dim = dim

    def violations(self, X) -> np.ndarray:
        return _outside_cube(np.atleast_2d(X))

    def contains(self, X) -> np.ndarray:
        return self.violations(X) == 0

    def to_dict(self) -> dict:
        return {"kind": self.kind, "dim": self.dim}


def source_optima(sources: Sequence[TaskDataset]) -> np.ndarray:
    if not sources or any(len(s) == 0 for s in sources):
        raise ValueError("every source dataset must be non-empty")
    return np.array([s.X[s.best_index()] for s in sources])


def derive_transfer_region(sources: Sequence[TaskDataset], kind: str):
    """Smallest box or ellipsoid (unit-cube coordinates) holding each source task's best point."""
    opt = source_optima(sources)
    if kind == "box":
        lo, hi = opt.min(axis=0), opt.max(axis=0)
        flat = (hi - lo) < 2 * PAD
        lo = np.where(flat, lo - PAD, lo)
        hi = np.where(flat, hi + PAD, hi)
        return BoxRegion(np.clip(lo, 0.0, 1.0), np.clip(hi, 0.0, 1.0))
    if kind == "ellipsoid":
        A, c = mvee(opt)
        return EllipsoidRegion(A, c)
    raise ValueError(f"unknown region kind {kind!r}")
