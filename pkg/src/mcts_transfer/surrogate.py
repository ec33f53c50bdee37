"""Gaussian-process regression (Matern-5/2) and expected improvement."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.special import ndtr

from .partition import sample_in_region

SQRT5 = math.sqrt(5.0)
LOG_2PI = math.log(2 * math.pi)

DEFAULT_SIGNAL = 1.0
DEFAULT_LENGTH = 1.0
DEFAULT_NOISE = 1e-6

# log-space boxes for (signal variance, length scale, noise variance)
_BOUNDS = np.log([[1e-3, 1e3], [1e-3, 1e3], [1e-8, 1e-1]])
N_RESTARTS = 5


def matern52(A, B, signal_var: float, length_scale: float) -> np.ndarray:
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    d2 = np.sum(A * A, 1)[:, None] + np.sum(B * B, 1)[None, :] - 2.0 * A @ B.T
    r = np.sqrt(np.maximum(d2, 0.0)) / length_scale
    return signal_var * (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * np.exp(-SQRT5 * r)


def _matern_from_dist(D, signal_var, length_scale):
    r = D / length_scale
    return signal_var * (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * np.exp(-SQRT5 * r)


def _pairwise(X):
    d2 = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=2)
    return np.sqrt(d2)


def _factor(K, noise):
    """Cholesky of ``K + (noise + jitter) I`` with jitter doubled from 1e-10."""
    n = len(K)
    jitter = 0.0
    while True:
        try:
            L = cholesky(K + (noise + jitter) * np.eye(n), lower=True, check_finite=False)
            return L, jitter
        except np.linalg.LinAlgError:
            jitter = 1e-10 if jitter == 0.0 else jitter * 2.0
            if jitter > 1e6:
                raise


def _neg_lml(theta, D, y):
    sv, ls, nv = np.exp(theta)
    K = _matern_from_dist(D, sv, ls)
    try:
        L = cholesky(K + nv * np.eye(len(y)), lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        return 1e25
    alpha = cho_solve((L, True), y, check_finite=False)
    return 0.5 * y @ alpha + np.log(np.diag(L)).sum() + 0.5 * len(y) * LOG_2PI


@dataclass
class GPModel:
    train_x: np.ndarray
    train_y: np.ndarray  # standardised targets
    y_mean: float
    y_scale: float
    signal_var: float
    length_scale: float
    noise: float
    jitter: float
    chol: np.ndarray
    alpha: np.ndarray

    @property
    def effective_noise(self) -> float:
        return self.noise + self.jitter

    def log_marginal_likelihood(self) -> float:
        """LML of the standardised targets under the fitted hyper-parameters."""
        y = self.train_y
        return float(-0.5 * y @ self.alpha - np.log(np.diag(self.chol)).sum() - 0.5 * len(y) * LOG_2PI)

    def predict(self, X) -> Tuple[np.ndarray, np.ndarray]:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Ks = matern52(X, self.train_x, self.signal_var, self.length_scale)
        mu = Ks @ self.alpha
        v = solve_triangular(self.chol, Ks.T, lower=True, check_finite=False)
        var = self.signal_var - np.sum(v * v, axis=0)
        std = np.sqrt(np.maximum(var, 0.0))
        return mu * self.y_scale + self.y_mean, std * self.y_scale


def _dedupe(X, y):
    """Keep one row per distinct x, retaining the best (largest) y."""
    order = np.argsort(-y, kind="stable")
    _, first = np.unique(X[order], axis=0, return_index=True)
    keep = np.sort(order[first])
    return X[keep], y[keep]


def _build(X, ys, y_mean, y_scale, sv, ls, nv) -> GPModel:
    K = matern52(X, X, sv, ls)
    L, jitter = _factor(K, nv)
    alpha = cho_solve((L, True), ys, check_finite=False)
    return GPModel(X, ys, y_mean, y_scale, sv, ls, nv, jitter, L, alpha)


def fit_gp(X, y, optimize: bool = True, params: Optional[Tuple[float, float, float]] = None,
           n_restarts: int = N_RESTARTS, seed: int = 0) -> GPModel:
    """Fit a Matern-5/2 GP to ``(X, y)``.

    Targets are standardised first.  Unless ``params`` =
    ``(signal_var, length_scale, noise_var)`` is given, the three
    hyper-parameters are chosen by maximising the log marginal likelihood
    with bounded Nelder-Mead in log space: one start at the defaults plus
    ``n_restarts - 1`` uniform starts inside the box.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if len(y) == 0:
        raise ValueError("need at least one sample")
    X, y = _dedupe(X, y)
    y_mean = float(y.mean())
    y_scale = float(y.std())
    if y_scale < 1e-12:
        y_scale = 1.0
    ys = (y - y_mean) / y_scale

    if params is not None:
        return _build(X, ys, y_mean, y_scale, *params)
    if len(y) < 2 or not optimize:
        return _build(X, ys, y_mean, y_scale, DEFAULT_SIGNAL, DEFAULT_LENGTH, DEFAULT_NOISE)

    D = _pairwise(X)
    rng = np.random.default_rng(seed)
    starts = [np.log([DEFAULT_SIGNAL, DEFAULT_LENGTH, DEFAULT_NOISE])]
    for _ in range(n_restarts - 1):
        starts.append(rng.uniform(_BOUNDS[:, 0], _BOUNDS[:, 1]))
    best_theta, best_val = starts[0], _neg_lml(starts[0], D, ys)
    for th0 in starts:
        res = minimize(_neg_lml, th0, args=(D, ys), method="Nelder-Mead", bounds=_BOUNDS,
                       options={"maxfev": 200, "xatol": 1e-3, "fatol": 1e-6})
        if res.fun < best_val:
            best_theta, best_val = res.x, float(res.fun)
    sv, ls, nv = np.exp(best_theta)
    return _build(X, ys, y_mean, y_scale, float(sv), float(ls), float(nv))


def gp_predict(model: GPModel, x) -> Tuple[float, float]:
    mu, sd = model.predict(np.asarray(x, dtype=float).reshape(1, -1))
    return float(mu[0]), float(sd[0])


def expected_improvement(mean, std, y_best: float):
    """Closed-form EI for maximisation (no exploration offset).

    Works element-wise on arrays; zero ``std`` falls back to
    ``max(0, mean - y_best)``.
    """
    scalar = np.ndim(mean) == 0 and np.ndim(std) == 0
    mean, std = np.broadcast_arrays(np.atleast_1d(np.asarray(mean, dtype=float)),
                                    np.atleast_1d(np.asarray(std, dtype=float)))
    imp = mean - y_best
    out = np.maximum(imp, 0.0)
    pos = std > 0
    if np.any(pos):
        s = std[pos]
        z = imp[pos] / s
        pdf = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
        out[pos] = np.maximum(imp[pos] * ndtr(z) + s * pdf, 0.0)
    return float(out[0]) if scalar else out


def propose_candidate(model: GPModel, dim: int, path, y_best: float, rng: np.random.Generator,
                      candidates: Optional[np.ndarray] = None) -> np.ndarray:
    """Arg-max of EI over in-region candidates (first occurrence wins ties)."""
    if candidates is None:
        candidates = sample_in_region(dim, path, rng)
    mu, sd = model.predict(candidates)
    ei = expected_improvement(mu, sd, y_best)
    return candidates[int(np.argmax(ei))].copy()
