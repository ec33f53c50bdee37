"""Synthetic objectives, seeded function families and offline source data."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .core import SOURCE, SearchDomain, TaskDataset, denormalize_point, normalize_point

MIN = "min"
MAX = "max"


def sphere(z: np.ndarray) -> float:
    return float(np.sum(z * z))


def rastrigin(z: np.ndarray) -> float:
    return float(10.0 * z.size + np.sum(z * z - 10.0 * np.cos(2 * np.pi * z)))


def rosenbrock(z: np.ndarray) -> float:
    return float(np.sum(100.0 * (z[1:] - z[:-1] ** 2) ** 2 + (z[:-1] - 1.0) ** 2))


def griewank_rosenbrock(z: np.ndarray) -> float:
    s = 100.0 * (z[:-1] ** 2 - z[1:]) ** 2 + (z[:-1] - 1.0) ** 2
    return float(10.0 / (z.size - 1) * np.sum(s / 4000.0 - np.cos(s)) + 10.0)


LUNACEK_MU0 = 2.5


def lunacek(z: np.ndarray) -> float:
    d = z.size
    s = 1.0 - 1.0 / (2.0 * math.sqrt(d + 20.0) - 8.2)
    mu1 = -math.sqrt((LUNACEK_MU0 ** 2 - 1.0) / s)
    a = np.sum((z - LUNACEK_MU0) ** 2)
    b = d + s * np.sum((z - mu1) ** 2)
    return float(min(a, b) + 10.0 * (d - np.sum(np.cos(2 * np.pi * (z - LUNACEK_MU0)))))


def sharp_ridge(z: np.ndarray) -> float:
    return float(z[0] ** 2 + 100.0 * math.sqrt(np.sum(z[1:] ** 2)))


# base function, location of its optimum in z-space (as a function of dim)
_STANDARD = {
    "rastrigin": (rastrigin, lambda d: np.zeros(d)),
    "rosenbrock": (rosenbrock, lambda d: np.ones(d)),
    "griewank_rosenbrock": (griewank_rosenbrock, lambda d: np.ones(d)),
    "lunacek": (lunacek, lambda d: np.full(d, LUNACEK_MU0)),
    "sharp_ridge": (sharp_ridge, lambda d: np.zeros(d)),
}
STANDARD_NAMES = tuple(_STANDARD)


@dataclass
class BenchmarkProblem:
    """``f(x) = base(z_opt + R (x - x_opt))`` on ``domain`` (minimisation).

    ``x_opt`` is the optimum location in original coordinates, ``rotation``
    an orthogonal matrix (identity when unrotated).
    """

    name: str
    domain: SearchDomain
    base: Callable[[np.ndarray], float]
    z_opt: np.ndarray
    x_opt: np.ndarray
    rotation: Optional[np.ndarray] = None
    sense: str = MIN
    params: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def f_opt(self) -> float:
        return self.base(np.asarray(self.z_opt, dtype=float))

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        d = x - self.x_opt
        if self.rotation is not None:
            d = self.rotation @ d
        return self.base(self.z_opt + d)

    __call__ = evaluate

    def maximization_objective(self) -> Callable[[np.ndarray], float]:
        """Objective in the library's larger-is-better convention."""
        if self.sense == MAX:
            return self.evaluate
        return lambda x: -self.evaluate(x)

    def regret(self, value: float) -> float:
        """Simple regret of an objective value given in the problem's own sense."""
        return value - self.f_opt if self.sense == MIN else self.f_opt - value

    def to_dict(self) -> dict:
        return {"name": self.name, **self.params}


def make_sphere(x_star, domain: Optional[SearchDomain] = None) -> BenchmarkProblem:
    x_star = np.asarray(x_star, dtype=float)
    if domain is None:
        domain = SearchDomain.cube(x_star.size, -10.0, 10.0)
    if np.any(x_star < domain.lower) or np.any(x_star > domain.upper):
        raise ValueError("optimum must lie inside the domain")
    params = {"x_star": x_star.tolist(), "lower": domain.lower.tolist(), "upper": domain.upper.tolist()}
    return BenchmarkProblem("sphere", domain, sphere, np.zeros(x_star.size), x_star, params=params)


def make_sphere_pair(x_star, domain: Optional[SearchDomain] = None):
    """Similar sphere (optimum at ``x_star``) and its dissimilar twin, whose
    optimum is the box reflection ``1 - u`` of ``x_star`` in unit coordinates."""
    similar = make_sphere(x_star, domain)
    u = normalize_point(similar.x_opt, similar.domain)
    dissimilar = make_sphere(denormalize_point(1.0 - u, similar.domain), similar.domain)
    return similar, dissimilar


def random_rotation(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix via QR with sign correction."""
    Q, R = np.linalg.qr(rng.standard_normal((dim, dim)))
    return Q * np.sign(np.diag(R))


def make_standard(name: str, dim: int, shift=None, seed: Optional[int] = None,
                  domain: Optional[SearchDomain] = None) -> BenchmarkProblem:
    """Standard test function evaluated at ``x - shift``.

    ``seed`` (if given) adds a seeded rotation about the optimum.
    """
    if name not in _STANDARD:
        raise ValueError(f"unknown benchmark {name!r}; choose from {STANDARD_NAMES}")
    if dim < 2:
        raise ValueError("dim must be >= 2")
    base, zopt = _STANDARD[name]
    z_opt = zopt(dim)
    shift = np.zeros(dim) if shift is None else np.asarray(shift, dtype=float)
    rot = None if seed is None else random_rotation(dim, np.random.default_rng(seed))
    domain = domain or SearchDomain.cube(dim, -5.0, 5.0)
    params = {"dim": dim, "shift": shift.tolist(), "seed": seed}
    return BenchmarkProblem(name, domain, base, z_opt, shift + z_opt, rot, params=params)


def make_family(base: BenchmarkProblem, seed: int, shift_fraction: float = 0.8) -> BenchmarkProblem:
    """Seeded family member: optimum moved uniformly inside the central
    ``shift_fraction`` of the box, plus a random rotation about it."""
    rng = np.random.default_rng(seed)
    lo = 0.5 - shift_fraction / 2
    u = rng.uniform(lo, 1.0 - lo, size=base.dim)
    x_opt = denormalize_point(u, base.domain)
    rot = random_rotation(base.dim, rng)
    params = dict(base.params)
    params["family_seed"] = seed
    return replace(base, x_opt=x_opt, rotation=rot, params=params)


def build_problem(spec: dict) -> BenchmarkProblem:
    """Problem from a dict such as ``{"name": "sphere", "x_star": [4, 4]}``.

    Sphere accepts ``reflect = true`` for the dissimilar twin; any problem
    accepts ``family_seed`` to draw a family member.
    """
    spec = dict(spec)
    name = spec.pop("name")
    family_seed = spec.pop("family_seed", None)
    lower, upper = spec.pop("lower", None), spec.pop("upper", None)
    domain = SearchDomain(lower, upper) if lower is not None else None
    if name == "sphere":
        prob = make_sphere(spec["x_star"], domain)
        if spec.get("reflect", False):
            prob = make_sphere_pair(spec["x_star"], domain)[1]
    else:
        prob = make_standard(name, int(spec["dim"]), spec.get("shift"), spec.get("seed"), domain)
    if family_seed is not None:
        prob = make_family(prob, int(family_seed))
    return prob


# --- offline data --------------------------------------------------------------

SAMPLERS = ("random", "hill_climb", "gp_ei")


def _hill_climb(objective, domain, n, rng, sigma=0.1):
    X = np.zeros((n, domain.dim))
    y = np.zeros(n)
    cur = rng.random(domain.dim)
    cur_y = objective(denormalize_point(cur, domain))
    X[0], y[0] = cur, cur_y
    for i in range(1, n):
        cand = np.clip(cur + sigma * rng.standard_normal(domain.dim), 0.0, 1.0)
        cy = objective(denormalize_point(cand, domain))
        X[i], y[i] = cand, cy
        if cy > cur_y:
            cur, cur_y = cand, cy
    return X, y


def generate_source_data(problem: BenchmarkProblem, sampler: str, n: int, seed: int,
                         task_id: Optional[str] = None) -> TaskDataset:
    """Evaluate ``n`` points chosen by ``sampler``; values in maximisation sense."""
    if n < 1:
        raise ValueError("n must be positive")
    objective = problem.maximization_objective()
    rng = np.random.default_rng(seed)
    dom = problem.domain
    task_id = task_id or f"{problem.name}-{sampler}-{seed}"
    if sampler == "random":
        X = rng.random((n, dom.dim))
        y = np.array([objective(denormalize_point(x, dom)) for x in X])
    elif sampler == "hill_climb":
        X, y = _hill_climb(objective, dom, n, rng)
    elif sampler == "gp_ei":
        from .optimizer import OptimizerConfig, run_gp_ei

        trace = run_gp_ei(objective, dom, OptimizerConfig(method="gp_ei", eval_budget=n, seed=seed))
        X = normalize_point(np.array([r["x"] for r in trace.records]), dom)
        y = np.array([r["y"] for r in trace.records])
    else:
        raise ValueError(f"unknown sampler {sampler!r}; choose from {SAMPLERS}")
    return TaskDataset(task_id, X, y, role=SOURCE)
