import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcts_transfer.bench import (
    STANDARD_NAMES,
    build_problem,
    generate_source_data,
    make_family,
    make_sphere,
    make_sphere_pair,
    make_standard,
)
from mcts_transfer.core import SearchDomain, normalize_point, validate_dataset


def rastrigin_literal(x):
    # 10 d + sum_i (x_i^2 - 10 cos(2 pi x_i))
    total = 10.0 * len(x)
    for xi in x:
        total += xi * xi - 10.0 * math.cos(2.0 * math.pi * xi)
    return total


def test_sphere_examples():
    p = make_sphere((4, 4))
    assert p((4, 4)) == 0
    assert p((5, 5)) == 2
    assert p((4, 5)) == 1
    assert p.maximization_objective()(np.array([5.0, 5.0])) == -2
    with pytest.raises(ValueError):
        make_sphere((11, 0))


def test_sphere_pair_reflects():
    sim, dis = make_sphere_pair((4, 4))
    u = normalize_point(sim.x_opt, sim.domain)
    assert np.allclose(normalize_point(dis.x_opt, dis.domain), 1 - u)
    assert np.allclose(dis.x_opt, [-4, -4])


def test_rastrigin_and_rosenbrock_optima():
    assert make_standard("rastrigin", 2)(np.zeros(2)) == 0
    assert make_standard("rosenbrock", 2)(np.ones(2)) == 0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=6))
def test_rastrigin_literal(x):
    p = make_standard("rastrigin", len(x))
    assert abs(p(np.array(x)) - rastrigin_literal(x)) < 1e-9


def test_rastrigin_spot_value():
    # (0.5, 0): 0.25 - 10 cos(pi) + 0 - 10 cos(0) + 20 = 20.25
    assert abs(make_standard("rastrigin", 2)(np.array([0.5, 0.0])) - 20.25) < 1e-12


@pytest.mark.parametrize("name", STANDARD_NAMES)
def test_known_optimum(name):
    p = make_standard(name, 3, shift=[0.5, -0.2, 0.1], seed=4)
    assert abs(p(p.x_opt) - p.f_opt) < 1e-9
    rng = np.random.default_rng(0)
    pts = p.domain.lower + rng.random((200, 3)) * p.domain.width
    assert min(p(x) for x in pts) >= p.f_opt - 1e-9


def test_standard_rejects():
    with pytest.raises(ValueError):
        make_standard("ackley", 2)
    with pytest.raises(ValueError):
        make_standard("rastrigin", 1)


def test_family_determinism_and_optimum():
    base = make_standard("rosenbrock", 3)
    a, b = make_family(base, 7), make_family(base, 7)
    assert np.array_equal(a.x_opt, b.x_opt) and np.array_equal(a.rotation, b.rotation)
    assert abs(a(a.x_opt) - base.f_opt) < 1e-9
    u = normalize_point(a.x_opt, a.domain)
    assert np.all((u >= 0.1) & (u <= 0.9))
    assert np.allclose(a.rotation @ a.rotation.T, np.eye(3), atol=1e-12)


def test_family_seeds_differ():
    base = make_standard("rastrigin", 2)
    opts = np.array([make_family(base, s).x_opt for s in range(100)])
    d = np.linalg.norm(opts[:, None] - opts[None], axis=2)
    assert np.all(d[np.triu_indices(100, 1)] > 1e-6)


def test_build_problem():
    assert build_problem({"name": "sphere", "x_star": [1, 2]})((1, 2)) == 0
    p = build_problem({"name": "rastrigin", "dim": 2, "family_seed": 3})
    assert abs(p(p.x_opt)) < 1e-9
    dis = build_problem({"name": "sphere", "x_star": [4, 4], "reflect": True})
    assert np.allclose(dis.x_opt, [-4, -4])


@pytest.mark.parametrize("sampler", ["random", "hill_climb"])
def test_source_data(sampler):
    p = make_sphere((1, 1), SearchDomain.cube(2, -5, 5))
    d = generate_source_data(p, sampler, 100, seed=3)
    assert len(d) == 100
    assert validate_dataset(d, SearchDomain.cube(2, 0, 1)).ok
    again = generate_source_data(p, sampler, 100, seed=3)
    assert np.array_equal(d.X, again.X) and np.array_equal(d.y, again.y)


def test_hill_climb_improves():
    p = make_sphere((1, 1), SearchDomain.cube(2, -5, 5))
    d = generate_source_data(p, "hill_climb", 60, seed=0)
    f = -d.y
    assert f[-1] <= f[0]
    assert f.min() <= f[0]


def test_gp_ei_sampler_small():
    p = make_sphere((1, 1), SearchDomain.cube(2, -5, 5))
    d = generate_source_data(p, "gp_ei", 8, seed=0)
    assert len(d) == 8 and np.all((d.X >= 0) & (d.X <= 1))


def test_unknown_sampler():
    with pytest.raises(ValueError):
        generate_source_data(make_sphere((0, 0)), "grid", 5, 0)
