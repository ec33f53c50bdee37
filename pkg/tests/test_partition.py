import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcts_transfer.bench import make_sphere
from mcts_transfer.core import normalize_point
from mcts_transfer.partition import (
    LINEAR_SVM,
    LOGISTIC,
    N_DRAWS,
    NotClusterable,
    RegionPath,
    fit_classifier,
    kmeans_two,
    label_good_bad,
    region_contains,
    sample_in_region,
)


def brute_force_two_partition(F):
    """Exhaustive 2-partition minimising the within-cluster SSE."""
    n = len(F)
    best, best_labels = np.inf, None
    for bits in itertools.product((0, 1), repeat=n - 1):
        lab = np.array((0,) + bits)
        if lab.min() == lab.max():
            continue
        sse = sum(((F[lab == k] - F[lab == k].mean(0)) ** 2).sum() for k in (0, 1))
        if sse < best - 1e-12:
            best, best_labels = sse, lab
    return best_labels


def same_partition(a, b):
    return np.array_equal(a, b) or np.array_equal(a, 1 - b)


def test_kmeans_separated_pairs():
    labels, _ = kmeans_two([[0.0], [0.1], [0.9], [1.0]])
    assert labels[0] == labels[1] != labels[2] == labels[3]


def test_kmeans_identical_points():
    with pytest.raises(NotClusterable):
        kmeans_two(np.ones((3, 2)))


@pytest.mark.parametrize("seed", range(10))
def test_kmeans_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    F = np.vstack([rng.normal(0.2, 0.05, (3, 2)), rng.normal(0.8, 0.05, (3, 2))])
    labels, _ = kmeans_two(F, seed=seed)
    assert same_partition(labels, brute_force_two_partition(F))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_kmeans_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    F = np.vstack([rng.normal(0, 0.1, (5, 2)), rng.normal(1, 0.1, (5, 2))])
    perm = rng.permutation(len(F))
    a, _ = kmeans_two(F, seed=3)
    b, _ = kmeans_two(F[perm], seed=3)
    assert same_partition(a[perm], b)
    c, _ = kmeans_two(F, seed=3)
    assert np.array_equal(a, c)


def test_label_good_bad():
    assert label_good_bad([0.8, 0.8, 0.2, 0.2], [0, 0, 1, 1]) == (0, 1)
    # equal means; best single point sits in cluster 1
    assert label_good_bad([0.5, 0.5, 0.0, 1.0], [0, 0, 1, 1]) == (1, 0)


def test_label_good_bad_sphere():
    prob = make_sphere((4, 4))
    pts = np.array([[4.1, 3.9], [3.8, 4.2], [4.0, 4.1], [-9, -9], [-9, 9], [9, -9]])
    y = np.array([-prob(p) for p in pts])
    good, _ = label_good_bad(y, [0, 0, 0, 1, 1, 1])
    assert good == 0


@pytest.mark.parametrize("kind", [LOGISTIC, LINEAR_SVM])
def test_classifier_1d_separable(kind):
    clf = fit_classifier([[0.0], [1.0]], [0, 1], kind=kind)
    assert clf.train_accuracy == 1.0
    thr = -clf.bias / clf.weights[0]
    assert 0 < thr < 1


def test_classifier_xor_is_returned():
    X = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], dtype=float)
    clf = fit_classifier(X, [1, 1, 0, 0])
    assert clf.train_accuracy <= 0.75


def test_classifier_left_half_plane():
    rng = np.random.default_rng(0)
    X = rng.random((200, 2))
    lab = (X[:, 0] < 0.5).astype(int)
    clf = fit_classifier(X, lab)
    assert clf.weights[0] < 0 and abs(clf.weights[0]) > abs(clf.weights[1])
    assert clf.train_accuracy > 0.95


@pytest.mark.parametrize("kind", [LOGISTIC, LINEAR_SVM])
@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_classifier_separable_is_perfect(kind, seed):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.random((15, 2)) * 0.3, 0.7 + rng.random((15, 2)) * 0.3])
    lab = np.r_[np.zeros(15), np.ones(15)]
    assert fit_classifier(X, lab, kind=kind).train_accuracy == 1.0


def test_classifier_rejects_nonfinite():
    with pytest.raises(ValueError):
        fit_classifier([[0.0], [np.nan]], [0, 1])


def _half_plane(good_left=True):
    X = np.array([[0.0, 0.5], [1.0, 0.5]])
    return fit_classifier(X, [1, 0] if good_left else [0, 1])


def test_region_contains():
    assert region_contains(RegionPath(), [0.3, 0.9])
    clf = _half_plane()
    assert region_contains(RegionPath().extend(clf, "good"), [0.1, 0.5])
    assert not region_contains(RegionPath().extend(clf, "bad"), [0.1, 0.5])
    horiz = fit_classifier(np.array([[0.5, 0.0], [0.5, 1.0]]), [1, 0])
    path = RegionPath().extend(clf, "good").extend(horiz, "good").extend(clf, "good")
    assert region_contains(path, [0.1, 0.1])
    assert not region_contains(path, [0.1, 0.9])  # fails step 2 only


def test_children_partition_parent(rng):
    clf = _half_plane()
    X = rng.random((500, 2))
    good = RegionPath().extend(clf, "good").contains(X)
    bad = RegionPath().extend(clf, "bad").contains(X)
    assert np.all(good ^ bad)


def test_sample_empty_path(rng):
    pts = sample_in_region(2, RegionPath(), rng)
    assert pts.shape == (N_DRAWS, 2)


def test_sample_half_space_binomial(rng):
    clf = fit_classifier(np.array([[0.25, 0.5], [0.75, 0.5]]), [1, 0])
    pts = sample_in_region(2, RegionPath().extend(clf, "good"), rng)
    # boundary sits at x0 = 0.5 by symmetry
    sigma = np.sqrt(N_DRAWS * 0.25)
    assert abs(len(pts) - N_DRAWS / 2) < 4 * sigma
    assert np.all(RegionPath().extend(clf, "good").contains(pts))


def test_sample_contradictory_fallback(rng):
    clf = _half_plane()
    path = RegionPath().extend(clf, "good").extend(clf, "bad")
    pts = sample_in_region(2, path, rng)
    assert len(pts) == 10
    assert np.all(path.violations(pts) == 1)


def test_region_path_rejects_bad_side():
    with pytest.raises(ValueError):
        RegionPath().extend(_half_plane(), "left")


def test_sphere_normalized_labels():
    # sanity on the normalised coordinates used throughout
    assert np.allclose(normalize_point([4, 4], make_sphere((4, 4)).domain), 0.7)
