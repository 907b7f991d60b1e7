import math

import numpy as np
import pytest

from sbmrates.model import (
    Graph, Labelling, SbmSpec, SubmodelK, adjacency_matrix, build_mtheta, sample_fixed_design,
    sample_random_design,
)
from sbmrates.spectral import (
    ClusterResult, check_conditions, identify_half_cluster, kmeans, refine_labels, spec_theta,
    spectral_cluster, spectral_two_class, spectral_two_class_sparse,
)


def _signs(n, seed=0):
    return np.where(np.random.default_rng(seed).random(n) < 0.5, 1.0, -1.0)


def _expectation_two_class(n, theta, alpha=1.0, seed=0):
    v = _signs(n, seed)
    return alpha * (0.5 + theta * np.outer(v, v))


def _same_partition(a, b):
    pairs = set(zip(a.tolist(), b.tolist()))
    return len(pairs) == len(set(a.tolist())) == len(set(b.tolist()))


@pytest.mark.parametrize("theta", [-0.4, 0.0, 0.25])
def test_two_class_noiseless(theta):
    assert spectral_two_class(_expectation_two_class(40, theta)).theta == pytest.approx(
        theta, abs=1e-10)


def test_two_class_complete_and_empty():
    n = 12
    full = Graph(~np.eye(n, dtype=bool))
    assert spectral_two_class(full).theta == pytest.approx(0.5)
    empty = Graph(np.zeros((n, n), bool))
    r = spectral_two_class(empty)
    assert r.theta == pytest.approx(-0.5)
    assert r.eigenvalue == pytest.approx(-(n - 1) / 2)


def test_two_class_power_route_agrees():
    g, _ = sample_random_design(SbmSpec.two_class(0.15), 150, 3)
    a = spectral_two_class(g).theta
    b = spectral_two_class(g, eig_method="power").theta
    assert a == pytest.approx(b, abs=1e-9)


def test_sparse_reduces_to_dense():
    g, _ = sample_random_design(SbmSpec.two_class(0.2), 80, 1)
    assert spectral_two_class_sparse(g, 1.0).theta == spectral_two_class(g).theta


@pytest.mark.parametrize("alpha", [0.4, 0.7])
def test_sparse_noiseless_scale_equivariance(alpha):
    E = _expectation_two_class(120, 0.2, alpha)
    assert spectral_two_class_sparse(E, alpha).theta == pytest.approx(0.2, abs=1e-10)


def test_sparse_warns_below_b0():
    E = _expectation_two_class(50, 0.1, 0.05)
    with pytest.warns(RuntimeWarning):
        r = spectral_two_class_sparse(E, 0.05)
    assert "b0_violated" in r.flags


def test_permutation_invariance():
    g, _ = sample_random_design(SbmSpec.two_class(0.1), 90, 4)
    perm = np.random.default_rng(0).permutation(90)
    assert spectral_two_class(g.permuted(perm)).theta == pytest.approx(
        spectral_two_class(g).theta, abs=1e-12)


def test_clamping():
    rng = np.random.default_rng(2)
    for _ in range(5):
        g, _ = sample_random_design(SbmSpec.two_class(0.5), 20, rng)
        assert -0.5 <= spectral_two_class(g).theta <= 0.5


def test_cluster_two_cliques():
    adj = np.zeros((10, 10), bool)
    adj[:5, :5] = adj[5:, 5:] = True
    np.fill_diagonal(adj, False)
    r = spectral_cluster(Graph(adj), 2, 0)
    assert _same_partition(r.labels.assignment, np.repeat([0, 1], 5))


def test_cluster_noiseless_three_class():
    z = np.repeat([0, 1, 2], 100)
    N = np.array([[0.8, 0.2, 0.1], [0.2, 0.7, 0.3], [0.1, 0.3, 0.9]])
    r = spectral_cluster(N[np.ix_(z, z)], 3, 0)
    assert _same_partition(r.labels.assignment, z)
    assert r.mismatch_bound == 0.0


def test_cluster_single():
    g, _ = sample_random_design(SbmSpec.two_class(0.3), 30, 0)
    r = spectral_cluster(g, 1, 0)
    assert np.all(r.labels.assignment == 0)


def test_kmeans_separated_points():
    Y = np.array([[0.0], [0.1], [10.0], [10.2], [20.0]])
    labels, centers, obj, flags = kmeans(Y, 3, 0)
    assert _same_partition(labels, np.array([0, 0, 1, 1, 2]))
    assert obj == pytest.approx(0.005 + 0.02)
    assert flags == ()


def _truth_cluster(z, K):
    return ClusterResult(Labelling(z, K), np.zeros((K, K)), 0.0)


def test_refine_truth_is_fixpoint():
    z = np.repeat([0, 1], 100)
    M = np.array([[0.8, 0.2], [0.2, 0.8]])
    g = sample_fixed_design(M, Labelling(z, 2), 3)
    r = refine_labels(g, _truth_cluster(z, 2))
    assert np.array_equal(r.labels.assignment, z)
    assert r.passes == 1


def test_refine_fixes_one_mislabel():
    z = np.repeat([0, 1], 100)
    M = np.array([[0.7, 0.3], [0.3, 0.7]])  # row separation about 0.57
    g = sample_fixed_design(M, Labelling(z, 2), 8)
    wrong = z.copy()
    wrong[17] = 1
    r = refine_labels(g, _truth_cluster(wrong, 2), max_passes=1)
    assert np.array_equal(r.labels.assignment, z)


def test_refine_flags_identical_blocks():
    z = np.repeat([0, 1], 100)
    g = sample_fixed_design(np.full((2, 2), 0.5), Labelling(z, 2), 1)
    r = refine_labels(g, spectral_cluster(g, 2, 0))
    assert {"indistinguishable", "oscillation", "pass_limit"} & set(r.flags)


def _two_block_expectation(d0, d1, m=20):
    z = np.repeat([0, 1], m)
    D = np.array([[d0, 0.3], [0.3, d1]])
    return D[np.ix_(z, z)], Labelling(z, 2)


def test_half_cluster_examples():
    X, lab = _two_block_expectation(0.5, 0.9)
    assert identify_half_cluster(X, lab).index == 0
    X, lab = _two_block_expectation(0.52, 0.48)
    h = identify_half_cluster(X, lab, kappa=0.2)
    assert "ambiguous" in h.flags
    X, lab = _two_block_expectation(0.4, 0.6)
    h = identify_half_cluster(X, lab)
    assert h.index == 0 and "tie" in h.flags


def test_half_cluster_sparse_target():
    X, lab = _two_block_expectation(0.5, 0.1)
    assert identify_half_cluster(X, lab, alpha=0.2).index == 1


def _noiseless_k3(theta, n=300):
    sub = SubmodelK([0.1], [[0.9]], theta)
    z = np.repeat([0, 1, 2], n // 3)
    return sub, z, build_mtheta(sub)[np.ix_(z, z)]


def test_spec_theta_noiseless_k3():
    sub, z, E = _noiseless_k3(0.015)
    rep = check_conditions(sub, 300)
    assert rep.a1_ok and rep.a2_ok and rep.a3_ok
    assert abs(sub.theta) <= rep.T_K
    r = spec_theta(E, 3, rng=0)
    assert r.theta == pytest.approx(0.015, abs=1e-10)
    assert set(r.selected.tolist()) == set(np.flatnonzero(z < 2).tolist())


def test_spec_theta_k2_routes():
    E = _expectation_two_class(30, 0.2)
    r = spec_theta(E, 2)
    assert r.theta == pytest.approx(0.2, abs=1e-10) and "routed_two_class" in r.flags


def _staircase5_selection(theta, n, trials, strict):
    spec = SubmodelK.staircase5(theta).spec()
    hits = 0
    for s in range(trials):
        rng = np.random.default_rng(s)
        g, lab = sample_random_design(spec, n, rng)
        sel = set(spec_theta(g, 5, rng=rng).selected.tolist())
        block = set(np.flatnonzero(lab.assignment < 2).tolist())
        hits += sel == block if strict else sel <= block
    return hits / trials


def test_staircase5_selected_cluster_inside_theta_block():
    assert _staircase5_selection(0.05, 500, 200, strict=False) >= 0.95


@pytest.mark.xfail(strict=True, reason=(
    "with the staircase B the aggregated matrix has an eigenvalue near -0.041 n/5, inside "
    "the noise bulk, so the top-4 embedding cannot separate classes 3 and 4"))
def test_staircase5_selects_whole_aggregated_class():
    assert _staircase5_selection(0.05, 500, 200, strict=True) >= 0.95


def test_conditions_two_by_two():
    rep = check_conditions(SubmodelK([0.1], [[0.9]]), 1000)
    assert rep.lam == pytest.approx((1.4 - math.sqrt(0.2)) / 2, abs=1e-12)
    assert rep.gamma == pytest.approx(math.sqrt(0.8), abs=1e-12)
    assert rep.kappa == pytest.approx(0.4)
    assert rep.T_K >= 0


def test_conditions_half_diagonal():
    rep = check_conditions(SubmodelK([0.1], [[0.5]]), 1000)
    assert rep.kappa == 0 and not rep.a3_ok and rep.T_K == 0


def test_conditions_large_n():
    sub = SubmodelK([0.1, 0.8], [[0.9, 0.2], [0.2, 0.1]])
    assert not check_conditions(sub, 50).a2_ok
    assert check_conditions(sub, 10**7).a2_ok


def test_conditions_reject_k2():
    with pytest.raises(ValueError):
        check_conditions(SubmodelK(np.zeros(0), np.zeros((0, 0))), 100)


def test_aggregated_first_entry():
    for sub in (SubmodelK.staircase5(), SubmodelK([0.3], [[0.6]])):
        N = sub.aggregated()
        assert N[0, 0] == 0.5 and np.array_equal(N, N.T)
