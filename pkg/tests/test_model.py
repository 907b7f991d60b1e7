import itertools
import math

import numpy as np
import pytest

from sbmrates.model import (
    DiscreteLaw, Graph, Graphon, Labelling, SbmSpec, SubmodelK, adjacency_matrix,
    build_checkerboard, build_mtheta, build_qtheta, enumerate_law, is_balanced, label_maps,
    mixture_law, pair_list, product_law, sample_fixed_design, sample_graphon,
    sample_random_design,
)


def test_graph_rejects_asymmetric_and_loops():
    with pytest.raises(ValueError):
        Graph(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError):
        Graph(np.eye(2))


def test_graph_edges_roundtrip():
    g = Graph.from_edges(4, [(2, 0), (1, 3)])
    assert g.edges().tolist() == [[0, 2], [1, 3]]
    assert g.edge_count == 2
    assert g.induced([0, 2]).edge_count == 1
    assert g.permuted([3, 2, 1, 0]).edges().tolist() == [[0, 2], [1, 3]]


def test_adjacency_matrix_zero_diagonal_and_fractional():
    A = adjacency_matrix(np.full((3, 3), 0.3))
    assert np.all(np.diag(A) == 0)
    assert A[0, 1] == 0.3


@pytest.mark.parametrize("theta,alpha,expected", [
    (0.0, 1.0, [[0.5, 0.5], [0.5, 0.5]]),
    (0.5, 1.0, [[1.0, 0.0], [0.0, 1.0]]),
    (0.3, 0.1, [[0.08, 0.02], [0.02, 0.08]]),
])
def test_build_qtheta_examples(theta, alpha, expected):
    assert np.allclose(build_qtheta(theta, alpha), expected, atol=1e-15)


def test_build_qtheta_unbalanced_and_range():
    # proportions (1/4, 3/4): diagonal 1/2 + 1.5 t, off-diagonal 1/2 - 0.5 t
    Q = build_qtheta(0.2, 1.0, 0.25)
    assert np.allclose(Q, [[0.8, 0.4], [0.4, 0.8]])
    with pytest.raises(ValueError):
        build_qtheta(0.6)
    with pytest.raises(ValueError):
        build_qtheta(0.45, 1.0, 0.2)


def test_build_mtheta_rows_equal_at_zero():
    sub = SubmodelK([0.2, 0.7], [[0.1, 0.3], [0.3, 0.9]])
    M = build_mtheta(sub, 0.0)
    assert np.array_equal(M[0], M[1])
    assert np.array_equal(M, M.T)


def test_build_mtheta_degenerate_k2():
    sub = SubmodelK(np.zeros(0), np.zeros((0, 0)), 0.1)
    assert np.allclose(sub.realize(), build_qtheta(0.1))


def test_staircase5_matrix():
    M = SubmodelK.staircase5(0.05).realize()
    vals = [None, None, 1 / 12, 11 / 12, 1.0]
    expected = np.empty((5, 5))
    for i in range(5):
        for j in range(5):
            m = max(i, j)
            expected[i, j] = vals[m] if m >= 2 else (0.55 if i == j else 0.45)
    assert np.allclose(M, expected)


def test_aggregated_matrix():
    sub = SubmodelK.staircase5(0.1)
    N = sub.aggregated()
    assert N.shape == (4, 4)
    assert N[0, 0] == 0.5
    assert np.array_equal(N, N.T)
    assert np.allclose(N[0, 1:], sub.a)


def test_checkerboard_examples():
    assert np.allclose(build_checkerboard([[1]], 0.2), [[0.7, 0.3], [0.3, 0.7]])
    assert np.allclose(build_checkerboard(np.zeros((2, 2)), 0.4), 0.5)
    # hand evaluation: 1/2 + 1/4 [[I, -I], [-I, I]]
    expected = np.array([
        [0.75, 0.5, 0.25, 0.5],
        [0.5, 0.75, 0.5, 0.25],
        [0.25, 0.5, 0.75, 0.5],
        [0.5, 0.25, 0.5, 0.75],
    ])
    assert np.allclose(build_checkerboard(np.eye(2), 0.25), expected)
    with pytest.raises(ValueError):
        build_checkerboard([[1]], 0.6)


def test_fixed_design_extremes():
    phi = Labelling.round_robin(6, 2)
    assert sample_fixed_design(np.ones((2, 2)), phi, 0).edge_count == 15
    assert sample_fixed_design(np.zeros((2, 2)), phi, 0).edge_count == 0


def test_fixed_design_frequencies():
    n = 450  # about 10^5 pairs
    phi = Labelling.round_robin(n, 2)
    A = sample_fixed_design(build_qtheta(0.1), phi, 7).adj
    z = phi.assignment
    iu = np.triu_indices(n, 1)
    same = z[iu[0]] == z[iu[1]]
    for mask, p in ((same, 0.6), (~same, 0.4)):
        m = mask.sum()
        freq = A[iu][mask].mean()
        assert abs(freq - p) <= 3 * math.sqrt(p * (1 - p) / m)


def test_random_design_class_frequencies():
    k, n = 4, 10_000
    _, phi = sample_random_design(SbmSpec(np.full(k, 1 / k), np.full((k, k), 0.01)), n, 3)
    freq = phi.class_sizes() / n
    assert np.all(np.abs(freq - 1 / k) <= 3 * math.sqrt((1 / k) * (1 - 1 / k) / n))


def test_sampler_determinism():
    spec = SbmSpec.two_class(0.2)
    g1, _ = sample_random_design(spec, 60, 11)
    g2, _ = sample_random_design(spec, 60, 11)
    assert np.array_equal(g1.adj, g2.adj)


def test_single_class_is_erdos_renyi():
    g, phi = sample_random_design(SbmSpec([1.0], [[1.0]]), 10, 0)
    assert g.edge_count == 45 and np.all(phi.assignment == 0)


def test_is_balanced_examples():
    assert is_balanced(Labelling.round_robin(10, 2))
    assert not is_balanced(Labelling(np.zeros(10, int), 2))
    sizes = (5, 5, 6, 7, 7)
    z = np.repeat(np.arange(5), sizes)
    assert is_balanced(Labelling(z, 5), 5, 0.5, 2.0)


def test_enumerate_law_examples():
    law = enumerate_law(SbmSpec([1.0], [[0.3]]), 2)
    assert np.allclose(law.prob, [0.7, 0.3])
    law = enumerate_law(SbmSpec.two_class(0.3), 2)
    assert np.allclose(law.prob, [0.5, 0.5], atol=1e-15)
    law = enumerate_law(SbmSpec.two_class(0.0), 3)
    assert np.allclose(law.prob, 1 / 8)


def test_enumerate_law_guard():
    with pytest.raises(ValueError):
        enumerate_law(SbmSpec.two_class(0.1), 7)


def test_discrete_law_indexing():
    law = enumerate_law(SbmSpec.two_class(0.2), 3)
    assert pair_list(3) == [(0, 1), (0, 2), (1, 2)]
    # outcome 0b100 is the single edge (0, 1)
    g = law.graph(4)
    assert g.edges().tolist() == [[0, 1]]
    assert law.index_of(g) == 4
    assert law.outcomes()[4].tolist() == [1, 0, 0]


def test_product_law_matches_loop():
    p = np.array([0.2, 0.7, 0.4])
    prob = product_law(p)
    for o, bits in enumerate(itertools.product((0, 1), repeat=3)):
        expected = np.prod([pi if b else 1 - pi for pi, b in zip(p, bits)])
        assert prob[o] == pytest.approx(expected)


def _block_graphon_law(w: Graphon, n: int) -> DiscreteLaw:
    # integrate the uniform latent positions over the block intervals
    phis = list(label_maps(n, w.pi.size))
    weights = [math.prod(w.pi[list(phi)]) for phi in phis]
    return mixture_law(w.M, phis, n, weights)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_block_graphon_law_matches_sbm(n):
    pi = np.array([0.3, 0.7])
    M = np.array([[0.9, 0.2], [0.2, 0.4]])
    a = _block_graphon_law(Graphon.block(pi, M), n)
    b = enumerate_law(SbmSpec(pi, M), n)
    assert np.allclose(a.prob, b.prob, atol=1e-10)


def test_block_graphon_sampler_distribution():
    # chi-square goodness of fit of sampled n=3 graphs against the exact law
    w = Graphon.block([0.5, 0.5], build_qtheta(0.3))
    law = enumerate_law(w.to_sbm(), 3)
    rng = np.random.default_rng(5)
    draws = 20_000
    counts = np.zeros(8)
    for _ in range(draws):
        counts[law.index_of(sample_graphon(w, 3, rng))] += 1
    expected = draws * law.prob
    stat = float(np.sum((counts - expected) ** 2 / expected))
    assert stat < 24.3  # 99.9% quantile of chi2 with 7 dof


def test_graphon_evaluation_and_validity():
    w = Graphon.w_theta(0.4)
    assert w(0.5, 0.9) == pytest.approx(0.5)
    assert w(0.0, 0.0) == pytest.approx(0.5 - 0.4 / 4)
    assert w.degree == 2
    assert np.allclose(Graphon.w_theta(0.0)(np.linspace(0, 1, 5), 0.3), 0.5)
    with pytest.raises(ValueError):
        Graphon.polynomial([[0.5, 1.0], [0.0, 0.0]])
    with pytest.raises(ValueError):
        Graphon.polynomial([[2.0]])


def test_block_graphon_index():
    w = Graphon.block([0.25, 0.75], [[1.0, 0.0], [0.0, 0.5]])
    assert w(0.1, 0.2) == 1.0
    assert w(0.1, 0.9) == 0.0
    assert w(0.9, 0.9) == 0.5
