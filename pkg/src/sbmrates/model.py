"""Graphs, block-model parameters, graphons and their samplers.

Vertices and classes are 0-based throughout.  A :class:`Graph` never stores a
diagonal; consumers that need one (the spectral estimators) build it
themselves.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# Enumeration guards for the exact-law oracle.
MAX_ENUM_N = 6
MAX_ENUM_K = 3

# Polynomial graphons are certified on a grid of this size.
GRAPHON_CHECK_GRID = 512
GRAPHON_CHECK_SLACK = 1e-9


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph held as a dense boolean adjacency matrix."""

    adj: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adj)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be square")
        adj = adj.astype(bool)
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        if adj.diagonal().any():
            raise ValueError("self-loops are not allowed")
        object.__setattr__(self, "adj", _readonly(adj))

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        adj = np.zeros((n, n), dtype=bool)
        edges = np.asarray(edges, dtype=int).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise ValueError("edge endpoint out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ValueError("self-loops are not allowed")
        adj[edges[:, 0], edges[:, 1]] = True
        adj[edges[:, 1], edges[:, 0]] = True
        return cls(adj)

    def edges(self) -> np.ndarray:
        """(m, 2) array of edges ``i < j`` in row-major order."""
        i, j = np.nonzero(np.triu(self.adj, 1))
        return np.column_stack([i, j])

    @property
    def edge_count(self) -> int:
        return int(np.triu(self.adj, 1).sum())

    def induced(self, nodes) -> "Graph":
        nodes = np.asarray(nodes, dtype=int)
        return Graph(self.adj[np.ix_(nodes, nodes)])

    def permuted(self, perm) -> "Graph":
        """Graph whose vertex ``i`` is vertex ``perm[i]`` of this one."""
        perm = np.asarray(perm, dtype=int)
        return Graph(self.adj[np.ix_(perm, perm)])


def adjacency_matrix(X) -> np.ndarray:
    """Float adjacency with zero diagonal.

    Accepts a :class:`Graph` or any symmetric array; fractional entries are
    allowed so estimators can be fed expectation matrices.
    """
    if isinstance(X, Graph):
        A = X.adj.astype(float)
    else:
        A = np.array(X, dtype=float, copy=True)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("adjacency must be square")
        if not np.allclose(A, A.T, rtol=0, atol=1e-12):
            raise ValueError("adjacency must be symmetric")
        A = np.triu(A, 1)
        A = A + A.T
    np.fill_diagonal(A, 0.0)
    return A


@dataclass(frozen=True)
class Labelling:
    """Assignment of each vertex to one of ``k`` classes."""

    assignment: np.ndarray
    k: int

    def __post_init__(self):
        z = np.asarray(self.assignment)
        if z.ndim != 1:
            raise ValueError("assignment must be one-dimensional")
        z = z.astype(int)
        if z.size and (z.min() < 0 or z.max() >= self.k):
            raise ValueError(f"labels must lie in 0..{self.k - 1}")
        object.__setattr__(self, "assignment", _readonly(z))

    @property
    def n(self) -> int:
        return self.assignment.size

    def class_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)

    def members(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == j)

    @classmethod
    def round_robin(cls, n: int, k: int) -> "Labelling":
        return cls(np.arange(n) % k, k)


def is_balanced(phi: Labelling, k: int | None = None, c1: float = 0.5,
                c2: float = 2.0) -> bool:
    """Membership in the balanced set: every class size in ``[c1 n/k, c2 n/k]``."""
    k = phi.k if k is None else k
    if not c1 <= 1 <= c2:
        raise ValueError("need c1 <= 1 <= c2")
    sizes = np.bincount(phi.assignment, minlength=k)
    n = phi.n
    return bool(np.all(sizes >= c1 * n / k) and np.all(sizes <= c2 * n / k))


def _check_unit_interval(M: np.ndarray, what: str):
    if np.any(M < 0) or np.any(M > 1):
        raise ValueError(f"{what} has entries outside [0, 1]")


@dataclass(frozen=True)
class SbmSpec:
    """Proportions ``pi``, connectivity ``M`` and sparsity scale ``alpha``.

    Edges are drawn with probability ``alpha * M``.
    """

    pi: np.ndarray
    M: np.ndarray
    alpha: float = 1.0

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float).ravel()
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        if M.shape != (pi.size, pi.size):
            raise ValueError("M must be k x k with k = len(pi)")
        if np.any(pi < 0) or abs(pi.sum() - 1) > 1e-12:
            raise ValueError("pi must be a probability vector")
        if not np.array_equal(M, M.T):
            raise ValueError("M must be symmetric")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        _check_unit_interval(self.alpha * M, "alpha * M")
        object.__setattr__(self, "pi", _readonly(pi))
        object.__setattr__(self, "M", _readonly(M))
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def k(self) -> int:
        return self.pi.size

    @property
    def connectivity(self) -> np.ndarray:
        return self.alpha * self.M

    @classmethod
    def two_class(cls, theta: float, alpha: float = 1.0) -> "SbmSpec":
        return cls(np.array([0.5, 0.5]), build_qtheta(theta), alpha)


@dataclass(frozen=True)
class SubmodelK:
    """One-parameter ``k``-class family: the 2x2 ``theta`` block bordered by ``a`` and ``B``."""

    a: np.ndarray
    B: np.ndarray
    theta: float = 0.0
    base: float = 0.5

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).ravel()
        B = np.asarray(self.B, dtype=float).reshape(a.size, a.size)
        if not np.array_equal(B, B.T):
            raise ValueError("B must be symmetric")
        _check_unit_interval(a, "a")
        _check_unit_interval(B, "B")
        if abs(self.theta) > 0.5:
            raise ValueError("|theta| must be at most 1/2")
        object.__setattr__(self, "a", _readonly(a))
        object.__setattr__(self, "B", _readonly(B))
        _check_unit_interval(self.realize(), "M^theta")

    @property
    def k(self) -> int:
        return self.a.size + 2

    def realize(self, theta: float | None = None) -> np.ndarray:
        return build_mtheta(self, theta)

    def with_theta(self, theta: float) -> "SubmodelK":
        return SubmodelK(self.a, self.B, theta, self.base)

    def aggregated(self) -> np.ndarray:
        """The (k-1)x(k-1) matrix obtained by merging classes 0 and 1 of ``M^0``."""
        K = self.k - 1
        N = np.empty((K, K))
        N[0, 0] = self.base
        N[0, 1:] = self.a
        N[1:, 0] = self.a
        N[1:, 1:] = self.B
        return N

    def spec(self, alpha: float = 1.0) -> SbmSpec:
        return SbmSpec(np.full(self.k, 1.0 / self.k), self.realize(), alpha)

    @classmethod
    def staircase5(cls, theta: float = 0.0) -> "SubmodelK":
        """Five-class staircase model: entry (i, j) equals the value of class max(i, j)."""
        a = np.array([1 / 12, 11 / 12, 1.0])
        B = np.array([[1 / 12, 11 / 12, 1.0],
                      [11 / 12, 11 / 12, 1.0],
                      [1.0, 1.0, 1.0]])
        return cls(a, B, theta)


def build_qtheta(theta: float, alpha: float = 1.0, b: float = 0.5) -> np.ndarray:
    """Scaled two-class block ``alpha * [[1/2 + c t, 1/2 - d t], [1/2 - d t, 1/2 + c t]]``.

    ``c = 2(1 - b)`` and ``d = 2b`` for class proportions ``(b, 1 - b)``, so
    ``b = 1/2`` gives the symmetric block with diagonal ``1/2 + theta``.
    """
    if abs(theta) > 0.5:
        raise ValueError("|theta| must be at most 1/2")
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if not 0 < b < 1:
        raise ValueError("b must lie in (0, 1)")
    c, d = 2 * (1 - b), 2 * b
    Q = alpha * np.array([[0.5 + c * theta, 0.5 - d * theta],
                          [0.5 - d * theta, 0.5 + c * theta]])
    _check_unit_interval(Q, "Q")
    return Q


def build_mtheta(sub: SubmodelK, theta: float | None = None) -> np.ndarray:
    theta = sub.theta if theta is None else theta
    k = sub.k
    M = np.empty((k, k))
    M[:2, :2] = [[sub.base + theta, sub.base - theta],
                 [sub.base - theta, sub.base + theta]]
    M[:2, 2:] = sub.a
    M[2:, :2] = sub.a[:, None]
    M[2:, 2:] = sub.B
    return M


def build_checkerboard(A, theta: float) -> np.ndarray:
    """``1/2 * ones + theta * [[A, -A], [-A, A]]`` for a symmetric ``l x l`` block ``A``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1] or not np.array_equal(A, A.T):
        raise ValueError("A must be square and symmetric")
    Q = 0.5 + theta * np.block([[A, -A], [-A, A]])
    _check_unit_interval(Q, "checkerboard matrix")
    return Q


def _bernoulli_upper(P: np.ndarray, rng: np.random.Generator) -> Graph:
    n = P.shape[0]
    upper = np.triu(rng.random((n, n)) < P, 1)
    return Graph(upper | upper.T)


def sample_fixed_design(M, phi: Labelling, rng=None) -> Graph:
    """Independent ``Bernoulli(M[phi(i), phi(j)])`` edges for ``i < j``."""
    M = np.asarray(M, dtype=float)
    _check_unit_interval(M, "M")
    z = phi.assignment
    if z.size and z.max() >= M.shape[0]:
        raise ValueError("labelling uses more classes than M has")
    return _bernoulli_upper(M[np.ix_(z, z)], _as_rng(rng))


def sample_labels(pi, n: int, rng=None) -> Labelling:
    pi = np.asarray(pi, dtype=float)
    z = _as_rng(rng).choice(pi.size, size=n, p=pi)
    return Labelling(z, pi.size)


def sample_random_design(spec: SbmSpec, n: int, rng=None) -> tuple[Graph, Labelling]:
    """Labels i.i.d. from ``pi``, then fixed-design edges.

    The returned labelling is for diagnostics only; estimators never see it.
    """
    rng = _as_rng(rng)
    phi = sample_labels(spec.pi, n, rng)
    return sample_fixed_design(spec.connectivity, phi, rng), phi


@dataclass(frozen=True)
class Graphon:
    """Symmetric ``w: [0,1]^2 -> [0,1]``, block-constant or polynomial.

    Build with :meth:`block` or :meth:`polynomial`.  ``coef[p, q]`` multiplies
    ``x**p * y**q``.
    """

    variant: str
    pi: np.ndarray | None = None
    M: np.ndarray | None = None
    coef: np.ndarray | None = None
    bound: float | None = None
    _edges: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.variant == "block":
            spec = SbmSpec(self.pi, self.M)
            object.__setattr__(self, "pi", spec.pi)
            object.__setattr__(self, "M", spec.M)
            object.__setattr__(self, "_edges", np.concatenate([[0.0], np.cumsum(spec.pi)]))
        elif self.variant == "polynomial":
            c = np.atleast_2d(np.asarray(self.coef, dtype=float))
            if c.shape[0] != c.shape[1]:
                raise ValueError("coefficient matrix must be square (pad with zeros)")
            if not np.allclose(c, c.T, rtol=0, atol=1e-15):
                raise ValueError("a symmetric polynomial needs a symmetric coefficient matrix")
            if self.bound is not None and np.abs(c).max() > self.bound:
                raise ValueError("coefficient exceeds the stated bound")
            object.__setattr__(self, "coef", _readonly(c))
            g = (np.arange(GRAPHON_CHECK_GRID) + 0.5) / GRAPHON_CHECK_GRID
            W = self(g[:, None], g[None, :])
            if W.min() < -GRAPHON_CHECK_SLACK or W.max() > 1 + GRAPHON_CHECK_SLACK:
                raise ValueError("polynomial leaves [0, 1] on the certification grid")
        else:
            raise ValueError(f"unknown graphon variant {self.variant!r}")

    @classmethod
    def block(cls, pi, M) -> "Graphon":
        return cls("block", pi=pi, M=M)

    @classmethod
    def polynomial(cls, coef, bound: float | None = None) -> "Graphon":
        return cls("polynomial", coef=coef, bound=bound)

    @classmethod
    def w_theta(cls, theta: float) -> "Graphon":
        """``1/2 - theta (x - 1/2)(y - 1/2)``."""
        return cls.polynomial([[0.5 - theta / 4, theta / 2],
                               [theta / 2, -theta]])

    @property
    def degree(self) -> int:
        if self.variant != "polynomial":
            raise AttributeError("degree is defined for polynomial graphons only")
        p, q = np.nonzero(self.coef)
        return int((p + q).max()) if p.size else 0

    def block_index(self, u) -> np.ndarray:
        """Class of a latent position: interval ``[sum pi[:s], sum pi[:s+1])``."""
        idx = np.searchsorted(self._edges, u, side="right") - 1
        return np.clip(idx, 0, self.pi.size - 1)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.variant == "block":
            return self.M[self.block_index(x), self.block_index(y)]
        d = self.coef.shape[0]
        out = np.zeros(np.broadcast(x, y).shape)
        for p in range(d):
            for q in range(d):
                if self.coef[p, q]:
                    out = out + self.coef[p, q] * x**p * y**q
        return out

    def to_sbm(self) -> SbmSpec:
        if self.variant != "block":
            raise ValueError("only block graphons are block models")
        return SbmSpec(self.pi, self.M)


def sample_graphon(w: Graphon, n: int, rng=None) -> Graph:
    """Latent ``U_i ~ Unif[0,1]``, edges ``Bernoulli(w(U_i, U_j))``; ``U`` is discarded."""
    rng = _as_rng(rng)
    u = rng.random(n)
    P = np.clip(w(u[:, None], u[None, :]), 0.0, 1.0)
    return _bernoulli_upper(P, rng)


# --- exact laws for tiny graphs ---------------------------------------------

def pair_list(n: int) -> list[tuple[int, int]]:
    """Unordered pairs in row-major order; outcome bit ``p`` refers to ``pair_list(n)[p]``."""
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


@dataclass(frozen=True)
class DiscreteLaw:
    """Probability of every adjacency outcome on ``n`` vertices.

    Outcome index reads the upper triangle, row-major, as a binary number
    whose most significant bit is pair (0, 1).
    """

    n: int
    prob: np.ndarray

    def __post_init__(self):
        prob = np.asarray(self.prob, dtype=float)
        m = self.n * (self.n - 1) // 2
        if prob.shape != (2**m,):
            raise ValueError(f"expected {2**m} outcome weights")
        if np.any(prob < -1e-15) or abs(prob.sum() - 1) > 1e-12:
            raise ValueError("weights must be a probability vector")
        object.__setattr__(self, "prob", _readonly(prob))

    @property
    def num_pairs(self) -> int:
        return self.n * (self.n - 1) // 2

    def outcomes(self) -> np.ndarray:
        """(2^m, m) 0/1 matrix; row ``o`` is the edge pattern of outcome ``o``."""
        m = self.num_pairs
        idx = np.arange(2**m)[:, None]
        return (idx >> np.arange(m - 1, -1, -1)) & 1

    def graph(self, index: int) -> Graph:
        bits = (index >> np.arange(self.num_pairs - 1, -1, -1)) & 1
        edges = [p for p, b in zip(pair_list(self.n), bits) if b]
        return Graph.from_edges(self.n, edges)

    def index_of(self, g: Graph) -> int:
        out = 0
        for i, j in pair_list(self.n):
            out = (out << 1) | int(g.adj[i, j])
        return out


def product_law(edge_probs) -> np.ndarray:
    """Outcome weights of independent edges with the given per-pair probabilities."""
    out = np.ones(1)
    for p in np.asarray(edge_probs, dtype=float):
        out = np.kron(out, [1.0 - p, p])
    return out


def label_maps(n: int, k: int):
    """All maps {0..n-1} -> {0..k-1} in lexicographic order."""
    return itertools.product(range(k), repeat=n)


def pair_probs(M: np.ndarray, phi: Sequence[int]) -> np.ndarray:
    phi = np.asarray(phi)
    iu = np.triu_indices(phi.size, 1)
    return M[phi[iu[0]], phi[iu[1]]]


def mixture_law(M, phis, n: int, weights=None) -> DiscreteLaw:
    """Exact law of the mixture ``sum_phi w(phi) P_phi`` over the given label maps."""
    M = np.asarray(M, dtype=float)
    phis = [tuple(p) for p in phis]
    if weights is None:
        weights = np.full(len(phis), 1.0 / len(phis))
    m = n * (n - 1) // 2
    prob = np.zeros(2**m)
    for wgt, phi in zip(weights, phis):
        if wgt:
            prob += wgt * product_law(pair_probs(M, phi))
    return DiscreteLaw(n, prob)


def enumerate_law(spec: SbmSpec, n: int) -> DiscreteLaw:
    """Exact law of the random-design block model on ``n`` vertices.

    Each label map gets product weight ``pi[phi(0)] ... pi[phi(n-1)]``.
    """
    if n > MAX_ENUM_N or spec.k > MAX_ENUM_K:
        raise ValueError(f"enumeration limited to n <= {MAX_ENUM_N}, k <= {MAX_ENUM_K}")
    if n < 2:
        raise ValueError("need at least two vertices")
    phis = list(label_maps(n, spec.k))
    weights = [math.prod(spec.pi[list(phi)]) for phi in phis]
    return mixture_law(spec.connectivity, phis, n, weights)
