"""Spectral estimators of the connectivity parameter and their condition checks.

``spectral_two_class`` reads theta off the top (in modulus) eigenvalue of the
centred adjacency matrix.  ``spec_theta`` handles ``k >= 3`` classes: cluster
into ``k - 1`` groups, find the group whose internal density is closest to
one half, and run the two-class estimator on it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .linalg import jacobi_full_eigen, largest_abs_eigenvalue, top_k_eigenpairs
from .model import Labelling, SubmodelK, _as_rng, adjacency_matrix

DEFAULT_C = 1.0
DEFAULT_C_S = 5.0
DEFAULT_C_TK = 0.1
KMEANS_RESTARTS = 10
REFINE_PASSES = 20


@dataclass(frozen=True)
class ThetaEstimate:
    theta: float
    eigenvalue: float = float("nan")
    residual: float = 0.0
    flags: tuple[str, ...] = ()

    def __float__(self):
        return self.theta


def _clamp(t: float) -> float:
    return min(0.5, max(-0.5, t))


def b0_holds(n: int, alpha: float, C_s: float = DEFAULT_C_S) -> bool:
    return alpha >= C_s * math.log(n) / n


def spectral_two_class_sparse(X, alpha: float = 1.0, eig_method: str = "scipy",
                              C_s: float = DEFAULT_C_S) -> ThetaEstimate:
    """``lambda_max_abs(X - alpha J / 2) / ((n - 1) alpha)``, clamped to [-1/2, 1/2].

    The centred matrix has a zero diagonal.  ``X`` may be a Graph or a
    fractional expectation matrix.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    A = adjacency_matrix(X)
    n = A.shape[0]
    if n < 2:
        raise ValueError("need at least two vertices")
    flags: tuple[str, ...] = ()
    if alpha < 1 and not b0_holds(n, alpha, C_s):
        warnings.warn(f"alpha={alpha} is below C_s log(n)/n for n={n}", RuntimeWarning,
                      stacklevel=2)
        flags += ("b0_violated",)
    D = A - alpha / 2
    np.fill_diagonal(D, 0.0)
    if not np.any(D):
        return ThetaEstimate(0.0, 0.0, 0.0, flags + ("zero_matrix",))
    pair = largest_abs_eigenvalue(D, method=eig_method)
    theta = _clamp(pair.value / ((n - 1) * alpha))
    return ThetaEstimate(theta, pair.value, pair.residual, flags + pair.flags)


def spectral_two_class(X, eig_method: str = "scipy") -> ThetaEstimate:
    """Dense two-class spectral estimate ``lambda_max_abs(X - J/2) / (n - 1)``."""
    return spectral_two_class_sparse(X, 1.0, eig_method)


# --- clustering ---------------------------------------------------------------

@dataclass(frozen=True)
class ClusterResult:
    """Partition into ``K`` classes with its embedding-space summary.

    ``mismatch_bound`` is the fraction of rows whose distance to their own
    center is at least half the smallest center separation: the rows a
    perturbation of that size could move to another cluster.
    """

    labels: Labelling
    centers: np.ndarray
    mismatch_bound: float
    objective: float = float("nan")
    embedding: np.ndarray | None = field(default=None, repr=False)
    block_means: np.ndarray | None = None
    passes: int = 0
    flags: tuple[str, ...] = ()


def _farthest_point_seeds(Y, K, rng):
    n = Y.shape[0]
    idx = [int(rng.integers(n))]
    d2 = np.sum((Y - Y[idx[0]]) ** 2, axis=1)
    for _ in range(1, K):
        j = int(np.argmax(d2))
        idx.append(j)
        d2 = np.minimum(d2, np.sum((Y - Y[j]) ** 2, axis=1))
    return Y[idx].copy()


def _lloyd(Y, centers, max_iter=300):
    K = centers.shape[0]
    reseeds = 0
    labels = None
    for _ in range(max_iter):
        d2 = np.sum((Y[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new = np.argmin(d2, axis=1)
        counts = np.bincount(new, minlength=K)
        for j in np.flatnonzero(counts == 0):
            # move an empty center onto the point worst served by its own
            far = int(np.argmax(d2[np.arange(len(new)), new]))
            new[far] = j
            d2[far, :] = 0.0
            reseeds += 1
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        centers = np.array([Y[labels == j].mean(axis=0) for j in range(K)])
    obj = float(np.sum((Y - centers[labels]) ** 2))
    return labels, centers, obj, reseeds


def kmeans(Y, K: int, rng=None, restarts: int = KMEANS_RESTARTS):
    """Lloyd's algorithm from farthest-point seeds; best objective over restarts.

    Returns ``(labels, centers, objective, flags)``.
    """
    rng = _as_rng(rng)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n = Y.shape[0]
    if not 1 <= K <= n:
        raise ValueError("need 1 <= K <= n")
    best = None
    for _ in range(restarts):
        labels, centers, obj, reseeds = _lloyd(Y, _farthest_point_seeds(Y, K, rng))
        if best is None or obj < best[2] - 1e-12:
            best = (labels, centers, obj, reseeds)
    labels, centers, obj, _ = best
    flags = ()
    if np.any(np.bincount(labels, minlength=K) == 0):
        flags = ("empty_cluster",)
    return labels, centers, obj, flags


def _mismatch(Y, labels, centers) -> float:
    K = centers.shape[0]
    if K < 2:
        return 0.0
    sep = min(np.linalg.norm(centers[i] - centers[j]) for i in range(K) for j in range(i + 1, K))
    dist = np.linalg.norm(Y - centers[labels], axis=1)
    return float(np.mean(dist >= sep / 2)) if sep > 0 else 1.0


def spectral_cluster(X, K: int, rng=None, restarts: int = KMEANS_RESTARTS,
                     eig_method: str = "scipy") -> ClusterResult:
    """k-means on the rows of the ``K`` leading (in modulus) adjacency eigenvectors."""
    rng = _as_rng(rng)
    A = adjacency_matrix(X)
    n = A.shape[0]
    if not 1 <= K <= n:
        raise ValueError("need 1 <= K <= n")
    if not np.any(A):
        U = np.zeros((n, K))
        flags = ("zero_matrix",)
    else:
        pairs = top_k_eigenpairs(A, K, method=eig_method)
        U = np.column_stack([p.vector for p in pairs])
        flags = pairs[0].flags
    if K == 1:
        labels = np.zeros(n, dtype=int)
        centers = U.mean(axis=0, keepdims=True)
        obj = float(np.sum((U - centers) ** 2))
        return ClusterResult(Labelling(labels, 1), centers, 0.0, obj, U, flags=flags)
    labels, centers, obj, kflags = kmeans(U, K, rng, restarts)
    return ClusterResult(Labelling(labels, K), centers, _mismatch(U, labels, centers), obj,
                         U, flags=flags + kflags)


def block_densities(A: np.ndarray, labels: np.ndarray, K: int):
    """Empirical edge densities between and within classes, and the pair counts."""
    Z = np.zeros((labels.size, K))
    Z[np.arange(labels.size), labels] = 1.0
    counts = Z.sum(axis=0)
    S = Z.T @ A @ Z
    P = np.outer(counts, counts) - np.diag(counts)
    with np.errstate(invalid="ignore", divide="ignore"):
        dens = np.where(P > 0, S / np.where(P > 0, P, 1), np.nan)
    return dens, P


def _indistinguishable(dens, P) -> bool:
    K = dens.shape[0]
    p = np.clip(np.nan_to_num(dens, nan=0.5), 1e-3, 1 - 1e-3)
    se2 = p * (1 - p) / np.maximum(P, 1)
    for i in range(K):
        for j in range(i + 1, K):
            z2 = np.sum((dens[i] - dens[j]) ** 2 / (se2[i] + se2[j]))
            if np.isnan(z2) or z2 <= K + 3 * math.sqrt(2 * K):
                return True
    return False


def refine_labels(X, initial: ClusterResult, K: int | None = None,
                  max_passes: int = REFINE_PASSES) -> ClusterResult:
    """Profile-likelihood relabelling against the current block densities.

    Each pass moves every vertex to the class maximising the Bernoulli
    log-likelihood of its edge counts; densities are recomputed between
    passes.  Stops at a fixpoint, on a repeated state (``"oscillation"``) or
    after ``max_passes`` (``"pass_limit"``).  ``"indistinguishable"`` is set
    when two final classes have block rows within noise of each other.
    """
    A = adjacency_matrix(X)
    K = initial.labels.k if K is None else K
    if initial.labels.k != K:
        raise ValueError("initial partition has the wrong number of classes")
    labels = initial.labels.assignment.copy()
    n = labels.size
    flags = list(initial.flags)
    seen = {labels.tobytes()}
    passes = 0
    while True:
        dens, P = block_densities(A, labels, K)
        if passes >= max_passes:
            flags.append("pass_limit")
            break
        Z = np.zeros((n, K))
        Z[np.arange(n), labels] = 1.0
        counts = Z.sum(axis=0)
        E = A @ Z
        others = counts[None, :] - Z
        # add-half smoothing keeps 0/1 blocks finite
        S = Z.T @ A @ Z
        Nh = (S + 0.5) / (P + 1.0)
        L = E @ np.log(Nh).T + (others - E) @ np.log1p(-Nh).T
        cur = L[np.arange(n), labels]
        best = np.argmax(L, axis=1)
        new = np.where(L[np.arange(n), best] > cur + 1e-9, best, labels)
        passes += 1
        if np.array_equal(new, labels):
            break
        if np.any(np.bincount(new, minlength=K) == 0):
            flags.append("empty_class")
            break
        key = new.tobytes()
        if key in seen:
            labels = new
            flags.append("oscillation")
            dens, P = block_densities(A, labels, K)
            break
        seen.add(key)
        labels = new
    if K > 1 and _indistinguishable(dens, P):
        flags.append("indistinguishable")
    centers = initial.centers
    mismatch = initial.mismatch_bound
    if initial.embedding is not None:
        U = initial.embedding
        centers = np.array([U[labels == j].mean(axis=0) if np.any(labels == j)
                            else np.full(U.shape[1], np.nan) for j in range(K)])
        mismatch = _mismatch(U, labels, centers) if not np.isnan(centers).any() else 1.0
    return ClusterResult(Labelling(labels, K), centers, mismatch, initial.objective,
                         initial.embedding, dens, passes, tuple(dict.fromkeys(flags)))


@dataclass(frozen=True)
class HalfCluster:
    index: int
    densities: np.ndarray
    distances: np.ndarray
    margin: float
    flags: tuple[str, ...] = ()


def identify_half_cluster(X, labels: Labelling, kappa: float | None = None,
                          alpha: float = 1.0) -> HalfCluster:
    """Class whose within-class edge density (divided by ``alpha``) is closest to 1/2.

    With ``kappa`` given, flags ``"ambiguous"`` when the runner-up is also
    within ``kappa/2`` and ``"no_half_cluster"`` when the winner is not.
    Exact ties go to the smallest index and are flagged.
    """
    A = adjacency_matrix(X)
    K = labels.k
    sizes = labels.class_sizes()
    if np.any(sizes < 2):
        raise ValueError("every class needs at least two vertices")
    dens = np.array([A[np.ix_(labels.members(l), labels.members(l))].sum()
                     / (sizes[l] * (sizes[l] - 1)) for l in range(K)])
    dist = np.abs(dens / alpha - 0.5)
    near = np.flatnonzero(dist <= dist.min() + 1e-12)
    idx = int(near[0])
    flags = ["tie"] if near.size > 1 else []
    rest = np.delete(dist, idx)
    margin = float(rest.min()) if rest.size else math.inf
    if kappa is not None:
        if margin < kappa / 2:
            flags.append("ambiguous")
        if dist[idx] > kappa / 2:
            flags.append("no_half_cluster")
    return HalfCluster(idx, dens, dist, margin, tuple(flags))


@dataclass(frozen=True)
class SpecThetaResult:
    theta: float
    selected: np.ndarray
    cluster_sizes: tuple[int, ...]
    half: HalfCluster | None
    refinement_passes: int
    flags: tuple[str, ...]
    eig_residual: float

    def __float__(self):
        return self.theta


def spec_theta(X, k: int, alpha: float = 1.0, rng=None, kappa: float | None = None,
               eig_method: str = "scipy") -> SpecThetaResult:
    """Three-step estimator for the ``k``-class submodel.

    Cluster into ``k - 1`` groups and refine, pick the group nearest density
    ``alpha/2``, then apply the two-class estimator (with the same ``alpha``)
    to its induced subgraph.  Sub-step flags are carried in the result; a
    theta estimate is always returned.  ``k = 2`` skips straight to the last
    step on the whole graph.
    """
    rng = _as_rng(rng)
    A = adjacency_matrix(X)
    n = A.shape[0]
    if k == 2:
        est = spectral_two_class_sparse(A, alpha, eig_method)
        return SpecThetaResult(est.theta, np.arange(n), (n,), None, 0,
                               ("routed_two_class",) + est.flags, est.residual)
    if k < 2:
        raise ValueError("need k >= 2")
    K = k - 1
    init = spectral_cluster(A, K, rng, eig_method=eig_method)
    ref = refine_labels(A, init, K)
    flags = list(ref.flags)
    sizes = tuple(int(s) for s in ref.labels.class_sizes())
    try:
        half = identify_half_cluster(A, ref.labels, kappa, alpha)
    except ValueError:
        # a singleton class: fall back to the class with the most vertices
        flags.append("tiny_class")
        half = None
        idx = int(np.argmax(sizes))
    else:
        idx = half.index
        flags.extend(half.flags)
    nodes = ref.labels.members(idx)
    if nodes.size < 2:
        flags.append("tiny_half_cluster")
        return SpecThetaResult(0.0, nodes, sizes, half, ref.passes, tuple(flags), 0.0)
    est = spectral_two_class_sparse(A[np.ix_(nodes, nodes)], alpha, eig_method)
    flags.extend(est.flags)
    return SpecThetaResult(est.theta, nodes, sizes, half, ref.passes,
                           tuple(dict.fromkeys(flags)), est.residual)


# --- conditions ---------------------------------------------------------------

@dataclass(frozen=True)
class ConditionsReport:
    K: int
    n: int
    alpha: float
    gamma: float
    lam: float
    kappa: float
    a1_ok: bool
    a2_ok: bool
    a3_ok: bool
    b0_ok: bool
    b2_ok: bool
    T_K: float
    constants: dict

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["lambda"] = d.pop("lam")
        return d


def check_conditions(sub: SubmodelK, n: int, alpha: float = 1.0, C: float = DEFAULT_C,
                     C_s: float = DEFAULT_C_S, c: float = DEFAULT_C_TK) -> ConditionsReport:
    """Evaluate the spectral-recovery conditions for ``sub`` at size ``n``.

    ``gamma`` is the smallest row distance of the aggregated matrix N,
    ``lam`` its smallest absolute eigenvalue and ``kappa`` the smallest
    distance of a diagonal entry of B from 1/2.  ``C``, ``C_s`` and ``c`` are
    the unspecified constants, echoed in the report.
    """
    if sub.k < 3:
        raise ValueError("the aggregated-matrix conditions need k >= 3")
    N = sub.aggregated()
    K = N.shape[0]
    gamma = min(float(np.linalg.norm(N[i] - N[j]))
                for i in range(K) for j in range(i + 1, K))
    lam = min(abs(p.value) for p in jacobi_full_eigen(N))
    kappa = float(np.min(np.abs(np.diag(sub.B) - 0.5)))
    logn = math.log(n)
    full_rank = lam > 1e-12
    a1 = full_rank and gamma > 0
    a2 = (n * lam * gamma >= C * K**4.5 and n * gamma**2 >= C * K**3 * logn
          and n >= C * K**3)
    a3 = kappa > 0 and kappa >= C * math.sqrt(K * logn / n)
    b0 = b0_holds(n, alpha, C_s)
    b2 = (n * alpha * lam * gamma >= C * K**4.5 and n * alpha * gamma**2 >= C * K**3 * logn
          and n >= C * K**3)
    T_K = min(c * lam * math.sqrt(gamma) / K**1.25, kappa / 4)
    return ConditionsReport(K, n, alpha, gamma, lam, kappa, bool(a1), bool(a2), bool(a3),
                            bool(b0), bool(b2), T_K, {"C": C, "C_s": C_s, "c": c})
