"""Pseudo-likelihood estimators of the connectivity parameter.

The two-class criterion is

    Z(sigma, S, X) = 1/2 [ -sum_{same} (1 - 2 X_ij) + sum_{diff} (1 - 2 X_ij) ]

over pairs ``i < j`` in ``S``.  Its profile maximiser in ``|Z|`` gives
``theta_hat = Z / b`` with ``b`` the number of pairs.  The ``k``-class
estimator first fits labels and theta by least squares against the full
template, then reruns the two-class profile step on the vertices placed in
the theta block.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import squareform

from .linalg import largest_abs_eigenvalue
from .model import Labelling, SubmodelK, _as_rng, adjacency_matrix, build_mtheta, is_balanced

EXACT_MAX_N_TWO = 16
EXACT_MAX_N_K = 8
EXACT_MAX_K = 3
ALTERNATION_ROUNDS = 20
RESTARTS = 5
BALANCE_C1 = 0.5
BALANCE_C2 = 2.0


@dataclass(frozen=True)
class GridTheta:
    """The grid ``{i / (2 n^2) : i = -n^2, ..., n^2}`` on ``[-1/2, 1/2]``."""

    n: int

    @property
    def step(self) -> float:
        return 1.0 / (2 * self.n * self.n)

    @property
    def values(self) -> np.ndarray:
        m = self.n * self.n
        return np.arange(-m, m + 1) / (2.0 * m)

    def nearest(self, t: float) -> float:
        m = self.n * self.n
        i = int(np.clip(np.floor(t * 2 * m + 0.5), -m, m))
        return i / (2.0 * m)


@dataclass(frozen=True)
class FitResult:
    theta_hat: float
    sigma_hat: Labelling
    objective: float
    mode: str
    S_I: np.ndarray | None = None
    stage1_theta: float | None = None
    stage1_loss: float | None = None

    def as_dict(self) -> dict:
        d = {"theta_hat": self.theta_hat, "objective": self.objective, "mode": self.mode,
             "sigma_hat": self.sigma_hat.assignment.tolist()}
        if self.S_I is not None:
            d["S_I"] = self.S_I.tolist()
            d["stage1_theta"] = self.stage1_theta
            d["stage1_loss"] = self.stage1_loss
        return d


def _signs(sigma) -> np.ndarray:
    a = sigma.assignment if isinstance(sigma, Labelling) else np.asarray(sigma)
    if np.any((a != 0) & (a != 1)):
        raise ValueError("sigma must map into two classes")
    return 1.0 - 2.0 * a


def z_criterion(X, sigma, S=None) -> float:
    """Signed pair-agreement criterion restricted to the vertex subset ``S``."""
    A = adjacency_matrix(X)
    s = _signs(sigma)
    if S is None:
        S = np.arange(A.shape[0])
    S = np.asarray(S, dtype=int)
    if S.size == 0:
        raise ValueError("S must be nonempty")
    if s.size == A.shape[0]:
        s = s[S]
    elif s.size != S.size:
        raise ValueError("sigma must be defined on S")
    Y = 2.0 * A[np.ix_(S, S)] - 1.0
    np.fill_diagonal(Y, 0.0)
    return float(s @ Y @ s) / 4.0


def _all_signs(n: int) -> np.ndarray:
    # lexicographic order of label vectors in {0,1}^n, first vertex most significant
    idx = np.arange(2**n)[:, None]
    bits = (idx >> np.arange(n - 1, -1, -1)) & 1
    return 1.0 - 2.0 * bits


def _exact_profile(Y: np.ndarray):
    n = Y.shape[0]
    S = _all_signs(n)
    Z = np.einsum("ij,jk,ik->i", S, Y, S) / 4.0
    absZ = np.abs(Z)
    best = absZ.max()
    i = int(np.flatnonzero(absZ >= best - 1e-9 * max(1.0, best))[0])
    return S[i], float(Z[i])


def _greedy(Y: np.ndarray, s: np.ndarray, sign: float):
    # best-improvement single flips on sign * Z; flipping v changes Z by -s_v (Ys)_v
    s = s.copy()
    g = Y @ s
    while True:
        gain = -sign * s * g
        v = int(np.argmax(gain))
        if gain[v] <= 1e-12:
            break
        g -= 2 * s[v] * Y[:, v]
        s[v] = -s[v]
    return s, float(s @ Y @ s) / 4.0


def _leading_sign(Y: np.ndarray) -> np.ndarray:
    # Y / 2 is X - J/2 off the diagonal
    D = Y / 2.0
    if not np.any(D):
        return np.ones(Y.shape[0])
    v = largest_abs_eigenvalue(D, method="scipy").vector
    return np.where(v >= 0, 1.0, -1.0)


def _heuristic_profile(Y: np.ndarray):
    n = Y.shape[0]
    starts = [_leading_sign(Y), np.ones(n)]
    best_s, best_z = None, None
    for s0 in starts:
        for sign in (1.0, -1.0):
            s, z = _greedy(Y, s0, sign)
            if best_z is None or abs(z) > abs(best_z) + 1e-9:
                best_s, best_z = s, z
    return best_s, best_z


def _canonical(s: np.ndarray) -> np.ndarray:
    labels = (s < 0).astype(int)
    if labels.size and labels[0] == 1:
        labels = 1 - labels
    return labels


def _profile(A: np.ndarray, mode: str):
    n = A.shape[0]
    if n < 2:
        raise ValueError("need at least two vertices")
    Y = 2.0 * A - 1.0
    np.fill_diagonal(Y, 0.0)
    if mode == "exact":
        if n > EXACT_MAX_N_TWO:
            raise ValueError(f"exact mode needs n <= {EXACT_MAX_N_TWO}")
        s, z = _exact_profile(Y)
    elif mode == "heuristic":
        s, z = _heuristic_profile(Y)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return _canonical(s), z


def mle_two_class(X, mode: str = "heuristic") -> FitResult:
    """Profile estimate: ``sigma`` maximising ``|Z|``, ``theta_hat = Z / b_n``.

    ``mode="exact"`` scans every labelling (``n <= 16``) and keeps the
    lexicographically smallest maximiser.  ``mode="heuristic"`` runs greedy
    single-vertex flips from the sign pattern of the leading eigenvector of
    ``X - J/2`` and from the constant labelling.
    """
    A = adjacency_matrix(X)
    n = A.shape[0]
    labels, z = _profile(A, mode)
    b = n * (n - 1) / 2
    theta = min(0.5, max(-0.5, z / b))
    return FitResult(theta, Labelling(labels, 2), abs(z), mode)


def delta_sigma(sigma, sigma0) -> int:
    """``sum_{i<j} (-1)^{[sigma0(i) != sigma0(j)]} (-1)^{[sigma(i) != sigma(j)]}``."""
    s, s0 = _signs(sigma), _signs(sigma0)
    if s.size != s0.size:
        raise ValueError("labellings must have the same length")
    n = s.size
    total = 0
    for i in range(n):
        for j in range(i + 1, n):
            total += int(s[i] * s[j] * s0[i] * s0[j])
    return total


# --- k-class least squares ----------------------------------------------------

def _template_parts(sub: SubmodelK):
    M0 = build_mtheta(sub, 0.0)
    P = np.zeros_like(M0)
    P[:2, :2] = [[1.0, -1.0], [-1.0, 1.0]]
    return M0, P


def _balanced_bounds(n, k):
    return BALANCE_C1 * n / k, BALANCE_C2 * n / k


def _stage1_exact(A, sub, grid):
    n, k = A.shape[0], sub.k
    M0, P = _template_parts(sub)
    iu = np.triu_indices(n, 1)
    x = A[iu]
    thetas = grid.values
    best = None
    lo, hi = _balanced_bounds(n, k)
    for phi in itertools.product(range(k), repeat=n):
        phi = np.asarray(phi)
        sizes = np.bincount(phi, minlength=k)
        if sizes.min() < lo or sizes.max() > hi:
            continue
        r = x - M0[phi[iu[0]], phi[iu[1]]]
        p = P[phi[iu[0]], phi[iu[1]]]
        # loss(theta) = sum (r - theta p)^2 at every grid point
        loss = np.sum(r * r) - 2 * thetas * np.sum(r * p) + thetas**2 * np.sum(p * p)
        j = int(np.argmin(loss))
        if best is None or loss[j] < best[0] - 1e-12:
            best = (float(loss[j]), phi, float(thetas[j]))
    if best is None:
        raise ValueError("no balanced labelling exists")
    return best


def _loss_and_theta(A, labels, M0, P, grid):
    n = A.shape[0]
    iu = np.triu_indices(n, 1)
    r = A[iu] - M0[labels[iu[0]], labels[iu[1]]]
    p = P[labels[iu[0]], labels[iu[1]]]
    pp = np.sum(p * p)
    theta = grid.nearest(np.sum(r * p) / pp) if pp > 0 else 0.0
    return float(np.sum((r - theta * p) ** 2)), theta


def _reassign(A, labels, M, lo, hi, rounds=1):
    # sequential coordinate descent on the squared loss with Sigma_e enforced
    n, k = A.shape[0], M.shape[0]
    labels = labels.copy()
    Z = np.zeros((n, k))
    Z[np.arange(n), labels] = 1.0
    XZ = A @ Z
    sizes = Z.sum(axis=0)
    M2 = M * M
    moved = 0
    for _ in range(rounds):
        changed = False
        for v in range(n):
            c = labels[v]
            cnt = sizes.copy()
            cnt[c] -= 1
            cost = -2 * M @ XZ[v] + M2 @ cnt
            if sizes[c] - 1 < lo:
                new = c
            else:
                allowed = (sizes + 1 <= hi) | (np.arange(k) == c)
                cost = np.where(allowed, cost, np.inf)
                new = int(np.argmin(cost))
                if cost[new] >= cost[c] - 1e-12:
                    new = c
            if new != c:
                XZ[:, c] -= A[:, v]
                XZ[:, new] += A[:, v]
                sizes[c] -= 1
                sizes[new] += 1
                labels[v] = new
                moved += 1
                changed = True
        if not changed:
            break
    return labels, moved


SWAP_MAX_N = 400


def _swap(A, labels, M, max_swaps=None):
    # best-improvement pair swaps; class sizes are preserved so Sigma_e is too
    n, k = A.shape[0], M.shape[0]
    if n > SWAP_MAX_N:
        return labels, 0
    labels = labels.copy()
    M2 = M * M
    swaps = 0
    for _ in range(n if max_swaps is None else max_swaps):
        Z = np.zeros((n, k))
        Z[np.arange(n), labels] = 1.0
        cnt = Z.sum(axis=0)[None, :] - Z
        C = -2 * (A @ Z) @ M.T + cnt @ M2.T
        D = C - C[np.arange(n), labels][:, None]
        Mc = M[labels][:, labels]
        corr = (2 * (A - Mc) ** 2 - (A - np.diag(M)[labels][None, :]) ** 2
                - (A - np.diag(M)[labels][:, None]) ** 2)
        gain = D[:, labels] + D[:, labels].T + corr
        gain[labels[:, None] == labels[None, :]] = np.inf
        u, v = np.unravel_index(int(np.argmin(gain)), gain.shape)
        if gain[u, v] >= -1e-12:
            break
        labels[u], labels[v] = labels[v], labels[u]
        swaps += 1
    return labels, swaps


def _random_balanced(n, k, rng):
    return Labelling.round_robin(n, k).assignment[rng.permutation(n)]


def _linkage_labels(A, k):
    """Average-linkage clusters of adjacency rows, comparing rows i and j
    off coordinates i and j so that the zero diagonal does not separate
    otherwise identical rows."""
    sq = np.sum(A * A, axis=1)
    D2 = sq[:, None] + sq[None, :] - 2 * A @ A - 2 * A * A
    D = np.sqrt(np.clip(D2, 0.0, None))
    np.fill_diagonal(D, 0.0)
    Z = linkage(squareform(D, checks=False), method="average")
    return fcluster(Z, t=k, criterion="maxclust") - 1


def _relabelings(dens, target):
    K = target.shape[0]
    if K <= 6:
        return [np.asarray(p) for p in itertools.permutations(range(K))]
    cost = (np.diag(dens)[:, None] - np.diag(target)[None, :]) ** 2
    _, col = linear_sum_assignment(cost)
    return [col]


def _spectral_inits(A, sub, rng):
    """Candidate starts from k-way clusterings and from a (k-1)-way clustering of
    the merged model with the theta block split by its two-class sign pattern."""
    from .spectral import block_densities, spectral_cluster
    k = sub.k
    out = []
    # row-distance linkage as well: on tiny graphs the zero diagonal adds
    # spurious eigenvalues that can displace an informative eigenvector
    for cl in (spectral_cluster(A, k, rng).labels.assignment, _linkage_labels(A, k)):
        dens, _ = block_densities(A, cl, k)
        out += [p[cl] for p in _relabelings(np.nan_to_num(dens, nan=0.5),
                                            build_mtheta(sub, 0.0))]
    cl = spectral_cluster(A, k - 1, rng).labels.assignment
    dens, _ = block_densities(A, cl, k - 1)
    for p in _relabelings(np.nan_to_num(dens, nan=0.5), sub.aggregated()):
        agg = p[cl]
        labels = np.where(agg == 0, 0, agg + 1)
        merged = np.flatnonzero(agg == 0)
        if merged.size >= 2:
            Y = 2.0 * A[np.ix_(merged, merged)] - 1.0
            np.fill_diagonal(Y, 0.0)
            labels[merged[_leading_sign(Y) < 0]] = 1
        out.append(labels)
    return out


def _descend(A, labels, M0, P, grid, lo, hi):
    loss, theta = _loss_and_theta(A, labels, M0, P, grid)
    for _ in range(ALTERNATION_ROUNDS):
        labels, moved = _reassign(A, labels, M0 + theta * P, lo, hi)
        if moved == 0:
            labels, moved = _swap(A, labels, M0 + theta * P)
        loss, theta = _loss_and_theta(A, labels, M0, P, grid)
        if moved == 0:
            break
    return loss, labels, theta


def _stage1_heuristic(A, sub, grid, rng):
    n, k = A.shape[0], sub.k
    M0, P = _template_parts(sub)
    lo, hi = _balanced_bounds(n, k)
    cands = [c for c in _spectral_inits(A, sub, rng)
             if is_balanced(Labelling(c, k), k, BALANCE_C1, BALANCE_C2)]
    cands.sort(key=lambda c: _loss_and_theta(A, c, M0, P, grid)[0])
    starts = cands[:RESTARTS - 1]
    starts += [_random_balanced(n, k, rng) for _ in range(RESTARTS - len(starts))]
    best = None
    for labels in starts:
        loss, labels, theta = _descend(A, labels, M0, P, grid, lo, hi)
        if best is None or loss < best[0] - 1e-12:
            best = (loss, labels, theta)
    return best


def mle_k_class(X, sub: SubmodelK, mode: str = "heuristic", rng=None) -> FitResult:
    """Two-stage least-squares / profile estimate for the ``k``-class submodel.

    Stage 1 minimises ``sum_{i<j} (X_ij - M^theta[sigma(i), sigma(j)])^2`` over
    balanced labellings and the theta grid.  Stage 2 reruns the two-class
    profile step on ``S_I``, the vertices stage 1 put in classes 0 and 1.
    The ``theta`` stored in ``sub`` is ignored.
    """
    rng = _as_rng(rng)
    A = adjacency_matrix(X)
    n, k = A.shape[0], sub.k
    grid = GridTheta(n)
    if mode == "exact":
        if n > EXACT_MAX_N_K or k > EXACT_MAX_K:
            raise ValueError(f"exact mode needs n <= {EXACT_MAX_N_K} and k <= {EXACT_MAX_K}")
        loss, labels, theta1 = _stage1_exact(A, sub, grid)
    elif mode == "heuristic":
        loss, labels, theta1 = _stage1_heuristic(A, sub, grid, rng)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    S_I = np.flatnonzero(labels < 2)
    if S_I.size < 2:
        raise ValueError("fewer than two vertices in the theta block; profile step undefined")
    sub_mode = "exact" if S_I.size <= EXACT_MAX_N_TWO else "heuristic"
    _, z = _profile(A[np.ix_(S_I, S_I)], sub_mode)
    b = S_I.size * (S_I.size - 1) / 2
    theta = min(0.5, max(-0.5, z / b))
    return FitResult(theta, Labelling(labels, k), abs(z), mode, S_I, theta1, loss)


@dataclass(frozen=True)
class KappaReport:
    kappa: float
    techm_ok: bool
    techc_ok: bool
    lhs: float
    rhs: float


def coefficient_kappa(sub: SubmodelK) -> float:
    """Half the smallest distance of a border coefficient from the base value."""
    iu = np.triu_indices(sub.B.shape[0])
    coefs = np.concatenate([sub.a, sub.B[iu]])
    if coefs.size == 0:
        return math.inf
    return float(np.min(np.abs(coefs - sub.base))) / 2


def check_kappa_conditions(sub: SubmodelK, n: int, d: float = 1.0) -> KappaReport:
    """Separation ``min |c - 1/2| >= 2 kappa`` and size ``k^3 log k <= d kappa^4 n``."""
    kappa = coefficient_kappa(sub)
    k = sub.k
    lhs = k**3 * math.log(k)
    rhs = d * kappa**4 * n
    return KappaReport(kappa, kappa > 0, bool(kappa > 0 and lhs <= rhs), lhs, rhs)
