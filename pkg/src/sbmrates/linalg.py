"""Dense symmetric eigen-solvers.

Two routes are offered for the leading spectrum:

* ``method="power"`` / ``method="subspace"``: power iteration and orthogonal
  (subspace) iteration written here, each with Rayleigh-Ritz extraction.
* ``method="scipy"``: LAPACK for small matrices and ARPACK otherwise.  The
  estimators default to this route; at the edge of a noise bulk the plain
  iterations need thousands of matrix-vector products.

:func:`jacobi_full_eigen` is an independent cyclic-Jacobi oracle.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000
JACOBI_MAX_N = 512
# below this size the scipy route uses a full LAPACK decomposition
DENSE_CUTOFF = 128


@dataclass(frozen=True)
class EigenPair:
    value: float
    vector: np.ndarray
    residual: float = 0.0
    converged: bool = True
    flags: tuple[str, ...] = ()


def symmetric(A) -> np.ndarray:
    """Copy of ``A`` made exactly symmetric from its upper triangle."""
    A = np.array(A, dtype=float, copy=True)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max(initial=0))):
        raise ValueError("matrix must be symmetric")
    U = np.triu(A, 1)
    return U + U.T + np.diag(np.diag(A))


def frobenius_norm(A) -> float:
    return float(np.sqrt(np.sum(np.square(np.asarray(A, dtype=float)))))


def _fix_sign(v: np.ndarray) -> np.ndarray:
    # largest-modulus coordinate positive; first one wins on ties
    i = int(np.argmax(np.abs(v)))
    return -v if v[i] < 0 else v


def _start_vector(n: int, seed: int) -> np.ndarray:
    v = np.random.default_rng(seed).standard_normal(n)
    return v / np.linalg.norm(v)


def largest_abs_eigenvalue(A, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                           method: str = "power", seed: int = 0) -> EigenPair:
    """Signed eigenvalue of maximal modulus and its unit eigenvector.

    ``tol`` is relative: convergence means ``|A v - lam v| <= tol * |A|_F``.
    When ``+lam`` and ``-lam`` tie in modulus the positive one is returned
    with the ``"sign_tie"`` flag (power route only).
    """
    A = symmetric(A)
    scale = frobenius_norm(A)
    if scale == 0:
        raise ValueError("matrix is zero")
    if method == "power":
        return _power(A, tol, max_iter, seed, scale)
    if method == "scipy":
        pairs = _scipy_top(A, 1, tol, seed)
        return pairs[0]
    raise ValueError(f"unknown method {method!r}")


def _power(A, tol, max_iter, seed, scale) -> EigenPair:
    n = A.shape[0]
    if n == 1:
        return EigenPair(float(A[0, 0]), np.ones(1))
    # Ritz extraction on span{v, Av} each step: recovers the sign of the
    # dominant eigenvalue and resolves +/- ties where plain power iteration
    # oscillates.
    restarts = 0
    v = _start_vector(n, seed)
    w = A @ v
    best = None
    stall, best_res = 0, np.inf
    for it in range(max_iter):
        nw = np.linalg.norm(w)
        if nw == 0:
            restarts += 1
            v = _start_vector(n, seed + restarts)
            w = A @ v
            continue
        x = w / nw
        y = A @ x
        c = float(v @ x)
        q2 = x - c * v
        nq = np.linalg.norm(q2)
        if nq < 1e-14:
            # v is already an eigenvector
            lam = float(v @ w)
            res = float(np.linalg.norm(w - lam * v))
            cand = (lam, v, res, ())
        else:
            q2 /= nq
            Aq2 = (y - c * w) / nq
            H = np.array([[v @ w, v @ Aq2], [v @ Aq2, q2 @ Aq2]])
            mu, C = np.linalg.eigh(H)
            order = np.argsort(-np.abs(mu))
            mu, C = mu[order], C[:, order]
            flags = ()
            if abs(abs(mu[0]) - abs(mu[1])) <= tol * scale and mu[0] * mu[1] < 0:
                j = 0 if mu[0] > 0 else 1
                flags = ("sign_tie",)
            else:
                j = 0
            u = C[0, j] * v + C[1, j] * q2
            Au = C[0, j] * w + C[1, j] * Aq2
            res = float(np.linalg.norm(Au - mu[j] * u))
            cand = (float(mu[j]), u, res, flags)
        if best is None or cand[2] < best[2]:
            best = cand
        if cand[2] <= tol * scale:
            lam, u, res, flags = cand
            return EigenPair(lam, _fix_sign(u / np.linalg.norm(u)), res, True, flags)
        if cand[2] < 0.999 * best_res:
            best_res, stall = cand[2], 0
        else:
            stall += 1
        if stall > 500:
            restarts += 1
            stall, best_res = 0, np.inf
            x = _start_vector(n, seed + restarts)
            y = A @ x
        v, w = x, y
    lam, u, res, flags = best
    warnings.warn("power iteration did not converge", RuntimeWarning, stacklevel=3)
    return EigenPair(lam, _fix_sign(u / np.linalg.norm(u)), res, False, flags + ("no_convergence",))


def top_k_eigenpairs(A, K: int, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                     method: str = "subspace", seed: int = 0) -> list[EigenPair]:
    """The ``K`` eigenpairs of largest modulus, ordered by decreasing ``|value|``.

    A ``"gap_degenerate"`` flag is attached to every pair when
    ``|lam_K| - |lam_{K+1}| < tol * |A|_F``; the subspace is still returned.
    """
    A = symmetric(A)
    n = A.shape[0]
    if not 1 <= K <= n:
        raise ValueError("need 1 <= K <= n")
    if method == "subspace":
        return _subspace(A, K, tol, max_iter, seed)
    if method == "scipy":
        return _scipy_top(A, K, tol, seed)
    raise ValueError(f"unknown method {method!r}")


def _ritz(A, Q, AQ, K, scale, tol):
    H = Q.T @ AQ
    H = (H + H.T) / 2
    mu, C = np.linalg.eigh(H)
    order = np.argsort(-np.abs(mu), kind="stable")
    mu, C = mu[order], C[:, order]
    U = Q @ C
    R = AQ @ C - U * mu
    res = np.linalg.norm(R, axis=0)
    return mu, U, res


def _package(mu, U, res, K, scale, tol, converged) -> list[EigenPair]:
    flags = ()
    if mu.size > K and abs(mu[K - 1]) - abs(mu[K]) < tol * max(scale, 1.0):
        flags = ("gap_degenerate",)
    if not converged:
        flags += ("no_convergence",)
    return [EigenPair(float(mu[i]), _fix_sign(U[:, i] / np.linalg.norm(U[:, i])),
                      float(res[i]), converged, flags) for i in range(K)]


def _subspace(A, K, tol, max_iter, seed) -> list[EigenPair]:
    n = A.shape[0]
    scale = frobenius_norm(A)
    p = min(n, K + max(4, K))
    Q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, p)))
    AQ = A @ Q
    if p == n or scale == 0:
        mu, U, res = _ritz(A, Q, AQ, K, scale, tol)
        return _package(mu, U, res, K, scale, tol, True)
    for _ in range(max_iter):
        mu, U, res = _ritz(A, Q, AQ, K, scale, tol)
        if np.all(res[:K] <= tol * scale):
            return _package(mu, U, res, K, scale, tol, True)
        Q, _ = np.linalg.qr(AQ)
        AQ = A @ Q
    warnings.warn("subspace iteration did not converge", RuntimeWarning, stacklevel=3)
    return _package(mu, U, res, K, scale, tol, False)


def _scipy_top(A, K, tol, seed) -> list[EigenPair]:
    n = A.shape[0]
    scale = frobenius_norm(A)
    if n <= DENSE_CUTOFF or K >= n - 1:
        mu, U = np.linalg.eigh(A)
        # moduli equal up to rounding count as ties, and ties go to the larger value
        mod = np.round(np.abs(mu) / max(scale, 1.0), 10)
        order = np.lexsort((-mu, -mod))
        mu, U = mu[order], U[:, order]
        res = np.linalg.norm(A @ U[:, :K] - U[:, :K] * mu[:K], axis=0)
        return _package(mu, U, np.concatenate([res, np.zeros(n - K)]), K, scale, tol, True)
    v0 = _start_vector(n, seed)
    converged = True
    try:
        mu, U = eigsh(A, k=K, which="LM", tol=tol, v0=v0)
    except ArpackNoConvergence as err:
        converged = False
        mu, U = err.eigenvalues, err.eigenvectors
        if mu.size < K:
            raise
    order = np.argsort(-np.abs(mu), kind="stable")
    mu, U = mu[order], U[:, order]
    res = np.linalg.norm(A @ U - U * mu, axis=0)
    return _package(mu, U, res, K, scale, tol, converged)


def jacobi_full_eigen(A, tol: float = 1e-12, max_sweeps: int = 100) -> list[EigenPair]:
    """Full decomposition by cyclic Jacobi rotations, sorted by decreasing value.

    Sweeps stop once the off-diagonal Frobenius mass is at most ``tol * |A|_F``.
    """
    A = symmetric(A)
    A0 = A.copy()
    n = A.shape[0]
    if n > JACOBI_MAX_N:
        raise ValueError(f"Jacobi oracle limited to n <= {JACOBI_MAX_N}")
    V = np.eye(n)
    target = tol * frobenius_norm(A)
    converged = False
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(A**2) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= target:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                app, aqq = A[p, p], A[q, q]
                diff = aqq - app
                if abs(diff) > 1e100 * abs(apq):
                    t = apq / diff
                else:
                    tau = diff / (2.0 * apq)
                    t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau)) if tau != 0 else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rp, rq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                cp, cq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                A[p, q] = A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    vals = np.diag(A).copy()
    order = np.argsort(-vals, kind="stable")
    flags = () if converged else ("no_convergence",)
    res = np.linalg.norm(A0 @ V - V * vals, axis=0)
    return [EigenPair(float(vals[i]), _fix_sign(V[:, i]), float(res[i]), converged, flags)
            for i in order]
