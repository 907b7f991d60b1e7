"""Graphon standard deviation ``tau(w) = [ int (w - int w)^2 ]^(1/2)``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Graphon, _as_rng, adjacency_matrix
from .spectral import block_densities, refine_labels, spectral_cluster

MIN_GRID = 64


@dataclass(frozen=True)
class FunctionalValue:
    tau: float
    method: str
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.tau >= 0:
            raise ValueError("tau must be nonnegative")

    def __float__(self):
        return self.tau


def _block_tau(pi, M) -> float:
    W = np.outer(pi, pi)
    mean = float(np.sum(W * M))
    return math.sqrt(max(float(np.sum(W * (M - mean) ** 2)), 0.0))


def _poly_tau(c: np.ndarray) -> float:
    d = c.shape[0]
    inv = 1.0 / (np.arange(d) + 1.0)
    mean = float(inv @ c @ inv)
    # int w^2 = sum c_pq c_rs / ((p + r + 1)(q + s + 1))
    H = 1.0 / (np.arange(d)[:, None] + np.arange(d)[None, :] + 1.0)
    second = float(np.einsum("pq,rs,pr,qs->", c, c, H, H))
    return math.sqrt(max(second - mean * mean, 0.0))


def tau_exact(w: Graphon) -> FunctionalValue:
    """Closed form: block sums for block graphons, monomial integrals for polynomials."""
    if w.variant == "block":
        return FunctionalValue(_block_tau(w.pi, w.M), "closed_form")
    return FunctionalValue(_poly_tau(w.coef), "closed_form")


def tau_quadrature(w: Graphon, grid: int = 1024) -> FunctionalValue:
    """Midpoint rule on a ``grid x grid`` mesh; error O(grid^-2) for smooth ``w``."""
    if grid < MIN_GRID:
        raise ValueError(f"grid must be at least {MIN_GRID}")
    g = (np.arange(grid) + 0.5) / grid
    W = w(g[:, None], g[None, :])
    mean = W.mean()
    return FunctionalValue(math.sqrt(max(float(np.mean((W - mean) ** 2)), 0.0)), "quadrature")


def default_plugin_k(n: int) -> int:
    return max(1, math.ceil(n ** (1 / 3)))


def tau_plugin(X, k: int | None = None, rng=None) -> FunctionalValue:
    """Plug-in estimate from a ``k``-block fit of the observed graph.

    Labels come from spectral clustering plus likelihood refinement; block
    means are the empirical densities and proportions the class frequencies.
    """
    rng = _as_rng(rng)
    A = adjacency_matrix(X)
    n = A.shape[0]
    k = default_plugin_k(n) if k is None else k
    if k < 1 or n < 2 * k:
        raise ValueError("need k >= 1 and n >= 2k")
    if k == 1:
        return FunctionalValue(0.0, "plugin")
    cl = refine_labels(A, spectral_cluster(A, k, rng), k)
    labels = cl.labels.assignment
    dens, _ = block_densities(A, labels, k)
    pi = np.bincount(labels, minlength=k) / n
    flags = cl.flags
    if np.any(np.isnan(dens)):
        # a singleton class has no within-class pairs; use its row mean
        flags += ("degenerate_block",)
        dens = np.where(np.isnan(dens), np.nanmean(dens), dens)
    return FunctionalValue(_block_tau(pi, dens), "plugin", flags)
