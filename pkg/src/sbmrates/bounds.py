"""Minimax lower-bound arithmetic for the two-class and k-class problems.

The main chain: with ``s_n = sqrt(n(n-1)/2)`` and ``theta_n^2 = 1/(12 s_n)``
the chi-square distance between the null law and the label mixture is at most
``r(1/3)``, and Le Cam's point-versus-mixture inequality turns that into the
rate ``theta_n^2/4 (1 - sqrt(r(1/3))/2)``.  Enumeration oracles for tiny
graphs check each inequality on exact laws.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import DiscreteLaw

TV_ORACLE_MAX_N = 5
BAYES_MAX_OUTCOMES = 16
CLAIMED_C1 = 1 / 107
C0_REMARK = 1 / (3 * 2**0.75)


@dataclass(frozen=True)
class BoundReport:
    rate: float
    constants: dict
    regime: str = "dense"
    symbolic: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.rate >= 0:
            raise ValueError("rate must be nonnegative")
        bad = [k for k, v in self.constants.items() if not math.isfinite(v)]
        if bad:
            raise ValueError(f"non-finite intermediates: {bad}")

    def as_dict(self) -> dict:
        return {"rate": self.rate, "regime": self.regime, "constants": dict(self.constants),
                "symbolic": dict(self.symbolic)}


def rademacher_r(delta: float) -> float:
    """Laplace-transform bound for the Rademacher chaos,
    ``d + d^2/2 + 8 d^3/6 + (e d)^4 / (sqrt(8 pi) (1 - e d))`` for ``0 <= d < 1/e``."""
    if not 0 <= delta < 1 / math.e:
        raise ValueError("delta must lie in [0, 1/e)")
    ed = math.e * delta
    return delta + delta**2 / 2 + 8 * delta**3 / 6 + ed**4 / (math.sqrt(8 * math.pi) * (1 - ed))


def lecam_bound(theta: float, tau: float, tv: float) -> float:
    """Point-versus-mixture bound ``(theta - tau)^2 / 4 * (1 - tv/2)``, floored at 0.

    ``tv`` is the L1 distance, in ``[0, 2]``.
    """
    if not 0 <= tv <= 2:
        raise ValueError("tv must lie in [0, 2]")
    return max(0.0, 0.25 * (theta - tau) ** 2 * (1 - tv / 2))


def chi2_mixture_bound(base_probs, component_probs) -> float:
    """Chi-square distance of a uniform mixture of Bernoulli products from a base product.

    ``base_probs[i] = s_i`` and ``component_probs[k, i] = q_i(k)``.  Returns
    ``N^-2 sum_{k,l} prod_i (1 + D_ki D_li) - 1`` with ``D = (q - s)/sqrt(s(1-s))``.
    """
    s = np.asarray(base_probs, dtype=float).ravel()
    Q = np.atleast_2d(np.asarray(component_probs, dtype=float))
    if Q.shape[1] != s.size:
        raise ValueError("component and base dimensions differ")
    if np.any((s <= 0) | (s >= 1)):
        raise ValueError("base probabilities must lie strictly inside (0, 1)")
    D = (Q - s) / np.sqrt(s * (1 - s))
    N = D.shape[0]
    total = 0.0
    for k in range(N):
        total += float(np.sum(np.prod(1.0 + D[k] * D, axis=1)))
    return total / N**2 - 1.0


def tv_oracle(law1: DiscreteLaw, law2: DiscreteLaw) -> float:
    """Exact L1 distance by summing over every adjacency outcome (``n <= 5``)."""
    if law1.n != law2.n:
        raise ValueError("laws live on different vertex counts")
    if law1.n > TV_ORACLE_MAX_N:
        raise ValueError(f"enumeration limited to n <= {TV_ORACLE_MAX_N}")
    return float(np.sum(np.abs(law1.prob - law2.prob)))


def mixture_restriction_bound(N: int, R: int) -> float:
    """L1 distance bound ``2(1 - R/N)`` between a uniform N-mixture and its R-sub-mixture."""
    if not 1 <= R <= N:
        raise ValueError("need 1 <= R <= N")
    return 2.0 * (1.0 - R / N)


def two_point_minimax_risk(law_p: DiscreteLaw, law_q: DiscreteLaw, theta_p: float,
                           theta_q: float) -> float:
    """Smallest worst-case quadratic risk over all deterministic rules into {theta_p, theta_q}.

    Every map from outcomes to the two values is tried.
    """
    m = law_p.prob.size
    if m > BAYES_MAX_OUTCOMES:
        raise ValueError(f"rule search limited to {BAYES_MAX_OUTCOMES} outcomes")
    loss = (theta_p - theta_q) ** 2
    best = math.inf
    for rule in range(2**m):
        pick_q = np.array([(rule >> i) & 1 for i in range(m)], dtype=bool)
        risk_p = loss * float(law_p.prob[pick_q].sum())
        risk_q = loss * float(law_q.prob[~pick_q].sum())
        best = min(best, max(risk_p, risk_q))
    return best


def two_class_lower_bound(n: int) -> BoundReport:
    """``theta_n^2/4 (1 - sqrt(r(4 theta_n^2 s_n))/2)`` with all intermediates.

    Both normalisations of ``theta_n`` are reported: ``(12 s_n)^(-1/2)`` used
    in the rate and ``c0/sqrt(n)`` with ``c0 = 1/(3 * 2^(3/4))``.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    s_n = math.sqrt(n * (n - 1) / 2)
    theta_sq = 1 / (12 * s_n)
    delta = 4 * theta_sq * s_n
    r = rademacher_r(delta)
    tv = math.sqrt(r)
    rate = theta_sq / 4 * (1 - tv / 2)
    constants = {
        "n": n, "s_n": s_n, "theta_n": math.sqrt(theta_sq), "theta_n_sq": theta_sq,
        "delta": delta, "r_delta": r, "tv_bound": tv, "rate_times_n": rate * n,
        "c0": C0_REMARK, "theta_n_c0": C0_REMARK / math.sqrt(n),
        "c1_claimed": CLAIMED_C1, "c1_derived_limit": math.sqrt(2) * (1 - tv / 2) / 48,
    }
    return BoundReport(rate, constants, "dense")


def k_class_lower_rate(n: int, k: int, alpha: float = 1.0) -> BoundReport:
    """Rate shape ``min(1, k/(n alpha))``; the multiplying constant is not numeric."""
    if n < 1 or k < 2 or not 0 < alpha <= 1:
        raise ValueError("need n >= 1, k >= 2 and alpha in (0, 1]")
    if n < 12 * k:
        warnings.warn(f"n={n} is below 12k={12 * k}", RuntimeWarning, stacklevel=2)
    rate = min(1.0, k / (n * alpha))
    regime = "dense" if alpha == 1 else "sparse"
    return BoundReport(rate, {"n": n, "k": k, "alpha": alpha, "n_alpha": n * alpha}, regime,
                       {"multiplier": "c3 (unspecified)", "form": "c3 * min(1, k/(n*alpha))"})
