"""Performance predictions for the two-stage algorithm.

The Poisson prediction treats stage-one hit counts as independent Poisson
variables with means ``n1 * F_j / N`` and credits rank ``j`` when its count
beats ``max(S_{n2}, 1)``.  The EVT prediction replaces unknown degrees
beyond the top ``m`` by Hill-extrapolated quantiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

POISSON = "poisson-known-degrees"
EVT = "evt-extrapolated"
TAIL_MASS = 1e-12


@dataclass
class PredictionVector:
    p_hat: np.ndarray
    provenance: str
    n1: int
    n2: int
    N: int
    degrees: np.ndarray = field(default=None, repr=False)

    def expected_fraction(self, k: int) -> float:
        return expected_fraction(self, k)

    def expected_first_error(self) -> float:
        return expected_first_error(self)


@dataclass
class TailFit:
    gamma_hat: float
    m: int
    f_hat: np.ndarray


def binomial_hit_moments(F_j: float, n1: int, N: int) -> tuple[float, float]:
    """Mean and variance of a degree-``F_j`` entity's stage-one hit count."""
    p = F_j / N
    return n1 * p, n1 * p * (1.0 - p)


def poisson_predict(degrees, n1: int, N: int, provenance: str = POISSON) -> PredictionVector:
    """``P(S_j > max(S_{n2}, 1))`` for each j, with all ``S`` independent Poisson.

    The last rank is compared against an independent copy of itself.
    """
    F = np.asarray(degrees, dtype=float)
    if F.ndim != 1 or len(F) == 0:
        raise ValueError("need a non-empty degree sequence")
    if n1 < 1:
        raise ValueError("n1 must be >= 1")
    if np.any(F < 0) or np.any(np.diff(F) > 1e-9 * max(1.0, F[0])):
        raise ValueError("degrees must be non-negative and non-increasing")
    if F[0] > N:
        raise ValueError("F_1 exceeds N")
    lam = n1 * F / N
    lam_last = lam[-1]
    # threshold values s = 0..s_max until the remaining tail mass is negligible
    s_max = int(stats.poisson.isf(TAIL_MASS, lam_last)) + 1 if lam_last > 0 else 0
    s = np.arange(s_max + 1)
    weights = stats.poisson.pmf(s, lam_last)
    # P(S_j > max(s, 1)) = sf(max(s, 1))
    tail = stats.poisson.sf(np.maximum(s, 1)[None, :], lam[:, None])
    p_hat = np.clip(tail @ weights, 0.0, 1.0)
    return PredictionVector(p_hat=p_hat, provenance=provenance, n1=n1, n2=len(F), N=N,
                            degrees=F)


def expected_fraction(pv: PredictionVector, k: int) -> float:
    if not 1 <= k <= len(pv.p_hat):
        raise ValueError(f"k={k} outside [1, {len(pv.p_hat)}]")
    return float(np.mean(pv.p_hat[:k]))


def expected_first_error(pv: PredictionVector) -> float:
    """``sum_{j=1}^{n2+1} prod_{l<j} P_l``."""
    return float(1.0 + np.cumprod(pv.p_hat).sum())


def hill(top_degrees) -> float:
    """Hill estimate of the tail index from the ``m`` largest values."""
    F = np.asarray(top_degrees, dtype=float)
    if len(F) < 2:
        raise ValueError("Hill estimator needs m >= 2")
    if np.any(F <= 0):
        raise ValueError("degrees must be positive")
    if np.any(np.diff(F) > 0):
        raise ValueError("degrees must be non-increasing")
    logs = np.log(F)
    return float(np.mean(logs[:-1] - logs[-1]))


def evt_quantiles(F_m: float, gamma_hat: float, m: int, j_range) -> np.ndarray:
    """Extrapolated degrees ``F_m * (m / (j - 1)) ** gamma_hat``."""
    j = np.asarray(j_range, dtype=float)
    if np.any(j <= 1):
        raise ValueError("ranks must exceed 1")
    if gamma_hat < 0:
        raise ValueError("gamma_hat must be >= 0")
    return F_m * (m / (j - 1.0)) ** gamma_hat


def fit_tail(top_degrees, n2: int) -> TailFit:
    F = np.asarray(top_degrees, dtype=float)
    m = len(F)
    g = hill(F)
    return TailFit(gamma_hat=g, m=m, f_hat=evt_quantiles(F[-1], g, m, np.arange(m + 1, n2 + 1)))


def evt_predict(result, n1: int, n2: int, N: int, m: int | None = None) -> PredictionVector:
    """Poisson prediction on the found top-``m`` degrees followed by
    Hill-extrapolated degrees for ranks ``m+1..n2``.

    ``result`` is a ranked result (or plain degree sequence); its first ``m``
    degrees are used (all of them when ``m`` is None).
    """
    top = np.asarray(getattr(result, "degrees", result), dtype=float)
    if m is not None:
        top = top[:m]
    if len(top) >= n2:
        raise ValueError(f"m={len(top)} must be smaller than n2={n2}")
    fit = fit_tail(top, n2)
    spliced = np.concatenate([top, fit.f_hat])
    return poisson_predict(spliced, n1, N, provenance=EVT)


def optimal_n2(n: int, k: int, gamma: float) -> int:
    """Asymptotically best second-stage size ``(3 gamma k^gamma n)^(1/(gamma+1))``,
    rounded and clamped to ``[1, n-1]``."""
    if not 1 <= k < n:
        raise ValueError("need 1 <= k < n")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    n2 = round((3.0 * gamma * k ** gamma * n) ** (1.0 / (gamma + 1.0)))
    return int(min(max(n2, 1), n - 1))


def normal_approx_pk(n1: int, N: int, F_k: float, F_n2: float) -> float:
    """Normal approximation of the chance that rank k outscores rank n2."""
    if F_k < F_n2 or F_n2 < 0 or F_k + F_n2 == 0:
        raise ValueError("need F_k >= F_n2 >= 0, not both zero")
    z = math.sqrt(n1 / N) * (F_k - F_n2) / math.sqrt(F_k + F_n2)
    return float(stats.norm.cdf(z))


def min_n1_bound(N: int, m: int, F_m: float, k: int, n2: int, gamma_hat: float,
                 eps: float) -> int:
    """Smallest first-stage size for which the normal approximation promises
    a top-k fraction of at least ``1 - eps`` (degrees extrapolated from ``F_m``)."""
    if k >= n2:
        raise ValueError("bound undefined unless k < n2")
    if not 0 < eps <= 0.5:
        raise ValueError("eps must lie in (0, 0.5]")
    z = stats.norm.ppf(1.0 - eps)
    a = k ** -gamma_hat
    b = n2 ** -gamma_hat
    return math.ceil(N * z * z * (a + b) / (F_m * m ** gamma_hat * (a - b) ** 2))


def complexity_scale(N: float, M: float, gamma: float, C: float = 1.0) -> float:
    """Budget order ``C * N / M**gamma`` for a pure-Pareto degree law."""
    if min(N, M, gamma, C) <= 0:
        raise ValueError("parameters must be positive")
    return C * N / M ** gamma
