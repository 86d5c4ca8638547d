"""Independent reference computations used by the tests.

Nothing here calls into the algorithm code; the only shared pieces are the
graph container and the ground-truth ranking.
"""

import itertools
import math

import numpy as np
from scipy import stats


def two_stage_inclusion(graph, n1, n2, page_cap=5000):
    """Exact probability that each W-entity ends up in the two-stage
    candidate set, by enumerating every ordered stage-one sample.

    Stage one draws ``n1`` alive V-entities uniformly with replacement.
    Candidates are the ``n2`` highest scores with uniformly random tie
    breaking over all W-entities (score-zero ones included), so an entity
    tied at the cut-off score ``t`` is picked with probability
    ``(n2 - #{S > t}) / #{S == t}``.
    """
    alive = [v for v in range(graph.n_v) if graph.alive[v]]
    adj = {v: list(graph.out_adj(v)[:page_cap]) for v in alive}
    M = graph.n_w
    n2 = min(n2, M)
    incl = np.zeros(M)
    outcomes = 0
    for sample in itertools.product(alive, repeat=n1):
        S = [0] * M
        for v in sample:
            for w in adj[v]:
                S[w] += 1
        t = sorted(S, reverse=True)[n2 - 1]
        above = sum(s > t for s in S)
        tied = sum(s == t for s in S)
        for w in range(M):
            if S[w] > t:
                incl[w] += 1.0
            elif S[w] == t:
                incl[w] += (n2 - above) / tied
        outcomes += 1
    return incl / outcomes


def poisson_pair_prob(lam_j, lam_n2):
    """``P(X > max(Y, 1))`` for independent Poisson X, Y, by direct summation
    over a generous range (no tail-mass stopping rule)."""
    def pmf(lam, x):
        if lam == 0:
            return float(x == 0)
        return math.exp(x * math.log(lam) - lam - math.lgamma(x + 1))

    top = int(lam_j + lam_n2 + 60 * math.sqrt(lam_j + lam_n2 + 1) + 60)
    total = 0.0
    for y in range(top):
        below = sum(pmf(lam_j, x) for x in range(max(y, 1) + 1))
        total += pmf(lam_n2, y) * max(0.0, 1.0 - below)
    return total


def binomial_pk(n1, N, F_k, F_n2):
    """``P(S_k > S_n2)`` for independent binomial hit counts."""
    a = stats.binom(n1, F_k / N)
    b = stats.binom(n1, F_n2 / N)
    s = np.arange(n1 + 1)
    return float(np.sum(b.pmf(s) * a.sf(s)))


def smallest_n1(N, m, F_m, k, n2, gamma_hat, eps):
    """Smallest integer ``n1`` whose normal-approximation score for rank k
    versus rank n2 reaches the ``1 - eps`` quantile, with both degrees
    extrapolated from ``F_m`` by the Pareto quantile rule ``F_j = F_m (m/j)^gamma_hat``.
    Found by doubling then bisecting on the integer line."""
    z = stats.norm.ppf(1 - eps)
    F_k = F_m * (m / k) ** gamma_hat
    F_n2 = F_m * (m / n2) ** gamma_hat

    def ok(n1):
        return math.sqrt(n1 / N) * (F_k - F_n2) / math.sqrt(F_k + F_n2) >= z

    hi = 1
    while not ok(hi):
        hi *= 2
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi
