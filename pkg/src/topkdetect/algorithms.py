"""Top-k in-degree detection strategies.

All strategies see the graph only through an :class:`~topkdetect.oracle.ApiOracle`
and stop gracefully when its budget runs out, returning the best answer so
far with ``partial=True``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .oracle import RELAXED, STRICT, BudgetExhausted, DeadEntity

TWO_STAGE = "two_stage"
RANDOM_WALK_STRICT = "random_walk_strict"
RANDOM_WALK_RELAXED = "random_walk_relaxed"
CRAWL_GAI = "crawl_gai"
CRAWL_AI = "crawl_ai"
HIGHEST_DEGREE = "highest_degree"
ALGORITHMS = (TWO_STAGE, RANDOM_WALK_STRICT, RANDOM_WALK_RELAXED, CRAWL_GAI, CRAWL_AI,
              HIGHEST_DEGREE)


@dataclass
class ScoreTable:
    """Hit counts ``S[w]`` from the first stage; only nonzero entries are stored."""

    ids: np.ndarray
    hits: np.ndarray

    @classmethod
    def from_neighbors(cls, neighbors: np.ndarray) -> "ScoreTable":
        ids, hits = np.unique(neighbors, return_counts=True)
        return cls(ids=ids, hits=hits)

    def __len__(self):
        return len(self.ids)

    def __getitem__(self, w) -> int:
        i = np.searchsorted(self.ids, w)
        return int(self.hits[i]) if i < len(self.ids) and self.ids[i] == w else 0

    def as_dict(self) -> dict:
        return dict(zip(self.ids.tolist(), self.hits.tolist()))


@dataclass
class RankedResult:
    ids: np.ndarray
    degrees: np.ndarray
    spent: int
    algorithm: str
    params: dict = field(default_factory=dict)
    partial: bool = False

    def __len__(self):
        return len(self.ids)

    def top(self, m: int) -> "RankedResult":
        return RankedResult(self.ids[:m], self.degrees[:m], self.spent, self.algorithm,
                            dict(self.params), self.partial)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rank", "id", "degree", "spent"])
        for rank, (i, d) in enumerate(zip(self.ids.tolist(), self.degrees.tolist()), 1):
            w.writerow([rank, i, d, self.spent])
        return buf.getvalue()


def _ranked(ids, degrees, k, rng, oracle, name, params, partial) -> RankedResult:
    """Sort by degree descending with uniformly random tie order; keep ``k``."""
    ids = np.asarray(ids, dtype=np.int64)
    degrees = np.asarray(degrees, dtype=np.int64)
    order = np.lexsort((rng.random(len(ids)), -degrees))
    if k is not None:
        order = order[:k]
    return RankedResult(ids[order], degrees[order], oracle.spent, name, params, partial)


def select_candidates(scores: ScoreTable, n2: int, n_w: int, rng) -> np.ndarray:
    """The ``n2`` highest-scored W-IDs, random among equal scores.

    When fewer than ``n2`` entities were hit, the rest are uniformly random
    unseen IDs (this is the same as random tie-breaking at score zero).
    """
    n2 = min(n2, n_w)
    order = np.lexsort((rng.random(len(scores)), -scores.hits))
    chosen = scores.ids[order[:n2]]
    short = n2 - len(chosen)
    if short > 0:
        unseen = np.setdiff1d(np.arange(n_w), scores.ids, assume_unique=True)
        chosen = np.concatenate([chosen, rng.choice(unseen, size=short, replace=False)])
    return chosen


def two_stage(oracle, n1: int, n2: int, rng=None) -> RankedResult:
    """Sample ``n1`` random entities, tally their out-neighbours, then fetch
    exact in-degrees of the ``n2`` most-hit candidates."""
    if n1 < 1 or n2 < 1:
        raise ValueError("n1 and n2 must be >= 1")
    rng = np.random.default_rng(rng)
    params = {"n1": n1, "n2": n2}
    partial = False
    try:
        sample = oracle.random_entities(n1)
    except BudgetExhausted as exc:
        sample, partial = exc.partial, True
    scores = ScoreTable.from_neighbors(oracle.out_neighbors_many(sample))
    candidates = select_candidates(scores, n2, oracle.n_w, rng)
    take = min(len(candidates), oracle.remaining())
    if take < len(candidates):
        partial = True
    candidates = candidates[:take]
    degrees = oracle.in_degrees(candidates)
    return _ranked(candidates, degrees, None, rng, oracle, TWO_STAGE, params, partial)


def random_walk(oracle, n: int, k: int, alpha: float = 100.0, mode: str = STRICT,
                rng=None) -> RankedResult:
    """Random walk with uniform jumps on the undirected view.

    From ``v`` with undirected degree ``D`` the walk follows a uniform
    neighbour with probability ``D / (D + alpha)`` and jumps to a random
    entity otherwise.  Visited entities are ranked by the in-degree that
    comes with their neighbour list.  The oracle's budget bounds the walk:
    API requests in strict mode, visited vertices in relaxed mode (where
    every visit costs one request).
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if mode not in (STRICT, RELAXED):
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(rng)
    name = RANDOM_WALK_STRICT if mode == STRICT else RANDOM_WALK_RELAXED
    params = {"n": n, "k": k, "alpha": alpha, "mode": mode}
    seen: dict[int, int] = {}
    visits = 0
    partial = False
    page = None
    try:
        while visits < n:
            if page is not None and rng.random() < page.degree / (page.degree + alpha):
                v = int(page.neighbors[rng.integers(len(page.neighbors))])
            else:
                v = oracle.random_entity()
            try:
                page = oracle.undirected_neighbors(v, mode)
            except DeadEntity:
                page = None
                continue
            visits += 1
            seen[v] = page.in_degree
            if not page.complete:
                partial = True
                break
    except BudgetExhausted:
        # running out of budget is how a walk normally ends
        pass
    return _ranked(list(seen), list(seen.values()), k, rng, oracle, name, params, partial)


def _crawl(oracle, n: int, k: int, rng, greedy: bool) -> RankedResult:
    if not oracle.directed:
        raise ValueError("crawling needs a directed graph (W aliasing V)")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(rng)
    size = oracle.n_w
    apparent = np.zeros(size, dtype=np.int64)
    # crawled nodes are masked to -1 so they never win a selection
    pick_from = np.zeros(size, dtype=np.int64)
    steps = 0
    left = size
    partial = False
    while steps < n and left > 0:
        top = pick_from.max()
        if top <= 0:
            pool = np.flatnonzero(pick_from == 0)
            v = int(pool[rng.integers(len(pool))])
        elif greedy:
            pool = np.flatnonzero(pick_from == top)
            v = int(pool[rng.integers(len(pool))])
        else:
            weights = np.maximum(pick_from, 0).cumsum()
            v = int(np.searchsorted(weights, rng.random() * weights[-1], side="right"))
        pick_from[v] = -1
        left -= 1
        try:
            nbrs = oracle.out_neighbors(v)
        except DeadEntity:
            continue
        except BudgetExhausted:
            partial = True
            break
        steps += 1
        np.add.at(apparent, nbrs, 1)
        live = pick_from[nbrs] >= 0
        np.add.at(pick_from, nbrs[live], 1)
    name = CRAWL_GAI if greedy else CRAWL_AI
    hit = np.flatnonzero(apparent)
    return _ranked(hit, apparent[hit], k, rng, oracle, name, {"n": n, "k": k}, partial)


def crawl_gai(oracle, n: int, k: int, rng=None) -> RankedResult:
    """Always crawl the uncrawled node with the highest apparent in-degree."""
    return _crawl(oracle, n, k, rng, greedy=True)


def crawl_ai(oracle, n: int, k: int, rng=None) -> RankedResult:
    """Crawl an uncrawled node drawn proportionally to apparent in-degree."""
    return _crawl(oracle, n, k, rng, greedy=False)


def highest_degree(oracle, n: int, k: int, rng=None) -> RankedResult:
    """Take a random entity, then pay one request per out-neighbour to read its
    in-degree; repeat while budget lasts."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(rng)
    found: dict[int, int] = {}
    queue: list[int] = []
    partial = False
    try:
        for _ in range(n):
            if not queue:
                v = oracle.random_entity()
                queue = oracle.out_neighbors(v).tolist()
            else:
                w = queue.pop()
                found[w] = oracle.in_degree(w)
    except BudgetExhausted:
        partial = True
    return _ranked(list(found), list(found.values()), k, rng, oracle, HIGHEST_DEGREE,
                   {"n": n, "k": k}, partial)


def run_algorithm(name: str, oracle, *, n: int, k: int, n1: int | None = None,
                  n2: int | None = None, alpha: float = 100.0, rng=None) -> RankedResult:
    """Dispatch by name; the oracle's budget is expected to equal ``n``."""
    if name == TWO_STAGE:
        return two_stage(oracle, n1, n2, rng)
    if name == RANDOM_WALK_STRICT:
        return random_walk(oracle, n, k, alpha, STRICT, rng)
    if name == RANDOM_WALK_RELAXED:
        return random_walk(oracle, n, k, alpha, RELAXED, rng)
    if name == CRAWL_GAI:
        return crawl_gai(oracle, n, k, rng)
    if name == CRAWL_AI:
        return crawl_ai(oracle, n, k, rng)
    if name == HIGHEST_DEGREE:
        return highest_degree(oracle, n, k, rng)
    raise ValueError(f"unknown algorithm {name!r}")
