"""Bipartite/directed graphs with known in-degree ground truth.

A graph holds a V side (entities we can sample and crawl) and a W side
(entities whose popularity we rank).  A directed graph is stored the same
way with ``n_w == n_v`` and W-IDs aliasing V-IDs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np


class GraphError(ValueError):
    """Invalid graph parameters or malformed input."""


class InfeasibleDegreeError(GraphError):
    pass


class EdgeListError(GraphError):
    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


PURE_PARETO = "pure-pareto"
PARETO_LOG = "pareto-log"


@dataclass(frozen=True)
class TailDistribution:
    """Regularly varying degree law with survival ``L(x) * (x/x_min)**(-1/gamma)``.

    ``pure-pareto`` has ``L == 1``; ``pareto-log`` uses the slowly varying
    factor ``1 / (1 + log(x/x_min))``.
    """

    kind: str = PURE_PARETO
    gamma: float = 0.5
    x_min: float = 1.0

    def __post_init__(self):
        if self.kind not in (PURE_PARETO, PARETO_LOG):
            raise GraphError(f"unknown tail kind {self.kind!r}")
        if not self.gamma > 0:
            raise GraphError("gamma must be positive")
        if not self.x_min >= 1:
            raise GraphError("x_min must be >= 1")

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        t = np.maximum(x / self.x_min, 1.0)
        s = t ** (-1.0 / self.gamma)
        if self.kind == PARETO_LOG:
            s = s / (1.0 + np.log(t))
        return np.where(x < self.x_min, 1.0, s)

    def quantile(self, u):
        """Inverse survival: the ``x`` with ``survival(x) == u`` for u in (0, 1]."""
        u = np.asarray(u, dtype=float)
        if self.kind == PURE_PARETO:
            return self.x_min * u ** (-self.gamma)
        # solve y/gamma + log(1 + y) = -log(u) for y = log(x/x_min); the left
        # side is increasing and concave, so Newton from y=0 climbs monotonically
        a = 1.0 / self.gamma
        c = -np.log(u)
        y = np.zeros_like(c)
        for _ in range(60):
            g = a * y + np.log1p(y) - c
            step = g / (a + 1.0 / (1.0 + y))
            y = y - step
            if np.all(np.abs(step) <= 1e-12 * (1.0 + y)):
                break
        return self.x_min * np.exp(y)

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        # 1 - random() lies in (0, 1], so the draw is always finite
        return self.quantile(1.0 - rng.random(size))


@dataclass(frozen=True)
class GroundTruth:
    """Top of the in-degree ranking; ties broken by ascending ID."""

    ranked_ids: np.ndarray
    order_stats: np.ndarray
    in_degree: np.ndarray = field(repr=False)

    @property
    def k(self) -> int:
        return len(self.ranked_ids)


@dataclass(eq=False)
class BipartiteGraph:
    """Immutable CSR storage of V -> W edges.

    ``out_indices[out_indptr[v]:out_indptr[v+1]]`` is v's adjacency list in
    storage order, which is also the order pages are served in.
    """

    n_v: int
    n_w: int
    out_indptr: np.ndarray
    out_indices: np.ndarray
    in_degree: np.ndarray
    alive: np.ndarray
    directed: bool = False
    id_map: np.ndarray | None = None
    seed: int | None = None

    @property
    def n_edges(self) -> int:
        return int(self.out_indptr[-1])

    @property
    def n_alive(self) -> int:
        return int(np.count_nonzero(self.alive))

    def out_adj(self, v: int) -> np.ndarray:
        return self.out_indices[self.out_indptr[v]:self.out_indptr[v + 1]]

    def out_degree(self) -> np.ndarray:
        return np.diff(self.out_indptr)

    @cached_property
    def ranking(self) -> np.ndarray:
        ids = np.arange(self.n_w)
        return np.lexsort((ids, -self.in_degree))

    @cached_property
    def _undirected(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.directed:
            raise GraphError("undirected view needs a directed graph (W aliasing V)")
        src = np.repeat(np.arange(self.n_v, dtype=np.int64), self.out_degree())
        dst = self.out_indices.astype(np.int64)
        keys = np.unique(np.concatenate([src * self.n_v + dst, dst * self.n_v + src]))
        rows = keys // self.n_v
        indptr = np.zeros(self.n_v + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=self.n_v), out=indptr[1:])
        return indptr, (keys % self.n_v).astype(self.out_indices.dtype)

    def undirected_adj(self, v: int) -> np.ndarray:
        """Sorted union of in- and out-neighbours of ``v``."""
        indptr, indices = self._undirected
        return indices[indptr[v]:indptr[v + 1]]

    def check(self) -> None:
        """Raise if stored in-degrees disagree with the adjacency lists."""
        counts = np.bincount(self.out_indices, minlength=self.n_w)
        if not np.array_equal(counts, self.in_degree):
            raise GraphError("in_degree does not match out_adj")
        src = np.repeat(np.arange(self.n_v, dtype=np.int64), self.out_degree())
        if len(np.unique(src * self.n_w + self.out_indices)) != self.n_edges:
            raise GraphError("duplicate edge in an adjacency list")
        if np.any(self.out_degree()[~self.alive]):
            raise GraphError("dead V-entity carries edges")


def from_edges(src, dst, n_v: int, n_w: int, *, alive=None, directed=False,
               id_map=None, seed=None) -> BipartiteGraph:
    """Build a graph from parallel edge arrays.

    Duplicate edges are collapsed; surviving edges keep their first-seen
    order within each source's adjacency list.
    """
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    if len(src):
        if src.min() < 0 or src.max() >= n_v or dst.min() < 0 or dst.max() >= n_w:
            raise GraphError("edge endpoint out of range")
        _, first = np.unique(src * n_w + dst, return_index=True)
        first.sort()
        src, dst = src[first], dst[first]
    order = np.argsort(src, kind="stable")
    indptr = np.zeros(n_v + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n_v), out=indptr[1:])
    if alive is None:
        alive = np.ones(n_v, dtype=bool)
    return BipartiteGraph(
        n_v=n_v, n_w=n_w, out_indptr=indptr,
        out_indices=_compact(dst[order], n_w),
        in_degree=np.bincount(dst, minlength=n_w).astype(np.int64),
        alive=np.asarray(alive, dtype=bool), directed=directed,
        id_map=id_map, seed=seed,
    )


def _compact(a: np.ndarray, bound: int) -> np.ndarray:
    return a.astype(np.int32 if bound < 2**31 else np.int64)


def generate(n_v: int, n_w: int, dist: TailDistribution, dead_fraction: float = 0.0,
             seed: int | None = 0, *, directed: bool | None = None) -> BipartiteGraph:
    """Random graph whose W in-degrees are i.i.d. draws from ``dist``.

    Degrees are floored and capped at the number of alive V-entities; each
    W-entity's sources are a uniform subset of alive V of exactly that size.
    Each V-ID is dead independently with probability ``dead_fraction``.
    ``directed`` defaults to ``n_v == n_w``.
    """
    if n_v < 1 or n_w < 1:
        raise GraphError("n_v and n_w must be >= 1")
    if not 0.0 <= dead_fraction < 1.0:
        raise GraphError("dead_fraction must lie in [0, 1)")
    if dist.x_min > n_v:
        raise InfeasibleDegreeError(f"x_min={dist.x_min} exceeds n_v={n_v}")
    if directed is None:
        directed = n_v == n_w
    elif directed and n_v != n_w:
        raise GraphError("a directed graph needs n_v == n_w")

    rng = np.random.default_rng(seed)
    alive = rng.random(n_v) >= dead_fraction if dead_fraction > 0 else np.ones(n_v, dtype=bool)
    alive_ids = np.flatnonzero(alive)
    n_alive = len(alive_ids)

    degrees = np.minimum(np.floor(dist.sample(n_w, rng)), n_alive).astype(np.int64)
    src_pos = _distinct_sources(degrees, n_alive, rng)
    dst = np.repeat(np.arange(n_w, dtype=np.int64), degrees)
    src = alive_ids[src_pos]

    # storage order inside each adjacency list is a uniform shuffle
    perm = rng.permutation(len(src))
    src, dst = src[perm], dst[perm]
    order = np.argsort(src, kind="stable")
    indptr = np.zeros(n_v + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n_v), out=indptr[1:])
    return BipartiteGraph(
        n_v=n_v, n_w=n_w, out_indptr=indptr, out_indices=_compact(dst[order], n_w),
        in_degree=degrees, alive=alive, directed=directed, seed=seed,
    )


def _distinct_sources(degrees: np.ndarray, pool: int, rng: np.random.Generator) -> np.ndarray:
    """Per row, ``degrees[i]`` distinct positions in ``range(pool)``, concatenated."""
    offsets = np.concatenate([[0], np.cumsum(degrees)])
    out = np.empty(offsets[-1], dtype=np.int64)
    heavy = degrees > max(16, pool // 20)
    for i in np.flatnonzero(heavy):
        out[offsets[i]:offsets[i + 1]] = rng.choice(pool, size=degrees[i], replace=False)

    # light rows: i.i.d. draws, then redraw collisions until every row is distinct
    rows_all = np.repeat(np.arange(len(degrees)), degrees)
    check = np.flatnonzero(~heavy[rows_all])
    out[check] = rng.integers(0, pool, size=len(check))
    while len(check):
        key = rows_all[check] * pool + out[check]
        order = np.argsort(key, kind="stable")
        same = key[order[1:]] == key[order[:-1]]
        redo = check[order[1:][same]]
        if not len(redo):
            break
        out[redo] = rng.integers(0, pool, size=len(redo))
        bad = np.unique(rows_all[redo])
        check = np.concatenate([np.arange(offsets[r], offsets[r + 1]) for r in bad])
    return out


def ground_truth(graph: BipartiteGraph, k: int) -> GroundTruth:
    if not 1 <= k <= graph.n_w:
        raise GraphError(f"k={k} outside [1, {graph.n_w}]")
    ids = graph.ranking[:k]
    return GroundTruth(ranked_ids=ids, order_stats=graph.in_degree[ids], in_degree=graph.in_degree)


def load_edge_list(path) -> BipartiteGraph:
    """Read whitespace-separated ``src dst`` pairs.

    Without a header the file is a directed graph: IDs are densified to
    ``0..N-1`` (original IDs in ``id_map``) and W aliases V.  A
    ``#bipartite N M seed`` header keeps IDs as written; ``#dead`` lines
    list dead V-IDs.
    """
    path = Path(path)
    try:
        fh = path.open("r", encoding="utf-8")
    except OSError as exc:
        raise GraphError(f"cannot read {path}: {exc}") from exc
    src, dst, dead = [], [], []
    header = None
    with fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                parts = s[1:].split()
                if parts[:1] == ["bipartite"]:
                    try:
                        header = (int(parts[1]), int(parts[2]),
                                  None if parts[3] == "None" else int(parts[3]))
                    except (IndexError, ValueError):
                        raise EdgeListError(path, lineno, "bad #bipartite header") from None
                elif parts[:1] == ["dead"]:
                    try:
                        dead.extend(int(x) for x in parts[1:])
                    except ValueError:
                        raise EdgeListError(path, lineno, "bad #dead line") from None
                continue
            parts = s.split()
            if len(parts) != 2:
                raise EdgeListError(path, lineno, f"expected 2 fields, got {len(parts)}")
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError:
                raise EdgeListError(path, lineno, f"non-integer ID in {s!r}") from None
            src.append(a)
            dst.append(b)

    if header is not None:
        n_v, n_w, seed = header
        alive = np.ones(n_v, dtype=bool)
        alive[np.asarray(dead, dtype=np.int64)] = False
        return from_edges(src, dst, n_v, n_w, alive=alive, directed=n_v == n_w, seed=seed)

    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    id_map, inverse = np.unique(np.concatenate([src, dst]), return_inverse=True)
    n = len(id_map)
    return from_edges(inverse[:len(src)], inverse[len(src):], n, n,
                      directed=True, id_map=id_map)


def write_edge_list(graph: BipartiteGraph, path) -> None:
    """Write ``graph`` with its ``#bipartite`` header so it round-trips."""
    src = np.repeat(np.arange(graph.n_v), graph.out_degree())
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#bipartite {graph.n_v} {graph.n_w} {graph.seed}\n")
        dead = np.flatnonzero(~graph.alive)
        for start in range(0, len(dead), 1000):
            fh.write("#dead " + " ".join(map(str, dead[start:start + 1000])) + "\n")
        np.savetxt(fh, np.column_stack([src, graph.out_indices]), fmt="%d")


__all__ = [
    "BipartiteGraph", "GroundTruth", "TailDistribution", "GraphError",
    "InfeasibleDegreeError", "EdgeListError", "generate", "from_edges",
    "ground_truth", "load_edge_list", "write_edge_list", "PURE_PARETO", "PARETO_LOG",
]
