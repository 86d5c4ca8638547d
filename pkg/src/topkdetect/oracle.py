"""Metered API facade over a graph.

Every observation an algorithm makes goes through :class:`ApiOracle`, which
charges it against a fixed request budget the way a social-network API
would: one request per neighbour page, per degree lookup, per random ID.

Charging model
--------------
``random_entity`` is the request addressed to a random ID.  Dead IDs answer
with an error and are skipped for free (unless ``charge_dead``).  An alive
answer costs one request and carries the entity's first neighbour page, so
the next ``out_neighbors``/``undirected_neighbors`` call on that same ID is
already paid for.  This keeps a "draw a random user, read its followees"
step at exactly one request.
"""

from __future__ import annotations

import contextlib
import csv
import functools
import io
from dataclasses import dataclass, field

import numpy as np

RANDOM_SAMPLE = "random-sample"
OUT_NEIGHBORS = "out-neighbors"
IN_DEGREE = "in-degree"
UNDIRECTED_NEIGHBORS = "undirected-neighbors"
KINDS = (RANDOM_SAMPLE, OUT_NEIGHBORS, IN_DEGREE, UNDIRECTED_NEIGHBORS)

STRICT = "strict"
RELAXED = "relaxed"


class OracleError(RuntimeError):
    pass


class BudgetExhausted(OracleError):
    """No requests left.  ``partial`` holds whatever a batch call obtained."""

    def __init__(self, message="request budget exhausted", partial=None):
        super().__init__(message)
        self.partial = partial


class DeadEntity(OracleError):
    pass


class NoAliveEntities(OracleError):
    pass


@dataclass
class OracleConfig:
    budget: int
    page_cap: int = 5000
    charge_dead: bool = False

    def __post_init__(self):
        if self.page_cap < 1:
            raise ValueError("page_cap must be >= 1")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")


@dataclass
class BudgetLedger:
    budget: int
    counts: dict = field(default_factory=lambda: dict.fromkeys(KINDS, 0))

    @property
    def spent(self) -> int:
        return sum(self.counts.values())

    @property
    def remaining(self) -> int:
        return self.budget - self.spent

    def charge(self, kind: str, amount: int = 1) -> None:
        if amount > self.remaining:
            raise BudgetExhausted()
        self.counts[kind] += amount

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "count"])
        for kind in KINDS:
            w.writerow([kind, self.counts[kind]])
        return buf.getvalue()


@dataclass
class NeighborPage:
    """Result of an undirected-neighbour request.

    ``in_degree`` is the entity's follower count, delivered as metadata with
    the first page.  ``complete`` is False when the budget ran out while
    paging.
    """

    entity: int
    neighbors: np.ndarray
    in_degree: int
    degree: int
    complete: bool = True


def _observes(method):
    """Open the graph seal (if any) for the duration of an oracle call."""

    @functools.wraps(method)
    def wrapper(self, *args, **kwargs):
        opener = getattr(self._graph, "opened", None)
        with opener() if opener else contextlib.nullcontext():
            return method(self, *args, **kwargs)

    return wrapper


class ApiOracle:
    """One algorithm run's window onto a graph.

    Not safe for concurrent calls; build one instance per run.  The graph
    itself is shared read-only.
    """

    def __init__(self, graph, budget: int, *, page_cap: int = 5000,
                 charge_dead: bool = False, rng=None):
        self.config = OracleConfig(budget=budget, page_cap=page_cap, charge_dead=charge_dead)
        self.ledger = BudgetLedger(budget)
        self.rng = np.random.default_rng(rng)
        self._graph = graph
        self._prepaid = None
        self._any_alive = None

    # metadata known to any API client: the ID ranges
    @property
    def n_v(self) -> int:
        return self._graph.n_v

    @property
    def n_w(self) -> int:
        return self._graph.n_w

    @property
    def directed(self) -> bool:
        return self._graph.directed

    @property
    def page_cap(self) -> int:
        return self.config.page_cap

    @property
    def spent(self) -> int:
        return self.ledger.spent

    def remaining(self) -> int:
        return self.ledger.remaining

    def _grant(self, ids) -> None:
        if self._prepaid is None:
            self._prepaid = np.zeros(self._graph.n_v, dtype=np.int32)
        np.add.at(self._prepaid, ids, 1)

    def _take_prepaid(self, v: int) -> bool:
        if self._prepaid is not None and self._prepaid[v] > 0:
            self._prepaid[v] -= 1
            return True
        return False

    def _check_alive_exists(self):
        if self._any_alive is None:
            self._any_alive = bool(self._graph.alive.any())
        if not self._any_alive:
            raise NoAliveEntities("every V-ID is dead")

    def _charge_dead(self, kind: str) -> None:
        if self.config.charge_dead:
            self.ledger.charge(kind)

    @_observes
    def random_entity(self) -> int:
        """Uniformly random alive V-ID; dead IDs are retried internally."""
        self._check_alive_exists()
        alive = self._graph.alive
        while True:
            if self.ledger.remaining < 1:
                raise BudgetExhausted()
            v = int(self.rng.integers(self._graph.n_v))
            if alive[v]:
                self.ledger.charge(RANDOM_SAMPLE)
                self._grant([v])
                return v
            self._charge_dead(RANDOM_SAMPLE)

    @_observes
    def random_entities(self, count: int) -> np.ndarray:
        """``count`` independent :meth:`random_entity` draws, vectorised.

        Raises :class:`BudgetExhausted` with the IDs obtained so far (already
        charged) when the budget runs out first.
        """
        self._check_alive_exists()
        alive = self._graph.alive
        got = []
        need = count
        while need > 0:
            room = self.ledger.remaining
            if room < 1:
                self._grant(np.concatenate(got) if got else [])
                raise BudgetExhausted(partial=np.concatenate(got) if got else np.empty(0, np.int64))
            draws = self.rng.integers(self._graph.n_v, size=max(need, 16) * 2)
            ok = alive[draws]
            if self.config.charge_dead:
                # every draw costs; stop at whichever runs out first
                cum_ok = np.cumsum(ok)
                stop = min(len(draws), room)
                if cum_ok[stop - 1] >= need:
                    stop = int(np.searchsorted(cum_ok, need)) + 1
                draws, ok = draws[:stop], ok[:stop]
                self.ledger.counts[RANDOM_SAMPLE] += stop
            else:
                draws = draws[ok][:min(need, room)]
                ok = np.ones(len(draws), dtype=bool)
                self.ledger.counts[RANDOM_SAMPLE] += len(draws)
            picked = draws[ok][:need]
            got.append(picked)
            need -= len(picked)
        ids = np.concatenate(got)
        self._grant(ids)
        return ids

    @_observes
    def out_neighbors(self, v: int) -> np.ndarray:
        """The first ``page_cap`` W-IDs of ``v``'s adjacency list."""
        g = self._graph
        if not g.alive[v]:
            self._charge_dead(OUT_NEIGHBORS)
            raise DeadEntity(f"V-entity {v} is dead")
        if not self._take_prepaid(v):
            self.ledger.charge(OUT_NEIGHBORS)
        start = g.out_indptr[v]
        stop = min(g.out_indptr[v + 1], start + self.config.page_cap)
        return g.out_indices[start:stop].copy()

    @_observes
    def out_neighbors_many(self, vs) -> np.ndarray:
        """Concatenated first pages of several alive entities (one request each).

        The whole batch is charged up front; if it does not fit, nothing is
        served and :class:`BudgetExhausted` is raised.
        """
        g = self._graph
        vs = np.asarray(vs, dtype=np.int64)
        if not g.alive[vs].all():
            raise DeadEntity("batch contains a dead V-entity")
        uniq, cnt = np.unique(vs, return_counts=True)
        if self._prepaid is not None:
            covered = np.minimum(cnt, self._prepaid[uniq])
        else:
            covered = np.zeros_like(cnt)
        cost = int(cnt.sum() - covered.sum())
        self.ledger.charge(OUT_NEIGHBORS, cost)
        if self._prepaid is not None:
            self._prepaid[uniq] -= covered.astype(self._prepaid.dtype)

        starts = g.out_indptr[vs]
        lens = np.minimum(g.out_indptr[vs + 1] - starts, self.config.page_cap)
        total = int(lens.sum())
        if total == 0:
            return np.empty(0, dtype=g.out_indices.dtype)
        # gather the CSR slices without a Python loop
        offs = np.repeat(starts - np.concatenate([[0], np.cumsum(lens)[:-1]]), lens)
        return g.out_indices[np.arange(total) + offs]

    @_observes
    def in_degree(self, w: int) -> int:
        self.ledger.charge(IN_DEGREE)
        return int(self._graph.in_degree[w])

    @_observes
    def in_degrees(self, ws) -> np.ndarray:
        """Exact in-degrees of several W-entities, one request each, all or nothing."""
        ws = np.asarray(ws, dtype=np.int64)
        self.ledger.charge(IN_DEGREE, len(ws))
        return self._graph.in_degree[ws].copy()

    @_observes
    def undirected_neighbors(self, v: int, mode: str = STRICT) -> NeighborPage:
        """Full in- plus out-neighbour list of ``v`` in a directed graph.

        Strict mode pays one request per page of ``page_cap`` IDs (at least
        one); relaxed mode pays one request per call.  A strict call that
        runs out of budget mid-way returns the pages it got, flagged
        incomplete.
        """
        if mode not in (STRICT, RELAXED):
            raise ValueError(f"unknown mode {mode!r}")
        g = self._graph
        if not g.alive[v]:
            self._charge_dead(UNDIRECTED_NEIGHBORS)
            raise DeadEntity(f"V-entity {v} is dead")
        adj = g.undirected_adj(v)
        deg = len(adj)
        cap = self.config.page_cap
        pages = max(1, -(-deg // cap)) if mode == STRICT else 1
        free = 1 if self._take_prepaid(v) else 0
        if not free and self.ledger.remaining < 1:
            raise BudgetExhausted()
        paid = min(pages - free, self.ledger.remaining)
        self.ledger.counts[UNDIRECTED_NEIGHBORS] += paid
        got = free + paid
        complete = got == pages
        if not complete:
            adj = adj[:got * cap]
        return NeighborPage(entity=v, neighbors=adj.copy(), in_degree=int(g.in_degree[v]),
                            degree=deg, complete=complete)


class SealedGraph:
    """Test wrapper that records graph reads made outside an oracle call.

    Size metadata stays readable; everything else counts as a violation
    unless an :class:`ApiOracle` method currently holds the seal open.
    """

    _PUBLIC = frozenset({"n_v", "n_w", "directed"})

    def __init__(self, graph):
        object.__setattr__(self, "_inner", graph)
        object.__setattr__(self, "_depth", 0)
        object.__setattr__(self, "violations", [])
        object.__setattr__(self, "observations", 0)

    @contextlib.contextmanager
    def opened(self):
        object.__setattr__(self, "_depth", self._depth + 1)
        try:
            yield
        finally:
            object.__setattr__(self, "_depth", self._depth - 1)

    def __getattr__(self, name):
        if name not in self._PUBLIC:
            if self._depth == 0:
                self.violations.append(name)
            else:
                object.__setattr__(self, "observations", self.observations + 1)
        return getattr(self._inner, name)

    def __setattr__(self, name, value):
        raise AttributeError("sealed graph is read-only")
