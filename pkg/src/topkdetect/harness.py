"""Seeded experiment runner: sweeps, algorithm comparisons, prediction
overlays and budget-scaling studies, all written as CSV.

Repetition ``r`` of every parameter point uses seed ``base_seed + r``, so
points share random streams and results do not depend on execution order.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import algorithms as alg
from .graph import BipartiteGraph, TailDistribution, generate, ground_truth, load_edge_list
from .metrics import aggregate, first_error, fraction_correct
from .oracle import ApiOracle
from .predictors import evt_predict, hill, optimal_n2, poisson_predict

log = logging.getLogger(__name__)

EXPLICIT = "explicit"
OPTIMAL = "optimal"
SWEEP = "sweep"
ALL = "all"

ROW_FIELDS = ["algorithm", "n", "n1", "n2", "rep", "seed", "k", "fraction", "first_error",
              "spent", "partial", "error"]
SUMMARY_FIELDS = ["algorithm", "n", "n1", "n2", "k", "runs", "errors", "fraction_mean",
                  "fraction_sd", "first_error_mean", "first_error_sd", "spent_mean"]


class SpecError(ValueError):
    pass


@dataclass
class GraphSource:
    """Either generator parameters or an edge-list path."""

    n_v: int = 100_000
    n_w: int | None = None
    kind: str = "pure-pareto"
    gamma: float = 0.45
    x_min: float = 30.0
    dead_fraction: float = 0.3
    seed: int = 1
    edge_list: str | None = None

    def build(self) -> BipartiteGraph:
        if self.edge_list:
            return load_edge_list(self.edge_list)
        dist = TailDistribution(self.kind, self.gamma, self.x_min)
        return generate(self.n_v, self.n_w or self.n_v, dist, self.dead_fraction, self.seed)


@dataclass
class ExperimentSpec:
    graph: GraphSource = field(default_factory=GraphSource)
    algorithm: str = alg.TWO_STAGE
    budget: int = 1000
    split: str = EXPLICIT
    n1: int | None = None
    n2: int | None = None
    n2_grid: list = field(default_factory=list)
    gamma: float | None = None
    ks: list = field(default_factory=lambda: [100])
    reps: int = 30
    base_seed: int = 0
    alpha: float = 100.0
    page_cap: int = 5000
    charge_dead: bool = False
    out_dir: str | None = None
    workers: int = 1

    def algorithms(self) -> list[str]:
        return list(alg.ALGORITHMS) if self.algorithm == ALL else [self.algorithm]

    def points(self) -> list[tuple[int | None, int | None]]:
        """``(n1, n2)`` pairs for the two-stage algorithm."""
        n = self.budget
        if self.split == SWEEP:
            return [(n - n2, n2) for n2 in self.n2_grid]
        if self.split == OPTIMAL:
            gamma = self.gamma if self.gamma is not None else self.graph.gamma
            n2 = optimal_n2(n, max(self.ks), gamma)
            return [(n - n2, n2)]
        n2 = self.n2 if self.n2 is not None else (n - self.n1 if self.n1 is not None else round(0.3 * n))
        n1 = self.n1 if self.n1 is not None else n - n2
        return [(n1, n2)]

    def validate(self) -> None:
        if self.reps < 1:
            raise SpecError("reps must be >= 1")
        if self.budget < 1:
            raise SpecError("budget must be >= 1")
        if not self.ks or min(self.ks) < 1:
            raise SpecError("ks must be a non-empty list of positive ranks")
        for name in self.algorithms():
            if name not in alg.ALGORITHMS:
                raise SpecError(f"unknown algorithm {name!r}")
        if self.split not in (EXPLICIT, OPTIMAL, SWEEP):
            raise SpecError(f"unknown split policy {self.split!r}")
        if self.split == SWEEP and not self.n2_grid:
            raise SpecError("sweep needs a non-empty n2_grid")
        if self.graph.edge_list and not Path(self.graph.edge_list).is_file():
            raise SpecError(f"edge list {self.graph.edge_list} does not exist")
        if alg.TWO_STAGE in self.algorithms():
            for n1, n2 in self.points():
                if not (1 <= n2 <= self.budget - 1 and n1 >= 1 and n1 + n2 <= self.budget):
                    raise SpecError(f"split n1={n1}, n2={n2} does not fit budget {self.budget}")

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentSpec":
        """Build from flat string/number pairs; ``graph.*`` keys or bare graph
        field names both address the graph source."""
        graph_keys = {f.name for f in fields(GraphSource)}
        spec_keys = {f.name for f in fields(cls)} - {"graph"}
        g, s = {}, {}
        for key, value in data.items():
            key = key.strip().replace("-", "_")
            bare = key[6:] if key.startswith("graph.") else key
            if bare in graph_keys and (key.startswith("graph.") or bare not in spec_keys):
                g[bare] = value
            elif key in spec_keys:
                s[key] = value
            else:
                raise SpecError(f"unknown spec key {key!r}")
        return cls(graph=GraphSource(**_coerce(GraphSource, g)), **_coerce(cls, s))

    @classmethod
    def from_file(cls, path) -> "ExperimentSpec":
        """Parse a ``key = value`` text file; ``#`` starts a comment."""
        data = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SpecError(f"{path}:{lineno}: expected key = value")
            key, value = line.split("=", 1)
            data[key.strip()] = value.strip()
        return cls.from_mapping(data)


_INT_LISTS = {"ks", "n2_grid"}


def _coerce(cls, raw: dict) -> dict:
    types = {f.name: f.type for f in fields(cls)}
    out = {}
    for key, value in raw.items():
        if not isinstance(value, str):
            out[key] = value
            continue
        t = str(types[key])
        if key in _INT_LISTS:
            out[key] = parse_int_list(value)
        elif value.lower() in ("none", ""):
            out[key] = None
        elif "bool" in t:
            out[key] = value.lower() in ("1", "true", "yes", "on")
        elif "int" in t:
            out[key] = int(value)
        elif "float" in t:
            out[key] = float(value)
        else:
            out[key] = value
    return out


def parse_int_list(text: str) -> list[int]:
    """``"25,100"`` or a range ``"50:950:50"`` (inclusive stop)."""
    text = text.strip()
    if ":" in text:
        start, stop, step = (int(x) for x in text.split(":"))
        return list(range(start, stop + 1, step))
    return [int(x) for x in text.replace(" ", "").split(",") if x]


@dataclass
class RunOutput:
    rows: list
    summary: list

    @property
    def failed(self) -> bool:
        return any(r["error"] for r in self.rows)

    def summary_for(self, algorithm=alg.TWO_STAGE, k=None, n2=None) -> list:
        return [s for s in self.summary
                if s["algorithm"] == algorithm and (k is None or s["k"] == k)
                and (n2 is None or s["n2"] == n2)]


def _seeds(seed: int):
    oracle_ss, algo_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(oracle_ss), np.random.default_rng(algo_ss)


def run_once(graph, truth, name: str, *, n: int, ks, n1=None, n2=None, seed: int = 0,
             alpha: float = 100.0, page_cap: int = 5000, charge_dead: bool = False):
    """One seeded run scored for every ``k``; returns (result, rows)."""
    oracle_rng, algo_rng = _seeds(seed)
    oracle = ApiOracle(graph, n, page_cap=page_cap, charge_dead=charge_dead, rng=oracle_rng)
    result = alg.run_algorithm(name, oracle, n=n, k=max(ks), n1=n1, n2=n2, alpha=alpha,
                               rng=algo_rng)
    fe_n = n2 if name == alg.TWO_STAGE else max(ks)
    fe = first_error(result, truth, min(fe_n, truth.k))
    rows = [dict(algorithm=name, n=n, n1=n1, n2=n2, seed=seed, k=k,
                 fraction=fraction_correct(result, truth, k), first_error=fe,
                 spent=result.spent, partial=result.partial, error="") for k in ks]
    return result, rows


def run(spec: ExperimentSpec, graph: BipartiteGraph | None = None) -> RunOutput:
    """Run every (algorithm, point, repetition) of ``spec``.

    A failing run becomes a row with ``error`` set; the sweep carries on.
    """
    spec.validate()
    graph = graph if graph is not None else spec.graph.build()
    depth = max(max(spec.ks), max((p[1] or 0) for p in spec.points()))
    truth = ground_truth(graph, min(graph.n_w, depth))

    jobs = []
    for name in spec.algorithms():
        points = spec.points() if name == alg.TWO_STAGE else [(None, None)]
        for n1, n2 in points:
            for r in range(spec.reps):
                jobs.append((name, n1, n2, r))

    def job(item):
        name, n1, n2, r = item
        seed = spec.base_seed + r
        try:
            _, rows = run_once(graph, truth, name, n=spec.budget, ks=spec.ks, n1=n1, n2=n2,
                               seed=seed, alpha=spec.alpha, page_cap=spec.page_cap,
                               charge_dead=spec.charge_dead)
        except Exception as exc:  # recorded, never aborts the sweep
            log.warning("run %s n1=%s n2=%s rep=%d failed: %s", name, n1, n2, r, exc)
            rows = [dict(algorithm=name, n=spec.budget, n1=n1, n2=n2, seed=seed, k=k,
                         fraction="", first_error="", spent="", partial="",
                         error=f"{type(exc).__name__}: {exc}") for k in spec.ks]
        for row in rows:
            row["rep"] = r
        return rows

    if spec.workers > 1:
        with ThreadPoolExecutor(spec.workers) as pool:
            chunks = list(pool.map(job, jobs))
    else:
        chunks = [job(j) for j in jobs]
    rows = [row for chunk in chunks for row in chunk]
    out = RunOutput(rows=rows, summary=summarize(rows))
    if spec.out_dir:
        d = Path(spec.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        write_csv(d / "results.csv", rows, ROW_FIELDS)
        write_csv(d / "summary.csv", out.summary, SUMMARY_FIELDS)
    return out


def summarize(rows) -> list:
    groups: dict = {}
    for row in rows:
        key = (row["algorithm"], row["n"], row["n1"], row["n2"], row["k"])
        groups.setdefault(key, []).append(row)
    summary = []
    for (name, n, n1, n2, k), members in groups.items():
        ok = [r for r in members if not r["error"]]
        entry = dict(algorithm=name, n=n, n1=n1, n2=n2, k=k, runs=len(ok),
                     errors=len(members) - len(ok))
        if ok:
            entry["fraction_mean"], entry["fraction_sd"] = aggregate([r["fraction"] for r in ok])
            entry["first_error_mean"], entry["first_error_sd"] = aggregate(
                [r["first_error"] for r in ok])
            entry["spent_mean"] = float(np.mean([r["spent"] for r in ok]))
        summary.append(entry)
    return summary


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(round(value, 10))
    return value


def write_csv(path, rows, columns) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(to_csv(rows, columns))


def to_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({c: _fmt(row.get(c)) for c in columns})
    return buf.getvalue()


def compare(spec: ExperimentSpec, graph=None) -> RunOutput:
    """All algorithms at one budget (two-stage at the spec's explicit split)."""
    split = EXPLICIT if spec.split == SWEEP else spec.split
    return run(replace(spec, algorithm=ALL, split=split), graph)


OVERLAY_FIELDS = ["n1", "n2", "k", "empirical_fraction", "empirical_first_error",
                  "poisson_fraction", "poisson_first_error", "evt_fraction", "evt_first_error"]
CURVE_FIELDS = ["n2", "expected_fraction", "expected_first_error", "provenance", "k"]


@dataclass
class Overlay:
    rows: list
    curves: list
    gamma_hat: float
    pilot_top: np.ndarray


def predict_overlay(spec: ExperimentSpec, m: int = 20, graph=None,
                    pilot_split: tuple[int, int] | None = None) -> Overlay:
    """Empirical two-stage curves next to Poisson (true degrees) and EVT
    (top-``m`` of one pilot run) predictions over the n2 sweep."""
    spec.validate()
    points = spec.points()
    if any(n2 <= m for _, n2 in points):
        raise SpecError(f"every n2 must exceed m={m}")
    graph = graph if graph is not None else spec.graph.build()
    empirical = run(replace(spec, algorithm=alg.TWO_STAGE, out_dir=None), graph)
    N = graph.n_alive
    truth = ground_truth(graph, max(n2 for _, n2 in points))

    p1, p2 = pilot_split or (round(0.7 * spec.budget), spec.budget - round(0.7 * spec.budget))
    pilot_seed = spec.base_seed + spec.reps
    oracle_rng, algo_rng = _seeds(pilot_seed)
    pilot = alg.two_stage(ApiOracle(graph, p1 + p2, page_cap=spec.page_cap, rng=oracle_rng),
                          p1, p2, algo_rng)
    top = pilot.degrees[:m].astype(float)

    rows, curves = [], []
    for n1, n2 in points:
        pois = poisson_predict(truth.order_stats[:n2], n1, N)
        evt = evt_predict(top, n1, n2, N)
        for k in spec.ks:
            emp = empirical.summary_for(alg.TWO_STAGE, k=k, n2=n2)[0]
            kk = min(k, n2)
            rows.append(dict(n1=n1, n2=n2, k=k, empirical_fraction=emp.get("fraction_mean"),
                             empirical_first_error=emp.get("first_error_mean"),
                             poisson_fraction=pois.expected_fraction(kk),
                             poisson_first_error=pois.expected_first_error(),
                             evt_fraction=evt.expected_fraction(kk),
                             evt_first_error=evt.expected_first_error()))
            for pv in (pois, evt):
                curves.append(dict(n2=n2, k=k, expected_fraction=pv.expected_fraction(kk),
                                   expected_first_error=pv.expected_first_error(),
                                   provenance=pv.provenance))
    overlay = Overlay(rows=rows, curves=curves, gamma_hat=hill(top), pilot_top=top)
    if spec.out_dir:
        d = Path(spec.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        write_csv(d / "overlay.csv", rows, OVERLAY_FIELDS)
        write_csv(d / "predictions.csv", curves, CURVE_FIELDS)
    return overlay


# -- budget scaling -----------------------------------------------------------

@dataclass
class ScalingPoint:
    N: int
    budget: int
    fraction: float
    converged: bool
    evaluations: int


@dataclass
class ScalingResult:
    points: list
    slope: float
    intercept: float

    @property
    def converged(self) -> bool:
        return all(p.converged for p in self.points)

    def to_rows(self) -> list:
        return [asdict(p) for p in self.points]


def mean_fraction(graph, truth, n: int, k: int, reps: int, base_seed: int, n2: int,
                  page_cap: int = 5000) -> float:
    vals = []
    for r in range(reps):
        oracle_rng, algo_rng = _seeds(base_seed + r)
        oracle = ApiOracle(graph, n, page_cap=page_cap, rng=oracle_rng)
        res = alg.two_stage(oracle, n - n2, n2, algo_rng)
        vals.append(fraction_correct(res, truth, k))
    return float(np.mean(vals))


def min_budget(graph, k: int, target: float, gamma: float, *, reps: int = 20,
               base_seed: int = 0, rel_tol: float = 0.01, cap: int | None = None) -> ScalingPoint:
    """Smallest budget whose mean top-k fraction reaches ``target``, by bisection.

    The split at every budget follows :func:`optimal_n2`.  The search is
    capped at ``cap`` (default: the number of V-entities); failing at the cap
    is reported as not converged.
    """
    truth = ground_truth(graph, k)
    cap = cap or graph.n_v
    evals = 0

    def score(n):
        nonlocal evals
        evals += 1
        return mean_fraction(graph, truth, n, k, reps, base_seed, optimal_n2(n, k, gamma))

    hi_score = score(cap)
    if hi_score < target:
        return ScalingPoint(graph.n_v, cap, hi_score, False, evals)
    lo, hi = k + 1, cap
    best = hi_score
    while hi - lo > max(1, rel_tol * lo):
        mid = int(math.sqrt(lo * hi))
        mid = min(max(mid, lo + 1), hi - 1)
        s = score(mid)
        if s >= target:
            hi, best = mid, s
        else:
            lo = mid
    return ScalingPoint(graph.n_v, hi, best, True, evals)


def fit_loglog(x, y) -> tuple[float, float]:
    slope, intercept = np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)
    return float(slope), float(intercept)


def scaling_study(gamma: float, sizes, target: float = 0.9, k: int = 10, *, reps: int = 20,
                  x_min: float = 1.0, dead_fraction: float = 0.0, graph_seed: int = 1,
                  base_seed: int = 0, rel_tol: float = 0.01, out_dir=None) -> ScalingResult:
    """Minimal budget for a ``target`` top-k fraction on ``N = M`` graphs of
    each size, and the fitted exponent of budget against ``N``."""
    sizes = list(sizes)
    if len(sizes) < 3:
        raise SpecError("scaling study needs at least 3 sizes")
    points = []
    for N in sizes:
        g = generate(N, N, TailDistribution("pure-pareto", gamma, x_min), dead_fraction, graph_seed)
        pt = min_budget(g, k, target, gamma, reps=reps, base_seed=base_seed, rel_tol=rel_tol)
        log.info("N=%d budget=%d fraction=%.3f converged=%s", N, pt.budget, pt.fraction, pt.converged)
        points.append(pt)
    slope, intercept = fit_loglog([p.N for p in points], [p.budget for p in points])
    result = ScalingResult(points, slope, intercept)
    if out_dir:
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        write_csv(d / "scaling.csv", result.to_rows(), ["N", "budget", "fraction", "converged",
                                                        "evaluations"])
    return result


@dataclass
class SplitStudy:
    budgets: list
    argmax_n2: list
    curves: dict
    slope: float


def best_split_study(gamma: float, budgets, k: int = 100, *, step: int = 50, reps: int = 100,
                     n_w: int = 1_000_000, v_per_request: float = 10.0, x_min: float = 1.0,
                     graph_seed: int = 1, base_seed: int = 0, n2_max_fraction: float = 0.5,
                     workers: int = 1) -> SplitStudy:
    """Empirical best second-stage size for each budget.

    For budget ``n`` the graph has ``M = n_w`` W-entities and
    ``N = v_per_request * n`` V-entities, so the stage-one hit rate of any
    fixed rank stays comparable across budgets.  The n2 grid runs from
    ``step`` to ``n2_max_fraction * n``.
    """
    dist = TailDistribution("pure-pareto", gamma, x_min)
    argmaxes, curves = [], {}
    for n in budgets:
        g = generate(int(v_per_request * n), n_w, dist, 0.0, graph_seed)
        grid = list(range(step, int(n2_max_fraction * n) + 1, step))
        spec = ExperimentSpec(budget=n, split=SWEEP, n2_grid=grid, ks=[k], reps=reps,
                              base_seed=base_seed, workers=workers)
        out = run(spec, g)
        curve = {s["n2"]: s["fraction_mean"] for s in out.summary}
        curves[n] = curve
        argmaxes.append(max(curve, key=curve.get))
        log.info("n=%d argmax n2=%d", n, argmaxes[-1])
    slope, _ = fit_loglog(budgets, argmaxes)
    return SplitStudy(list(budgets), argmaxes, curves, slope)
