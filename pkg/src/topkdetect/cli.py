"""Command line entry point: ``topkdetect <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .graph import GraphError, write_edge_list
from .harness import ExperimentSpec, SpecError

EXIT_OK = 0
EXIT_PARTIAL = 2
EXIT_USAGE = 64

# flag name -> spec key; values are passed through the spec's own coercion
SPEC_FLAGS = {
    "n_v": "graph.n_v", "n_w": "graph.n_w", "kind": "graph.kind",
    "tail_gamma": "graph.gamma", "x_min": "graph.x_min",
    "dead_fraction": "graph.dead_fraction", "graph_seed": "graph.seed",
    "edge_list": "graph.edge_list",
    "algorithm": "algorithm", "budget": "budget", "split": "split", "n1": "n1", "n2": "n2",
    "n2_grid": "n2_grid", "gamma": "gamma", "ks": "ks", "reps": "reps",
    "base_seed": "base_seed", "alpha": "alpha", "page_cap": "page_cap",
    "charge_dead": "charge_dead", "out_dir": "out_dir", "workers": "workers",
}


def _add_spec_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key = value spec file; flags override it")
    g = p.add_argument_group("graph")
    g.add_argument("--edge-list", help="read the graph from an edge-list file")
    g.add_argument("--n-v", help="number of V-entities (N)")
    g.add_argument("--n-w", help="number of W-entities (M); defaults to N")
    g.add_argument("--kind", choices=["pure-pareto", "pareto-log"])
    g.add_argument("--tail-gamma", help="tail index of the in-degree law")
    g.add_argument("--x-min", help="minimum in-degree")
    g.add_argument("--dead-fraction")
    g.add_argument("--graph-seed")
    e = p.add_argument_group("experiment")
    e.add_argument("--algorithm", help="algorithm name, or 'all'")
    e.add_argument("--budget", help="API requests per run (n)")
    e.add_argument("--split", choices=[harness.EXPLICIT, harness.OPTIMAL, harness.SWEEP])
    e.add_argument("--n1")
    e.add_argument("--n2")
    e.add_argument("--n2-grid", help="comma list or start:stop:step")
    e.add_argument("--gamma", help="tail index used by the optimal split policy")
    e.add_argument("--ks", help="comma list of k values")
    e.add_argument("--reps")
    e.add_argument("--base-seed")
    e.add_argument("--alpha")
    e.add_argument("--page-cap")
    e.add_argument("--charge-dead", action="store_const", const="true")
    e.add_argument("--out-dir")
    e.add_argument("--workers")


def _spec(args, **forced) -> ExperimentSpec:
    data = {}
    if getattr(args, "config", None):
        spec = ExperimentSpec.from_file(args.config)
        data = _flatten(spec)
    for flag, key in SPEC_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            data[key] = value
    data.update(forced)
    return ExperimentSpec.from_mapping(data)


def _flatten(spec: ExperimentSpec) -> dict:
    out = {f"graph.{k}": v for k, v in vars(spec.graph).items()}
    out.update({k: v for k, v in vars(spec).items() if k != "graph"})
    return out


def _print_summary(summary) -> None:
    for s in summary:
        if s.get("fraction_mean") is None:
            print(f"{s['algorithm']:<22} n2={s['n2']!s:<6} k={s['k']:<4} all runs failed")
            continue
        print(f"{s['algorithm']:<22} n2={s['n2']!s:<6} k={s['k']:<4} "
              f"fraction={s['fraction_mean']:.3f} (sd {s['fraction_sd']:.3f})  "
              f"first_error={s['first_error_mean']:.1f}  runs={s['runs']} errors={s['errors']}")


def cmd_generate(args) -> int:
    spec = _spec(args)
    graph = spec.graph.build()
    write_edge_list(graph, args.output)
    print(f"wrote {args.output}: N={graph.n_v} M={graph.n_w} edges={graph.n_edges} "
          f"alive={graph.n_alive}")
    return EXIT_OK


def _run_and_report(spec) -> int:
    out = harness.run(spec)
    _print_summary(out.summary)
    return EXIT_PARTIAL if out.failed else EXIT_OK


def cmd_run(args) -> int:
    return _run_and_report(_spec(args))


def cmd_sweep(args) -> int:
    forced = {"split": harness.SWEEP}
    if args.n2_grid is None and not args.config:
        forced["n2_grid"] = "50:950:50"
    return _run_and_report(_spec(args, **forced))


def cmd_compare(args) -> int:
    spec = _spec(args, algorithm=harness.ALL)
    out = harness.compare(spec)
    _print_summary(out.summary)
    return EXIT_PARTIAL if out.failed else EXIT_OK


def cmd_predict(args) -> int:
    forced = {"split": harness.SWEEP, "algorithm": "two_stage"}
    if args.n2_grid is None and not args.config:
        forced["n2_grid"] = "100:900:100"
    spec = _spec(args, **forced)
    overlay = harness.predict_overlay(spec, m=args.m)
    print(f"pilot Hill estimate gamma_hat={overlay.gamma_hat:.4f} from top-{args.m}")
    for row in overlay.rows:
        print(f"n2={row['n2']:<5} k={row['k']:<4} empirical={row['empirical_fraction']:.3f} "
              f"poisson={row['poisson_fraction']:.3f} evt={row['evt_fraction']:.3f}")
    return EXIT_OK


def cmd_scaling(args) -> int:
    sizes = harness.parse_int_list(args.sizes)
    result = harness.scaling_study(args.gamma, sizes, args.target, args.k, reps=args.reps,
                                   x_min=args.x_min, graph_seed=args.graph_seed,
                                   base_seed=args.base_seed, out_dir=args.out_dir)
    for p in result.points:
        flag = "" if p.converged else "  (NOT converged at cap)"
        print(f"N={p.N:<8} budget={p.budget:<8} fraction={p.fraction:.3f}{flag}")
    print(f"fitted exponent {result.slope:.3f} (1 - gamma = {1 - args.gamma:.3f})")
    return EXIT_OK if result.converged else EXIT_PARTIAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topkdetect", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic graph as an edge list")
    _add_spec_flags(p)
    p.add_argument("output", type=Path)
    p.set_defaults(func=cmd_generate)

    for name, func, text in [("run", cmd_run, "run one algorithm at one split"),
                             ("sweep", cmd_sweep, "two-stage over an n2 grid"),
                             ("compare", cmd_compare, "all algorithms at one budget")]:
        p = sub.add_parser(name, help=text)
        _add_spec_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("predict", help="empirical vs Poisson/EVT prediction overlay")
    _add_spec_flags(p)
    p.add_argument("--m", type=int, default=20, help="top values used by the Hill estimate")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("scaling", help="minimal budget vs network size")
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--sizes", default="10000,30000,100000,300000")
    p.add_argument("--target", type=float, default=0.9)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--x-min", type=float, default=1.0)
    p.add_argument("--graph-seed", type=int, default=1)
    p.add_argument("--base-seed", type=int, default=0)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_scaling)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SpecError, GraphError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
