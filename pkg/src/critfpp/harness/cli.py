"""Command line entry point: ``critfpp <subcommand> --config run.toml [overrides]``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

from .. import branching, fpp, graphgen, percolation
from .config import ConfigError, load_config
from .experiments import _json_default, run_experiment, task_rng

EXIT_CHECK_FAILED = 2


def _int_list(text: str) -> list[int]:
    return [int(float(x)) for x in text.split(",") if x]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="TOML run configuration")
    p.add_argument("--n", type=_int_list, help="comma-separated n grid, overrides the config")
    p.add_argument("--replicas", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output file or directory")


def _load(args):
    cfg = load_config(args.config)
    return cfg.with_overrides(n=args.n, replicas=args.replicas, seed=args.seed,
                              out=args.out if args.command == "experiment" else None,
                              workers=getattr(args, "workers", None))


def _open_out(path):
    if path is None:
        return sys.stdout
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", newline="")


def cmd_classify(args, cfg) -> int:
    verdict = branching.classify_min_summable(cfg.weight, epsilon=args.epsilon)
    print(json.dumps(verdict.to_dict(), indent=2, default=_json_default))
    return 0


def cmd_bp(args, cfg) -> int:
    fh = _open_out(args.out)
    w = csv.writer(fh)
    w.writerow(["replica", "ell", "theta"])
    for r in range(cfg.replicas):
        rng = task_rng(cfg.seed, 0, 0, r)
        run = branching.simulate_bp(cfg.degree, cfg.weight, rng, max_events=args.max_events,
                                    max_time=args.max_time, max_theta_index=args.max_theta,
                                    prune=args.max_theta is not None and args.prune)
        for i, t in enumerate(run.theta, start=1):
            w.writerow([r, i, repr(float(t))])
    if fh is not sys.stdout:
        fh.close()
    return 0


def cmd_gen(args, cfg) -> int:
    n = cfg.n_grid[0]
    rng = task_rng(cfg.seed, 0, n, 0)
    g = graphgen.configuration_model(cfg.degree, n, rng)
    weights = fpp.assign_weights(g, cfg.weight, rng)
    out = args.out or f"graph_n{n}_seed{cfg.seed}.txt"
    graphgen.write_edge_list(g, out, cfg.seed, weights)
    print(out)
    return 0


def cmd_percolate(args, cfg) -> int:
    rows = []
    for n in cfg.n_grid:
        p = percolation.critical_window_p(cfg.degree, n, cfg.lam)
        for r in range(cfg.replicas):
            rng = task_rng(cfg.seed, 0, n, r)
            g = graphgen.configuration_model(cfg.degree, n, rng)
            census = percolation.cluster_census(g, percolation.percolate(g, p, rng))
            rows.extend(census.rows(r, cfg.lam, limit=args.top))
    out = args.out or "census.csv"
    percolation.write_census_csv(out, rows)
    print(out)
    return 0


def cmd_fpp(args, cfg) -> int:
    fh = _open_out(args.out)
    w = csv.writer(fh)
    w.writerow(["experiment", "n", "replica", "seed", "u", "v", "T", "H"])
    for n in cfg.n_grid:
        for r in range(cfg.replicas):
            rng = task_rng(cfg.seed, 0, n, r)
            g = graphgen.configuration_model(cfg.degree, n, rng)
            weights = fpp.assign_weights(g, cfg.weight, rng)
            u, v = (int(x) for x in rng.choice(n, size=2, replace=False))
            res = fpp.passage_time(g, weights, u, v)
            w.writerow([cfg.name, n, r, cfg.seed, u, v, repr(res.T), "" if res.H is None else res.H])
    if fh is not sys.stdout:
        fh.close()
    return 0


def cmd_flood(args, cfg) -> int:
    fh = _open_out(args.out)
    w = csv.writer(fh)
    w.writerow(["experiment", "n", "replica", "seed", "source", "max_time", "ratio", "unreachable"])
    for n in cfg.n_grid:
        for r in range(cfg.replicas):
            rng = task_rng(cfg.seed, 0, n, r)
            g = graphgen.configuration_model(cfg.degree, n, rng)
            weights = fpp.assign_weights(g, cfg.weight, rng)
            f = fpp.flood(g, weights, args.source)
            w.writerow([cfg.name, n, r, cfg.seed, args.source, repr(f.max_time),
                        repr(f.max_time / math.log(n)), f.unreachable_count])
    if fh is not sys.stdout:
        fh.close()
    return 0


def cmd_experiment(args, cfg) -> int:
    result = run_experiment(cfg)
    print(f"raw: {result.raw_path}")
    print(f"summary: {result.summary_path}")
    for name, v in result.summary["verdicts"].items():
        print(f"{'PASS' if v['passed'] else 'FAIL'} {name}: value={v['value']} threshold={v['threshold']}")
    if args.check and not result.passed:
        return EXIT_CHECK_FAILED
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="critfpp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="min-summability verdict for the configured weight law")
    _common(p)
    p.add_argument("--epsilon", type=float, default=branching.DEFAULT_EPSILON)

    p = sub.add_parser("bp", help="branching-process runs; writes theta_l per run")
    _common(p)
    p.add_argument("--max-events", type=int)
    p.add_argument("--max-time", type=float)
    p.add_argument("--max-theta", type=int)
    p.add_argument("--prune", action="store_true", help="draw only lifetimes that can affect theta_1..max-theta")

    p = sub.add_parser("gen", help="generate one weighted graph and dump its edge list")
    _common(p)

    p = sub.add_parser("percolate", help="cluster census at the critical-window p")
    _common(p)
    p.add_argument("--top", type=int, default=10)

    p = sub.add_parser("fpp", help="passage time and hopcount between two uniform vertices")
    _common(p)

    p = sub.add_parser("flood", help="flooding time from one source")
    _common(p)
    p.add_argument("--source", type=int, default=0)

    p = sub.add_parser("experiment", help="run a configured experiment and write raw CSV + JSON summary")
    _common(p)
    p.add_argument("--workers", type=int)
    p.add_argument("--check", action="store_true", help=f"exit with {EXIT_CHECK_FAILED} if a check fails")
    return parser


COMMANDS = {"classify": cmd_classify, "bp": cmd_bp, "gen": cmd_gen, "percolate": cmd_percolate,
            "fpp": cmd_fpp, "flood": cmd_flood, "experiment": cmd_experiment}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if args.command == "bp" and not (args.max_events or args.max_time is not None or args.max_theta):
        print("bp needs --max-events, --max-time or --max-theta", file=sys.stderr)
        return 1
    return COMMANDS[args.command](args, cfg)


if __name__ == "__main__":
    sys.exit(main())
