"""Command line entry point.

Subcommands::

    generate        sample a graph; write edges.txt and latents.csv
    reconstruct     build the cluster net and Gamma graphs from a graph
    evaluate        run a configured experiment and score it
    observer-check  derive parameters from a-priori bounds and test feasibility

Exit codes: 0 success, 1 acceptance thresholds violated, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

from . import rgg
from .errors import ConfigError
from .fileio import atomic_write, dump_json
from .harness import ExperimentConfig, Layout, reconstruct, run_experiment, trial_seed
from .linkfn import LinkFunction
from .manifold import ManifoldModel
from .params import ObserverInputs, derive_observer_params, feasibility_test

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

DEFAULT_GENERATE = {"model": {"kind": "sphere2", "R": 1.0},
                    "link": {"family": "exp_decay", "a": 0.9, "b": 1.0, "D": 2.0},
                    "vertex_count": 500}

DEFAULT_OBSERVER = {"total_vertices": 1_000_000, "varsigma": 0.1, "d": 2, "D": 2.0,
                    "kappa": 1.0, "r_M0": math.inf, "C": 0.25,
                    "link": {"family": "exp_decay", "a": 0.9, "b": 1.0, "D": 2.0}}


def _load_json(path):
    if path is None:
        return None
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None


def cmd_generate(args) -> int:
    data = _load_json(args.config) or DEFAULT_GENERATE
    model = ManifoldModel(**data["model"])
    link = LinkFunction(**data["link"])
    count = int(data.get("vertex_count", DEFAULT_GENERATE["vertex_count"]))
    G = rgg.generate(model, link, count, args.seed)
    os.makedirs(args.out, exist_ok=True)
    G.write_edge_list(os.path.join(args.out, "edges.txt"))
    G.with_evaluation().write_latents_csv(os.path.join(args.out, "latents.csv"))
    print(f"wrote {count} vertices to {args.out}")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    cfg = _experiment(args)
    ps = cfg.params
    layout = Layout.build(ps.n, ps.d, cfg.group_count)
    if args.edges:
        G = rgg.from_edge_list(args.edges)
        if G.vertex_count < cfg.vertex_count:
            raise ConfigError(f"edge list has {G.vertex_count} vertices, layout needs {cfg.vertex_count}")
    else:
        G = rgg.generate(cfg.model, cfg.link, cfg.vertex_count, trial_seed(cfg.seed, 0), materialize=False)
    net, comps, g_geo, g_euc, nu = reconstruct(G, layout, ps, cfg.link)
    os.makedirs(args.out, exist_ok=True)
    net.provenance = {"seed": G.seed, "params": ps.to_dict()}
    atomic_write(os.path.join(args.out, "net.json"), net.to_json())
    atomic_write(os.path.join(args.out, "gamma_geo.txt"), g_geo.to_text())
    atomic_write(os.path.join(args.out, "gamma_euc.txt"), g_euc.to_text())
    atomic_write(os.path.join(args.out, "nu.json"), dump_json({
        "centers": [int(c) for c in net.centers], "weights": [float(x) for x in nu.weights]}))
    print(f"net with {len(net)} clusters (halted_normally={net.halted_normally})")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _experiment(args)
    summary = run_experiment(cfg, args.out, kernel_report=args.kernel_report)
    acc = summary["acceptance"]
    for name, verdict in acc.items():
        if name != "passed":
            print(f"{name}: {'PASS' if verdict['pass'] else 'FAIL'} ({verdict['value']})")
    print(f"counters: {summary['counters']}")
    return EXIT_OK if acc["passed"] else EXIT_FAIL


def cmd_observer_check(args) -> int:
    data = dict(DEFAULT_OBSERVER)
    data.update(_load_json(args.config) or {})
    link = LinkFunction(**data.pop("link"))
    r_M_lower = data.pop("r_M_lower", None)
    inp = ObserverInputs(link=link, **{k: (float(v) if k not in ("total_vertices", "d") else int(v))
                                       for k, v in data.items()})
    ps = derive_observer_params(inp)
    for key, value in ps.derivation.items():
        print(f"{key:>14} = {value:.10g}")
    if r_M_lower is None:
        r_M_lower = ps.derivation["(ii) r_M"]
    verdict = feasibility_test(ps, float(r_M_lower))
    print("FEASIBLE at this |V|" if verdict else "INFEASIBLE at this |V|")
    return EXIT_OK


def _experiment(args) -> ExperimentConfig:
    if args.config is None:
        raise ConfigError("this subcommand needs --config")
    cfg = ExperimentConfig.from_dict(_load_json(args.config))
    if args.seed_given:
        cfg.seed = args.seed
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rggeom", description="Geometry recovery from random geometric graphs")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default="out"):
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--out", default=out_default, help="output directory")

    common(sub.add_parser("generate", help="sample a graph and export it"))
    p = sub.add_parser("reconstruct", help="build net and Gamma graphs")
    common(p)
    p.add_argument("--edges", default=None, help="edge list to read instead of sampling")
    p = sub.add_parser("evaluate", help="run an experiment and score it")
    common(p)
    p.add_argument("--kernel-report", action="store_true", help="also write kernel_report.csv")
    common(sub.add_parser("observer-check", help="observer parameters and feasibility"))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = 0
    handlers = {"generate": cmd_generate, "reconstruct": cmd_reconstruct,
                "evaluate": cmd_evaluate, "observer-check": cmd_observer_check}
    try:
        return handlers[args.command](args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
