"""Command line entry point: ``flexvrp {map,gen,solve,compare,sweep}``.

Exit codes: 0 success, 1 solver limit reached, 2 bad input, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

from .errors import (
    ConfigError, FlexVrpError, InvalidInstance, LimitReached, ModelError, ParseError, TooLarge,
)
from .report import METHODS

EXIT_OK, EXIT_LIMIT, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3
_INPUT_ERRORS = (ConfigError, InvalidInstance, ModelError, ParseError, TooLarge)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flexvrp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("map", help="write a synthetic coordinate file")
    m.add_argument("--out", required=True)
    m.add_argument("--count", type=int, default=1000)
    m.add_argument("--seed", type=int, default=0)

    g = sub.add_parser("gen", help="sample an instance from a coordinate file")
    g.add_argument("--nodes", required=True)
    g.add_argument("--customers", type=int, required=True)
    g.add_argument("--vehicles", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--config", help="key=value file with cost and inconvenience overrides")

    s = sub.add_parser("solve", help="solve an instance file")
    s.add_argument("--instance", required=True)
    s.add_argument("--method", choices=METHODS, default="bdd")
    s.add_argument("--dump-model", metavar="FILE", help="write the LP-format model")
    s.add_argument("--dump-cuts", metavar="FILE", help="write the cut log")
    s.add_argument("--gap", type=float, default=1e-4)
    s.add_argument("--max-iters", type=int, default=200)
    s.add_argument("--time-limit", type=float)
    s.add_argument("--literal-master", action="store_true",
                   help="decomposition master without the implied time and spend rows")

    c = sub.add_parser("compare", help="solve one instance with several methods")
    c.add_argument("--instance", required=True)
    c.add_argument("--methods", default="monolithic,gbd,bdd")
    c.add_argument("--gap", type=float, default=1e-4)
    c.add_argument("--max-iters", type=int, default=200)

    w = sub.add_parser("sweep", help="run an experiment config and write CSV")
    w.add_argument("--config", required=True)
    w.add_argument("--out", help="CSV path (default: config 'output' or stdout)")
    return p


def _load_instance(path):
    from .model import Instance, require_valid

    try:
        inst = Instance.load(path)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read instance {path}: {exc}") from None
    require_valid(inst)
    return inst


def _write(path, text):
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _cmd_map(args):
    from .harness import format_coords, synthetic_map

    _write(args.out, format_coords(synthetic_map(args.count, args.seed)))


def _cmd_gen(args):
    from .harness import ExperimentConfig, load_config, parse_coords, sample_instance

    cfg = load_config(args.config) if args.config else ExperimentConfig()
    inst = sample_instance(parse_coords(args.nodes), args.customers, args.vehicles, args.seed,
                           cfg.params(), cfg.inconvenience(), cfg.horizon_factor)
    inst.save(args.out)


def _cmd_solve(args):
    from .decomposition import dump_cuts
    from .formulations import build_p2, build_vrp_baseline
    from .harness import run_method
    from .milp import dump_lp

    inst = _load_instance(args.instance)
    if args.dump_model:
        build = build_vrp_baseline if args.method == "vrp" else build_p2
        _write(args.dump_model, dump_lp(build(inst)[0]))
    rep = run_method(inst, args.method, args.gap, args.max_iters, args.time_limit,
                     args.literal_master)
    print(json.dumps(rep.summary(), indent=1))
    if args.dump_cuts:
        _write(args.dump_cuts, dump_cuts(rep.cuts))


def _cmd_compare(args):
    from .harness import run_method

    inst = _load_instance(args.instance)
    out = {}
    for method in [m.strip() for m in args.methods.split(",") if m.strip()]:
        if method not in METHODS:
            raise ConfigError(f"unknown method {method!r}")
        rep = run_method(inst, method, args.gap, args.max_iters)
        out[method] = {"objective": rep.objective, "iterations": rep.iterations,
                       "wall_time": rep.wall_time, "routes": rep.routes}
    print(json.dumps(out, indent=1))


def _cmd_sweep(args):
    from .harness import load_config, run_experiment, to_csv

    cfg = load_config(args.config)
    text = to_csv(run_experiment(cfg))
    _write(args.out or cfg.output or "-", text)


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    handler = {"map": _cmd_map, "gen": _cmd_gen, "solve": _cmd_solve,
               "compare": _cmd_compare, "sweep": _cmd_sweep}[args.command]
    try:
        handler(args)
    except LimitReached as exc:
        print(f"limit reached: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except _INPUT_ERRORS as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FlexVrpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
