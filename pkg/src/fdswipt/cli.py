"""Command-line entry point.

Subcommands
-----------
solve     solve one realization and print the design as JSON
sweep     run a sweep configuration and write its CSV
certify   re-check the optimality certificate of a saved ``solve`` output
selftest  run the analytic and oracle checks

Exit status is 0 on success, 2 when some sweep point has no feasible
trial, and 1 on any error.
"""

import argparse
import json
import logging
import sys
import warnings

from .exceptions import ContractError, InfeasibleError, NonConvergence, SolverError
from .harness import ExperimentConfig, params_from_dict, run_sweep, solve_joint
from .jbps import certify, solution_from_dict
from .selftest import run_checks
from .system import ChannelRealization, SystemParams, compute_bounds, sample_channels

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2

log = logging.getLogger("fdswipt")


def _method_list(name):
    return ("jbps", "zf") if name == "both" else (name,)


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ContractError(f"{path} is not valid JSON: {exc}") from exc


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_solve(args) -> int:
    params = SystemParams()
    if args.config:
        params = params_from_dict(_load_json(args.config).get("params", {}))
    ch = sample_channels(params, args.trial, args.seed)
    bounds = compute_bounds(params, ch)
    report = {"params": params.to_dict(), "channels": ch.to_dict(), "solutions": {}}
    failed = False
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for method in _method_list(args.method):
            try:
                report["solutions"][method] = solve_joint(params, ch, bounds, method).to_dict()
            except (InfeasibleError, SolverError, NonConvergence) as exc:
                report["solutions"][method] = {"error": f"{type(exc).__name__}: {exc}"}
                failed = True
    _emit(json.dumps(report, indent=2) + "\n", args.out)
    return EXIT_INFEASIBLE if failed else EXIT_OK


def cmd_sweep(args) -> int:
    if not args.config:
        raise ContractError("sweep needs --config")
    data = _load_json(args.config)
    for key, value in (("seed", args.seed), ("trials", args.trials),
                       ("output_path", args.out), ("workers", args.workers)):
        if value is not None:
            data[key] = value
    if args.method:
        data["methods"] = list(_method_list(args.method))
    config = ExperimentConfig.from_dict(data)
    result = run_sweep(config)
    if not config.output_path:
        sys.stdout.write(result.to_csv())
    if result.infeasible_only:
        log.error("some sweep point has no feasible trial")
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_certify(args) -> int:
    path = args.solution or args.config
    if not path:
        raise ContractError("certify needs the path of a saved solve output")
    data = _load_json(path)
    params = SystemParams(**data["params"])
    ch = ChannelRealization.from_dict(data["channels"])
    bounds = compute_bounds(params, ch)
    entry = data["solutions"].get("jbps")
    if entry is None or "downlink" not in entry:
        raise ContractError("saved output holds no JBPS solution")
    sol = solution_from_dict(entry["downlink"])
    certs = certify(sol, params, ch, bounds)
    users = []
    for k, c in enumerate(certs):
        users.append({"user": k, "holds": c.holds(), "duals_positive": c.duals_positive,
                      **{key: float(val) for key, val in vars(c).items()}})
    ok = all(u["holds"] for u in users)
    _emit(json.dumps({"certificate_holds": ok, "users": users}, indent=2) + "\n", args.out)
    return EXIT_OK if ok else EXIT_ERROR


def cmd_selftest(args) -> int:
    results = run_checks()
    width = max(len(r.name) for r in results)
    lines = [f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}" for r in results]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK if all(r.passed for r in results) else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fdswipt",
        description="Minimum end-to-end power design for full-duplex MISO SWIPT systems.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int, help="64-bit seed of the channel draws")
        p.add_argument("--trials", type=int, help="Monte Carlo trials per sweep point")
        p.add_argument("--out", help="write the output here instead of stdout")
        p.add_argument("--method", choices=("jbps", "zf", "both"), help="downlink design")

    p = sub.add_parser("solve", help="solve one channel realization")
    common(p)
    p.add_argument("--trial", type=int, default=0, help="trial index of the realization")
    p.set_defaults(func=cmd_solve, seed=0, method="both")

    p = sub.add_parser("sweep", help="run a parameter sweep and write CSV")
    common(p)
    p.add_argument("--workers", type=int, help="worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("certify", help="re-check a saved JBPS solution")
    common(p)
    p.add_argument("solution", nargs="?", help="output of 'solve'")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("selftest", help="run analytic and oracle checks")
    common(p)
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ContractError, OSError, InfeasibleError, SolverError, NonConvergence,
            KeyError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
