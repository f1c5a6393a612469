"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 validation failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import TASKS, load_config, parse_config
from .errors import ConfigError, WeakdriveError
from .reporting import fmt_value
from .runner import TASK_RUNNERS

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_VALIDATION = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="weakdrive",
        description=(
            "Steady states and entanglement negativity of weakly driven "
            "two-level atom ensembles"
        ),
    )
    sub = parser.add_subparsers(dest="task", required=True)
    for task in TASKS:
        p = sub.add_parser(task)
        p.add_argument("--config", help="JSON run configuration", default=None)
        p.add_argument("--out", help="output directory", default=None)
        p.add_argument("--parallel", type=int, default=1, help="worker processes")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.parallel < 1:
        print("error: --parallel must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        data = load_config(args.config) if args.config else {}
        if args.task != "validate" and not args.config:
            raise ConfigError("config", "--config is required for this task")
        if args.seed is not None:
            data = dict(data)
            data["seed"] = args.seed
        cfg = parse_config(data, args.task)
        bundle = TASK_RUNNERS[args.task](cfg, parallelism=args.parallel)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except WeakdriveError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    if args.out:
        bundle.write(args.out)
        print(f"results written to {args.out}")

    if args.task == "validate":
        for check in bundle.report["checks"]:
            status = "PASS" if check["passed"] else "FAIL"
            print(
                f"{status} {check['name']}: measured={fmt_value(check['measured'])} "
                f"threshold={fmt_value(check['threshold'])}"
            )
        if not bundle.report["all_passed"]:
            print("validation FAILED", file=sys.stderr)
            return EXIT_VALIDATION
        print("validation passed")
    elif args.task == "bounds":
        for key in ("D0", "bound_omega", "N_max", "eta_max", "L_min", "n_min"):
            print(f"{key} = {fmt_value(bundle.report[key])}")
    elif args.task == "sweep":
        thr = bundle.report["threshold"]
        print(
            f"sweep threshold: eta = {fmt_value(thr['eta_sweep_estimate'])} "
            f"(omega/Gamma = {fmt_value(thr['omega_sweep_estimate'])})"
        )
        ext = bundle.report["extremum"]
        print(f"extremum: N_max = {fmt_value(ext['n_max'])} at eta = {fmt_value(ext['eta_max'])}")
        failures = bundle.report["point_errors"]
        if failures:
            print(f"warning: {len(failures)} grid point(s) failed; see report.json")
    elif args.task == "solve":
        neg = bundle.report["negativity"]
        print(
            f"negativity2 = {fmt_value(neg['negativity2'])} "
            f"(entanglement {neg['entanglement']})"
        )
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
