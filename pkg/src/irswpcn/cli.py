"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 config error, 3 solver failure
threshold exceeded.
"""

import argparse
import sys

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irswpcn",
        description="Active-IRS aided WPCN throughput optimization")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="solve one instance and print a summary")
    solve.add_argument("--config", help="config file (defaults built in)")
    solve.add_argument("--scheme", default="ue_active")
    solve.add_argument("--seed", type=int, default=None)
    solve.add_argument("--realization", type=int, default=0)

    sweep = sub.add_parser("sweep", help="run the configured Monte Carlo sweep")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--seed", type=int, default=None)
    sweep.add_argument("--out", default=None)
    sweep.add_argument("--workers", type=int, default=None)

    check = sub.add_parser("check", help="run the invariant self-checks")
    check.add_argument("--seed", type=int, default=0)

    emit = sub.add_parser("emit-default-config", help="write the default config")
    emit.add_argument("--out", default="irswpcn.cfg")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK

    from . import harness

    if args.command == "emit-default-config":
        text = harness.config_to_text(harness.default_config())
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"wrote {args.out}")
        return EXIT_OK

    if args.command == "check":
        from .selfcheck import run_all
        failed = 0
        for name, ok, detail in run_all(args.seed):
            tag = "PASS" if ok else "FAIL"
            suffix = f"  ({detail})" if detail else ""
            print(f"[{tag}] {name}{suffix}")
            failed += not ok
        return EXIT_OK if failed == 0 else EXIT_SOLVER

    try:
        config = (harness.load_config(args.config) if args.config
                  else harness.default_config())
        if args.seed is not None:
            import dataclasses
            config = dataclasses.replace(config, master_seed=args.seed)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "solve":
        return _run_solve(config, args)
    if args.command == "sweep":
        return _run_sweep(config, args)
    return EXIT_USAGE


def _run_solve(config, args) -> int:
    from . import harness
    from .solvers import SCHEMES

    if args.scheme not in SCHEMES:
        print(f"usage error: unknown scheme {args.scheme!r}; "
              f"choose from {', '.join(sorted(SCHEMES))}", file=sys.stderr)
        return EXIT_USAGE
    cap = config.a_max_db[0] if config.a_max_db else 0.0
    record = harness.run_single(config, args.scheme,
                                sweep_value=_base_value(config), a_max_db=cap,
                                realization=args.realization)
    if record.status.startswith("error"):
        print(f"solver failure: {record.status}", file=sys.stderr)
        return EXIT_SOLVER
    print(f"scheme: {args.scheme}")
    print(f"seed: {config.master_seed}  realization: {args.realization}")
    print(f"objective_bits_per_hz: {record.objective:.10g}")
    print(f"total_energy_joules: {record.total_energy:.10g}")
    print(f"tau0_seconds: {record.tau0:.10g}")
    print(f"iterations: {record.iterations}")
    print(f"feasible: {str(record.feasible).lower()}")
    return EXIT_OK


def _base_value(config) -> float:
    if config.sweep_variable == "p_a_dbm":
        return config.p_a_dbm
    if config.sweep_variable == "x_ue":
        return config.x_ue_m
    return config.x_irs_m


def _run_sweep(config, args) -> int:
    from . import harness
    try:
        out = harness.run_sweep(config, out_dir=args.out, workers=args.workers)
    except harness.SweepAborted as exc:
        print(f"sweep aborted: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {out['records']} ({out['num_records']} records)")
    print(f"wrote {out['aggregate']}")
    print(f"wrote {out['manifest']}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
