"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 data-validation error.
"""

from __future__ import annotations

import argparse
import sys

from .harness import (
    ConfigError,
    DataValidationError,
    SCENARIOS,
    build_experiment_config,
    parse_config_file,
    run_benchmark,
)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stoprule",
        description=(
            "Benchmark stopping policies learned from a single return path. "
            "Writes one CSV per run (per-repetition mean payoffs plus a "
            "summary block); identical seed and configuration give "
            "byte-identical output."
        ),
    )
    parser.add_argument(
        "--scenario", required=True, choices=SCENARIOS,
        help="experiment family to run",
    )
    parser.add_argument(
        "--seed", required=True, type=int,
        help="master seed; repetitions use derived substreams",
    )
    parser.add_argument(
        "--config", required=True,
        help="flat key-value config file, one 'section.key = value' per line",
    )
    parser.add_argument(
        "--out", required=True,
        help="path of the CSV results file",
    )
    parser.add_argument(
        "--preset", choices=("desk",),
        help="desk: 5 repetitions x 200 paths, train_len 500, no Cesaro averaging",
    )
    parser.add_argument(
        "--algorithms",
        help="comma-separated subset, e.g. simple1,simple2 (overrides config)",
    )
    parser.add_argument(
        "--set", dest="sets", action="append", default=[], metavar="KEY=VALUE",
        help="override any config key, e.g. --set run.eval_paths=100",
    )
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        file_keys = parse_config_file(args.config)
        overrides = {}
        for item in args.sets:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            key, _, value = item.partition("=")
            overrides[key.strip()] = value.strip()
        if args.algorithms:
            overrides["run.algorithms"] = args.algorithms
        config = build_experiment_config(
            scenario=args.scenario,
            seed=args.seed,
            out=args.out,
            file_keys=file_keys,
            preset=args.preset,
            overrides=overrides,
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        table = run_benchmark(config)
    except DataValidationError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {config.out}")
    print("algorithm,mean,sd")
    for algo, (mean, sd) in table.summary().items():
        print(f"{algo},{mean:.6f},{sd:.6f}")
    return 0


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
