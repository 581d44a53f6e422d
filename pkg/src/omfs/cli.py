"""Command-line front-end: simulate, generate, compare, validate.

Exit codes: 0 success, 1 invalid input (bad flags, unreadable files,
malformed workloads or configs), 2 internal error.  Results go to
stdout and --out files; diagnostics go to stderr.  Set OMFS_LOG=info or
OMFS_LOG=debug for engine logging on stderr.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .engine import SCHEDULERS, simulate
from .metrics import build_report, compare_report, format_report
from .model import ModelError, entitled_cpu_count, validate_system
from .workload import (
    ConfigError,
    SystemConfig,
    WorkloadError,
    WorkloadSpec,
    generate_workload,
    generator_params_from_json,
    import_swf,
    parse_config,
    parse_workload,
    serialize_workload,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INTERNAL = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; 2 is reserved for internal
    faults here, so usage problems exit 1 instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _setup_logging() -> None:
    level = os.environ.get("OMFS_LOG", "off").strip().lower()
    if level in ("info", "debug"):
        logging.basicConfig(
            stream=sys.stderr,
            level=logging.INFO if level == "info" else logging.DEBUG,
            format="%(levelname)s %(name)s: %(message)s",
        )


def _add_workload_args(sub: argparse.ArgumentParser) -> None:
    source = sub.add_mutually_exclusive_group(required=True)
    source.add_argument("--workload", metavar="PATH", help="native workload file")
    source.add_argument("--swf", metavar="PATH", help="18-field archive workload file")
    sub.add_argument("--config", metavar="PATH", required=True, help="JSON system configuration")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="omfs", description="Fair-share cluster scheduling simulator")
    commands = parser.add_subparsers(dest="command", required=True)

    sim = commands.add_parser("simulate", parents=[], help="run one workload under one scheduler")
    _add_workload_args(sim)
    sim.add_argument("--scheduler", choices=SCHEDULERS, default="omfs")
    sim.add_argument("--out", metavar="PATH", required=True, help="trace CSV destination")
    sim.add_argument("--seed", type=int, default=0)
    sim.set_defaults(func=cmd_simulate)

    gen = commands.add_parser("generate", help="write a synthetic workload")
    gen.add_argument("--params", metavar="PATH", required=True, help="JSON generator parameters")
    gen.add_argument("--out", metavar="PATH", required=True, help="native workload destination")
    gen.set_defaults(func=cmd_generate)

    cmp_ = commands.add_parser("compare", help="run several schedulers on one workload")
    _add_workload_args(cmp_)
    cmp_.add_argument(
        "--schedulers",
        default="omfs,fcfs,backfill,capped",
        help="comma-separated scheduler list",
    )
    cmp_.add_argument("--out", metavar="PATH", required=True, help="comparison CSV destination")
    cmp_.add_argument("--seed", type=int, default=0)
    cmp_.set_defaults(func=cmd_compare)

    val = commands.add_parser("validate", help="check a workload + config, print entitlements")
    _add_workload_args(val)
    val.set_defaults(func=cmd_validate)
    return parser


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _load_inputs(args) -> tuple[WorkloadSpec, SystemConfig]:
    config = parse_config(_read(args.config))
    if args.workload is not None:
        spec = parse_workload(_read(args.workload))
    else:
        spec, skipped = import_swf(_read(args.swf), config.swf_defaults)
        if skipped:
            print(f"warning: skipped {len(skipped)} unusable workload line(s)", file=sys.stderr)
    if config.users is not None or config.cpu_total is not None:
        spec = WorkloadSpec(
            cpu_total=config.cpu_total if config.cpu_total is not None else spec.cpu_total,
            users=config.users if config.users is not None else spec.users,
            jobs=spec.jobs,
        )
    problems = validate_system(spec.users, spec.cpu_total)
    if problems:
        raise WorkloadError("; ".join(problems))
    return spec, config


def cmd_simulate(args) -> int:
    spec, config = _load_inputs(args)
    trace = simulate(spec, config.policy, args.scheduler, args.seed)
    Path(args.out).write_text(trace.to_csv(), encoding="utf-8")
    sys.stdout.write(format_report(build_report(trace, spec.users, config.policy)))
    return EXIT_OK


def cmd_generate(args) -> int:
    params = generator_params_from_json(_read(args.params))
    spec = generate_workload(params)
    Path(args.out).write_text(serialize_workload(spec), encoding="utf-8")
    print(f"generated {len(spec.jobs)} jobs for {len(spec.users)} users -> {args.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    names: list[str] = []
    for name in args.schedulers.split(","):
        name = name.strip()
        if not name:
            continue
        if name not in SCHEDULERS:
            raise WorkloadError(f"unknown scheduler {name!r}; choose from {', '.join(SCHEDULERS)}")
        if name not in names:
            names.append(name)
    if not names:
        raise WorkloadError("no schedulers requested")
    spec, config = _load_inputs(args)
    with ThreadPoolExecutor(max_workers=len(names)) as pool:
        traces = list(pool.map(lambda s: simulate(spec, config.policy, s, args.seed), names))
    reports = {
        name: build_report(trace, spec.users, config.policy)
        for name, trace in zip(names, traces)
    }
    table = compare_report(reports)
    Path(args.out).write_text(table.to_csv(), encoding="utf-8")
    sys.stdout.write(table.to_text())
    return EXIT_OK


def cmd_validate(args) -> int:
    spec, _config = _load_inputs(args)
    print(f"cpu_total {spec.cpu_total}")
    print("user percent entitled")
    for name in sorted(spec.users):
        entitled = entitled_cpu_count(spec.users[name].percent, spec.cpu_total)
        print(f"{name} {spec.users[name].percent} {entitled}")
    print(f"jobs {len(spec.jobs)}")
    print("ok")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INVALID
    try:
        return args.func(args)
    except (WorkloadError, ConfigError, ModelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:   # noqa: BLE001 - last-resort boundary
        logging.getLogger("omfs.cli").debug("internal error", exc_info=True)
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
