"""Command-line entry point: ``evotune run|validate|plan``.

Exit codes: 0 success, 1 invalid input, 2 evaluator or runtime failure
(reported after the system configuration has been restored).
"""

from __future__ import annotations

import argparse
import logging
import random
import sys
from pathlib import Path

from . import __version__
from .engine import GaConfig, RunReport, run
from .errors import EvotuneError, ValidationError
from .fitness import (
    Benchmark,
    LiveEvaluator,
    RecordingEvaluator,
    ReplayEvaluator,
    SimulatedEvaluator,
    load_fixture,
)
from .fitness.live import NETPERF_TEMPLATE
from .fitness.parsers import THROUGHPUT_PARSERS
from .paramspace import (
    CATALOGS,
    Chromosome,
    IntRange,
    ParameterSpace,
    builtin_catalog,
    load_param_file,
    parse_canonical,
    render_apply_commands,
    sample_chromosome,
)
from .sysapply import Aborted, CommandRunner, Session, abort_on_signals, resolve_mode

log = logging.getLogger("evotune")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _add_space_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    group = p.add_mutually_exclusive_group(required=required)
    group.add_argument("--params", metavar="FILE", help="parameter file")
    group.add_argument("--catalog", choices=sorted(CATALOGS), help="built-in parameter catalog")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evotune",
        description="Search OS network parameters for throughput with a genetic algorithm.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an optimization")
    _add_space_args(p, required=False)
    p.add_argument("--evaluator", choices=("live", "sim", "replay"), required=True)
    p.add_argument("--sim-fixture", metavar="FILE",
                   help="simulation model (path, or toy16 / toy-cal.json)")
    p.add_argument("--replay-cache", metavar="FILE", help="JSON cache to replay")
    p.add_argument("--record-cache", metavar="FILE", help="save every evaluation here")
    p.add_argument("--default", metavar="GENES", dest="default_genes",
                   help="default chromosome as ';'-separated genes")
    live = p.add_argument_group("live benchmark")
    live.add_argument("--benchmark-cmd", default=NETPERF_TEMPLATE,
                      help="argv template with {host} {port} {duration} (default: %(default)s)")
    live.add_argument("--benchmark-parser", choices=sorted(THROUGHPUT_PARSERS), default="netperf")
    live.add_argument("--host", default="127.0.0.1")
    live.add_argument("--port", type=int, default=12865)
    live.add_argument("--duration", type=float, default=10.0, help="seconds per measurement")
    live.add_argument("--grace", type=float, default=15.0,
                      help="extra seconds before a benchmark counts as hung")
    ga = p.add_argument_group("genetic algorithm")
    defaults = GaConfig()
    ga.add_argument("--population-size", type=int, default=defaults.population_size)
    ga.add_argument("--generations", type=int, default=defaults.generations)
    ga.add_argument("--selection", type=float, default=defaults.selection_fraction,
                    help="fraction culled and used as parents per generation")
    ga.add_argument("--crossover", type=float, default=defaults.crossover_probability)
    ga.add_argument("--mutation", type=float, default=defaults.mutation_probability)
    ga.add_argument("--seed", type=int, default=defaults.seed)
    ga.add_argument("--mutate-survivors", action="store_true",
                    help="also mutate surviving individuals (their fitness is re-measured)")
    ga.add_argument("--allow-duplicates", action="store_true",
                    help="keep offspring identical to already-scored chromosomes")
    ga.add_argument("--workers", type=int, default=1,
                    help="parallel evaluations for evaluators that allow it")
    out = p.add_argument_group("output")
    out.add_argument("--report-json", default="report.json", metavar="FILE")
    out.add_argument("--csv", default="series.csv", metavar="FILE")
    p.add_argument("--dry-run", action="store_true",
                   help="log system commands instead of executing them")
    p.add_argument("--legacy-ifconfig", action="store_true",
                   help="use ifconfig instead of ip link for interface settings")

    p = sub.add_parser("validate", help="check a parameter file")
    p.add_argument("path")

    p = sub.add_parser("plan", help="print the commands for one random chromosome")
    _add_space_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--legacy-ifconfig", action="store_true")
    return parser


def _load_space(args) -> ParameterSpace | None:
    if args.params:
        try:
            return load_param_file(args.params)
        except OSError as exc:
            raise ValidationError(f"cannot read {args.params}: {exc.strerror}") from None
    if args.catalog:
        return builtin_catalog(args.catalog)
    return None


def _floor_chromosome(space: ParameterSpace) -> Chromosome:
    return tuple(spec.kind.min for spec in space.specs)


def _print_summary(report: RunReport, space: ParameterSpace, legacy: bool) -> None:
    best = report.overall_best
    gains = report.improvement_over_default()
    print(f"best throughput: {best.fitness:.2f} Mbit/s "
          f"(individual {best.id}, born in generation {best.birth_generation})")
    print(f"mean default throughput: {report.default_mean:.2f} Mbit/s "
          f"over {len(report.per_generation)} generations")
    print(f"best vs mean default: {gains['best_vs_default']:+.1f}%")
    print(f"mean per-generation best vs mean default: {gains['mean_best_vs_default']:+.1f}%")
    print(f"evaluations: {report.evaluation_count}")
    print("winning configuration:")
    for cmd in render_apply_commands(space, best.chromosome, legacy):
        print(f"  {cmd}")


def cmd_run(args) -> int:
    config = GaConfig(
        population_size=args.population_size,
        generations=args.generations,
        selection_fraction=args.selection,
        crossover_probability=args.crossover,
        mutation_probability=args.mutation,
        seed=args.seed,
        mutate_survivors=args.mutate_survivors,
        avoid_duplicates=not args.allow_duplicates,
    )
    config.check_runnable()
    space = _load_space(args)
    fixture = load_fixture(args.sim_fixture) if args.sim_fixture else None
    if space is None:
        if fixture is None or fixture.space is None:
            raise ValidationError("give --params or --catalog (or a fixture that names its space)")
        space = fixture.space

    default = None
    if args.default_genes:
        default = parse_canonical(space, args.default_genes, check_ranges=False)
    elif fixture is not None and fixture.default is not None \
            and fixture.space is not None and fixture.space.fingerprint() == space.fingerprint():
        default = fixture.default

    session = None
    if args.evaluator == "sim":
        if fixture is None:
            raise ValidationError("--evaluator sim needs --sim-fixture")
        evaluator = SimulatedEvaluator(space, fixture.model, seed=args.seed)
    elif args.evaluator == "replay":
        if not args.replay_cache:
            raise ValidationError("--evaluator replay needs --replay-cache")
        evaluator = ReplayEvaluator.from_file(args.replay_cache)
    else:
        session = Session(space, runner=args.runner, mode=resolve_mode(args.dry_run),
                          legacy_ifconfig=args.legacy_ifconfig)
        benchmark = Benchmark.from_string(
            args.benchmark_cmd, parser=args.benchmark_parser, host=args.host,
            port=args.port, duration=args.duration, grace=args.grace)
        evaluator = LiveEvaluator(session, benchmark, runner=args.runner)
        if session.dry_run:
            log.warning("dry run: nothing is applied and every fitness is 0")
    if default is None and args.evaluator != "live":
        raise ValidationError("no default chromosome: pass --default or a matching fixture")

    recorder = RecordingEvaluator(evaluator) if args.record_cache else None
    scorer = recorder or evaluator
    try:
        with abort_on_signals(), evaluator:
            if default is None:
                if session.dry_run:
                    log.warning("dry run: using each parameter's lower bound as the default")
                    default = _floor_chromosome(space)
                else:
                    default = session.default_chromosome()
            report = run(space, config, scorer, default, workers=args.workers)
    except (EvotuneError, Aborted, KeyboardInterrupt) as exc:
        if isinstance(exc, ValidationError):
            raise
        print(f"evotune: run failed: {exc}", file=sys.stderr)
        if session is not None and session.restore_count:
            print("evotune: system configuration restored", file=sys.stderr)
        return EXIT_RUNTIME

    if recorder is not None:
        recorder.save(args.record_cache)
    Path(args.report_json).write_text(report.to_json(), encoding="utf-8")
    Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    _print_summary(report, space, args.legacy_ifconfig)
    return EXIT_OK


def _describe_range(kind) -> str:
    if isinstance(kind, IntRange):
        return f"[{kind.min}, {kind.max}]"
    return "[" + ", ".join(f"{lo}..{hi}" for lo, hi in zip(kind.min, kind.max)) + "]"


def cmd_validate(args) -> int:
    try:
        space = load_param_file(args.path)
    except OSError as exc:
        raise ValidationError(f"cannot read {args.path}: {exc.strerror}") from None
    if not len(space):
        print("warning: 0 parameters", file=sys.stderr)
        print("0 parameters")
        return EXIT_OK
    width = max(len(s.key) for s in space.specs)
    for spec in space.specs:
        print(f"  {spec.key:<{width}}  {_describe_range(spec.kind)}")
    print(f"{len(space)} parameters OK")
    return EXIT_OK


def cmd_plan(args) -> int:
    space = _load_space(args)
    if not len(space):
        raise ValidationError("parameter space is empty")
    chromosome = sample_chromosome(space, random.Random(args.seed))
    for cmd in render_apply_commands(space, chromosome, args.legacy_ifconfig):
        print(cmd)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "validate": cmd_validate, "plan": cmd_plan}


def main(argv: list[str] | None = None, *, runner: CommandRunner | None = None) -> int:
    """Parse ``argv`` and dispatch. ``runner`` replaces subprocess execution."""
    args = build_parser().parse_args(argv)
    args.runner = runner
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"evotune: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
