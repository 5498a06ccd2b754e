"""Score chromosomes by applying them and running a real benchmark."""

from __future__ import annotations

import logging
import shlex
from dataclasses import dataclass
from typing import Sequence

from ..errors import ApplyFailed, BenchmarkTimeout, UnparseableOutput, ValidationError
from ..paramspace import Chromosome
from ..sysapply import CommandRunner, CommandTimeout, Session, SubprocessRunner
from .base import FitnessEvaluator
from .parsers import THROUGHPUT_PARSERS

log = logging.getLogger(__name__)

NETPERF_TEMPLATE = "netperf -H {host} -p {port} -l {duration} -t TCP_STREAM"
IPERF_TEMPLATE = "iperf3 -c {host} -p {port} -t {duration}"


@dataclass(frozen=True)
class Benchmark:
    """An argv template with ``{host}``, ``{port}`` and ``{duration}`` slots."""

    template: tuple[str, ...]
    parser: str = "netperf"
    host: str = "127.0.0.1"
    port: int = 12865
    duration: float = 10.0
    grace: float = 15.0

    def __post_init__(self):
        if not self.template:
            raise ValidationError("benchmark command template is empty")
        if self.parser not in THROUGHPUT_PARSERS:
            raise ValidationError(f"unknown benchmark parser {self.parser!r}")
        if self.duration <= 0 or self.grace < 0:
            raise ValidationError("benchmark duration must be positive and grace non-negative")
        try:
            self.argv()
        except (KeyError, IndexError, ValueError) as exc:
            raise ValidationError(f"bad benchmark template placeholder: {exc}") from None

    @classmethod
    def from_string(cls, template: str, **kwargs) -> "Benchmark":
        return cls(tuple(shlex.split(template)), **kwargs)

    def argv(self) -> list[str]:
        duration = f"{self.duration:g}"
        return [part.format(host=self.host, port=self.port, duration=duration)
                for part in self.template]

    @property
    def timeout(self) -> float:
        return self.duration + self.grace


class LiveEvaluator(FitnessEvaluator):
    """Apply the chromosome through a session, then measure throughput.

    Calls must be strictly sequential since each one rewrites kernel state.
    In a dry-run session the commands are only logged and every chromosome
    scores 0.
    """

    deterministic = False
    safe_for_parallel = False

    def __init__(self, session: Session, benchmark: Benchmark,
                 runner: CommandRunner | None = None):
        self.session = session
        self.benchmark = benchmark
        self.runner = runner if runner is not None else SubprocessRunner()
        self._warned = False

    def __enter__(self) -> "LiveEvaluator":
        self.session.__enter__()
        return self

    def close(self) -> None:
        self.session.close()

    def evaluate(self, chromosome: Chromosome) -> float:
        outcome = self.session.apply(chromosome)
        if not outcome.ok:
            failed = outcome.failures[0]
            raise ApplyFailed(failed.command.key, failed.stderr)
        if self.session.dry_run:
            if not self._warned:
                log.warning("dry run: benchmark skipped, every fitness is 0")
                self._warned = True
            return 0.0
        return self.measure()

    def measure(self) -> float:
        argv = self.benchmark.argv()
        try:
            result = self.runner(argv, timeout=self.benchmark.timeout)
        except CommandTimeout:
            raise BenchmarkTimeout(argv, self.benchmark.timeout) from None
        parse = THROUGHPUT_PARSERS[self.benchmark.parser]
        try:
            return parse(result.stdout)
        except UnparseableOutput:
            if result.returncode != 0:
                raise UnparseableOutput(
                    f"exit {result.returncode}: {(result.stderr or result.stdout).strip()[:200]}"
                ) from None
            raise


def run_latency_probe(argv: Sequence[str], runner: CommandRunner | None = None,
                      timeout: float = 300.0):
    """Run an hping3/ping command and parse its round-trip summary."""
    from .parsers import parse_latency_hping

    runner = runner if runner is not None else SubprocessRunner()
    try:
        result = runner(list(argv), timeout=timeout)
    except CommandTimeout:
        raise BenchmarkTimeout(list(argv), timeout) from None
    # hping3 prints its summary on stderr
    return parse_latency_hping(result.stdout + "\n" + result.stderr)
