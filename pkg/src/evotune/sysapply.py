"""Apply chromosomes to the running system and put the defaults back.

Every external program runs through a ``CommandRunner`` (argv in, result
out, never a shell), so sessions can be exercised against a stub. A session
snapshots the current value of every parameter its space touches, applies
chromosomes on top, and restores the snapshot exactly once when closed.
Setting ``EVOTUNE_DRY_RUN=1`` forces dry-run mode, in which nothing is
executed at all.
"""

from __future__ import annotations

import contextlib
import enum
import logging
import os
import re
import signal
import subprocess
import threading
import time
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

from .errors import EvotuneError, MissingInterface, NoSnapshot, ReadFailed
from .paramspace import (
    Chromosome,
    CommandLine,
    Mechanism,
    ParameterSpace,
    ParameterSpec,
    parse_gene,
    render_apply_commands,
    render_command,
)

log = logging.getLogger(__name__)

DRY_RUN_ENV = "EVOTUNE_DRY_RUN"


@dataclass(frozen=True)
class CommandResult:
    returncode: int
    stdout: str = ""
    stderr: str = ""

    @property
    def ok(self) -> bool:
        return self.returncode == 0


class CommandTimeout(EvotuneError):
    def __init__(self, argv: Sequence[str], timeout: float):
        self.argv = list(argv)
        self.timeout = timeout
        super().__init__(f"{' '.join(self.argv)} timed out after {timeout:g}s")


class CommandRunner(Protocol):
    def __call__(self, argv: Sequence[str], timeout: float | None = None) -> CommandResult: ...


class SubprocessRunner:
    def __call__(self, argv: Sequence[str], timeout: float | None = None) -> CommandResult:
        try:
            proc = subprocess.run(list(argv), capture_output=True, text=True,
                                  timeout=timeout, check=False)
        except subprocess.TimeoutExpired:
            raise CommandTimeout(argv, timeout) from None
        except OSError as exc:
            return CommandResult(127, "", str(exc))
        return CommandResult(proc.returncode, proc.stdout, proc.stderr)


class Mode(enum.Enum):
    LIVE = "live"
    DRY_RUN = "dry-run"


def resolve_mode(dry_run: bool = False, environ: Mapping[str, str] | None = None) -> Mode:
    environ = os.environ if environ is None else environ
    if dry_run or environ.get(DRY_RUN_ENV, "").strip() == "1":
        return Mode.DRY_RUN
    return Mode.LIVE


@dataclass(frozen=True)
class SnapshotEntry:
    spec: ParameterSpec
    value: str


@dataclass(frozen=True)
class Snapshot:
    timestamp: float
    entries: tuple[SnapshotEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def values(self) -> dict[str, str]:
        return {e.spec.key: e.value for e in self.entries}


class Outcome(enum.Enum):
    ALL_APPLIED = "all-applied"
    PARTIALLY_APPLIED = "partially-applied"


@dataclass(frozen=True)
class CommandStatus:
    command: CommandLine
    applied: bool
    stderr: str = ""


@dataclass
class ApplyOutcome:
    statuses: list[CommandStatus] = field(default_factory=list)
    rollback: list[CommandStatus] = field(default_factory=list)

    @property
    def overall(self) -> Outcome:
        if all(s.applied for s in self.statuses):
            return Outcome.ALL_APPLIED
        return Outcome.PARTIALLY_APPLIED

    @property
    def ok(self) -> bool:
        return self.overall is Outcome.ALL_APPLIED

    @property
    def failures(self) -> list[CommandStatus]:
        return [s for s in self.statuses if not s.applied]


_MTU = re.compile(r"\bmtu (\d+)")
_QLEN = re.compile(r"\bqlen (\d+)")


class Session:
    """Snapshot, apply and restore for one parameter space.

    Use as a context manager: entering takes the snapshot, leaving restores
    it whatever happened in between. ``restore`` is idempotent per session.
    """

    def __init__(self, space: ParameterSpace, runner: CommandRunner | None = None,
                 mode: Mode = Mode.LIVE, legacy_ifconfig: bool = False,
                 command_timeout: float = 30.0):
        self.space = space
        self.runner = runner if runner is not None else SubprocessRunner()
        self.mode = mode
        self.legacy_ifconfig = legacy_ifconfig
        self.command_timeout = command_timeout
        self.snapshot_taken: Snapshot | None = None
        self.restore_count = 0
        self._lock = threading.Lock()

    @property
    def dry_run(self) -> bool:
        return self.mode is Mode.DRY_RUN

    def _run(self, argv: Sequence[str]) -> CommandResult:
        try:
            return self.runner(argv, timeout=self.command_timeout)
        except CommandTimeout as exc:
            return CommandResult(124, "", str(exc))

    # -- snapshot ----------------------------------------------------------

    def snapshot(self) -> Snapshot:
        """Record the current value of every parameter in the space.

        Dry-run sessions read nothing; their entries carry empty values.
        """
        entries = []
        links: dict[str, str] = {}
        for spec in self.space.specs:
            if self.dry_run:
                entries.append(SnapshotEntry(spec, ""))
            elif spec.mechanism is Mechanism.SYSCTL_WRITE:
                entries.append(SnapshotEntry(spec, self._read_sysctl(spec.key)))
            else:
                if spec.interface not in links:
                    links[spec.interface] = self._read_link(spec.interface)
                entries.append(SnapshotEntry(spec, self._link_attr(spec, links[spec.interface])))
        self.snapshot_taken = Snapshot(time.time(), tuple(entries))
        return self.snapshot_taken

    def _read_sysctl(self, key: str) -> str:
        result = self._run(["sysctl", "-n", key])
        value = " ".join(result.stdout.split())
        if not result.ok or not value:
            raise ReadFailed(key, result.stderr)
        return value

    def _read_link(self, interface: str) -> str:
        result = self._run(["ip", "-o", "link", "show", "dev", interface])
        if not result.ok:
            raise MissingInterface(interface)
        return result.stdout

    @staticmethod
    def _link_attr(spec: ParameterSpec, line: str) -> str:
        pattern = _MTU if spec.mechanism is Mechanism.INTERFACE_MTU else _QLEN
        m = pattern.search(line)
        if not m:
            raise ReadFailed(spec.key, f"no {spec.mechanism.value} in {line.strip()!r}")
        return m.group(1)

    def default_chromosome(self) -> Chromosome:
        """The snapshot read back as a chromosome (ranges unchecked)."""
        if self.snapshot_taken is None or self.dry_run:
            raise NoSnapshot()
        return tuple(parse_gene(e.spec, e.value) for e in self.snapshot_taken.entries)

    # -- apply / restore ---------------------------------------------------

    def apply(self, chromosome: Chromosome) -> ApplyOutcome:
        """Write every gene; on the first failure undo what was written."""
        commands = render_apply_commands(self.space, chromosome, self.legacy_ifconfig,
                                         check_ranges=False)
        outcome = ApplyOutcome()
        if self.dry_run:
            for cmd in commands:
                log.info("dry-run: %s", cmd)
                outcome.statuses.append(CommandStatus(cmd, True))
            return outcome
        if self.snapshot_taken is None:
            raise NoSnapshot()
        with self._lock:
            applied: list[int] = []
            for index, cmd in enumerate(commands):
                result = self._run(cmd.argv)
                if result.ok:
                    applied.append(index)
                    outcome.statuses.append(CommandStatus(cmd, True))
                    continue
                outcome.statuses.append(CommandStatus(cmd, False, result.stderr))
                entries = self.snapshot_taken.entries
                for j in reversed(applied):
                    outcome.rollback.append(self._write(entries[j]))
                break
        return outcome

    def _write(self, entry: SnapshotEntry) -> CommandStatus:
        cmd = render_command(entry.spec, entry.value, self.legacy_ifconfig)
        result = self._run(cmd.argv)
        if not result.ok:
            log.error("could not restore %s: %s", entry.spec.key, result.stderr.strip())
        return CommandStatus(cmd, result.ok, result.stderr)

    def restore(self) -> ApplyOutcome:
        """Write the snapshot back in reverse order, continuing past failures."""
        if self.snapshot_taken is None:
            raise NoSnapshot()
        outcome = ApplyOutcome()
        with self._lock:
            self.restore_count += 1
            for entry in reversed(self.snapshot_taken.entries):
                if self.dry_run:
                    cmd = render_command(entry.spec, entry.value or "<unchanged>",
                                         self.legacy_ifconfig)
                    log.info("dry-run restore: %s", cmd)
                    outcome.statuses.append(CommandStatus(cmd, True))
                else:
                    outcome.statuses.append(self._write(entry))
        return outcome

    def close(self) -> ApplyOutcome | None:
        """Restore once; later calls are no-ops."""
        if self.snapshot_taken is None or self.restore_count:
            return None
        return self.restore()

    def __enter__(self) -> "Session":
        if self.snapshot_taken is None:
            self.snapshot()
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


class Aborted(BaseException):
    """Raised inside the main thread when a termination signal arrives."""

    def __init__(self, signum: int):
        self.signum = signum
        super().__init__(f"aborted by signal {signum}")


@contextlib.contextmanager
def abort_on_signals(signals: Sequence[int] = (signal.SIGTERM, signal.SIGHUP)):
    """Turn termination signals into ``Aborted`` so ``with`` blocks unwind.

    SIGINT already raises KeyboardInterrupt. Outside the main thread this is a
    no-op because Python only delivers signals there.
    """
    if threading.current_thread() is not threading.main_thread():
        yield
        return

    def handler(signum, frame):
        raise Aborted(signum)

    previous = {s: signal.signal(s, handler) for s in signals}
    try:
        yield
    finally:
        for s, h in previous.items():
            signal.signal(s, h)
