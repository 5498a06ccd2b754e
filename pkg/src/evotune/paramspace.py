"""Parameter definitions, genome encoding and rendering of apply commands.

A parameter file holds one tunable knob per line::

    sysctl -w net.ipv4.tcp_sack=;0;1
    sysctl -w net.ipv4.tcp_rmem=;'4096 87380 6291456';'8192 873800 16777216'
    ifconfig eno2 mtu ;1500;2700

The part before the first ``;`` is the apply-command prefix, followed by the
inclusive lower and upper bound. Quoted bounds hold three integers that are
ranged independently. Blank lines and lines starting with ``#`` are skipped.

A chromosome is a plain tuple with one gene per spec, in space order. Scalar
genes are ints, triple genes are 3-tuples of ints.
"""

from __future__ import annotations

import enum
import hashlib
import random
import re
import shlex
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Sequence, Union

from .errors import InvalidChromosome, MalformedLine, UnknownCatalog, ValidationError

Triple = tuple[int, int, int]
Gene = Union[int, Triple]
Chromosome = tuple[Gene, ...]

# The kernel rejects these triples unless min <= default <= max.
ORDERED_TRIPLE_KEYS = frozenset({"tcp_mem", "tcp_rmem", "tcp_wmem"})

CATALOGS = {
    "listing1-14": "listing1-14.params",
    "table2-27": "table2-27.params",
}


class Mechanism(enum.Enum):
    SYSCTL_WRITE = "sysctl"
    INTERFACE_MTU = "mtu"
    INTERFACE_TXQUEUELEN = "txqueuelen"

    @property
    def is_interface(self) -> bool:
        return self is not Mechanism.SYSCTL_WRITE


@dataclass(frozen=True)
class IntRange:
    min: int
    max: int

    def __post_init__(self):
        if self.min > self.max:
            raise ValidationError(f"min {self.min} > max {self.max}")

    def contains(self, gene: Gene) -> bool:
        return type(gene) is int and self.min <= gene <= self.max

    def sample(self, rng: random.Random) -> int:
        return rng.randint(self.min, self.max)

    def normalize(self, gene: int) -> float:
        if self.max == self.min:
            return 0.0
        return (gene - self.min) / (self.max - self.min)

    def render_bounds(self) -> tuple[str, str]:
        return str(self.min), str(self.max)


@dataclass(frozen=True)
class TripleRange:
    min: Triple
    max: Triple

    def __post_init__(self):
        if len(self.min) != 3 or len(self.max) != 3:
            raise ValidationError("triple bounds need exactly three components")
        for i, (lo, hi) in enumerate(zip(self.min, self.max)):
            if lo > hi:
                raise ValidationError(f"component {i}: min {lo} > max {hi}")

    def contains(self, gene: Gene) -> bool:
        if type(gene) is not tuple or len(gene) != 3:
            return False
        return all(
            type(v) is int and lo <= v <= hi
            for v, lo, hi in zip(gene, self.min, self.max)
        )

    def sample(self, rng: random.Random) -> Triple:
        return tuple(rng.randint(lo, hi) for lo, hi in zip(self.min, self.max))

    def normalize(self, gene: Triple) -> float:
        """Mean of the per-component normalized positions."""
        total = 0.0
        for v, lo, hi in zip(gene, self.min, self.max):
            total += 0.0 if hi == lo else (v - lo) / (hi - lo)
        return total / 3

    def render_bounds(self) -> tuple[str, str]:
        return "'%d %d %d'" % self.min, "'%d %d %d'" % self.max


ValueKind = Union[IntRange, TripleRange]


@dataclass(frozen=True)
class ParameterSpec:
    """One tunable knob.

    ``key`` is the sysctl name for sysctl writes and ``"<interface>:<attr>"``
    for interface attributes, so keys stay unique across mechanisms.
    """

    key: str
    mechanism: Mechanism
    kind: ValueKind
    interface: str | None = None

    def __post_init__(self):
        if not self.key or any(ch.isspace() for ch in self.key):
            raise ValidationError(f"invalid parameter key {self.key!r}")
        if self.mechanism.is_interface != (self.interface is not None):
            raise ValidationError(
                f"{self.key}: interface must be given exactly for interface mechanisms"
            )
        if self.mechanism.is_interface and not isinstance(self.kind, IntRange):
            raise ValidationError(f"{self.key}: interface attributes take scalar bounds")

    @classmethod
    def sysctl(cls, key: str, kind: ValueKind) -> "ParameterSpec":
        return cls(key, Mechanism.SYSCTL_WRITE, kind)

    @classmethod
    def link(cls, interface: str, mechanism: Mechanism, kind: IntRange) -> "ParameterSpec":
        return cls(f"{interface}:{mechanism.value}", mechanism, kind, interface)

    @property
    def short_name(self) -> str:
        if self.mechanism.is_interface:
            return self.mechanism.value
        return self.key.rsplit(".", 1)[-1]

    def listing_prefix(self, legacy: bool = True) -> str:
        if self.mechanism is Mechanism.SYSCTL_WRITE:
            return f"sysctl -w {self.key}="
        if legacy:
            return f"ifconfig {self.interface} {self.mechanism.value} "
        return f"ip link set dev {self.interface} {self.mechanism.value} "

    def to_line(self) -> str:
        lo, hi = self.kind.render_bounds()
        return f"{self.listing_prefix()};{lo};{hi}"


@dataclass(frozen=True)
class ParameterSpace:
    specs: tuple[ParameterSpec, ...]

    def __post_init__(self):
        seen = set()
        for spec in self.specs:
            if spec.key in seen:
                raise ValidationError(f"duplicate key {spec.key}")
            seen.add(spec.key)

    def __len__(self) -> int:
        return len(self.specs)

    def __iter__(self):
        return iter(self.specs)

    def __getitem__(self, index: int) -> ParameterSpec:
        return self.specs[index]

    @property
    def keys(self) -> list[str]:
        return [s.key for s in self.specs]

    def to_text(self) -> str:
        return "".join(spec.to_line() + "\n" for spec in self.specs)

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CommandLine:
    """An argv ready for execution plus the spec key it writes."""

    key: str
    argv: tuple[str, ...]

    def __str__(self) -> str:
        return " ".join(a if " " not in a else _quote_assignment(a) for a in self.argv)


def _quote_assignment(arg: str) -> str:
    name, sep, value = arg.partition("=")
    if sep:
        return f'{name}="{value}"'
    return shlex.quote(arg)


# ---------------------------------------------------------------------------
# parsing

_SYSCTL_PREFIX = re.compile(r"^\s*sysctl\s+-w\s+(?P<key>[^=\s]+)=\s*$")
_IFCONFIG_PREFIX = re.compile(r"^\s*ifconfig\s+(?P<iface>\S+)\s+(?P<attr>mtu|txqueuelen)\s*$")
_IPLINK_PREFIX = re.compile(
    r"^\s*ip\s+link\s+set\s+(?:dev\s+)?(?P<iface>\S+)\s+(?P<attr>mtu|txqueuelen)\s*$"
)


def _spec_from_prefix(prefix: str, kind: ValueKind) -> ParameterSpec:
    m = _SYSCTL_PREFIX.match(prefix)
    if m:
        return ParameterSpec.sysctl(m.group("key"), kind)
    m = _IFCONFIG_PREFIX.match(prefix) or _IPLINK_PREFIX.match(prefix)
    if m:
        mechanism = Mechanism(m.group("attr"))
        if not isinstance(kind, IntRange):
            raise ValidationError(f"{mechanism.value} takes scalar bounds")
        return ParameterSpec.link(m.group("iface"), mechanism, kind)
    raise ValidationError(f"unrecognized apply command {prefix.strip()!r}")


def _parse_bound(text: str) -> int | Triple:
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        parts = text[1:-1].split()
        if len(parts) != 3:
            raise ValidationError(f"quoted bound {text} must hold three integers")
        try:
            return tuple(int(p) for p in parts)
        except ValueError:
            raise ValidationError(f"non-integer bound {text}") from None
    try:
        return int(text)
    except ValueError:
        raise ValidationError(f"non-integer bound {text!r}") from None


def parse_line(line: str) -> ParameterSpec:
    fields = line.split(";")
    if len(fields) != 3:
        raise ValidationError(f"expected 3 ';'-separated fields, got {len(fields)}")
    prefix, lo_text, hi_text = fields
    lo, hi = _parse_bound(lo_text), _parse_bound(hi_text)
    if isinstance(lo, tuple) != isinstance(hi, tuple):
        raise ValidationError("mixed triple and scalar bounds")
    kind = TripleRange(lo, hi) if isinstance(lo, tuple) else IntRange(lo, hi)
    return _spec_from_prefix(prefix, kind)


def parse_param_file(text: str) -> ParameterSpace:
    """Parse parameter-file text into a space, all or nothing."""
    specs: list[ParameterSpec] = []
    seen: set[str] = set()
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            spec = parse_line(line)
        except ValidationError as exc:
            raise MalformedLine(number, str(exc)) from None
        if spec.key in seen:
            raise MalformedLine(number, f"duplicate key {spec.key}")
        seen.add(spec.key)
        specs.append(spec)
    return ParameterSpace(tuple(specs))


def load_param_file(path) -> ParameterSpace:
    with open(path, encoding="utf-8") as f:
        return parse_param_file(f.read())


def builtin_catalog(name: str) -> ParameterSpace:
    try:
        filename = CATALOGS[name]
    except KeyError:
        raise UnknownCatalog(name, sorted(CATALOGS)) from None
    text = resources.files("evotune.data").joinpath(filename).read_text(encoding="utf-8")
    return parse_param_file(text)


def command_identity(command: str) -> tuple[Mechanism, str]:
    """Recover ``(mechanism, key)`` from a rendered command, ignoring its value."""
    if command.lstrip().startswith("sysctl"):
        prefix = command.split("=", 1)[0] + "="
    else:
        prefix = command.rstrip().rsplit(None, 1)[0]
    spec = _spec_from_prefix(prefix, IntRange(0, 0))
    return spec.mechanism, spec.key


# ---------------------------------------------------------------------------
# genome

def sample_gene(spec: ParameterSpec, rng: random.Random) -> Gene:
    gene = spec.kind.sample(rng)
    if isinstance(gene, tuple) and spec.short_name in ORDERED_TRIPLE_KEYS:
        ordered = tuple(sorted(gene))
        # sorting can only leave the box when the bounds themselves are unordered
        if spec.kind.contains(ordered):
            gene = ordered
    return gene


def sample_chromosome(space: ParameterSpace, rng: random.Random) -> Chromosome:
    return tuple(sample_gene(spec, rng) for spec in space.specs)


def validate_chromosome(space: ParameterSpace, chromosome: Sequence[Gene],
                        check_ranges: bool = True) -> None:
    if len(chromosome) != len(space):
        raise InvalidChromosome(
            f"chromosome has {len(chromosome)} genes, space has {len(space)}"
        )
    for spec, gene in zip(space.specs, chromosome):
        if check_ranges:
            ok = spec.kind.contains(gene)
        elif isinstance(spec.kind, TripleRange):
            ok = type(gene) is tuple and len(gene) == 3 and all(type(v) is int for v in gene)
        else:
            ok = type(gene) is int
        if not ok:
            raise InvalidChromosome(f"{spec.key}: gene {gene!r} outside {spec.kind}")


def is_valid(space: ParameterSpace, chromosome: Sequence[Gene]) -> bool:
    try:
        validate_chromosome(space, chromosome)
    except InvalidChromosome:
        return False
    return True


def format_gene(gene: Gene) -> str:
    if isinstance(gene, tuple):
        return " ".join(str(v) for v in gene)
    return str(gene)


def canonical(chromosome: Iterable[Gene]) -> str:
    """Stable text form, used as the replay-cache key."""
    return ";".join(format_gene(g) for g in chromosome)


def parse_gene(spec: ParameterSpec, text: str) -> Gene:
    parts = text.split()
    try:
        values = [int(p) for p in parts]
    except ValueError:
        raise InvalidChromosome(f"{spec.key}: non-integer value {text!r}") from None
    if isinstance(spec.kind, TripleRange):
        if len(values) != 3:
            raise InvalidChromosome(f"{spec.key}: expected three values, got {text!r}")
        return tuple(values)
    if len(values) != 1:
        raise InvalidChromosome(f"{spec.key}: expected one value, got {text!r}")
    return values[0]


def parse_canonical(space: ParameterSpace, text: str, check_ranges: bool = True) -> Chromosome:
    fields = text.split(";")
    if len(fields) != len(space):
        raise InvalidChromosome(f"expected {len(space)} genes, got {len(fields)}")
    chromosome = tuple(parse_gene(spec, f) for spec, f in zip(space.specs, fields))
    validate_chromosome(space, chromosome, check_ranges)
    return chromosome


# ---------------------------------------------------------------------------
# rendering

def render_command(spec: ParameterSpec, value: str, legacy_ifconfig: bool = False) -> CommandLine:
    if spec.mechanism is Mechanism.SYSCTL_WRITE:
        argv = ("sysctl", "-w", f"{spec.key}={value}")
    elif legacy_ifconfig:
        argv = ("ifconfig", spec.interface, spec.mechanism.value, value)
    else:
        argv = ("ip", "link", "set", "dev", spec.interface, spec.mechanism.value, value)
    return CommandLine(spec.key, argv)


def render_apply_commands(space: ParameterSpace, chromosome: Sequence[Gene],
                          legacy_ifconfig: bool = False,
                          check_ranges: bool = True) -> list[CommandLine]:
    validate_chromosome(space, chromosome, check_ranges)
    return [
        render_command(spec, format_gene(gene), legacy_ifconfig)
        for spec, gene in zip(space.specs, chromosome)
    ]
