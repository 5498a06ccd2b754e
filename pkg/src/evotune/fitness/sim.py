"""Deterministic stand-in for a network testbed.

Throughput is modelled as::

    base * prod(factor_i(x_i)) + sum(weight * x_i * x_j for i, j, weight in interactions)

plus optional Gaussian noise, clamped to ``[0, cap]``. ``x_i`` is gene i's
position inside its range, scaled to [0, 1] (triples use the mean of their
three components). Factor curves:

``neutral``  always 1.0
``linear``   ``lo + (hi - lo) * x``
``peak``     ``hi`` at ``x == at``, falling linearly to ``lo`` at the farther end
``step``     ``below`` for ``x < threshold``, ``above`` otherwise

Model parameters live in JSON fixtures; see ``evotune/data/*.json``.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

from ..errors import ModelMismatch, ValidationError
from ..paramspace import (
    Chromosome,
    ParameterSpace,
    builtin_catalog,
    parse_canonical,
    parse_param_file,
    validate_chromosome,
)
from .base import FitnessEvaluator

FORMAT = "evotune-sim/1"
BUILTIN_FIXTURES = ("toy16.json", "toy-cal.json")


@dataclass(frozen=True)
class Curve:
    kind: str = "neutral"
    lo: float = 1.0
    hi: float = 1.0
    at: float = 0.5
    threshold: float = 0.5
    monotone: bool = False

    def __post_init__(self):
        if self.kind not in ("neutral", "linear", "peak", "step"):
            raise ValidationError(f"unknown curve kind {self.kind!r}")
        if min(self.lo, self.hi) < 0:
            raise ValidationError("curve factors must be non-negative")
        if not 0 <= self.at <= 1 or not 0 <= self.threshold <= 1:
            raise ValidationError("curve positions must lie in [0, 1]")
        if self.monotone and not self.is_nondecreasing:
            raise ValidationError(f"{self.kind} curve marked monotone but is not")

    @classmethod
    def from_dict(cls, d: dict) -> "Curve":
        d = dict(d)
        kind = d.pop("curve", "neutral")
        monotone = bool(d.pop("monotone", False))
        d.pop("name", None)
        if kind == "step":
            d["lo"], d["hi"] = d.pop("below"), d.pop("above")
        try:
            return cls(kind=kind, monotone=monotone, **{k: float(v) for k, v in d.items()})
        except TypeError as exc:
            raise ValidationError(f"bad curve definition: {exc}") from None

    @property
    def is_nondecreasing(self) -> bool:
        if self.kind == "neutral":
            return True
        if self.kind in ("linear", "step"):
            return self.hi >= self.lo
        return self.at == 1.0 or self.hi == self.lo

    def factor(self, x: float) -> float:
        if self.kind == "linear":
            return self.lo + (self.hi - self.lo) * x
        if self.kind == "step":
            return self.hi if x >= self.threshold else self.lo
        if self.kind == "peak":
            span = max(self.at, 1.0 - self.at) or 1.0
            return self.hi - (self.hi - self.lo) * abs(x - self.at) / span
        return 1.0


@dataclass(frozen=True)
class SimModel:
    base: float
    curves: tuple[Curve, ...]
    interactions: tuple[tuple[int, int, float], ...] = ()
    noise_stddev: float = 0.0
    cap: float = math.inf
    names: tuple[str, ...] = ()

    def __post_init__(self):
        if self.base < 0 or self.noise_stddev < 0 or self.cap < 0:
            raise ValidationError("base, cap and noise_stddev must be non-negative")
        n = len(self.curves)
        for i, j, _ in self.interactions:
            if not (0 <= i < n and 0 <= j < n):
                raise ValidationError(f"interaction ({i}, {j}) refers to a missing gene")
        for i, j, w in self.interactions:
            if w < 0 and (self.curves[i].monotone or self.curves[j].monotone):
                raise ValidationError("monotone genes cannot take negative interactions")

    @property
    def monotone_genes(self) -> list[int]:
        return [i for i, c in enumerate(self.curves) if c.monotone]

    @classmethod
    def from_dict(cls, d: dict) -> "SimModel":
        genes = d.get("genes", [])
        return cls(
            base=float(d["base"]),
            curves=tuple(Curve.from_dict(g) for g in genes),
            interactions=tuple((int(i), int(j), float(w)) for i, j, w in d.get("interactions", [])),
            noise_stddev=float(d.get("noise_stddev", 0.0)),
            cap=float(d.get("cap", math.inf)),
            names=tuple(g.get("name", f"gene{k}") for k, g in enumerate(genes)),
        )


@dataclass(frozen=True)
class SimFixture:
    """A model bundled with the space it targets and that space's default."""

    model: SimModel
    space: ParameterSpace | None
    default: Chromosome | None
    description: str = ""


def load_fixture(source: str | Path) -> SimFixture:
    """Load a fixture from a path, or by name from the bundled fixtures."""
    path = Path(source)
    if path.exists():
        text = path.read_text(encoding="utf-8")
    elif path.name in BUILTIN_FIXTURES or path.name + ".json" in BUILTIN_FIXTURES:
        name = path.name if path.name.endswith(".json") else path.name + ".json"
        text = resources.files("evotune.data").joinpath(name).read_text(encoding="utf-8")
    else:
        raise ValidationError(f"simulation fixture {source} not found")
    return parse_fixture(json.loads(text))


def parse_fixture(d: dict) -> SimFixture:
    if d.get("format") != FORMAT:
        raise ValidationError(f"fixture format must be {FORMAT!r}")
    try:
        model = SimModel.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"bad fixture: {exc}") from None
    space = None
    if "catalog" in d:
        space = builtin_catalog(d["catalog"])
    elif "params" in d:
        space = parse_param_file("\n".join(d["params"]))
    default = None
    if space is not None:
        check_model(model, space)
        if "default" in d:
            default = parse_canonical(space, d["default"], check_ranges=False)
    return SimFixture(model, space, default, d.get("description", ""))


def check_model(model: SimModel, space: ParameterSpace) -> None:
    if len(model.curves) != len(space):
        raise ModelMismatch(f"model has {len(model.curves)} genes, space has {len(space)}")


def normalized(space: ParameterSpace, chromosome: Sequence) -> list[float]:
    # defaults may sit outside the search box; keep the scale within [0, 1]
    return [min(1.0, max(0.0, spec.kind.normalize(g))) for spec, g in zip(space.specs, chromosome)]


def evaluate_simulated(chromosome: Chromosome, model: SimModel, space: ParameterSpace,
                       rng: random.Random | None = None) -> float:
    check_model(model, space)
    validate_chromosome(space, chromosome, check_ranges=False)
    x = normalized(space, chromosome)
    value = model.base
    for curve, xi in zip(model.curves, x):
        value *= curve.factor(xi)
    value += sum(w * x[i] * x[j] for i, j, w in model.interactions)
    if model.noise_stddev > 0:
        if rng is None:
            raise ValidationError("a noisy model needs a random source")
        value += rng.gauss(0.0, model.noise_stddev)
    return min(max(value, 0.0), model.cap)


class SimulatedEvaluator(FitnessEvaluator):
    def __init__(self, space: ParameterSpace, model: SimModel, seed: int = 0):
        check_model(model, space)
        self.space = space
        self.model = model
        self.rng = random.Random(seed)
        self.deterministic = model.noise_stddev == 0
        self.safe_for_parallel = self.deterministic

    def evaluate(self, chromosome: Chromosome) -> float:
        return evaluate_simulated(chromosome, self.model, self.space, self.rng)
