"""Replay cache: a JSON object mapping canonical chromosomes to Mbit/s."""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Mapping

from ..errors import CacheMiss, ValidationError
from ..paramspace import Chromosome, canonical
from .base import FitnessEvaluator, check_throughput

log = logging.getLogger(__name__)


def load_cache(path: str | Path) -> dict[str, float]:
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read replay cache {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ValidationError(f"replay cache {path} must hold a JSON object")
    cache = {}
    for key, value in data.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)) \
                or not math.isfinite(value) or value < 0:
            raise ValidationError(f"replay cache entry {key!r} has invalid value {value!r}")
        cache[key] = float(value)
    return cache


def save_cache(path: str | Path, cache: Mapping[str, float]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(dict(cache), f, indent=1, sort_keys=True)
        f.write("\n")


def evaluate_replay(chromosome: Chromosome, cache: Mapping[str, float]) -> float:
    key = canonical(chromosome)
    try:
        return cache[key]
    except KeyError:
        raise CacheMiss(key) from None


class ReplayEvaluator(FitnessEvaluator):
    deterministic = True
    safe_for_parallel = True

    def __init__(self, cache: Mapping[str, float]):
        self.cache = dict(cache)

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplayEvaluator":
        return cls(load_cache(path))

    def evaluate(self, chromosome: Chromosome) -> float:
        return evaluate_replay(chromosome, self.cache)


class RecordingEvaluator(FitnessEvaluator):
    """Pass-through evaluator that remembers every result for later replay.

    When a noisy evaluator scores one chromosome twice, the first value is kept.
    """

    def __init__(self, inner: FitnessEvaluator):
        self.inner = inner
        self.cache: dict[str, float] = {}
        self.deterministic = inner.deterministic
        self.safe_for_parallel = False

    def evaluate(self, chromosome: Chromosome) -> float:
        value = check_throughput(self.inner.evaluate(chromosome))
        key = canonical(chromosome)
        previous = self.cache.setdefault(key, value)
        if previous != value:
            log.warning("recording keeps %.3f for %s, ignoring %.3f", previous, key, value)
        return value

    def save(self, path: str | Path) -> None:
        save_cache(path, self.cache)

    def close(self) -> None:
        self.inner.close()
