from __future__ import annotations

import math

from ..paramspace import Chromosome


class FitnessEvaluator:
    """Scores a chromosome as throughput in Mbit/s.

    ``deterministic`` means repeated calls on one chromosome agree;
    ``safe_for_parallel`` means calls may overlap in time.
    """

    deterministic = False
    safe_for_parallel = False

    def evaluate(self, chromosome: Chromosome) -> float:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def check_throughput(value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"throughput must be finite and non-negative, got {value!r}")
    return value


class ConstantEvaluator(FitnessEvaluator):
    deterministic = True
    safe_for_parallel = True

    def __init__(self, value: float = 0.0):
        self.value = check_throughput(value)

    def evaluate(self, chromosome: Chromosome) -> float:
        return self.value


class CountingEvaluator(FitnessEvaluator):
    """Wraps another evaluator and counts calls."""

    def __init__(self, inner: FitnessEvaluator):
        self.inner = inner
        self.calls = 0
        self.deterministic = inner.deterministic
        self.safe_for_parallel = False

    def evaluate(self, chromosome: Chromosome) -> float:
        self.calls += 1
        return self.inner.evaluate(chromosome)
