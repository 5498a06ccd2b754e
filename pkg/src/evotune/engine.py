"""Genetic life cycle: initialize, evaluate, cull, breed, mutate, repeat.

Everything random flows through one ``random.Random`` seeded from the
config, and every ordering decision breaks ties by ascending individual id,
so a deterministic evaluator yields byte-identical reports.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import random
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterable, Protocol, Sequence

from .errors import EvaluationError, SpaceMismatch, UnevaluatedIndividual, ValidationError
from .paramspace import (
    Chromosome,
    ParameterSpace,
    canonical,
    sample_chromosome,
    sample_gene,
    validate_chromosome,
)

log = logging.getLogger(__name__)

CSV_HEADER = ("generation", "best", "worst", "mean", "default")

# forced re-mutations before a duplicate offspring is accepted anyway
DUPLICATE_RETRIES = 64


class Evaluator(Protocol):
    deterministic: bool
    safe_for_parallel: bool

    def evaluate(self, chromosome: Chromosome) -> float: ...


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 80
    generations: int = 40
    selection_fraction: float = 0.10
    crossover_probability: float = 0.50
    mutation_probability: float = 0.16
    seed: int = 0
    mutate_survivors: bool = False
    avoid_duplicates: bool = True

    def __post_init__(self):
        if not isinstance(self.population_size, int) or self.population_size < 1:
            raise ValidationError("population_size must be a positive integer")
        if not isinstance(self.generations, int) or self.generations < 1:
            raise ValidationError("generations must be a positive integer")
        if not 0 < self.selection_fraction <= 0.5:
            raise ValidationError("selection_fraction must lie in (0, 0.5]")
        for name in ("crossover_probability", "mutation_probability"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValidationError(f"{name} must lie in [0, 1]")
        if not -(2**63) <= self.seed < 2**64:
            raise ValidationError("seed must fit in 64 bits")

    @property
    def replacement_count(self) -> int:
        """Individuals culled, and offspring bred, per generation."""
        return selection_count(self.selection_fraction, self.population_size)

    def check_runnable(self) -> None:
        if self.population_size < 2:
            raise ValidationError("a run needs population_size >= 2")

    def to_dict(self) -> dict:
        return asdict(self)


def selection_count(fraction: float, population_size: int) -> int:
    # epsilon absorbs float error such as 0.29 * 100 == 28.999999999999996
    return max(1, math.floor(fraction * population_size + 1e-9))


@dataclass
class Individual:
    id: int
    chromosome: Chromosome
    birth_generation: int = 0
    fitness: float | None = None


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    best: float
    worst: float
    mean: float
    default_fitness: float
    best_chromosome: Chromosome

    def to_dict(self) -> dict:
        return {
            "generation": self.generation,
            "best": self.best,
            "worst": self.worst,
            "mean": self.mean,
            "default": self.default_fitness,
            "best_chromosome": canonical(self.best_chromosome),
        }


@dataclass
class RunReport:
    config: GaConfig
    space_fingerprint: str
    space_size: int
    per_generation: list[GenerationStats] = field(default_factory=list)
    overall_best: Individual | None = None
    evaluation_count: int = 0

    @property
    def best_series(self) -> list[float]:
        return [s.best for s in self.per_generation]

    @property
    def default_mean(self) -> float:
        return statistics.fmean(s.default_fitness for s in self.per_generation)

    def improvement_over_default(self) -> dict[str, float]:
        """Percent gains against the mean default throughput.

        ``best_vs_default`` compares the overall best individual,
        ``mean_best_vs_default`` the per-generation best averaged over the run.
        """
        base = self.default_mean
        if base <= 0:
            return {"best_vs_default": math.inf, "mean_best_vs_default": math.inf}
        best = self.overall_best.fitness
        mean_best = statistics.fmean(self.best_series)
        return {
            "best_vs_default": (best - base) / base * 100,
            "mean_best_vs_default": (mean_best - base) / base * 100,
        }

    def to_dict(self) -> dict:
        best = self.overall_best
        return {
            "config": self.config.to_dict(),
            "space": {"fingerprint": self.space_fingerprint, "size": self.space_size},
            "per_generation": [s.to_dict() for s in self.per_generation],
            "overall_best": {
                "id": best.id,
                "birth_generation": best.birth_generation,
                "fitness": best.fitness,
                "chromosome": canonical(best.chromosome),
            },
            "evaluation_count": self.evaluation_count,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for s in self.per_generation:
            writer.writerow([s.generation, repr(s.best), repr(s.worst), repr(s.mean),
                             repr(s.default_fitness)])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# operators

def init_population(space: ParameterSpace, config: GaConfig, rng: random.Random,
                    first_id: int = 0) -> list[Individual]:
    return [
        Individual(first_id + i, sample_chromosome(space, rng))
        for i in range(config.population_size)
    ]


def _require_fitness(population: Iterable[Individual]) -> None:
    for ind in population:
        if ind.fitness is None:
            raise UnevaluatedIndividual(ind.id)


def _best_first(ind: Individual):
    return (-ind.fitness, ind.id)


def cull(population: Sequence[Individual], selection_fraction: float,
         population_size: int | None = None) -> list[Individual]:
    """Drop the worst ``floor(fraction * size)`` individuals (at least one).

    Among equal fitness the lower id goes first. Survivors keep their order.
    """
    _require_fitness(population)
    size = len(population) if population_size is None else population_size
    count = min(selection_count(selection_fraction, size), len(population))
    doomed = sorted(population, key=lambda ind: (ind.fitness, ind.id))[:count]
    doomed_ids = {ind.id for ind in doomed}
    return [ind for ind in population if ind.id not in doomed_ids]


def select_parents(population: Sequence[Individual], selection_fraction: float,
                   population_size: int | None = None) -> list[Individual]:
    """Top individuals by fitness, best first, trimmed to an even count.

    At least two are taken when available, so one pair can always be formed.
    """
    _require_fitness(population)
    size = len(population) if population_size is None else population_size
    count = max(2, selection_count(selection_fraction, size))
    count = min(count, len(population))
    count -= count % 2
    return sorted(population, key=_best_first)[:count]


def crossover(a: Chromosome, b: Chromosome, p: float,
              rng: random.Random) -> tuple[Chromosome, Chromosome]:
    """Uniform crossover: each gene position is swapped with probability p."""
    if len(a) != len(b):
        raise SpaceMismatch(f"parents have {len(a)} and {len(b)} genes")
    child_a, child_b = list(a), list(b)
    for i in range(len(a)):
        if rng.random() < p:
            child_a[i], child_b[i] = child_b[i], child_a[i]
    return tuple(child_a), tuple(child_b)


def _mutate(c: Chromosome, p: float, space: ParameterSpace,
            rng: random.Random) -> tuple[Chromosome, bool]:
    if not c or rng.random() >= p:
        return c, False
    index = rng.randrange(len(c))
    genes = list(c)
    genes[index] = sample_gene(space.specs[index], rng)
    return tuple(genes), True


def _perturb(c: Chromosome, space: ParameterSpace, rng: random.Random) -> Chromosome:
    """Resample one gene to a value different from its current one, if it has any."""
    index = rng.randrange(len(c))
    spec = space.specs[index]
    genes = list(c)
    for _ in range(8):
        genes[index] = sample_gene(spec, rng)
        if genes[index] != c[index]:
            break
    return tuple(genes)


def mutate(c: Chromosome, p: float, space: ParameterSpace, rng: random.Random) -> Chromosome:
    """With probability p, resample one uniformly chosen gene."""
    return _mutate(c, p, space, rng)[0]


def breed(parents: Sequence[Individual], count: int, config: GaConfig,
          space: ParameterSpace, rng: random.Random,
          known: set[Chromosome] | None = None) -> list[Chromosome]:
    """Produce exactly ``count`` offspring chromosomes from ranked parents.

    Consecutive parents pair up (1st with 2nd, 3rd with 4th, ...). A shortfall
    is filled with copies of the best parent, a surplus trimmed from the end.
    Every offspring then goes through mutation.

    With ``config.avoid_duplicates``, an offspring equal to a chromosome in
    ``known`` or to an earlier sibling gets one gene forcibly resampled, up to
    ``DUPLICATE_RETRIES`` times, so measurements are not spent on
    configurations that were already scored.
    """
    children: list[Chromosome] = []
    for i in range(0, len(parents) - 1, 2):
        children.extend(crossover(parents[i].chromosome, parents[i + 1].chromosome,
                                  config.crossover_probability, rng))
    while len(children) < count:
        children.append(parents[0].chromosome)
    del children[count:]

    offspring: list[Chromosome] = []
    for child in children:
        child = mutate(child, config.mutation_probability, space, rng)
        if config.avoid_duplicates:
            retries = 0
            while retries < DUPLICATE_RETRIES and (
                child in offspring or (known is not None and child in known)
            ):
                child = _perturb(child, space, rng)
                retries += 1
        offspring.append(child)
    return offspring


# ---------------------------------------------------------------------------
# run loop

def _generation_stats(generation: int, population: Sequence[Individual],
                      default_fitness: float) -> GenerationStats:
    ranked = sorted(population, key=_best_first)
    best, worst = ranked[0].fitness, ranked[-1].fitness
    mean = statistics.fmean(ind.fitness for ind in population)
    mean = min(max(mean, worst), best)
    return GenerationStats(generation, best, worst, mean, default_fitness,
                           ranked[0].chromosome)


def _evaluate(evaluator: Evaluator, chromosome: Chromosome, generation: int,
              individual_id: int | None) -> float:
    try:
        value = evaluator.evaluate(chromosome)
    except Exception as exc:
        raise EvaluationError(generation, individual_id, exc) from exc
    if not isinstance(value, (int, float)) or not math.isfinite(value) or value < 0:
        raise EvaluationError(generation, individual_id,
                              ValueError(f"evaluator returned {value!r}"))
    return float(value)


def _evaluate_pending(population: Sequence[Individual], evaluator: Evaluator,
                      generation: int, workers: int) -> int:
    pending = sorted((ind for ind in population if ind.fitness is None), key=lambda i: i.id)
    if workers > 1 and getattr(evaluator, "safe_for_parallel", False) and len(pending) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_evaluate, evaluator, ind.chromosome, generation, ind.id)
                       for ind in pending]
            # commit in id order so the first error and all results are deterministic
            for ind, fut in zip(pending, futures):
                ind.fitness = fut.result()
    else:
        for ind in pending:
            ind.fitness = _evaluate(evaluator, ind.chromosome, generation, ind.id)
    return len(pending)


def run(space: ParameterSpace, config: GaConfig, evaluator: Evaluator,
        default_chromosome: Chromosome, *, workers: int = 1,
        on_generation: Callable[[GenerationStats, list[Individual]], None] | None = None,
        ) -> RunReport:
    """Run the GA for ``config.generations`` generations.

    Each generation evaluates unscored individuals in id order, measures the
    default chromosome once, records statistics, and then (except after the
    last generation) culls the worst, breeds the same number of offspring
    from the best parents and inserts them for the next generation.

    The default chromosome is only checked for shape, since a live system's
    defaults can sit outside the search ranges.
    """
    config.check_runnable()
    validate_chromosome(space, default_chromosome, check_ranges=False)
    rng = random.Random(config.seed)
    population = init_population(space, config, rng)
    next_id = len(population)
    replacement = config.replacement_count
    report = RunReport(config, space.fingerprint(), len(space))
    known: set[Chromosome] = set()

    for generation in range(config.generations):
        report.evaluation_count += _evaluate_pending(population, evaluator, generation, workers)
        known.update(ind.chromosome for ind in population)
        default_fitness = _evaluate(evaluator, default_chromosome, generation, None)
        report.evaluation_count += 1

        stats = _generation_stats(generation, population, default_fitness)
        report.per_generation.append(stats)
        leader = min(population, key=_best_first)
        if report.overall_best is None or leader.fitness > report.overall_best.fitness:
            report.overall_best = replace(leader)
        log.info("generation %d: best %.2f worst %.2f mean %.2f default %.2f",
                 generation, stats.best, stats.worst, stats.mean, default_fitness)
        if on_generation is not None:
            on_generation(stats, population)

        if generation == config.generations - 1:
            break
        survivors = cull(population, config.selection_fraction, config.population_size)
        if len(survivors) >= 2:
            parents = select_parents(survivors, config.selection_fraction,
                                     config.population_size)
        else:
            parents = survivors
        offspring = breed(parents, config.population_size - len(survivors), config, space, rng,
                          known)
        if config.mutate_survivors:
            for ind in survivors:
                mutated, applied = _mutate(ind.chromosome, config.mutation_probability,
                                           space, rng)
                if applied:
                    ind.chromosome, ind.fitness = mutated, None
        population = survivors + [
            Individual(next_id + i, c, generation + 1) for i, c in enumerate(offspring)
        ]
        next_id += len(offspring)

    return report
