"""Exception hierarchy shared across evotune modules."""

from __future__ import annotations


class EvotuneError(Exception):
    """Base class for every error raised by evotune."""


class ValidationError(EvotuneError):
    """Bad user input: parameter files, configs, fixtures, chromosomes."""


class MalformedLine(ValidationError):
    def __init__(self, line_number: int, reason: str):
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"line {line_number}: {reason}")


class UnknownCatalog(ValidationError):
    def __init__(self, name: str, known: list[str]):
        self.name = name
        super().__init__(f"unknown catalog {name!r} (known: {', '.join(known)})")


class InvalidChromosome(ValidationError):
    pass


class SpaceMismatch(ValidationError):
    pass


class ModelMismatch(ValidationError):
    pass


class UnevaluatedIndividual(EvotuneError):
    def __init__(self, individual_id: int):
        self.individual_id = individual_id
        super().__init__(f"individual {individual_id} has no fitness")


class EvaluationError(EvotuneError):
    """Evaluator failure annotated with where in the run it happened."""

    def __init__(self, generation: int, individual_id: int | None, cause: BaseException):
        self.generation = generation
        self.individual_id = individual_id
        self.cause = cause
        who = "default chromosome" if individual_id is None else f"individual {individual_id}"
        super().__init__(f"generation {generation}, {who}: {cause}")


class UnparseableOutput(EvotuneError):
    def __init__(self, snippet: str):
        self.snippet = snippet
        super().__init__(f"cannot parse tool output: {snippet!r}")


class BenchmarkTimeout(EvotuneError):
    def __init__(self, argv: list[str], timeout: float):
        self.argv = argv
        self.timeout = timeout
        super().__init__(f"benchmark exceeded {timeout:g}s: {' '.join(argv)}")


class CacheMiss(EvotuneError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"no cached fitness for {key!r}")


class ApplyFailed(EvotuneError):
    def __init__(self, key: str, stderr: str):
        self.key = key
        self.stderr = stderr
        super().__init__(f"failed to apply {key}: {stderr.strip()}")


class ReadFailed(EvotuneError):
    def __init__(self, key: str, stderr: str = ""):
        self.key = key
        self.stderr = stderr
        super().__init__(f"cannot read {key}: {stderr.strip()}")


class MissingInterface(EvotuneError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"network interface {name!r} does not exist")


class NoSnapshot(EvotuneError):
    def __init__(self):
        super().__init__("live apply requires a snapshot; call snapshot() first")
