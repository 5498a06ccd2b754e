"""Genetic search for high-throughput OS network configurations."""

from .engine import GaConfig, GenerationStats, Individual, RunReport, run
from .paramspace import (
    ParameterSpace,
    ParameterSpec,
    builtin_catalog,
    parse_param_file,
    render_apply_commands,
    sample_chromosome,
)

__version__ = "0.1.0"

__all__ = [
    "GaConfig",
    "GenerationStats",
    "Individual",
    "ParameterSpace",
    "ParameterSpec",
    "RunReport",
    "builtin_catalog",
    "parse_param_file",
    "render_apply_commands",
    "run",
    "sample_chromosome",
]
