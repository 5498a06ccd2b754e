"""Fitness evaluators (live, simulated, replay) and tool-output parsers."""

from .base import ConstantEvaluator, CountingEvaluator, FitnessEvaluator, check_throughput
from .live import Benchmark, LiveEvaluator, run_latency_probe
from .parsers import (
    LatencyReport,
    parse_latency_hping,
    parse_throughput_iperf,
    parse_throughput_netperf,
)
from .replay import RecordingEvaluator, ReplayEvaluator, evaluate_replay, load_cache, save_cache
from .sim import SimFixture, SimModel, SimulatedEvaluator, evaluate_simulated, load_fixture

__all__ = [
    "Benchmark",
    "ConstantEvaluator",
    "CountingEvaluator",
    "FitnessEvaluator",
    "LatencyReport",
    "LiveEvaluator",
    "RecordingEvaluator",
    "ReplayEvaluator",
    "SimFixture",
    "SimModel",
    "SimulatedEvaluator",
    "check_throughput",
    "evaluate_replay",
    "evaluate_simulated",
    "load_cache",
    "load_fixture",
    "parse_latency_hping",
    "parse_throughput_iperf",
    "parse_throughput_netperf",
    "run_latency_probe",
    "save_cache",
]
