"""Parsers for benchmark and latency tool output.

All parsers accept ``str`` or raw ``bytes`` and either return a value or
raise ``UnparseableOutput``; nothing else escapes for any input.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from ..errors import UnparseableOutput


@dataclass(frozen=True)
class LatencyReport:
    min_ms: float
    avg_ms: float
    max_ms: float


def _as_text(output) -> str:
    if isinstance(output, (bytes, bytearray)):
        return bytes(output).decode("utf-8", errors="replace")
    if not isinstance(output, str):
        raise UnparseableOutput(repr(output)[:80])
    return output


def _snippet(text: str, limit: int = 120) -> str:
    text = text.strip()
    return text if len(text) <= limit else "..." + text[-limit:]


def _throughput(value: float, text: str) -> float:
    if not math.isfinite(value) or value < 0:
        raise UnparseableOutput(_snippet(text))
    return value


_NETPERF_UNITS = re.compile(r"10\^(\d+)bits/s")
_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


def parse_throughput_netperf(stdout) -> float:
    """Throughput in Mbit/s from a TCP_STREAM-style netperf report.

    The final non-blank line must be the result row: receive socket, send
    socket, message size, elapsed time, throughput, then optional CPU
    columns. The unit comes from the ``10^Nbits/sec`` header when present.
    """
    text = _as_text(stdout)
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise UnparseableOutput(_snippet(text))
    fields = lines[-1].split()
    if len(fields) < 5 or not all(_NUMBER.match(f) for f in fields):
        raise UnparseableOutput(_snippet(text))
    scale = 1.0
    units = _NETPERF_UNITS.findall(text)
    if units:
        exponent = int(units[-1][:3])
        if exponent > 12:
            raise UnparseableOutput(_snippet(text))
        scale = 10.0 ** (exponent - 6)
    return _throughput(float(fields[4]) * scale, text)


_IPERF_LINE = re.compile(
    r"^\[\s*(?P<id>\d+|SUM)\]\s+"
    r"(?P<start>\d+(?:\.\d+)?)\s*-\s*(?P<end>\d+(?:\.\d+)?)\s+sec\s+"
    r"(?P<transfer>\d+(?:\.\d+)?)\s+[KMGT]?Bytes\s+"
    r"(?P<rate>\d+(?:\.\d+)?)\s+(?P<unit>[KMGT]?)bits/sec"
    r"(?P<rest>.*)$"
)
_IPERF_SCALE = {"": 1e-6, "K": 1e-3, "M": 1.0, "G": 1e3, "T": 1e6}


def parse_throughput_iperf(stdout) -> float:
    """Receiver throughput in Mbit/s from iperf3 or iperf2 client output.

    iperf3 marks its summary lines ``sender``/``receiver``; the receiver line
    wins, and the ``[SUM]`` receiver line wins for parallel streams. iperf2
    has no markers, so the summary is the interval that starts at zero and
    runs longest, again preferring ``[SUM]``.
    """
    text = _as_text(stdout)
    rows = [m for m in (_IPERF_LINE.match(ln.strip()) for ln in text.splitlines()) if m]
    receivers = [m for m in rows if "receiver" in m.group("rest")]
    if receivers:
        chosen = [m for m in receivers if m.group("id") == "SUM"] or receivers
        row = chosen[-1]
    elif any("sender" in m.group("rest") for m in rows):
        raise UnparseableOutput(_snippet(text))
    else:
        totals = [m for m in rows if float(m.group("start")) == 0.0]
        if not totals:
            raise UnparseableOutput(_snippet(text))
        longest = max(float(m.group("end")) for m in totals)
        totals = [m for m in totals if float(m.group("end")) == longest]
        row = ([m for m in totals if m.group("id") == "SUM"] or totals)[-1]
    return _throughput(float(row.group("rate")) * _IPERF_SCALE[row.group("unit")], text)


_ROUND_TRIP = re.compile(
    r"(?:round-trip|rtt)\s+min/avg/max(?:/mdev)?\s*=\s*"
    r"(\d+(?:\.\d+)?)/(\d+(?:\.\d+)?)/(\d+(?:\.\d+)?)(?:/\d+(?:\.\d+)?)?\s*ms"
)


def parse_latency_hping(stdout) -> LatencyReport:
    """Round-trip summary from hping3 (or ping) output; the last one wins."""
    text = _as_text(stdout)
    matches = _ROUND_TRIP.findall(text)
    if not matches:
        raise UnparseableOutput(_snippet(text))
    lo, avg, hi = (float(v) for v in matches[-1])
    if not lo <= avg <= hi:
        raise UnparseableOutput(_snippet(text))
    return LatencyReport(lo, avg, hi)


THROUGHPUT_PARSERS = {
    "netperf": parse_throughput_netperf,
    "iperf": parse_throughput_iperf,
}
