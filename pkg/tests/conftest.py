from __future__ import annotations

import re
from pathlib import Path

import pytest

from evotune.paramspace import builtin_catalog, parse_param_file
from evotune.sysapply import CommandResult

GOLDEN = Path(__file__).parent / "golden"

LISTING_1 = """\
sysctl -w net.ipv4.tcp_mem=;'287121 382828 574242';'16777216 16777216 16777216'
sysctl -w net.ipv4.tcp_rmem=;'4096 87380 6291456';'8192 873800 16777216'
sysctl -w net.ipv4.tcp_wmem=;'4096 16384 4194304';'8192 873800 16777216'
sysctl -w net.ipv4.tcp_moderate_rcvbuf=;0;1
sysctl -w net.ipv4.tcp_no_metrics_save=;0;1
sysctl -w net.ipv4.tcp_timestamps=;0;1
sysctl -w net.ipv4.tcp_window_scaling=;0;1
sysctl -w net.ipv4.tcp_sack=;0;1
sysctl -w net.core.wmem_max=;212992;16777216
sysctl -w net.core.rmem_max=;212992;16777216
sysctl -w net.core.rmem_default=;212992;412992
sysctl -w net.core.wmem_default=;212992;412992
sysctl -w net.core.netdev_max_backlog=;1000;5000
ifconfig eno2 mtu ;1500;2700
"""

# what `sysctl -n` / `ip link` report on a stock machine
STOCK_VALUES = {
    "net.ipv4.tcp_mem": "188760\t251683\t377520",
    "net.ipv4.tcp_rmem": "4096\t131072\t6291456",
    "net.ipv4.tcp_wmem": "4096\t16384\t4194304",
    "net.ipv4.tcp_moderate_rcvbuf": "1",
    "net.ipv4.tcp_no_metrics_save": "0",
    "net.ipv4.tcp_timestamps": "1",
    "net.ipv4.tcp_window_scaling": "1",
    "net.ipv4.tcp_sack": "1",
    "net.core.wmem_max": "212992",
    "net.core.rmem_max": "212992",
    "net.core.rmem_default": "212992",
    "net.core.wmem_default": "212992",
    "net.core.netdev_max_backlog": "1000",
}


class FakeSystem:
    """Stub command runner backed by an in-memory sysctl/link table.

    Records every argv it receives. ``fail_on`` maps a predicate over the
    argv to a stderr message; matching write commands fail without effect.
    """

    def __init__(self, sysctl=None, links=None, fail_on=None):
        self.sysctl = dict(STOCK_VALUES if sysctl is None else sysctl)
        self.links = {"eno2": {"mtu": "1500", "txqueuelen": "1000"}} if links is None else links
        self.calls: list[list[str]] = []
        self.fail_on = fail_on or []

    def state(self):
        return ({k: " ".join(v.split()) for k, v in self.sysctl.items()},
                {i: dict(a) for i, a in self.links.items()})

    def __call__(self, argv, timeout=None):
        argv = list(argv)
        self.calls.append(argv)
        for predicate, stderr in self.fail_on:
            if predicate(argv):
                return CommandResult(1, "", stderr)
        if argv[:2] == ["sysctl", "-n"]:
            if argv[2] not in self.sysctl:
                return CommandResult(255, "", f"sysctl: cannot stat {argv[2]}")
            return CommandResult(0, self.sysctl[argv[2]] + "\n")
        if argv[:2] == ["sysctl", "-w"]:
            key, _, value = argv[2].partition("=")
            if key not in self.sysctl:
                return CommandResult(255, "", f"sysctl: cannot stat {key}")
            self.sysctl[key] = value
            return CommandResult(0, f"{key} = {value}\n")
        if argv[:4] == ["ip", "-o", "link", "show"]:
            iface = argv[-1]
            if iface not in self.links:
                return CommandResult(1, "", f'Device "{iface}" does not exist.')
            a = self.links[iface]
            return CommandResult(0, f"2: {iface}: <BROADCAST,UP> mtu {a['mtu']} qdisc mq "
                                    f"state UP mode DEFAULT qlen {a['txqueuelen']}\n")
        m = re.match(r"ip link set dev (\S+) (mtu|txqueuelen) (\S+)$", " ".join(argv)) or \
            re.match(r"ifconfig (\S+) (mtu|txqueuelen) (\S+)$", " ".join(argv))
        if m:
            iface, attr, value = m.groups()
            if iface not in self.links:
                return CommandResult(1, "", f"Cannot find device {iface}")
            self.links[iface][attr] = value
            return CommandResult(0)
        return CommandResult(127, "", f"unknown command {argv}")

    @property
    def writes(self):
        return [c for c in self.calls if c[:2] == ["sysctl", "-w"] or c[:3] == ["ip", "link", "set"]
                or c[0] == "ifconfig"]


@pytest.fixture
def listing1():
    return parse_param_file(LISTING_1)


@pytest.fixture
def catalog14():
    return builtin_catalog("listing1-14")


@pytest.fixture
def fake_system():
    return FakeSystem()
