"""Shared test helpers, including reference evaluators that are written
independently of the package's own lookup code."""

from __future__ import annotations

import random

import pytest

from spt.machine import LinkDirection

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def bitwise_match(entry_key: int, entry_mask: int, key: int) -> bool:
    """Compare one bit at a time; a set mask bit means 'must equal'."""
    for bit in range(32):
        if (entry_mask >> bit) & 1 and ((entry_key >> bit) & 1) != ((key >> bit) & 1):
            return False
    return True


def reference_route(entries, key, arrival):
    """``(links, cores, reason)`` by a plain scan with bitwise matching.

    ``arrival`` is the link a packet came in on, or None for a local core.
    """
    for e in entries:
        if bitwise_match(e.key, e.mask, key):
            return frozenset(e.links), frozenset(e.cores), "entry"
    if arrival is None:
        return frozenset(), frozenset(), "drop"
    return frozenset({LinkDirection((int(arrival) + 3) % 6)}), frozenset(), "default"


def walk_key(tables, machine, source, key, max_hops=10_000):
    """Follow ``key`` from a core on ``source`` through ``tables``.

    Returns ``(cores, devices, anomalies)``: the ``(x, y, core)`` sinks
    reached, the virtual chips reached, and any dead-ends or loops seen.
    """
    cores, devices, anomalies = set(), set(), []
    frontier = [(tuple(source), None)]
    seen = set()
    hops = 0
    while frontier:
        chip, arrival = frontier.pop()
        if (chip, arrival) in seen:
            anomalies.append(("loop", chip))
            continue
        seen.add((chip, arrival))
        hops += 1
        if hops > max_hops:
            anomalies.append(("runaway", chip))
            break
        if machine[chip].is_virtual:
            devices.add(chip)
            continue
        table = tables.get(chip)
        entries = table.entries if table is not None else []
        links, sink_cores, reason = reference_route(entries, key, arrival)
        if reason == "drop":
            anomalies.append(("local-drop", chip))
        for core in sink_cores:
            cores.add((chip[0], chip[1], core))
        for link in links:
            target = machine[chip].links.get(link)
            if target is None:
                anomalies.append(("dead-link", chip, link))
                continue
            frontier.append((target, LinkDirection((int(link) + 3) % 6)))
    return cores, devices, anomalies


@pytest.fixture
def rng():
    return random.Random(12345)
