"""Routing tables: construction from multicast trees and compression."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence

from ..errors import TableOverflowError
from ..machine import Coord, LinkDirection, Machine
from .keys import FULL_MASK, KeyAllocation
from .router import MulticastTree


@dataclass(frozen=True)
class RoutingEntry:
    key: int
    mask: int
    links: FrozenSet[LinkDirection] = frozenset()
    cores: FrozenSet[int] = frozenset()

    def __post_init__(self):
        if self.key & ~self.mask & FULL_MASK:
            raise ValueError(f"key {self.key:#010x} has bits outside mask {self.mask:#010x}")

    def matches(self, key: int) -> bool:
        return key & self.mask == self.key

    @property
    def route(self):
        return (self.links, self.cores)

    def overlaps(self, key: int, mask: int) -> bool:
        """True if some 32-bit key matches both this entry and (key, mask)."""
        return (self.key ^ key) & self.mask & mask == 0

    def to_json(self) -> dict:
        return {"key": self.key, "mask": self.mask,
                "links": sorted(d.short for d in self.links),
                "cores": sorted(self.cores)}

    @classmethod
    def from_json(cls, data) -> "RoutingEntry":
        return cls(int(data["key"]), int(data["mask"]),
                   frozenset(LinkDirection.parse(d) for d in data.get("links", ())),
                   frozenset(int(c) for c in data.get("cores", ())))


@dataclass
class RoutingTable:
    chip: Coord
    entries: List[RoutingEntry] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def lookup(self, key: int) -> Optional[RoutingEntry]:
        return lookup(self.entries, key)

    def to_json(self) -> dict:
        return {"x": self.chip[0], "y": self.chip[1],
                "entries": [e.to_json() for e in self.entries]}

    @classmethod
    def from_json(cls, data) -> "RoutingTable":
        return cls((int(data["x"]), int(data["y"])),
                   [RoutingEntry.from_json(e) for e in data["entries"]])


def lookup(entries: Sequence[RoutingEntry], key: int) -> Optional[RoutingEntry]:
    """First entry whose masked key equals ``key & mask``."""
    for entry in entries:
        if key & entry.mask == entry.key:
            return entry
    return None


def build_routing_tables(trees: Iterable[MulticastTree], keys: KeyAllocation,
                         machine: Optional[Machine] = None,
                         default_route_elision: bool = True) -> Dict[Coord, RoutingTable]:
    """One entry per (tree, chip), skipping chips that default routing
    already handles (a single straight-through hop with no local sinks)."""
    per_chip: Dict[Coord, List[RoutingEntry]] = {}
    for tree in trees:
        block = keys[tree.partition]
        for coord, node in tree.nodes.items():
            if machine is not None and machine[coord].is_virtual:
                continue
            if not node.out_links and not node.cores:
                continue
            if (default_route_elision and node.in_link is not None and not node.cores
                    and len(node.out_links) == 1
                    and next(iter(node.out_links)) == node.in_link.opposite):
                continue
            per_chip.setdefault(coord, []).append(RoutingEntry(
                block.base, block.mask, frozenset(node.out_links), frozenset(node.cores)))
    tables = {}
    for coord in sorted(per_chip):
        entries = sorted(per_chip[coord], key=lambda e: (e.key, e.mask))
        tables[coord] = RoutingTable(coord, entries)
    return tables


def _buddy_pairs(entries: List[RoutingEntry]):
    """Index pairs ``(i, j)``, ``i < j``, with equal mask and route whose
    keys differ in a single masked bit."""
    groups: Dict[tuple, Dict[int, int]] = {}
    for idx, e in enumerate(entries):
        groups.setdefault((e.mask, e.route), {}).setdefault(e.key, idx)
    pairs = []
    for (mask, _), by_key in groups.items():
        if len(by_key) < 2:
            continue
        for key, i in by_key.items():
            bits = mask
            while bits:
                bit = bits & -bits
                bits ^= bit
                j = by_key.get(key ^ bit)
                if j is not None and j > i:
                    pairs.append((i, j))
    return sorted(pairs)


def _merge_once(entries: List[RoutingEntry]) -> Optional[List[RoutingEntry]]:
    for i, j in _buddy_pairs(entries):
        a, b = entries[i], entries[j]
        # The merged entry sits at i, so it must not shadow anything that
        # used to win over b between positions i and j.
        if any(entries[k].overlaps(b.key, b.mask) for k in range(i + 1, j)):
            continue
        mask = a.mask & ~(a.key ^ b.key) & FULL_MASK
        merged = RoutingEntry(a.key & mask, mask, a.links, a.cores)
        return entries[:i] + [merged] + entries[i + 1:j] + entries[j + 1:]
    return None


def compress_table(table: RoutingTable) -> RoutingTable:
    """Merge same-route entry pairs that differ in exactly one masked bit,
    until no more merges apply."""
    entries = list(table.entries)
    while True:
        merged = _merge_once(entries)
        if merged is None:
            return RoutingTable(table.chip, entries)
        entries = merged


def compress_tables(tables: Dict[Coord, RoutingTable]) -> Dict[Coord, RoutingTable]:
    return {coord: compress_table(t) for coord, t in tables.items()}


def check_table_sizes(tables: Dict[Coord, RoutingTable], machine: Machine):
    for coord, table in tables.items():
        budget = machine[coord].router_entries
        if len(table) > budget:
            raise TableOverflowError(
                f"chip {coord} needs {len(table)} routing entries but has {budget}",
                chip=coord)
