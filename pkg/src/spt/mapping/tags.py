"""IP tag and reverse IP tag allocation on Ethernet chips."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

from ..errors import TagAllocationError
from ..graph import IPTagRequest, MachineGraph, ReverseIPTagRequest, TagRequest
from ..machine import MAX_TAGS_PER_ETHERNET, Coord, Machine
from .placer import Placement, Placements


@dataclass(frozen=True)
class TagAssignment:
    vertex: str
    ethernet: Coord
    slot: int
    request: TagRequest
    # Where the requesting vertex runs; reverse tags deliver here.
    target: Tuple[int, int, Optional[int]]

    @property
    def is_reverse(self) -> bool:
        return isinstance(self.request, ReverseIPTagRequest)

    def to_json(self) -> dict:
        out = {"vertex": self.vertex, "x": self.ethernet[0], "y": self.ethernet[1],
               "slot": self.slot, "target": list(self.target)}
        if self.is_reverse:
            out.update(type="reverse_ip_tag", port=self.request.port)
        else:
            out.update(type="ip_tag", endpoint=self.request.endpoint)
        return out

    @classmethod
    def from_json(cls, data) -> "TagAssignment":
        if data["type"] == "reverse_ip_tag":
            request = ReverseIPTagRequest(int(data["port"]))
        else:
            request = IPTagRequest(data["endpoint"])
        return cls(data["vertex"], (data["x"], data["y"]), data["slot"], request,
                   tuple(data["target"]))


class TagTable:
    """Up to eight slots on one Ethernet chip."""

    def __init__(self, ethernet: Coord, capacity: int = MAX_TAGS_PER_ETHERNET):
        self.ethernet = ethernet
        self.capacity = capacity
        self.slots: List[Optional[TagAssignment]] = [None] * capacity

    def free_slot(self) -> Optional[int]:
        for i, s in enumerate(self.slots):
            if s is None:
                return i
        return None

    def install(self, assignment: TagAssignment):
        if self.slots[assignment.slot] is not None:
            raise TagAllocationError(
                f"slot {assignment.slot} on {self.ethernet} is already in use")
        self.slots[assignment.slot] = assignment

    def __len__(self):
        return sum(s is not None for s in self.slots)


def allocate_tags(requests: Iterable[Tuple[str, TagRequest, Placement]],
                  machine: Machine) -> List[TagAssignment]:
    """Bind each request to the nearest Ethernet chip with a free slot."""
    tables: Dict[Coord, TagTable] = {e: TagTable(e) for e in machine.ethernet_chips}
    if not tables:
        requests = list(requests)
        if requests:
            raise TagAllocationError("machine has no Ethernet chips")
        return []
    out = []
    for vertex, request, placement in requests:
        dist = machine.hop_distances(placement.chip, through_virtual=True)
        candidates = sorted((dist.get(e, float("inf")), e) for e in tables)
        for _, eth in candidates:
            slot = tables[eth].free_slot()
            if slot is not None:
                assignment = TagAssignment(vertex, eth, slot, request,
                                           (placement.x, placement.y, placement.core))
                tables[eth].install(assignment)
                out.append(assignment)
                break
        else:
            raise TagAllocationError(
                f"no free tag slot for {vertex}: all {len(tables)} Ethernet chip(s) "
                f"already hold {MAX_TAGS_PER_ETHERNET} tags")
    return out


def graph_tag_requests(graph: MachineGraph, placements: Placements):
    for vid in sorted(graph.vertices):
        for request in graph[vid].resources.tags:
            yield vid, request, placements[vid]


def allocate_graph_tags(graph: MachineGraph, placements: Placements,
                        machine: Machine) -> List[TagAssignment]:
    return allocate_tags(graph_tag_requests(graph, placements), machine)
