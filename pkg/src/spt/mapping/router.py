"""Multicast routing: one shortest-path tree per outgoing edge partition."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

from ..errors import RoutingError
from ..graph import MachineGraph
from ..machine import Coord, LinkDirection, Machine
from .placer import Placements

PartitionId = Tuple[str, str]


@dataclass
class TreeNode:
    # Port the packet arrives on at this chip; None at the root.
    in_link: Optional[LinkDirection] = None
    out_links: Set[LinkDirection] = field(default_factory=set)
    cores: Set[int] = field(default_factory=set)
    # A device on this (virtual) chip receives the packet.
    to_device: bool = False


@dataclass
class MulticastTree:
    partition: PartitionId
    root: Coord
    nodes: Dict[Coord, TreeNode] = field(default_factory=dict)

    def chips(self) -> List[Coord]:
        return sorted(self.nodes)

    def sink_locations(self) -> Set[tuple]:
        """``(x, y, core)`` for cores and ``(x, y, None)`` for devices."""
        out = set()
        for coord, node in self.nodes.items():
            out.update((coord[0], coord[1], c) for c in node.cores)
            if node.to_device:
                out.add((coord[0], coord[1], None))
        return out


def _bfs_parents(machine: Machine, root: Coord, sink_chips: Set[Coord]):
    parent: Dict[Coord, Tuple[Coord, LinkDirection]] = {}
    seen = {root}
    queue = deque([root])
    while queue:
        here = queue.popleft()
        chip = machine[here]
        if chip.is_virtual and here != root:
            continue
        for d in LinkDirection:
            there = chip.links.get(d)
            if there is None or there in seen:
                continue
            if machine[there].is_virtual and there not in sink_chips:
                continue
            seen.add(there)
            parent[there] = (here, d)
            queue.append(there)
    return parent


def route_partition(partition, placements: Placements, machine: Machine) -> MulticastTree:
    root = placements[partition.pre].chip
    tree = MulticastTree(partition.id, root)
    tree.nodes[root] = TreeNode()
    sinks = [placements[post] for post in partition.post_vertices]
    parent = _bfs_parents(machine, root, {p.chip for p in sinks})
    for sink in sinks:
        coord = sink.chip
        if coord != root and coord not in parent:
            raise RoutingError(
                f"sink {sink.vertex} on {coord} is unreachable from {root} "
                f"for partition {partition.id}", sink=sink.vertex)
        node = tree.nodes.setdefault(coord, TreeNode())
        if sink.core is None:
            node.to_device = True
        else:
            node.cores.add(sink.core)
        # Walk back towards the root, stopping where the tree already reaches.
        while coord != root:
            prev, d = parent[coord]
            tree.nodes[coord].in_link = d.opposite
            prev_node = tree.nodes.setdefault(prev, TreeNode())
            if d in prev_node.out_links:
                break
            prev_node.out_links.add(d)
            coord = prev
    return tree


def route(placements: Placements, graph: MachineGraph, machine: Machine) -> List[MulticastTree]:
    """One tree per partition, in the graph's partition order."""
    return [route_partition(p, placements, machine) for p in graph.partitions]
