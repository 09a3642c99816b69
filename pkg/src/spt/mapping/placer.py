"""Machine sizing and vertex placement."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Optional

from ..errors import PlacementError, UnsatisfiableVertexError
from ..graph import MachineGraph, VirtualVertex
from ..machine import MAX_CORES, SDRAM_PER_CHIP, Coord, Machine


@dataclass(frozen=True)
class Placement:
    vertex: str
    x: int
    y: int
    # None for device vertices sitting on a virtual chip.
    core: Optional[int]

    @property
    def chip(self) -> Coord:
        return (self.x, self.y)


class Placements:
    """All placements, indexed both by vertex and by location."""

    def __init__(self, placements=()):
        self._by_vertex: Dict[str, Placement] = {}
        self._by_location: Dict[tuple, Placement] = {}
        for p in placements:
            self.add(p)

    def add(self, p: Placement):
        if p.vertex in self._by_vertex:
            raise PlacementError(f"vertex {p.vertex} placed twice")
        loc = (p.x, p.y, p.core)
        if p.core is not None and loc in self._by_location:
            raise PlacementError(f"core {loc} already holds {self._by_location[loc].vertex}")
        self._by_vertex[p.vertex] = p
        self._by_location[loc] = p

    def __getitem__(self, vertex_id) -> Placement:
        return self._by_vertex[vertex_id]

    def __contains__(self, vertex_id):
        return vertex_id in self._by_vertex

    def __iter__(self):
        return iter(sorted(self._by_vertex.values(),
                           key=lambda p: (p.x, p.y, -1 if p.core is None else p.core, p.vertex)))

    def __len__(self):
        return len(self._by_vertex)

    def at(self, x, y, core) -> Optional[Placement]:
        return self._by_location.get((x, y, core))

    def on_chip(self, coord) -> List[Placement]:
        return [p for p in self if p.chip == tuple(coord)]

    def chips(self) -> List[Coord]:
        return sorted({p.chip for p in self})


def estimate_machine_size(graph: MachineGraph, cores_per_chip: int = MAX_CORES - 1,
                          sdram_per_chip: int = SDRAM_PER_CHIP) -> int:
    """Chips needed, by first-fit-decreasing bin packing on cores and SDRAM."""
    needs = sorted((v.resources.sdram_to_place for v in graph.vertices.values()
                    if not isinstance(v, VirtualVertex)), reverse=True)
    bins: List[List[int]] = []   # [cores used, sdram used]
    for sdram in needs:
        if sdram > sdram_per_chip:
            raise UnsatisfiableVertexError(
                f"a vertex needs {sdram} bytes of SDRAM; a chip has {sdram_per_chip}")
        for b in bins:
            if b[0] < cores_per_chip and b[1] + sdram <= sdram_per_chip:
                b[0] += 1
                b[1] += sdram
                break
        else:
            bins.append([1, sdram])
    return max(len(bins), 1)


def grid_for_chips(n_chips: int):
    """Smallest near-square ``(width, height)`` with at least ``n_chips``."""
    width = max(1, math.ceil(math.sqrt(n_chips)))
    height = max(1, math.ceil(n_chips / width))
    return width, height


def _chip_order(machine: Machine) -> List[Coord]:
    start = (0, 0) if (0, 0) in machine else min(c.coord for c in machine.real_chips())
    order, seen = [], {start}
    queue = deque([start])
    while queue:
        here = queue.popleft()
        order.append(here)
        for d in sorted(machine[here].links):
            there = machine[here].links[d]
            if there not in seen and not machine[there].is_virtual:
                seen.add(there)
                queue.append(there)
    # Chips not reachable from the start still get used, after the rest.
    order.extend(sorted(c.coord for c in machine.real_chips() if c.coord not in seen))
    return order


def _vertex_order(graph: MachineGraph) -> List[str]:
    """Vertices grouped by connected component, each component walked
    breadth-first from its largest-SDRAM member."""
    ids = [vid for vid, v in graph.vertices.items() if not isinstance(v, VirtualVertex)]
    sdram = {vid: graph[vid].resources.sdram_to_place for vid in ids}
    adjacent: Dict[str, set] = {vid: set() for vid in ids}
    for e in graph.edges:
        if e.pre in adjacent and e.post in adjacent and e.pre != e.post:
            adjacent[e.pre].add(e.post)
            adjacent[e.post].add(e.pre)

    def priority(vid):
        return (-sdram[vid], vid)

    components = []
    seen = set()
    for root in sorted(ids, key=priority):
        if root in seen:
            continue
        comp, queue = [], deque([root])
        seen.add(root)
        while queue:
            v = queue.popleft()
            comp.append(v)
            for n in sorted(adjacent[v], key=priority):
                if n not in seen:
                    seen.add(n)
                    queue.append(n)
        components.append(comp)
    # Big-SDRAM components first so that they get first pick of empty chips.
    components.sort(key=lambda c: (-max(sdram[v] for v in c), -len(c), c[0]))
    return [v for comp in components for v in comp]


def place(graph: MachineGraph, machine: Machine) -> Placements:
    """First-fit greedy placement over chips in breadth-first order from
    (0, 0).

    Device vertices go onto the virtual chip on their anchor link; vertices
    with a ``chip_constraint`` go onto that chip.
    """
    order = _chip_order(machine)
    free_cores = {c: list(machine[c].application_cores) for c in order}
    free_sdram = {c: machine[c].sdram for c in order}
    placements = Placements()

    for v in sorted(graph.virtual_vertices, key=lambda v: v.id):
        target = machine.neighbor(v.anchor, v.anchor_link)
        if target is None or not machine[target].is_virtual:
            raise PlacementError(
                f"device {v.id} needs a virtual chip on {v.anchor} link "
                f"{v.anchor_link.name}", constraint="virtual-chip")
        placements.add(Placement(v.id, target[0], target[1], None))

    def take(vid, coord):
        core = free_cores[coord].pop(0)
        free_sdram[coord] -= graph[vid].resources.sdram_to_place
        placements.add(Placement(vid, coord[0], coord[1], core))

    pending = _vertex_order(graph)
    pinned = [vid for vid in pending if graph[vid].chip_constraint is not None]
    for vid in pinned:
        coord = tuple(graph[vid].chip_constraint)
        need = graph[vid].resources.sdram_to_place
        if coord not in free_cores:
            raise PlacementError(f"{vid} is constrained to missing chip {coord}",
                                 constraint="location")
        if not free_cores[coord]:
            raise PlacementError(f"no free core on {coord} for {vid}", constraint="cores")
        if need > free_sdram[coord]:
            raise PlacementError(f"not enough SDRAM on {coord} for {vid}", constraint="sdram")
        take(vid, coord)

    for vid in pending:
        if vid in placements:
            continue
        need = graph[vid].resources.sdram_to_place
        for coord in order:
            if free_cores[coord] and need <= free_sdram[coord]:
                take(vid, coord)
                break
        else:
            any_cores = any(free_cores.values())
            binding = "sdram" if any_cores else "cores"
            raise PlacementError(
                f"cannot place {vid} (needs {need} bytes SDRAM): machine out of {binding}",
                constraint=binding)
    return placements
