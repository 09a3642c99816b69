"""Recording-space planning, chunked runs and the host-side buffer manager.

Each chip's SDRAM left after fixed data is shared equally among the chip's
recording vertices.  A vertex can then run ``share // bytes_per_step`` steps
before its region fills; the shortest such run over the machine is the cycle
length, and a long run is cut into chunks of that length.  After every chunk
the host extracts the regions and flushes them.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from ..errors import UnrunnableError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Recorder:
    vertex: str
    bytes_per_step: int
    min_reserved: int = 0


@dataclass
class RunPlan:
    total_steps: int
    chunks: List[int]
    # Steps a recording region holds; None when nothing records.
    cycle: Optional[int] = None
    # Region capacity per recording vertex, in bytes.
    capacities: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if sum(self.chunks) != self.total_steps:
            raise ValueError("chunks must sum to the total number of steps")
        if self.cycle is not None and any(c > self.cycle for c in self.chunks):
            raise ValueError("a chunk is longer than the cycle")


def chunk_steps(total_steps: int, cycle: Optional[int]) -> List[int]:
    if total_steps <= 0:
        return []
    if cycle is None or cycle >= total_steps:
        return [total_steps]
    full, rest = divmod(total_steps, cycle)
    return [cycle] * full + ([rest] if rest else [])


def cycle_length(free_sdram: Mapping[object, int],
                 recorders: Mapping[object, Sequence[Recorder]]) -> Optional[int]:
    """Minimum over chips and their recorders of ``share // bytes_per_step``.

    ``free_sdram[chip]`` is what remains after fixed data; ``recorders[chip]``
    lists the vertices on that chip.  Vertices that record nothing are left
    out of the division.
    """
    cycle = None
    for chip in sorted(recorders):
        active = [r for r in recorders[chip] if r.bytes_per_step > 0]
        if not active:
            continue
        share = free_sdram[chip] // len(active)
        for r in active:
            steps = share // r.bytes_per_step
            if steps < 1 or share < r.min_reserved:
                raise UnrunnableError(
                    f"{r.vertex} records {r.bytes_per_step} B/step but its share of chip "
                    f"{chip} is {share} B")
            cycle = steps if cycle is None else min(cycle, steps)
    return cycle


def plan_runs(placements, graph, machine, total_steps: int,
              previous_cycle: Optional[int] = None) -> RunPlan:
    """Chunk ``total_steps`` so no recording region overflows.

    ``previous_cycle`` is the cycle fixed by an earlier run of the same
    mapping; regions were sized for it, so it is kept as an upper bound.
    """
    if total_steps < 0:
        raise ValueError("total_steps must be non-negative")
    used = defaultdict(int)
    recorders = defaultdict(list)
    for p in placements:
        if p.core is None:
            continue
        r = graph[p.vertex].resources
        used[p.chip] += r.sdram_fixed
        recorders[p.chip].append(Recorder(p.vertex, r.sdram_per_step, r.sdram_min_recording))
    free = {chip: machine[chip].sdram - used[chip] for chip in recorders}
    cycle = cycle_length(free, recorders)
    if cycle is not None:
        if previous_cycle is not None:
            cycle = min(cycle, previous_cycle)
        elif total_steps > 0:
            cycle = min(cycle, total_steps)
    capacities = {}
    for chip in sorted(recorders):
        for r in recorders[chip]:
            if r.bytes_per_step > 0:
                capacities[r.vertex] = max(cycle * r.bytes_per_step, r.min_reserved)
    return RunPlan(total_steps, chunk_steps(total_steps, cycle), cycle, capacities)


class BufferManager:
    """Host-side store of extracted recordings.

    ``extract`` pulls every recording region out of the simulator, appends
    it to the per-vertex buffer and flushes the region.
    """

    def __init__(self, vertices: Iterable[str] = ()):
        self.vertices = sorted(vertices)
        self.data: Dict[str, bytearray] = {v: bytearray() for v in self.vertices}
        self.index: Dict[str, List[dict]] = {v: [] for v in self.vertices}
        self.overflowed: set = set()
        self.live_extractions = 0

    def track(self, vertex: str):
        if vertex not in self.data:
            self.vertices = sorted(set(self.vertices) | {vertex})
            self.data[vertex] = bytearray()
            self.index[vertex] = []

    def attach(self, sim, live: bool = True):
        """Track every recording region of ``sim``; with ``live``, drain a
        region as soon as it passes the simulator's alert threshold."""
        for vid, loc in sorted(sim.vertex_location.items()):
            if sim.recording_region(vid) is not None:
                self.track(vid)
        if live:
            sim.recording_listeners.append(self._on_alert)

    def _on_alert(self, sim, vertex: str):
        self.live_extractions += 1
        self._pull(sim, vertex, steps=None)

    def _pull(self, sim, vertex: str, steps: Optional[int]):
        region = sim.recording_region(vertex)
        x, y, _ = sim.vertex_location[vertex]
        n = region.write_ptr
        blob = sim.read_memory((x, y), region.address, n) if n else b""
        self.data[vertex] += blob
        if region.overflowed:
            self.overflowed.add(vertex)
        sim.flush_recording(vertex)
        self.index[vertex].append({"steps": steps, "bytes": len(blob)})

    def extract(self, sim, steps: Optional[int] = None):
        for vertex in self.vertices:
            self._pull(sim, vertex, steps)

    def get(self, vertex: str) -> bytes:
        return bytes(self.data[vertex])

    def to_json(self) -> List[dict]:
        return [{"vertex": v, "chunks": self.index[v]} for v in self.vertices]

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for i, vertex in enumerate(self.vertices):
            (directory / f"recording_{i}.bin").write_bytes(bytes(self.data[vertex]))
        index = [dict(entry, file=f"recording_{i}.bin")
                 for i, entry in enumerate(self.to_json())]
        (directory / "recordings.json").write_text(json.dumps(index, indent=1))


def run_buffered(sim, plan: RunPlan, manager: BufferManager, hooks=None) -> Dict[str, bytes]:
    """Run the plan chunk by chunk, extracting and flushing in between."""
    for steps in plan.chunks:
        log.info("running chunk of %d steps", steps)
        sim.run(steps, hooks)
        manager.extract(sim, steps)
    return {v: manager.get(v) for v in manager.vertices}
