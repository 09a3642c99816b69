"""Poisson sources feeding counters.

Every atom of a source draws a Poisson-distributed number of events per time
step and sends one packet (its own key) per event.  Counters tally packets
per source application vertex and record one ``uint32`` per source per step.
"""

from __future__ import annotations

import struct
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from ..data.generation import MappingInfo, pack_params, register_generator
from ..data.regions import pack_words, unpack_words
from ..graph import ApplicationGraph, ApplicationVertex, Edge, linear_resources
from ..sim.behaviors import CoreBehavior, register_behavior

SOURCE_KIND = "poisson-source"
COUNTER_KIND = "counter"
PARTITION = "events"


def source_id(i: int) -> str:
    return f"source_{i}"


def counter_id(j: int) -> str:
    return f"counter_{j}"


def build_poisson_counter_graph(n_sources: int, atoms_per_source: int,
                                rates: Union[float, Sequence[float]], n_counters: int,
                                max_atoms_per_core: Optional[int] = None,
                                seed: int = 0) -> ApplicationGraph:
    if min(n_sources, atoms_per_source, n_counters) < 1:
        raise ValueError("counts must be at least 1")
    if isinstance(rates, (int, float)):
        rates = [float(rates)] * n_sources
    if len(rates) != n_sources or any(r < 0 for r in rates):
        raise ValueError("need one non-negative rate per source")
    graph = ApplicationGraph(label="poisson-counter")
    for i in range(n_sources):
        graph.add_vertex(ApplicationVertex(
            source_id(i), atoms_per_source,
            linear_resources(sdram_fixed=64, dtcm_fixed=1024, dtcm_per_atom=16,
                             cycles_per_atom=100),
            kind=SOURCE_KIND, max_atoms_per_core=max_atoms_per_core,
            params={"rate": float(rates[i]), "seed": seed * 1_000_003 + i}))
    sources = [source_id(i) for i in range(n_sources)]
    for j in range(n_counters):
        graph.add_vertex(ApplicationVertex(
            counter_id(j), 1,
            linear_resources(sdram_fixed=64 + 12 * 64 * n_sources, dtcm_fixed=1024,
                             sdram_per_step_per_atom=4 * n_sources, cycles_per_atom=1000),
            kind=COUNTER_KIND, params={"sources": sources}))
    for i in range(n_sources):
        for j in range(n_counters):
            graph.add_edge(Edge(source_id(i), counter_id(j), PARTITION))
    return graph


def atom_rng(seed: int, atom: int) -> np.random.Generator:
    """Each atom's stream depends only on the source seed and the atom
    index, so counts do not change with how a source is split."""
    return np.random.default_rng([seed, atom])


def poisson_oracle(rate: float, seed: int, n_atoms: int, steps: int) -> np.ndarray:
    """Events per (step, atom), drawn as the source behavior draws them."""
    out = np.zeros((steps, n_atoms), dtype=np.int64)
    for a in range(n_atoms):
        out[:, a] = atom_rng(seed, a).poisson(rate, size=steps) if rate > 0 else 0
    return out


@register_generator(SOURCE_KIND)
def _source_image(info: MappingInfo, vertex) -> List[bytes]:
    lo, hi = vertex.atom_slice
    params = pack_params("dIII", vertex.params["rate"], vertex.params["seed"], lo, hi)
    return [params, pack_words([info.base_key(vertex.id, PARTITION)])]


@register_generator(COUNTER_KIND)
def _counter_image(info: MappingInfo, vertex) -> List[bytes]:
    index = {s: i for i, s in enumerate(vertex.params["sources"])}
    words = []
    for pid, block in info.incoming(vertex.id):
        parent = info.graph[pid[0]].app_parent or pid[0]
        words += [block.base, block.mask, index[parent]]
    return [pack_words([len(vertex.params["sources"]), len(words) // 3] + words)]


@register_behavior(SOURCE_KIND)
class PoissonSource(CoreBehavior):
    def start(self, ctx):
        params, keys = ctx.regions()
        self.rate, seed, lo, hi = struct.unpack("<dIII", params)
        self.base = unpack_words(keys)[0]
        self.lo = lo
        self.rngs = [atom_rng(seed, a) for a in range(lo, hi + 1)]

    def timer(self, ctx, step):
        if self.rate <= 0:
            return
        for offset, rng in enumerate(self.rngs):
            count = int(rng.poisson(self.rate))
            for _ in range(count):
                ctx.send(self.base + offset)
            ctx.increment("emitted", count)


@register_behavior(COUNTER_KIND)
class Counter(CoreBehavior):
    def start(self, ctx):
        (table,) = ctx.regions()
        words = unpack_words(table)
        self.n_sources, n = words[0], words[1]
        self.table = [tuple(words[2 + 3 * i: 5 + 3 * i]) for i in range(n)]
        self.pending: Dict[int, List[int]] = {}
        self.recorded = 0

    def packet(self, ctx, key, payload):
        for base, mask, source in self.table:
            if key & mask == base:
                self.pending.setdefault(ctx.step, [0] * self.n_sources)[source] += 1
                ctx.increment("received")
                return
        ctx.warning(f"packet with unknown key {key:#x}")

    def _record_until(self, ctx, step):
        while self.recorded < step:
            counts = self.pending.pop(self.recorded, [0] * self.n_sources)
            ctx.record(pack_words(counts))
            self.recorded += 1

    def timer(self, ctx, step):
        self._record_until(ctx, step)

    def pause(self, ctx):
        self._record_until(ctx, ctx.end_step)


def counts_from_recording(data: bytes, n_sources: int) -> np.ndarray:
    """``(steps, n_sources)`` array of recorded counts."""
    words = np.frombuffer(data, dtype="<u4")
    return words.reshape(-1, n_sources).astype(np.int64)


def run_poisson(n_sources: int, atoms_per_source: int, rates, n_counters: int, steps: int,
                machine="auto", max_atoms_per_core: Optional[int] = None, seed: int = 0,
                config=None, session_out: Optional[list] = None) -> Dict[str, np.ndarray]:
    """Counts per counter vertex as ``(steps, n_sources)`` arrays."""
    from ..session import Session
    graph = build_poisson_counter_graph(n_sources, atoms_per_source, rates, n_counters,
                                        max_atoms_per_core, seed)
    session = Session(machine, config)
    session.set_graph(graph)
    session.run(steps)
    if session_out is not None:
        session_out.append(session)
    mapping = session.artifact("GraphMapping")
    out = {}
    for j in range(n_counters):
        (mv,) = mapping.machine_vertices(counter_id(j))
        out[counter_id(j)] = counts_from_recording(session.recording(mv.id), n_sources)
    return out
