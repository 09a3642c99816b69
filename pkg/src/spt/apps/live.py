"""Wiring helpers for the host gateways."""

from __future__ import annotations

from typing import Iterable

from ..graph import Edge, IPTagRequest, MachineGraph, MachineVertex, Resources, ReverseIPTagRequest

GATHERER_KIND = "live-gatherer"
INJECTOR_KIND = "mc-source"


def add_live_output(graph: MachineGraph, sources: Iterable[str], partition: str,
                    vertex_id: str = "live_gatherer", endpoint: str = "host") -> MachineVertex:
    """Tap ``partition`` of every source into a gatherer that forwards to
    ``endpoint``; the sources' other receivers are unaffected."""
    sources = list(sources)
    lpg = graph.add_vertex(MachineVertex(
        vertex_id, GATHERER_KIND, Resources(dtcm=4096, sdram_fixed=64 + 8 * len(sources),
                                            tags=(IPTagRequest(endpoint),))))
    for src in sources:
        graph.add_edge(Edge(src, vertex_id, partition))
    return lpg


def add_live_input(graph: MachineGraph, targets: Iterable[str], port: int,
                   n_keys: int = 1, vertex_id: str = "live_injector",
                   partition: str = "injected") -> MachineVertex:
    """A reverse-tagged injector on host ``port`` sending to ``targets``."""
    ritms = graph.add_vertex(MachineVertex(
        vertex_id, INJECTOR_KIND, Resources(dtcm=4096, sdram_fixed=64,
                                            tags=(ReverseIPTagRequest(port),)),
        n_keys=n_keys))
    for t in targets:
        graph.add_edge(Edge(vertex_id, t, partition))
    return ritms
