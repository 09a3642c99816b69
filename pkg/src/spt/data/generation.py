"""Per-vertex data images built once mapping has fixed keys and tags.

Generators are registered by vertex kind.  Each returns the list of region
payloads; :func:`generate_data` wraps them in a :class:`DataImage` and checks
the result against the vertex's declared fixed SDRAM.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

from ..errors import DataGenerationError
from ..graph import MachineGraph, VirtualVertex
from ..mapping.keys import KeyAllocation
from .regions import DataImage, pack_words

Generator = Callable[["MappingInfo", object], List[bytes]]
GENERATORS: Dict[str, Generator] = {}


@dataclass
class MappingInfo:
    """What a generator may look at: the graph, its keys and tags, and the
    length of the coming run."""
    graph: MachineGraph
    keys: KeyAllocation
    tags: list = field(default_factory=list)
    run_steps: int = 0

    def base_key(self, vertex_id: str, partition: str) -> int:
        return self.keys[(vertex_id, partition)].base

    def incoming(self, vertex_id: str):
        """``(pid, KeyBlock)`` of every partition reaching ``vertex_id``,
        sorted by partition id."""
        parts = self.graph.incoming_partitions(vertex_id)
        return [(p.id, self.keys[p.id]) for p in sorted(parts, key=lambda p: p.id)]


def register_generator(kind: str):
    def wrap(fn):
        GENERATORS[kind] = fn
        return fn
    return wrap


def generate_data(vertex, info: MappingInfo) -> DataImage:
    # Importing the apps registers their generators.
    from .. import apps  # noqa: F401
    gen = GENERATORS.get(vertex.kind)
    regions = gen(info, vertex) if gen is not None else []
    image = DataImage(vertex.id, [bytes(r) for r in regions])
    budget = max(vertex.resources.sdram_fixed, image.header_size if not regions else 0)
    if len(image) > budget:
        raise DataGenerationError(
            f"image of {vertex.id} is {len(image)} bytes; only {vertex.resources.sdram_fixed} "
            f"declared as fixed SDRAM")
    return image


def generate_all(graph: MachineGraph, info: MappingInfo,
                 only: Optional[set] = None) -> Dict[str, DataImage]:
    """Images for every vertex that runs on a core."""
    images = {}
    for vid in sorted(graph.vertices):
        vertex = graph[vid]
        if isinstance(vertex, VirtualVertex) or (only is not None and vid not in only):
            continue
        images[vid] = generate_data(vertex, info)
    return images


@register_generator("key-logger")
@register_generator("live-gatherer")
def _incoming_key_table(info: MappingInfo, vertex) -> List[bytes]:
    words = []
    for _, block in info.incoming(vertex.id):
        words += [block.base, block.mask]
    return [pack_words([len(words) // 2] + words)]


@register_generator("mc-source")
@register_generator("scripted-source")
def _outgoing_keys(info: MappingInfo, vertex) -> List[bytes]:
    words = [info.keys[p.id].base for p in info.graph.outgoing_partitions(vertex.id)]
    return [pack_words([len(words)] + words)]


def pack_params(fmt: str, *values) -> bytes:
    return struct.pack("<" + fmt, *values)
