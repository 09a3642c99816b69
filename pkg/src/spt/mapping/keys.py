"""Routing key allocation.

Every outgoing edge partition receives an aligned power-of-two block of keys;
atom ``i`` of the source transmits ``base + i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, Mapping, Optional, Tuple

from ..errors import KeyAllocationError
from ..graph import MachineGraph

KEY_SPACE = 1 << 32
FULL_MASK = 0xFFFFFFFF

PartitionId = Tuple[str, str]


def next_pow2(n: int) -> int:
    return 1 if n <= 1 else 1 << (n - 1).bit_length()


@dataclass(frozen=True)
class KeyBlock:
    base: int
    mask: int

    @property
    def size(self) -> int:
        return (~self.mask & FULL_MASK) + 1

    def key(self, index: int) -> int:
        if not 0 <= index < self.size:
            raise IndexError(f"key index {index} outside block of {self.size}")
        return self.base + index

    def matches(self, key: int) -> bool:
        return key & self.mask == self.base

    def __iter__(self) -> Iterator[int]:
        return iter(range(self.base, self.base + self.size))


class KeyAllocation(Mapping):
    """Read-only mapping ``(pre_vertex, identifier) -> KeyBlock``."""

    def __init__(self, blocks: Dict[PartitionId, KeyBlock], n_keys: Dict[PartitionId, int]):
        self._blocks = blocks
        self.n_keys = n_keys

    def __getitem__(self, pid) -> KeyBlock:
        return self._blocks[tuple(pid)]

    def __iter__(self):
        return iter(self._blocks)

    def __len__(self):
        return len(self._blocks)

    def emitted_keys(self, pid) -> range:
        """Keys the source of ``pid`` actually sends."""
        block = self[pid]
        return range(block.base, block.base + self.n_keys[tuple(pid)])

    def partition_for_key(self, key: int) -> Optional[PartitionId]:
        for pid, block in self._blocks.items():
            if block.matches(key):
                return pid
        return None


def allocate_keys(partitions: Iterable, key_counts: Mapping[str, int]) -> KeyAllocation:
    """Allocate blocks from 0 upwards, largest first.

    ``key_counts`` gives the number of keys each pre vertex transmits per
    partition.  Sorting by descending block size keeps every block aligned
    to its own size with no padding.
    """
    requests = []
    for index, part in enumerate(partitions):
        count = int(key_counts[part.pre])
        if count < 1:
            raise KeyAllocationError(f"partition {part.id} needs at least one key")
        requests.append((-next_pow2(count), index, part.id, count))
    requests.sort()
    blocks, counts = {}, {}
    cursor = 0
    for neg_size, _, pid, count in requests:
        size = -neg_size
        if cursor + size > KEY_SPACE:
            raise KeyAllocationError(
                f"32-bit key space exhausted allocating {size} keys for {pid}")
        blocks[pid] = KeyBlock(cursor, (~(size - 1)) & FULL_MASK)
        counts[pid] = count
        cursor += size
    # Preserve the caller's partition order for iteration.
    order = {r[2]: r[1] for r in requests}
    blocks = dict(sorted(blocks.items(), key=lambda kv: order[kv[0]]))
    return KeyAllocation(blocks, counts)


def allocate_graph_keys(graph: MachineGraph) -> KeyAllocation:
    counts = {vid: v.keys_required for vid, v in graph.vertices.items()}
    return allocate_keys(graph.partitions, counts)
