"""Mapping results, their JSON form, and the database external tools read.

External applications that want to decode live traffic register a listener;
they are told when the database is ready, and then when the simulation
starts, pauses, resumes and stops.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from ..errors import DatabaseNotReadyError
from .keys import KeyAllocation, KeyBlock
from .placer import Placement, Placements
from .tables import RoutingTable
from .tags import TagAssignment

log = logging.getLogger(__name__)


@dataclass
class MappingResult:
    placements: Placements
    tables: Dict[tuple, RoutingTable]
    keys: KeyAllocation
    tags: List[TagAssignment] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "placements": [{"vertex": p.vertex, "x": p.x, "y": p.y, "core": p.core}
                           for p in self.placements],
            "tables": [self.tables[c].to_json() for c in sorted(self.tables)],
            "keys": [{"pre": pid[0], "partition": pid[1], "base": b.base, "mask": b.mask,
                      "n_keys": self.keys.n_keys[pid]}
                     for pid, b in self.keys.items()],
            "tags": [t.to_json() for t in self.tags],
        }

    @classmethod
    def from_json(cls, data: dict) -> "MappingResult":
        placements = Placements(Placement(p["vertex"], p["x"], p["y"], p["core"])
                                for p in data["placements"])
        tables = {}
        for t in data["tables"]:
            table = RoutingTable.from_json(t)
            tables[table.chip] = table
        blocks, counts = {}, {}
        for k in data["keys"]:
            pid = (k["pre"], k["partition"])
            blocks[pid] = KeyBlock(k["base"], k["mask"])
            counts[pid] = k.get("n_keys", blocks[pid].size)
        tags = [TagAssignment.from_json(t) for t in data.get("tags", ())]
        return cls(placements, tables, KeyAllocation(blocks, counts), tags)


def write_mapping_database(result: MappingResult, path) -> "MappingDatabase":
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(result.to_json(), indent=1))
    tmp.replace(path)
    log.info("mapping database written to %s", path)
    return MappingDatabase(path)


class MappingDatabase:
    """Read-side view of a written mapping file."""

    def __init__(self, path):
        self.path = Path(path)
        self._result: Optional[MappingResult] = None

    @property
    def ready(self) -> bool:
        return self.path.is_file()

    @property
    def result(self) -> MappingResult:
        if self._result is None:
            if not self.ready:
                raise DatabaseNotReadyError(f"mapping database {self.path} has not been written")
            self._result = MappingResult.from_json(json.loads(self.path.read_text()))
        return self._result

    def placement_of(self, vertex: str) -> Placement:
        return self.result.placements[vertex]

    def key_for(self, pre: str, partition: str) -> KeyBlock:
        return self.result.keys[(pre, partition)]

    def partition_for_key(self, key: int) -> Optional[Tuple[Tuple[str, str], int]]:
        """``((pre, partition), atom_index)`` of the sender of ``key``."""
        pid = self.result.keys.partition_for_key(key)
        if pid is None:
            return None
        return pid, key - self.result.keys[pid].base


class LiveListener:
    """Base class for external applications following a run.

    Every hook is optional; ``database_ready`` returning means the
    application has finished its own setup.
    """

    def database_ready(self, database: MappingDatabase):
        pass

    def start(self):
        pass

    def pause(self):
        pass

    def resume(self):
        pass

    def stop(self):
        pass


class NotificationHub:
    def __init__(self, listeners=()):
        self.listeners: List[LiveListener] = list(listeners)
        self.events: List[str] = []

    def register(self, listener: LiveListener):
        self.listeners.append(listener)

    def notify(self, event: str, *args):
        self.events.append(event)
        for listener in self.listeners:
            getattr(listener, event)(*args)
