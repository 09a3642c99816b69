"""Diagnostics gathered from the simulated machine after a run."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple


@dataclass
class RouterProvenance:
    x: int
    y: int
    routed: int = 0
    default_routed: int = 0
    # Local packets with no matching entry; silently discarded, not a drop.
    local_unmatched: int = 0
    dead_link_lost: int = 0
    dropped: int = 0
    reinjected: int = 0
    unrecoverable: int = 0
    pending_reinjection: int = 0


@dataclass
class CoreProvenance:
    vertex: str
    x: int
    y: int
    core: int
    state: str = "ready"
    sent: int = 0
    received: int = 0
    timer_events: int = 0
    timer_overruns: int = 0
    recording_overflow: bool = False
    counters: Dict[str, int] = field(default_factory=dict)
    log: List[str] = field(default_factory=list)


@dataclass
class PacketAccounting:
    """Packet copies through the fabric; a multicast fork adds copies."""
    injected: int = 0
    forked: int = 0
    delivered_core: int = 0
    delivered_device: int = 0
    local_unmatched: int = 0
    dead_link_lost: int = 0
    unrecoverable: int = 0
    in_flight: int = 0

    @property
    def created(self) -> int:
        return self.injected + self.forked

    @property
    def accounted(self) -> int:
        return (self.delivered_core + self.delivered_device + self.local_unmatched
                + self.dead_link_lost + self.unrecoverable + self.in_flight)

    def balanced(self) -> bool:
        return self.created == self.accounted


@dataclass
class ProvenanceReport:
    steps_run: int = 0
    routers: List[RouterProvenance] = field(default_factory=list)
    cores: List[CoreProvenance] = field(default_factory=list)
    packets: PacketAccounting = field(default_factory=PacketAccounting)
    host_malformed_frames: int = 0

    @property
    def dropped(self) -> int:
        return sum(r.dropped for r in self.routers)

    @property
    def reinjected(self) -> int:
        return sum(r.reinjected for r in self.routers)

    @property
    def unrecoverable(self) -> int:
        return sum(r.unrecoverable for r in self.routers)

    @property
    def pending_reinjection(self) -> int:
        return sum(r.pending_reinjection for r in self.routers)

    @property
    def timer_overruns(self) -> int:
        return sum(c.timer_overruns for c in self.cores)

    def core(self, vertex: str) -> Optional[CoreProvenance]:
        for c in self.cores:
            if c.vertex == vertex:
                return c
        return None

    def router(self, x: int, y: int) -> Optional[RouterProvenance]:
        for r in self.routers:
            if (r.x, r.y) == (x, y):
                return r
        return None

    def counter_total(self, name: str) -> int:
        return sum(c.counters.get(name, 0) for c in self.cores)

    def diagnostic_lines(self) -> List[Tuple[str, str]]:
        """``(vertex, line)`` for every log line flagged ERROR or WARNING."""
        out = []
        for c in self.cores:
            for line in c.log:
                if line.startswith(("ERROR", "WARNING")):
                    out.append((c.vertex, line))
        return out

    def conservation_holds(self) -> bool:
        return self.packets.balanced()

    def to_json(self) -> dict:
        data = asdict(self)
        data["totals"] = {"dropped": self.dropped, "reinjected": self.reinjected,
                          "unrecoverable": self.unrecoverable,
                          "pending_reinjection": self.pending_reinjection,
                          "timer_overruns": self.timer_overruns}
        return data

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)

    @classmethod
    def from_json(cls, data: dict) -> "ProvenanceReport":
        return cls(
            steps_run=data.get("steps_run", 0),
            routers=[RouterProvenance(**r) for r in data.get("routers", ())],
            cores=[CoreProvenance(**c) for c in data.get("cores", ())],
            packets=PacketAccounting(**data.get("packets", {})),
            host_malformed_frames=data.get("host_malformed_frames", 0))
