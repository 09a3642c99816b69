"""Deterministic discrete-event simulator of a loaded machine.

Time is a global integer tick.  Each application time step lasts
``timestep_ticks``; every core gets a timer event at the start of each step.
Multicast packets are routed chip by chip through the loaded tables with
first-match semantics and default (straight-through) routing.  Each output
link is a FIFO serving one packet per tick with a bounded buffer; a packet
that cannot enter the buffer within ``drop_wait`` ticks is dropped, and a
per-chip single-slot holding register may catch it for re-injection.

All ordering is fixed by ``(tick, priority, sequence)`` so identical inputs
produce identical event traces.
"""

from __future__ import annotations

import bisect
import heapq
import itertools
import logging
import random
import traceback
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Tuple

from ..data.regions import parse_image
from ..errors import ConfigurationError, LoadError, RunFailedError, SptError
from ..machine import Coord, LinkDirection, Machine
from .provenance import CoreProvenance, PacketAccounting, ProvenanceReport, RouterProvenance

log = logging.getLogger(__name__)

SDRAM_BASE = 0x6000_0000

_TIMER, _ARRIVE, _DELIVER, _DROP, _REINJECT, _DEVICE = range(6)
_LOCAL_PRIORITY = 7
_DELIVER_PRIORITY = 10
_DROP_PRIORITY = 11
_REINJECT_PRIORITY = 12
_IN_FLIGHT_KINDS = (_ARRIVE, _DELIVER, _DROP, _DEVICE)


@dataclass
class SimConfig:
    timestep_ticks: int = 1000
    router_queue_capacity: int = 64
    hop_latency: int = 1
    drop_wait: int = 16
    rng_seed: int = 0
    reinjection: bool = True
    trace: bool = False
    # Fraction of a recording region that triggers a buffer-full alert.
    recording_alert_fraction: float = 0.75

    def __post_init__(self):
        for name in ("timestep_ticks", "router_queue_capacity", "hop_latency"):
            if getattr(self, name) < 1:
                raise SptError(f"SimConfig.{name} must be positive")
        if self.drop_wait < 0:
            raise SptError("SimConfig.drop_wait must be non-negative")


class MulticastPacket(NamedTuple):
    key: int
    payload: Optional[int] = None
    timestamp: int = 0


class RouteDecision(NamedTuple):
    links: Tuple[LinkDirection, ...]
    cores: Tuple[int, ...]
    # "entry", "default" or "drop"
    reason: str


class Sdram:
    """Sparse model of a chip's SDRAM: a bump allocator over byte blocks."""

    def __init__(self, size: int):
        self.size = size
        self.used = 0
        self._next = SDRAM_BASE
        self._starts: List[int] = []
        self._blocks: Dict[int, bytearray] = {}

    @property
    def free(self) -> int:
        return self.size - self.used

    def alloc(self, n_bytes: int) -> int:
        if n_bytes < 0:
            raise LoadError("negative SDRAM allocation")
        if self.used + n_bytes > self.size:
            raise LoadError(
                f"SDRAM exhausted: need {n_bytes} bytes, {self.free} of {self.size} free")
        addr = self._next
        self._next += (n_bytes + 3) & ~3 or 4
        self.used += n_bytes
        self._blocks[addr] = bytearray(n_bytes)
        bisect.insort(self._starts, addr)
        return addr

    def _locate(self, addr: int, n_bytes: int):
        i = bisect.bisect_right(self._starts, addr) - 1
        if i < 0:
            raise SptError(f"address {addr:#x} is not allocated")
        start = self._starts[i]
        block = self._blocks[start]
        offset = addr - start
        if offset + n_bytes > len(block):
            raise SptError(f"access {addr:#x}+{n_bytes} runs off its block")
        return block, offset

    def read(self, addr: int, n_bytes: int) -> bytes:
        block, offset = self._locate(addr, n_bytes)
        return bytes(block[offset:offset + n_bytes])

    def write(self, addr: int, data: bytes):
        block, offset = self._locate(addr, len(data))
        block[offset:offset + len(data)] = data


@dataclass
class RecordingRegion:
    vertex: str
    address: int
    capacity: int
    bytes_per_step: int = 0
    min_reserved: int = 0
    write_ptr: int = 0
    overflowed: bool = False
    alerted: bool = False

    def __post_init__(self):
        if self.capacity < self.min_reserved:
            raise LoadError(f"recording region of {self.vertex} smaller than its minimum")


class CoreContext:
    """What a core behavior may touch: its memory, its outputs, its logs."""

    def __init__(self, sim: "Simulator", state: "_CoreState"):
        self._sim = sim
        self._state = state
        self.vertex = state.vertex
        self.x, self.y, self.core = state.location
        seed = f"{sim.config.rng_seed}:{self.x}:{self.y}:{self.core}"
        self.rng = random.Random(seed)

    @property
    def tick(self) -> int:
        return self._sim.now

    @property
    def step(self) -> int:
        return self._sim.now // self._sim.config.timestep_ticks

    @property
    def end_step(self) -> int:
        """Step at which the current run segment pauses."""
        return self._sim.end_step

    @property
    def counters(self) -> Dict[str, int]:
        return self._state.prov.counters

    def increment(self, name: str, amount: int = 1):
        counters = self._state.prov.counters
        counters[name] = counters.get(name, 0) + amount

    def send(self, key: int, payload: Optional[int] = None):
        self._sim._inject(self._state, key, payload)

    def regions(self) -> List[bytes]:
        """Data regions of this core's loaded image."""
        state = self._state
        if state.image_address is None:
            return []
        blob = self._sim.sdram[(self.x, self.y)].read(state.image_address, state.image_size)
        return parse_image(blob, self.vertex.id).regions

    def record(self, data: bytes) -> bool:
        """Append to the recording region; False if the data was truncated."""
        return self._sim._record(self._state, data)

    def send_host(self, frame: bytes):
        self._sim._send_host(self._state, frame)

    def host_frames(self) -> List[bytes]:
        return self._sim._host_frames(self._state)

    def timer_overrun(self):
        self._state.prov.timer_overruns += 1

    def log(self, message: str):
        self._state.prov.log.append(f"INFO: {message}")

    def warning(self, message: str):
        self._state.prov.log.append(f"WARNING: {message}")

    def error(self, message: str):
        self._state.prov.log.append(f"ERROR: {message}")
        self._state.state = "error"


@dataclass
class _CoreState:
    vertex: object
    location: Tuple[int, int, int]
    behavior: object = None
    ctx: Optional[CoreContext] = None
    prov: Optional[CoreProvenance] = None
    state: str = "ready"
    image_address: Optional[int] = None
    image_size: int = 0
    region: Optional[RecordingRegion] = None
    ip_tag: object = None
    reverse_tag: object = None
    order: int = 0


class Simulator:
    def __init__(self, machine: Machine, config: Optional[SimConfig] = None):
        from .gateways import HostChannel
        self.machine = machine
        self.config = config or SimConfig()
        self.now = 0
        self.end_step = 0
        self.started = False
        self.stopped = False
        self.host = HostChannel()
        self.sdram = {c.coord: Sdram(c.sdram) for c in machine.real_chips()}
        self.tables: Dict[Coord, list] = {}
        self.tag_tables: Dict[Coord, Dict[int, object]] = {}
        self.router_prov = {c.coord: RouterProvenance(c.x, c.y) for c in machine.real_chips()}
        self.packets = PacketAccounting()
        self.cores: Dict[Tuple[int, int, int], _CoreState] = {}
        self.vertex_location: Dict[str, Tuple[int, int, Optional[int]]] = {}
        self.device_log: Dict[str, List[Tuple[int, int, Optional[int]]]] = {}
        self._devices_by_chip: Dict[Coord, str] = {}
        self.trace: List[Tuple[int, Coord, str, int]] = []
        self.recording_listeners = []
        self._queue: list = []
        self._seq = itertools.count()
        self._route_cache: Dict[Coord, dict] = {}
        self._links: Dict[Tuple[Coord, LinkDirection], deque] = {}
        self._held: Dict[Coord, Optional[Tuple[MulticastPacket, LinkDirection]]] = {}
        self._steps_run = 0

    # -- loading -----------------------------------------------------------

    def load_routing_tables(self, tables):
        for coord, table in sorted(tables.items()):
            chip = self.machine[coord]
            if chip.is_virtual:
                continue
            entries = list(getattr(table, "entries", table))
            if len(entries) > chip.router_entries:
                raise LoadError(
                    f"routing table for {coord} has {len(entries)} entries; "
                    f"the router holds {chip.router_entries}")
            self.tables[coord] = entries
            self._route_cache[coord] = {}

    def load_tags(self, tags):
        for tag in tags:
            table = self.tag_tables.setdefault(tuple(tag.ethernet), {})
            if tag.slot in table:
                raise LoadError(f"tag slot {tag.slot} on {tag.ethernet} loaded twice")
            table[tag.slot] = tag

    def load_image(self, vertex_id: str, image_bytes: bytes):
        x, y, core = self.vertex_location[vertex_id]
        if core is None:
            return None
        state = self.cores[(x, y, core)]
        addr = self.sdram[(x, y)].alloc(len(image_bytes))
        self.sdram[(x, y)].write(addr, image_bytes)
        state.image_address, state.image_size = addr, len(image_bytes)
        return addr

    def allocate_recording(self, vertex_id: str, capacity: int, bytes_per_step: int = 0,
                           min_reserved: int = 0) -> Optional[RecordingRegion]:
        x, y, core = self.vertex_location[vertex_id]
        if core is None:
            return None
        addr = self.sdram[(x, y)].alloc(capacity)
        region = RecordingRegion(vertex_id, addr, capacity, bytes_per_step, min_reserved)
        self.cores[(x, y, core)].region = region
        return region

    def add_core(self, vertex, x: int, y: int, core: Optional[int], behavior=None):
        """Place ``vertex`` (with its behavior instance) on a core, or on a
        virtual chip when ``core`` is None."""
        self.vertex_location[vertex.id] = (x, y, core)
        if core is None or self.machine[(x, y)].is_virtual:
            self._devices_by_chip[(x, y)] = vertex.id
            self.device_log.setdefault(vertex.id, [])
            return None
        loc = (x, y, core)
        if loc in self.cores:
            raise LoadError(f"core {loc} already loaded with {self.cores[loc].vertex.id}")
        if core not in self.machine[(x, y)].application_cores:
            raise LoadError(f"core {loc} is not an application core")
        state = _CoreState(vertex, loc, behavior, order=len(self.cores))
        state.prov = CoreProvenance(vertex.id, x, y, core)
        state.ctx = CoreContext(self, state)
        self.cores[loc] = state
        return state

    def bind_tags(self):
        """Attach tags to their cores and check behaviors that need one."""
        for table in self.tag_tables.values():
            for tag in table.values():
                loc = self.vertex_location.get(tag.vertex)
                if loc is None or loc[2] is None:
                    continue
                state = self.cores[loc]
                if tag.is_reverse:
                    state.reverse_tag = tag
                else:
                    state.ip_tag = tag
        for state in self.cores.values():
            needs_ip = getattr(state.behavior, "needs_ip_tag", False)
            needs_reverse = getattr(state.behavior, "needs_reverse_ip_tag", False)
            if needs_ip and state.ip_tag is None:
                raise ConfigurationError(f"{state.vertex.id} needs an IP tag but has none")
            if needs_reverse and state.reverse_tag is None:
                raise ConfigurationError(
                    f"{state.vertex.id} needs a reverse IP tag but has none")

    # -- memory access -------------------------------------------------------

    def read_memory(self, coord, address: int, n_bytes: int) -> bytes:
        return self.sdram[tuple(coord)].read(address, n_bytes)

    def write_memory(self, coord, address: int, data: bytes):
        self.sdram[tuple(coord)].write(address, data)

    def recording_region(self, vertex_id: str) -> Optional[RecordingRegion]:
        loc = self.vertex_location.get(vertex_id)
        if loc is None or loc[2] is None:
            return None
        return self.cores[loc].region

    def flush_recording(self, vertex_id: str, n_bytes: Optional[int] = None):
        """Discard the first ``n_bytes`` (default: all) recorded bytes."""
        region = self.recording_region(vertex_id)
        if region is None:
            return
        x, y, _ = self.vertex_location[vertex_id]
        n = region.write_ptr if n_bytes is None else min(n_bytes, region.write_ptr)
        if n < region.write_ptr:
            rest = self.read_memory((x, y), region.address + n, region.write_ptr - n)
            self.write_memory((x, y), region.address, rest)
        region.write_ptr -= n
        region.alerted = False

    # -- routing -------------------------------------------------------------

    def route_packet(self, coord, packet, arrival: Optional[LinkDirection]) -> RouteDecision:
        """Routing decision at ``coord``: first match wins; unmatched packets
        from a link go straight on; unmatched local packets are discarded."""
        coord = tuple(coord)
        entry = self._lookup(coord, packet.key if hasattr(packet, "key") else packet)
        if entry is not None:
            return RouteDecision(tuple(sorted(entry.links)), tuple(sorted(entry.cores)), "entry")
        if arrival is None:
            return RouteDecision((), (), "drop")
        return RouteDecision((LinkDirection(arrival).opposite,), (), "default")

    def _lookup(self, coord, key):
        cache = self._route_cache.get(coord)
        if cache is None:
            return None
        try:
            return cache[key]
        except KeyError:
            pass
        found = None
        for entry in self.tables[coord]:
            if key & entry.mask == entry.key:
                found = entry
                break
        cache[key] = found
        return found

    # -- event plumbing ------------------------------------------------------

    def _push(self, tick, priority, kind, a=None, b=None, c=None):
        heapq.heappush(self._queue, (tick, priority, next(self._seq), kind, a, b, c))

    def _trace(self, coord, event, key):
        if self.config.trace:
            self.trace.append((self.now, coord, event, key))

    def _inject(self, state: _CoreState, key: int, payload: Optional[int]):
        if state.state == "error":
            return
        state.prov.sent += 1
        self.packets.injected += 1
        packet = MulticastPacket(key & 0xFFFFFFFF, payload, self.now)
        x, y, _ = state.location
        self._trace((x, y), "send", packet.key)
        self._push(self.now, _LOCAL_PRIORITY, _ARRIVE, (x, y), None, packet)

    def device_send(self, vertex_id: str, key: int, payload: Optional[int] = None,
                    step: Optional[int] = None):
        """A device injects a packet into its anchor chip over the anchor link."""
        vx, vy, _ = self.vertex_location[vertex_id]
        anchor, link = self.machine.virtual_anchor((vx, vy))
        tick = self.now if step is None else step * self.config.timestep_ticks
        self.packets.injected += 1
        self._push(max(tick, self.now), 1 + int(link.opposite), _ARRIVE, anchor,
                   link, MulticastPacket(key & 0xFFFFFFFF, payload, tick))

    def _arrive(self, coord, port, packet):
        prov = self.router_prov[coord]
        entry = self._lookup(coord, packet.key)
        if entry is not None:
            links, cores = entry.links, entry.cores
            prov.routed += 1
        elif port is None:
            prov.local_unmatched += 1
            self.packets.local_unmatched += 1
            self._trace(coord, "local_drop", packet.key)
            return
        else:
            links, cores = (port.opposite,), ()
            prov.default_routed += 1
        n_out = len(links) + len(cores)
        if n_out == 0:
            self.packets.local_unmatched += 1
            return
        self.packets.forked += n_out - 1
        now = self.now
        if cores:
            x, y = coord
            for core in sorted(cores):
                self._push(now + 1, _DELIVER_PRIORITY, _DELIVER, (x, y, core), None, packet)
        if links:
            for link in sorted(links):
                self._forward(coord, link, packet)

    def _forward(self, coord, link, packet, reinjected=False):
        chip = self.machine.chips[coord]
        target = chip.links.get(link)
        if target is None:
            self.router_prov[coord].dead_link_lost += 1
            self.packets.dead_link_lost += 1
            self._trace(coord, "dead_link", packet.key)
            return True
        key = (coord, link)
        deps = self._links.get(key)
        if deps is None:
            deps = self._links[key] = deque(maxlen=self.config.router_queue_capacity)
        now = self.now
        if len(deps) == deps.maxlen and deps[0] > now:
            if reinjected:
                return False
            wait = deps[0] - now
            if wait > self.config.drop_wait:
                self._push(now + self.config.drop_wait, _DROP_PRIORITY, _DROP, coord, link, packet)
                return False
        depart = max(now, deps[-1] if deps else 0) + 1
        deps.append(depart)
        arrival = depart + self.config.hop_latency - 1
        port = link.opposite
        if self.machine.chips[target].is_virtual:
            self._push(arrival, 1 + int(port), _DEVICE, target, port, packet)
        else:
            self._push(arrival, 1 + int(port), _ARRIVE, target, port, packet)
        return True

    def _drop(self, coord, link, packet):
        prov = self.router_prov[coord]
        prov.dropped += 1
        self._trace(coord, "drop", packet.key)
        if self.config.reinjection and self._held.get(coord) is None:
            self._held[coord] = (packet, link)
            self._push(self.now + 1, _REINJECT_PRIORITY, _REINJECT, coord)
        else:
            prov.unrecoverable += 1
            self.packets.unrecoverable += 1
            self._trace(coord, "unrecoverable", packet.key)

    def reinject(self, coord) -> bool:
        """Try to resend the held packet on ``coord``; True if it went out."""
        coord = tuple(coord)
        held = self._held.get(coord)
        if held is None:
            return False
        packet, link = held
        if self._forward(coord, link, packet, reinjected=True):
            self._held[coord] = None
            self.router_prov[coord].reinjected += 1
            self._trace(coord, "reinject", packet.key)
            return True
        deps = self._links[(coord, link)]
        self._push(max(deps[0], self.now + 1), _REINJECT_PRIORITY, _REINJECT, coord)
        return False

    def _deliver(self, location, packet):
        state = self.cores.get(location)
        if state is None:
            self.packets.dead_link_lost += 1
            return
        self.packets.delivered_core += 1
        state.prov.received += 1
        self._trace(location[:2], "deliver", packet.key)
        if state.state != "running":
            return
        self._call(state, "packet", packet.key, packet.payload)

    def _device(self, coord, packet):
        self.packets.delivered_device += 1
        vid = self._devices_by_chip.get(coord)
        if vid is not None:
            self.device_log[vid].append((self.now, packet.key, packet.payload))
        self._trace(coord, "device", packet.key)

    def _timer(self, state: _CoreState):
        if state.state != "running":
            return
        state.prov.timer_events += 1
        step = self.now // self.config.timestep_ticks
        self._call(state, "timer", step)
        if state.state == "running":
            self._push(self.now + self.config.timestep_ticks, 0, _TIMER, state.order, state)

    def _call(self, state: _CoreState, handler: str, *args):
        try:
            getattr(state.behavior, handler)(state.ctx, *args)
        except Exception as exc:
            state.prov.log.append(f"ERROR: {handler} handler raised {exc!r}")
            state.prov.log.extend(
                "ERROR: " + line for line in traceback.format_exc().strip().splitlines()[-3:])
            state.state = "error"

    def _record(self, state: _CoreState, data: bytes) -> bool:
        region = state.region
        if region is None:
            state.prov.log.append("WARNING: record() without a recording region")
            return False
        space = region.capacity - region.write_ptr
        chunk = data[:space]
        if chunk:
            self.sdram[state.location[:2]].write(region.address + region.write_ptr, chunk)
            region.write_ptr += len(chunk)
        ok = len(chunk) == len(data)
        if not ok:
            region.overflowed = True
            state.prov.recording_overflow = True
        if (not region.alerted and region.capacity
                and region.write_ptr >= self.config.recording_alert_fraction * region.capacity):
            region.alerted = True
            for listener in self.recording_listeners:
                listener(self, state.vertex.id)
        return ok

    def _send_host(self, state: _CoreState, frame: bytes):
        tag = state.ip_tag
        if tag is None:
            state.ctx.error("no IP tag bound for host output")
            return
        self.host.deliver(tag.request.endpoint, self.now, frame)

    def _host_frames(self, state: _CoreState) -> List[bytes]:
        tag = state.reverse_tag
        if tag is None:
            return []
        return self.host.drain(tag.request.port, self.now // self.config.timestep_ticks)

    def _process(self, end_tick: int):
        queue = self._queue
        pop = heapq.heappop
        while queue and queue[0][0] < end_tick:
            tick, _, _, kind, a, b, c = pop(queue)
            self.now = tick
            if kind == _ARRIVE:
                self._arrive(a, b, c)
            elif kind == _DELIVER:
                self._deliver(a, c)
            elif kind == _TIMER:
                self._timer(b)
            elif kind == _DROP:
                self._drop(a, b, c)
            elif kind == _REINJECT:
                self.reinject(a)
            elif kind == _DEVICE:
                self._device(a, c)

    # -- running -------------------------------------------------------------

    def _ordered_cores(self) -> List[_CoreState]:
        return sorted(self.cores.values(), key=lambda s: s.order)

    def run(self, steps: int, hooks=None) -> ProvenanceReport:
        """Advance ``steps`` time steps, then pause every core."""
        if self.stopped:
            raise SptError("simulation has been stopped")
        if steps < 0:
            raise SptError("cannot run for a negative number of steps")
        if steps == 0:
            return self.provenance()
        period = self.config.timestep_ticks
        self.end_step = self.now // period + steps
        if not self.started:
            self.started = True
            if hooks is not None:
                hooks.notify("start")
            for state in self._ordered_cores():
                state.state = "running"
                self._call(state, "start")
                if state.state == "running":
                    self._push(self.now, 0, _TIMER, state.order, state)
        else:
            if hooks is not None:
                hooks.notify("resume")
            for state in self._ordered_cores():
                if state.state == "paused":
                    state.state = "running"
                    self._call(state, "resume")
                    if state.state == "running":
                        self._ensure_timer(state)
        end_tick = self.end_step * period
        self._process(end_tick)
        self.now = end_tick
        self._steps_run += steps
        for state in self._ordered_cores():
            if state.state == "running":
                self._call(state, "pause")
                if state.state == "running":
                    state.state = "paused"
        if hooks is not None:
            hooks.notify("pause")
        self._check_failures()
        return self.provenance()

    def _ensure_timer(self, state):
        for event in self._queue:
            if event[3] == _TIMER and event[5] is state:
                return
        self._push(self.now, 0, _TIMER, state.order, state)

    def _check_failures(self):
        failed = []
        for state in self._ordered_cores():
            if state.state == "error":
                failed.append(state.vertex.id)
            elif not getattr(state.behavior, "completed", lambda ctx: True)(state.ctx):
                state.prov.log.append(
                    f"WARNING: core not in a completion state at step {self.end_step}")
                failed.append(state.vertex.id)
        if failed:
            report = self.provenance()
            diagnostics = report.diagnostic_lines()
            for vertex, line in diagnostics:
                log.warning("%s: %s", vertex, line)
            raise RunFailedError(
                f"{len(failed)} core(s) failed: {', '.join(failed[:8])}",
                failed_cores=failed, diagnostics=diagnostics, provenance=report)

    def stop(self, hooks=None) -> ProvenanceReport:
        if not self.stopped:
            for state in self._ordered_cores():
                if state.state in ("running", "paused"):
                    self._call(state, "stop")
                    if state.state != "error":
                        state.state = "finished"
            self.stopped = True
            if hooks is not None:
                hooks.notify("stop")
        return self.provenance()

    def provenance(self) -> ProvenanceReport:
        in_flight = sum(1 for e in self._queue if e[3] in _IN_FLIGHT_KINDS)
        routers = []
        for coord in sorted(self.router_prov):
            prov = self.router_prov[coord]
            prov.pending_reinjection = int(self._held.get(coord) is not None)
            routers.append(prov)
        in_flight += sum(r.pending_reinjection for r in routers)
        packets = PacketAccounting(**{**self.packets.__dict__, "in_flight": in_flight})
        cores = []
        for state in self._ordered_cores():
            state.prov.state = state.state
            cores.append(state.prov)
        malformed = sum(c.counters.get("malformed_frames", 0) for c in cores)
        return ProvenanceReport(self._steps_run, routers, cores, packets, malformed)


def load(machine: Machine, mapping, images: Dict[str, object], graph,
         config: Optional[SimConfig] = None, recording: Optional[Dict[str, int]] = None,
         behaviors: Optional[Dict[str, type]] = None) -> Simulator:
    """Install tables, tags, images and behaviors; cores end up ready.

    ``recording`` maps vertex id to recording region capacity in bytes.
    Virtual chips receive nothing.
    """
    from .behaviors import make_behavior
    sim = Simulator(machine, config)
    sim.load_routing_tables(mapping.tables)
    sim.load_tags(mapping.tags)
    for p in mapping.placements:
        vertex = graph[p.vertex]
        if p.core is None or machine[p.chip].is_virtual:
            sim.add_core(vertex, p.x, p.y, None)
            continue
        sim.add_core(vertex, p.x, p.y, p.core, make_behavior(vertex, behaviors))
    for vid in sorted(images):
        image = images[vid]
        blob = image.to_bytes() if hasattr(image, "to_bytes") else bytes(image)
        sim.load_image(vid, blob)
    for vid, capacity in sorted((recording or {}).items()):
        r = graph[vid].resources
        sim.allocate_recording(vid, capacity, r.sdram_per_step, r.sdram_min_recording)
    sim.bind_tags()
    return sim
