"""Model of a many-core machine: a hexagonally linked grid of chips.

Chips carry cores, SDRAM, a router with a fixed entry budget and up to six
links.  Machines are built virtually (for testing or simulation) from a size,
a preset name or a JSON description, optionally with faults removed.  Devices
hanging off a board link are modelled as *virtual chips* that sit outside the
physical grid and are reachable through exactly one real chip.
"""

from __future__ import annotations

import enum
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

from .errors import InvalidFaultError, LinkOccupiedError, SptError

Coord = Tuple[int, int]

MAX_CORES = 18
MAX_ROUTER_ENTRIES = 1024
SDRAM_PER_CHIP = 128 * 1024 * 1024
DTCM_PER_CORE = 64 * 1024
ITCM_PER_CORE = 32 * 1024
# 200 MHz core, 1 ms default time step.
CPU_CYCLES_PER_STEP = 200_000
MAX_TAGS_PER_ETHERNET = 8
ETHERNET_TILE = 8


class LinkDirection(enum.IntEnum):
    EAST = 0
    NORTH_EAST = 1
    NORTH = 2
    WEST = 3
    SOUTH_WEST = 4
    SOUTH = 5

    @property
    def opposite(self) -> "LinkDirection":
        return LinkDirection((self + 3) % 6)

    @property
    def offset(self) -> Coord:
        return _OFFSETS[self]

    @classmethod
    def parse(cls, value) -> "LinkDirection":
        """Accept an int, a member, a name (``"north_east"``) or an
        abbreviation (``"NE"``)."""
        if isinstance(value, LinkDirection):
            return value
        if isinstance(value, int):
            return cls(value)
        text = str(value).strip().upper().replace("-", "_")
        if text in _ABBREVIATIONS:
            return _ABBREVIATIONS[text]
        return cls[text]

    @property
    def short(self) -> str:
        return _SHORT[self]


_OFFSETS = {
    LinkDirection.EAST: (1, 0),
    LinkDirection.NORTH_EAST: (1, 1),
    LinkDirection.NORTH: (0, 1),
    LinkDirection.WEST: (-1, 0),
    LinkDirection.SOUTH_WEST: (-1, -1),
    LinkDirection.SOUTH: (0, -1),
}
_SHORT = {
    LinkDirection.EAST: "E",
    LinkDirection.NORTH_EAST: "NE",
    LinkDirection.NORTH: "N",
    LinkDirection.WEST: "W",
    LinkDirection.SOUTH_WEST: "SW",
    LinkDirection.SOUTH: "S",
}
_ABBREVIATIONS = {v: k for k, v in _SHORT.items()}


@dataclass
class Chip:
    x: int
    y: int
    cores: Tuple[int, ...] = tuple(range(MAX_CORES))
    sdram: int = SDRAM_PER_CHIP
    router_entries: int = MAX_ROUTER_ENTRIES
    links: Dict[LinkDirection, Coord] = field(default_factory=dict)
    is_ethernet: bool = False
    is_virtual: bool = False

    def __post_init__(self):
        if len(self.cores) > MAX_CORES:
            raise SptError(f"chip ({self.x}, {self.y}) has more than {MAX_CORES} cores")
        if self.router_entries > MAX_ROUTER_ENTRIES:
            raise SptError(
                f"chip ({self.x}, {self.y}) has more than {MAX_ROUTER_ENTRIES} router entries")

    @property
    def coord(self) -> Coord:
        return (self.x, self.y)

    @property
    def n_cores(self) -> int:
        return len(self.cores)

    @property
    def monitor_core(self) -> Optional[int]:
        return self.cores[0] if self.cores else None

    @property
    def application_cores(self) -> Tuple[int, ...]:
        """Cores usable by application vertices (monitor excluded)."""
        if self.is_virtual:
            return ()
        return self.cores[1:]


@dataclass(frozen=True)
class DeadChip:
    x: int
    y: int


@dataclass(frozen=True)
class DeadCore:
    x: int
    y: int
    core: int


@dataclass(frozen=True)
class DeadLink:
    """Removes the link in both directions."""
    x: int
    y: int
    direction: LinkDirection


@dataclass(frozen=True)
class ReducedChip:
    """Lowers a chip's SDRAM and/or router entry budget."""
    x: int
    y: int
    sdram: Optional[int] = None
    router_entries: Optional[int] = None


class Machine:
    """A collection of chips with link topology.

    Physical chips live in ``[0, width) x [0, height)``; virtual chips are
    allocated outside that rectangle.
    """

    def __init__(self, width: int, height: int, chips: Dict[Coord, Chip], wrap: bool = False):
        self.width = width
        self.height = height
        self.wrap = wrap
        self.chips = chips

    # -- basic queries -------------------------------------------------

    def __contains__(self, coord) -> bool:
        return tuple(coord) in self.chips

    def __getitem__(self, coord) -> Chip:
        return self.chips[tuple(coord)]

    def __iter__(self) -> Iterator[Chip]:
        for coord in sorted(self.chips):
            yield self.chips[coord]

    def __len__(self) -> int:
        return len(self.chips)

    def __repr__(self):
        return (f"Machine({self.width}x{self.height}, wrap={self.wrap}, "
                f"chips={len(self.real_chips())}, virtual={len(self.virtual_chips())})")

    def in_bounds(self, coord) -> bool:
        x, y = coord
        return 0 <= x < self.width and 0 <= y < self.height

    def real_chips(self) -> List[Chip]:
        return [c for c in self if not c.is_virtual]

    def virtual_chips(self) -> List[Chip]:
        return [c for c in self if c.is_virtual]

    @property
    def ethernet_chips(self) -> List[Coord]:
        return [c.coord for c in self if c.is_ethernet]

    @property
    def n_application_cores(self) -> int:
        return sum(len(c.application_cores) for c in self.real_chips())

    @property
    def max_sdram_per_chip(self) -> int:
        return max((c.sdram for c in self.real_chips()), default=0)

    def neighbor(self, coord, direction) -> Optional[Coord]:
        """Chip reached over ``direction``; ``None`` if the link is absent."""
        chip = self.chips.get(tuple(coord))
        if chip is None:
            return None
        return chip.links.get(LinkDirection.parse(direction))

    def hop_distances(self, source: Coord, through_virtual: bool = False) -> Dict[Coord, int]:
        """Breadth-first hop counts from ``source`` over live links."""
        dist = {tuple(source): 0}
        queue = deque([tuple(source)])
        while queue:
            here = queue.popleft()
            chip = self.chips[here]
            if chip.is_virtual and here != tuple(source) and not through_virtual:
                continue
            for direction in LinkDirection:
                there = chip.links.get(direction)
                if there is not None and there not in dist:
                    dist[there] = dist[here] + 1
                    queue.append(there)
        return dist

    def nearest_ethernet(self, coord) -> Optional[Coord]:
        dist = self.hop_distances(coord)
        candidates = [(dist[e], e) for e in self.ethernet_chips if e in dist]
        return min(candidates)[1] if candidates else None

    # -- virtual chips -------------------------------------------------

    def insert_virtual_chip(self, anchor, anchor_link) -> Coord:
        """Attach a device chip to ``anchor`` over the unconnected
        ``anchor_link`` and return its (out-of-bounds) coordinates."""
        anchor = tuple(anchor)
        anchor_link = LinkDirection.parse(anchor_link)
        if anchor not in self.chips or self.chips[anchor].is_virtual:
            raise SptError(f"anchor chip {anchor} does not exist")
        anchor_chip = self.chips[anchor]
        if anchor_link in anchor_chip.links:
            raise LinkOccupiedError(
                f"link {anchor_link.name} of chip {anchor} is already connected "
                f"to {anchor_chip.links[anchor_link]}")
        dx, dy = anchor_link.offset
        coord = (anchor[0] + dx, anchor[1] + dy)
        if self.in_bounds(coord) or coord in self.chips or min(coord) < 0:
            coord = self._free_virtual_coord()
        self.chips[coord] = Chip(
            coord[0], coord[1], cores=(), sdram=0, router_entries=0,
            links={anchor_link.opposite: anchor}, is_virtual=True)
        anchor_chip.links[anchor_link] = coord
        return coord

    def _free_virtual_coord(self) -> Coord:
        x = self.width
        while True:
            for y in range(max(self.height, 1)):
                if (x, y) not in self.chips:
                    return (x, y)
            x += 1

    def virtual_anchor(self, coord) -> Tuple[Coord, LinkDirection]:
        """The real chip (and its link) a virtual chip hangs off."""
        chip = self.chips[tuple(coord)]
        (direction, anchor), = chip.links.items()
        return anchor, direction.opposite

    def copy(self) -> "Machine":
        chips = {
            coord: Chip(c.x, c.y, c.cores, c.sdram, c.router_entries, dict(c.links),
                        c.is_ethernet, c.is_virtual)
            for coord, c in self.chips.items()
        }
        return Machine(self.width, self.height, chips, self.wrap)

    # -- serialisation ---------------------------------------------------

    def to_json(self) -> dict:
        chips = []
        for chip in self.real_chips():
            present = set(chip.links)
            expected = {d for d in LinkDirection if self._grid_target(chip.coord, d) is not None}
            entry = {"x": chip.x, "y": chip.y, "cores": chip.n_cores,
                     "sdram": chip.sdram, "entries": chip.router_entries,
                     "dead_links": sorted(d.short for d in expected - present),
                     "ethernet": chip.is_ethernet}
            chips.append(entry)
        return {"width": self.width, "height": self.height, "wrap": self.wrap, "chips": chips}

    def _grid_target(self, coord, direction) -> Optional[Coord]:
        return _grid_target(self.width, self.height, self.wrap, coord, direction)


def _grid_target(width, height, wrap, coord, direction) -> Optional[Coord]:
    dx, dy = direction.offset
    x, y = coord[0] + dx, coord[1] + dy
    if wrap:
        return (x % width, y % height)
    if 0 <= x < width and 0 <= y < height:
        return (x, y)
    return None


def build_virtual_machine(width: int, height: int, wrap: bool = False,
                          faults: Iterable = (), sdram: int = SDRAM_PER_CHIP,
                          n_cores: int = MAX_CORES,
                          router_entries: int = MAX_ROUTER_ENTRIES,
                          present: Optional[Iterable[Coord]] = None) -> Machine:
    """Build a rectangular (optionally toroidal) machine.

    ``faults`` may contain :class:`DeadChip`, :class:`DeadCore`,
    :class:`DeadLink` and :class:`ReducedChip` entries.  ``present`` limits
    the grid to a subset of coordinates (used by board-shaped presets).
    """
    if width < 1 or height < 1:
        raise SptError("machine dimensions must be at least 1x1")
    coords = [(x, y) for x in range(width) for y in range(height)]
    if present is not None:
        keep = {tuple(c) for c in present}
        coords = [c for c in coords if c in keep]
    faults = list(faults)

    def check(x, y):
        if not (0 <= x < width and 0 <= y < height):
            raise InvalidFaultError(f"fault at ({x}, {y}) is outside a {width}x{height} machine")

    dead_chips = set()
    for f in faults:
        check(f.x, f.y)
        if isinstance(f, DeadChip):
            dead_chips.add((f.x, f.y))
    chips = {
        c: Chip(c[0], c[1], cores=tuple(range(n_cores)), sdram=sdram,
                router_entries=router_entries)
        for c in coords if c not in dead_chips
    }
    for coord, chip in chips.items():
        for d in LinkDirection:
            target = _grid_target(width, height, wrap, coord, d)
            if target is not None and target in chips:
                chip.links[d] = target

    for f in faults:
        if isinstance(f, DeadChip):
            continue
        chip = chips.get((f.x, f.y))
        if chip is None:
            raise InvalidFaultError(f"fault refers to missing chip ({f.x}, {f.y})")
        if isinstance(f, DeadCore):
            if f.core not in chip.cores:
                raise InvalidFaultError(f"chip ({f.x}, {f.y}) has no core {f.core}")
            chip.cores = tuple(c for c in chip.cores if c != f.core)
        elif isinstance(f, DeadLink):
            d = LinkDirection.parse(f.direction)
            target = chip.links.pop(d, None)
            if target is not None and target in chips:
                back = chips[target].links
                if back.get(d.opposite) == chip.coord:
                    del back[d.opposite]
        elif isinstance(f, ReducedChip):
            if f.sdram is not None:
                chip.sdram = min(chip.sdram, f.sdram)
            if f.router_entries is not None:
                chip.router_entries = min(chip.router_entries, f.router_entries)
        else:
            raise InvalidFaultError(f"unknown fault {f!r}")

    for tx in range(0, width, ETHERNET_TILE):
        for ty in range(0, height, ETHERNET_TILE):
            tile = sorted(
                (c for c in chips
                 if tx <= c[0] < tx + ETHERNET_TILE and ty <= c[1] < ty + ETHERNET_TILE),
                key=lambda c: (c[1], c[0]))
            if tile:
                chips[tile[0]].is_ethernet = True
    return Machine(width, height, chips, wrap)


# A 48-chip board occupies a hexagon inside an 8x8 grid: rows at the bottom
# start at x=0, rows at the top end at x=7.
_SPINN5_ROWS = {0: (0, 4), 1: (0, 5), 2: (0, 6), 3: (0, 7),
                4: (1, 7), 5: (2, 7), 6: (3, 7), 7: (4, 7)}
SPINN5_CHIPS = [(x, y) for y, (lo, hi) in _SPINN5_ROWS.items() for x in range(lo, hi + 1)]

PRESETS = {
    "spinn3": lambda: build_virtual_machine(2, 2),
    "spinn5": lambda: build_virtual_machine(8, 8, present=SPINN5_CHIPS),
}


def machine_from_json(data: dict) -> Machine:
    """Build from ``{width, height, wrap, chips: [...]}``; chips not listed
    are fully healthy, chips listed with ``"dead": true`` are removed."""
    width, height = int(data["width"]), int(data["height"])
    wrap = bool(data.get("wrap", False))
    faults = []
    ethernet_override = {}
    for entry in data.get("chips", ()):
        x, y = int(entry["x"]), int(entry["y"])
        if entry.get("dead"):
            faults.append(DeadChip(x, y))
            continue
        if "sdram" in entry or "entries" in entry:
            faults.append(ReducedChip(x, y, entry.get("sdram"), entry.get("entries")))
        for d in entry.get("dead_links", ()):
            faults.append(DeadLink(x, y, LinkDirection.parse(d)))
        if "cores" in entry:
            n = int(entry["cores"])
            faults.extend(DeadCore(x, y, c) for c in range(n, MAX_CORES))
        if "ethernet" in entry:
            ethernet_override[(x, y)] = bool(entry["ethernet"])
    machine = build_virtual_machine(width, height, wrap, faults)
    if ethernet_override:
        for coord, flag in ethernet_override.items():
            machine[coord].is_ethernet = flag
    return machine


def parse_machine_spec(spec) -> Machine:
    """Resolve ``"WxH"``, ``"WxH:wrap"``, a preset name or a JSON file path."""
    if isinstance(spec, Machine):
        return spec
    text = str(spec).strip()
    if text.lower() in PRESETS:
        return PRESETS[text.lower()]()
    if text.endswith(".json") or Path(text).is_file():
        return machine_from_json(json.loads(Path(text).read_text()))
    wrap = False
    if ":" in text:
        text, _, suffix = text.partition(":")
        if suffix.lower() not in ("wrap", "torus"):
            raise SptError(f"unknown machine option {suffix!r}")
        wrap = True
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise SptError(f"cannot parse machine spec {spec!r}") from None
    return build_virtual_machine(w, h, wrap)
