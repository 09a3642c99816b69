"""Conway's Game of Life with one machine vertex per cell.

Each cell owns a two-key block: ``base`` means dead, ``base + 1`` alive.
At every timer tick a cell sends its current state; once it has heard the
current state of all eight neighbours it computes and records its next
state.  The grid wraps around as a torus.
"""

from __future__ import annotations

from collections import Counter, deque
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

from ..data.generation import MappingInfo, pack_params, register_generator
from ..data.regions import pack_words, unpack_words
from ..graph import Edge, MachineGraph, MachineVertex, Resources
from ..sim.behaviors import CoreBehavior, register_behavior

KIND = "conway-cell"
PARTITION = "state"
CELL_RESOURCES = Resources(dtcm=2048, sdram_fixed=128, sdram_per_step=1,
                           cpu_cycles_per_step=2000)
NEIGHBOUR_OFFSETS = [(dx, dy) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dx, dy) != (0, 0)]


def cell_id(x: int, y: int) -> str:
    return f"cell_{x}_{y}"


def life_step(grid: np.ndarray) -> np.ndarray:
    """One generation on a torus, computed directly on the whole grid."""
    grid = np.asarray(grid, dtype=np.uint8)
    n = sum(np.roll(np.roll(grid, dy, axis=0), dx, axis=1)
            for dx, dy in NEIGHBOUR_OFFSETS)
    return ((n == 3) | ((grid == 1) & (n == 2))).astype(np.uint8)


def life_oracle(grid: np.ndarray, steps: int) -> List[np.ndarray]:
    """The initial grid followed by ``steps`` generations."""
    out = [np.asarray(grid, dtype=np.uint8)]
    for _ in range(steps):
        out.append(life_step(out[-1]))
    return out


def parse_pattern(text: str) -> np.ndarray:
    """Rows of ``.`` (dead) and ``#`` (alive); row ``y`` is line ``y``."""
    rows = [line.strip() for line in text.splitlines() if line.strip()]
    if not rows:
        raise ValueError("empty pattern")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError("pattern rows differ in length")
    bad = set("".join(rows)) - {".", "#"}
    if bad:
        raise ValueError(f"unexpected pattern characters {sorted(bad)}")
    return np.array([[c == "#" for c in r] for r in rows], dtype=np.uint8)


def format_pattern(grid: np.ndarray) -> str:
    return "\n".join("".join("#" if v else "." for v in row) for row in grid) + "\n"


def load_pattern(path: Union[str, Path]) -> np.ndarray:
    return parse_pattern(Path(path).read_text())


def place_pattern(width: int, height: int, pattern: Optional[np.ndarray],
                  at=(0, 0)) -> np.ndarray:
    grid = np.zeros((height, width), dtype=np.uint8)
    if pattern is None:
        return grid
    pattern = np.asarray(pattern, dtype=np.uint8)
    ph, pw = pattern.shape
    x0, y0 = at
    if x0 + pw > width or y0 + ph > height:
        raise ValueError(f"{pw}x{ph} pattern does not fit a {width}x{height} grid at {at}")
    grid[y0:y0 + ph, x0:x0 + pw] = pattern
    return grid


def build_conway_graph(width: int, height: int,
                       initial: Optional[np.ndarray] = None) -> MachineGraph:
    """``width * height`` cells, each with an edge to each of its eight
    toroidal neighbours (repeated when the grid is narrower than 3)."""
    if width < 1 or height < 1:
        raise ValueError("grid dimensions must be at least 1")
    grid = place_pattern(width, height, initial)
    graph = MachineGraph(label=f"conway {width}x{height}")
    for y in range(height):
        for x in range(width):
            neighbours = [cell_id((x + dx) % width, (y + dy) % height)
                          for dx, dy in NEIGHBOUR_OFFSETS]
            graph.add_vertex(MachineVertex(
                cell_id(x, y), KIND, CELL_RESOURCES, n_keys=2,
                params={"alive": int(grid[y, x]), "x": x, "y": y,
                        "neighbours": neighbours}))
    for y in range(height):
        for x in range(width):
            for dx, dy in NEIGHBOUR_OFFSETS:
                target = cell_id((x + dx) % width, (y + dy) % height)
                graph.add_edge(Edge(cell_id(x, y), target, PARTITION))
    return graph


@register_generator(KIND)
def _cell_image(info: MappingInfo, vertex) -> List[bytes]:
    params = pack_params("II", int(vertex.params["alive"]), info.run_steps)
    keys = [info.base_key(vertex.id, PARTITION)]
    keys += [info.base_key(n, PARTITION) for n in vertex.params["neighbours"]]
    return [params, pack_words(keys)]


@register_behavior(KIND)
class ConwayCell(CoreBehavior):
    def start(self, ctx):
        params, keys = ctx.regions()
        alive, _ = unpack_words(params)
        words = unpack_words(keys)
        self.own = words[0]
        # A neighbour appearing k times in the 3x3 window counts k times but
        # sends one packet per step.
        self.weight = Counter(words[1:9])
        self.inbox = {base: deque() for base in self.weight}
        self.states = [alive]
        self.sent = 0
        self.due = 0

    def timer(self, ctx, step):
        self.due = step + 1
        if len(self.states) <= step:
            ctx.timer_overrun()
        self._send_due(ctx)

    def _send_due(self, ctx):
        while self.sent < self.due and self.sent < len(self.states):
            ctx.send(self.own + self.states[self.sent])
            self.sent += 1

    def packet(self, ctx, key, payload):
        queue = self.inbox.get(key & ~1)
        if queue is None:
            ctx.warning(f"unexpected key {key:#x}")
            return
        queue.append(key & 1)
        while all(self.inbox.values()):
            n = sum(w * self.inbox[base].popleft() for base, w in self.weight.items())
            alive = self.states[-1]
            new = int(n == 3 or (alive and n == 2))
            self.states.append(new)
            ctx.record(bytes([new]))
            self._send_due(ctx)

    def completed(self, ctx):
        return len(self.states) > ctx.end_step


def grids_from_recordings(width: int, height: int, initial: np.ndarray,
                          recordings, steps: int) -> List[np.ndarray]:
    """Stack the per-cell state bytes back into ``steps + 1`` grids."""
    frames = np.zeros((steps + 1, height, width), dtype=np.uint8)
    frames[0] = initial
    for y in range(height):
        for x in range(width):
            data = recordings[cell_id(x, y)]
            if len(data) != steps:
                raise ValueError(
                    f"{cell_id(x, y)} recorded {len(data)} states, expected {steps}")
            frames[1:, y, x] = np.frombuffer(data, dtype=np.uint8)
    return list(frames)


def run_conway(width: int, height: int, steps: int, machine="auto",
               initial: Optional[np.ndarray] = None, config=None,
               live_output: bool = False, session_out: Optional[list] = None,
               chunks: Optional[Sequence[int]] = None) -> List[np.ndarray]:
    """Simulate and return the initial grid plus one grid per step.

    ``chunks`` splits the run into several consecutive ``run`` calls.
    ``live_output`` adds a packet gatherer that receives every cell's state
    stream and forwards it to the host.  ``session_out``, if given, receives
    the session for inspection.
    """
    from ..session import Session
    from .live import add_live_output

    grid = place_pattern(width, height, initial)
    graph = build_conway_graph(width, height, grid)
    if live_output:
        add_live_output(graph, sorted(graph.vertices), PARTITION)
    session = Session(machine, config)
    session.set_graph(graph)
    for n in (list(chunks) if chunks else [steps]):
        session.run(n)
    if session_out is not None:
        session_out.append(session)
    return grids_from_recordings(width, height, grid, session.results.recordings,
                                 session.steps_run)
