"""The nine acceptance criteria, each at its stated scale and tolerance.

Every test records one PASS/FAIL line; the lines are repeated in the
pytest terminal summary under "acceptance criteria".
"""

from __future__ import annotations

import contextlib
import math
import random
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, bitwise_match, reference_route, walk_key
from spt.apps.conway import build_conway_graph, life_oracle, run_conway
from spt.data.extraction import LossyChannel, read_sdp_windowed, read_streamed
from spt.data.recording import Recorder, chunk_steps, cycle_length, plan_runs
from spt.errors import PipelineFailure, PlacementError, UnsatisfiablePlanError
from spt.graph import Edge, MachineGraph, MachineVertex, Resources
from spt.machine import (MAX_ROUTER_ENTRIES, DeadLink, LinkDirection, ReducedChip,
                         build_virtual_machine)
from spt.mapping import (KeyBlock, Placement, Placements, RoutingEntry, RoutingTable,
                         allocate_keys, compress_table, estimate_machine_size, lookup, place)
from spt.pipeline import ArtifactStore, execute, plan
from spt.session import Session, map_graph, standard_algorithms
from spt.sim.engine import SimConfig, Simulator

MB = 1_000_000


@contextlib.contextmanager
def criterion(number: int, title: str):
    started = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        line = f"[{number}] FAIL {title} ({type(exc).__name__}: {str(exc)[:120]})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        raise
    line = f"[{number}] PASS {title} ({time.perf_counter() - started:.1f} s)"
    ACCEPTANCE_LINES.append(line)
    print(line)


def _machine_for(cells: int, rng: random.Random):
    """A 1-4 chip machine with room for ``cells`` vertices."""
    need = math.ceil(cells / 17)
    shapes = {1: ["1x1", "2x1", "1x2", "2x2", "2x2:wrap", "3x1", "4x1"],
              2: ["2x1", "1x2", "2x2", "3x1", "4x1", "2x2:wrap"],
              3: ["2x2", "3x1", "4x1", "2x2:wrap"],
              4: ["2x2", "4x1", "1x4", "2x2:wrap"]}
    return rng.choice(shapes[need])


def test_1_conway_oracle_equivalence():
    with criterion(1, "Conway: 200 random grids (<=8x8, <=64 steps, 1-4 chips) equal the oracle"):
        rng = random.Random(2024)
        started = time.perf_counter()
        mismatches = []
        for trial in range(200):
            w, h = rng.randint(1, 8), rng.randint(1, 8)
            steps = rng.randint(1, 64)
            machine = _machine_for(w * h, rng)
            grid = np.array([[rng.random() < 0.4 for _ in range(w)] for _ in range(h)],
                            dtype=np.uint8)
            got = run_conway(w, h, steps, machine, grid)
            want = life_oracle(grid, steps)
            if len(got) != len(want) or any((a != b).any() for a, b in zip(got, want)):
                mismatches.append((trial, w, h, steps, machine))
        elapsed = time.perf_counter() - started
        assert not mismatches, mismatches[:5]
        assert elapsed < 60, f"took {elapsed:.1f} s"


def _random_faults(width, height, fraction, rng):
    machine = build_virtual_machine(width, height)
    links = sorted({tuple(sorted([c, t])) for c in machine.chips
                    for t in machine[c].links.values()})
    n_dead = rng.randint(0, int(fraction * len(links)))
    faults = []
    for a, b in rng.sample(links, n_dead):
        d = next(d for d, t in machine[a].links.items() if t == b)
        faults.append(DeadLink(a[0], a[1], d))
    return faults, n_dead / len(links)


def _connected(machine):
    start = next(iter(machine.chips))
    return len(machine.hop_distances(start)) == len(machine.real_chips())


def _random_machine_graph(rng, n):
    graph = MachineGraph()
    for i in range(n):
        graph.add_vertex(MachineVertex(
            f"v{i}", resources=Resources(sdram_fixed=rng.randint(0, 4 * MB)),
            n_keys=rng.choice([1, 1, 2, 3, 8, 17, 40])))
    for i in range(n):
        for p in range(rng.choice([0, 1, 1, 2])):
            for post in rng.sample(range(n), rng.randint(1, min(6, n))):
                graph.add_edge(Edge(f"v{i}", f"v{post}", f"p{p}"))
    return graph


def test_2_route_realization():
    with criterion(2, "Routes: 100 random graphs on faulty 8x8 machines deliver exactly to sinks"):
        rng = random.Random(7)
        problems = []
        max_len = 0
        walks = 0
        for trial in range(100):
            while True:
                faults, fraction = _random_faults(8, 8, 0.05, rng)
                machine = build_virtual_machine(8, 8, faults=faults)
                if _connected(machine):
                    break
            assert fraction <= 0.05
            graph = _random_machine_graph(rng, rng.randint(1, 200))
            store = map_graph(graph, machine)
            tables, keys, placements = store["Tables"], store["Keys"], store["Placements"]
            machine = store["Machine"]
            max_len = max([max_len] + [len(t) for t in tables.values()])
            for part in graph.partitions:
                source = placements[part.pre].chip
                want = {(placements[v].x, placements[v].y, placements[v].core)
                        for v in part.post_vertices}
                for key in keys.emitted_keys(part.id):
                    walks += 1
                    cores, devices, anomalies = walk_key(tables, machine, source, key)
                    if cores != want or devices or anomalies:
                        problems.append((trial, part.id, key, anomalies[:2]))
        assert not problems, problems[:5]
        assert max_len <= MAX_ROUTER_ENTRIES
        print(f"    {walks} key walks, longest table {max_len} entries")


def _random_table(rng):
    entries = []
    for _ in range(rng.randint(0, 12)):
        width = rng.choice([32, 31, 30, 28, 24, 16, 8, 0])
        mask = ((1 << width) - 1) << (32 - width) if width else 0
        # Occasionally a sparse, non-prefix mask.
        if rng.random() < 0.2:
            mask = rng.getrandbits(32)
        key = rng.getrandbits(32) & mask
        links = frozenset(d for d in LinkDirection if rng.random() < 0.3)
        cores = frozenset(c for c in range(1, 18) if rng.random() < 0.1)
        entries.append(RoutingEntry(key, mask, links, cores))
    return entries


def test_3_tcam_semantics():
    with criterion(3, "TCAM: earliest match, default forwarding, local drop on 10,000 tables"):
        rng = random.Random(99)
        machine = build_virtual_machine(1, 1)
        sim = Simulator(machine)
        disagreements = []
        counts = {"entry": 0, "default": 0, "drop": 0}
        for trial in range(10_000):
            entries = _random_table(rng)
            sim.load_routing_tables({(0, 0): RoutingTable((0, 0), entries)})
            for _ in range(3):
                if entries and rng.random() < 0.6:
                    base = rng.choice(entries)
                    key = (base.key | (rng.getrandbits(32) & ~base.mask)) & 0xFFFFFFFF
                else:
                    key = rng.getrandbits(32)
                arrival = rng.choice([None] + list(LinkDirection))
                want = reference_route(entries, key, arrival)
                got = sim.route_packet((0, 0), key, arrival)
                counts[want[2]] += 1
                if (frozenset(got.links), frozenset(got.cores), got.reason) != want:
                    disagreements.append((trial, key, arrival, got, want))
                hit = lookup(entries, key)
                first = next((e for e in entries if bitwise_match(e.key, e.mask, key)), None)
                if hit is not first:
                    disagreements.append((trial, key, "lookup"))
        assert not disagreements, disagreements[:5]
        assert min(counts.values()) > 100, counts
        print(f"    outcomes: {counts}")


def test_4_placement_feasibility():
    with criterion(4, "Placement: 10 x 20 MB needs >= 2 chips; random placements within budgets"):
        graph = MachineGraph()
        for i in range(10):
            graph.add_vertex(MachineVertex(f"big{i}", resources=Resources(sdram_fixed=20 * MB)))
        assert estimate_machine_size(graph) >= 2
        with pytest.raises(PlacementError) as err:
            place(graph, build_virtual_machine(1, 1))
        assert err.value.constraint == "sdram"
        placements = place(graph, build_virtual_machine(2, 2))
        per_chip = {}
        for p in placements:
            per_chip[p.chip] = per_chip.get(p.chip, 0) + 1
        assert len(per_chip) >= 2 and max(per_chip.values()) <= 6

        rng = random.Random(4)
        for trial in range(300):
            machine = build_virtual_machine(rng.randint(1, 4), rng.randint(1, 4))
            g = MachineGraph()
            for i in range(rng.randint(1, 17 * len(machine.chips))):
                g.add_vertex(MachineVertex(f"v{i}", resources=Resources(
                    sdram_fixed=rng.choice([0, 1, MB, 10 * MB, 40 * MB]))))
            try:
                placements = place(g, machine)
            except PlacementError:
                total = sum(v.resources.sdram_fixed for v in g.vertices.values())
                assert total > 0, "an SDRAM-free graph that fits the cores must place"
                continue
            cores, sdram = {}, {}
            for p in placements:
                assert p.core in machine[p.chip].application_cores
                cores.setdefault(p.chip, set()).add(p.core)
                sdram[p.chip] = sdram.get(p.chip, 0) + g[p.vertex].resources.sdram_fixed
            assert len(placements) == len(g)
            assert sum(len(c) for c in cores.values()) == len(g)
            for chip in cores:
                assert len(cores[chip]) <= 17
                assert sdram[chip] <= machine[chip].sdram


def _recording_graph():
    graph = MachineGraph()
    graph.add_vertex(MachineVertex("a", resources=Resources(sdram_fixed=4096,
                                                            sdram_per_step=100)))
    graph.add_vertex(MachineVertex("b", resources=Resources(sdram_fixed=4096,
                                                            sdram_per_step=200)))
    return graph


def test_5_run_splitting():
    with criterion(5, "Run splitting: [2621, 2621, 2621, 2137]; 50 chunked Conway runs identical"):
        mib = 1 << 20
        cycle = cycle_length({"chip": mib},
                             {"chip": [Recorder("a", 100), Recorder("b", 200)]})
        assert chunk_steps(10_000, cycle) == [2621, 2621, 2621, 2137]
        # The same arithmetic through real placements on a chip left with 1 MiB.
        graph = _recording_graph()
        machine = build_virtual_machine(1, 1, faults=[ReducedChip(0, 0, sdram=mib + 8192)])
        run_plan = plan_runs(place(graph, machine), graph, machine, 10_000)
        assert run_plan.chunks == [2621, 2621, 2621, 2137]

        rng = random.Random(5)
        chunked_runs = 0
        for trial in range(50):
            w, h = rng.randint(2, 6), rng.randint(2, 6)
            steps = rng.randint(10, 64)
            grid = (np.array([[rng.random() < 0.4 for _ in range(w)] for _ in range(h)])
                    .astype(np.uint8))
            per_cell = rng.randint(2, 9)
            # The fullest chip can buffer only ``per_cell`` states per cell.
            fullest = min(17, w * h)
            small = build_virtual_machine(2, 2, sdram=fullest * (128 + per_cell))
            chunked, unchunked = [], []
            run_conway(w, h, steps, small, grid, session_out=chunked)
            run_conway(w, h, steps, "2x2", grid, session_out=unchunked)
            a, b = chunked[0].results, unchunked[0].results
            assert len(b.plan.chunks) == 1
            if len(a.plan.chunks) > 1:
                chunked_runs += 1
            assert a.recordings == b.recordings, f"trial {trial}"
        assert chunked_runs == 50


def test_6_extraction():
    with criterion(6, "Extraction: 1 MiB exact at p in {0, 0.01, 0.1}; streamed beats windowed"):
        started = time.perf_counter()
        length = 1 << 20
        sim = Simulator(build_virtual_machine(1, 1))
        address = sim.sdram[(0, 0)].alloc(length)
        payload = random.Random(6).randbytes(length)
        sim.write_memory((0, 0), address, payload)
        for p in (0.0, 0.01, 0.1):
            windowed, wstats = read_sdp_windowed(sim, (0, 0), address, length,
                                                 LossyChannel(p, seed=61))
            streamed, session = read_streamed(sim, (0, 0), address, length,
                                              LossyChannel(p, seed=62), machine=sim.machine)
            assert windowed == payload and streamed == payload
            if p == 0.0:
                assert wstats.round_trips == math.ceil(length / 256)
                assert session.requests == 1 and session.rounds == 0
            assert session.requests < wstats.round_trips
            print(f"    p={p}: windowed {wstats.round_trips} round trips "
                  f"({wstats.retries} retries); streamed {session.requests} requests, "
                  f"{session.rounds} rounds, {session.frames} frames")
        assert time.perf_counter() - started < 30


def _congestion(burst: int, reinjection: bool = True):
    """One chip sends ``burst`` packets at once over a single link."""
    graph = MachineGraph()
    graph.add_vertex(MachineVertex("src", "scripted-source", chip_constraint=(0, 0),
                                   n_keys=burst, params={"script": {}},
                                   resources=Resources(sdram_fixed=4096)))
    graph.add_vertex(MachineVertex("sink", "key-logger", chip_constraint=(1, 0),
                                   resources=Resources(sdram_fixed=4096)))
    graph.add_edge(Edge("src", "sink"))
    session = Session("2x1", SimConfig(router_queue_capacity=4, drop_wait=2,
                                       reinjection=reinjection))
    session.set_graph(graph)
    store = map_graph(graph, "2x1")
    base = store["Keys"][("src", "data")].base
    graph["src"].params["script"] = {0: [base + i for i in range(burst)]}
    session.run(3)
    sim = session.simulator
    logger = sim.cores[sim.vertex_location["sink"]].behavior
    return session.results.provenance, logger


def test_7_reinjection_accounting():
    with criterion(7, "Re-injection: dropped = reinjected + unrecoverable; conservation holds"):
        # Seven packets: exactly one drop, caught and re-sent.
        report, logger = _congestion(7)
        assert (report.dropped, report.reinjected, report.unrecoverable) == (1, 1, 0)
        assert len(logger.received) == 7
        # Eight packets: two drops overlap; the register holds only one.
        report, logger = _congestion(8)
        assert (report.dropped, report.reinjected, report.unrecoverable) == (2, 1, 1)
        assert len(logger.received) == 7
        # Heavy burst, and the same with re-injection switched off.
        for burst, reinjection in ((40, True), (40, False), (12, True)):
            report, logger = _congestion(burst, reinjection)
            assert report.pending_reinjection == 0
            assert report.dropped == report.reinjected + report.unrecoverable
            assert report.unrecoverable <= report.dropped
            assert report.packets.balanced(), report.packets
            assert len(logger.received) == burst - report.unrecoverable
            if not reinjection:
                assert report.reinjected == 0 and report.unrecoverable == report.dropped


def test_8_planner():
    with criterion(8, "Planner: standard order, missing producers, token-gated loading"):
        algorithms = standard_algorithms()
        have = ["MachineSpec", "ApplicationGraph", "RunTime", "SimConfig"]
        order = plan(algorithms, have, (), ["SimResults"])
        names = [a.name for a in order]
        stages = ["machine_discovery", "graph_splitter", "placer", "router", "key_allocator",
                  "table_compressor", "data_generator", "data_loader", "runner"]
        positions = [names.index(s) for s in stages]
        assert positions == sorted(positions), names
        for loader in ("application_loader", "table_loader", "data_loader"):
            assert names.index("table_generator") < names.index(loader) < names.index("runner")
        for alg in order:
            reduced = [a for a in algorithms if a is not alg]
            with pytest.raises(UnsatisfiablePlanError):
                plan(reduced, have, (), ["SimResults"])
        # Running the runner before the loaders grant their tokens fails.
        store = ArtifactStore({"MachineSpec": "2x2", "MachineGraph": build_conway_graph(3, 3),
                               "RunTime": 5})
        early = [a for a in plan(algorithms, store.names(), (), ["SimResults"])]
        bad = [a for a in early if a.name != "data_loader"]
        with pytest.raises(PipelineFailure) as err:
            execute(bad, store)
        assert err.value.algorithm == "runner"
        # The full flow leaves every product in the store.
        store = ArtifactStore({"MachineSpec": "2x2", "MachineGraph": build_conway_graph(3, 3),
                               "RunTime": 5})
        execute(plan(algorithms, store.names(), (), ["SimResults"]), store)
        for name in ("Machine", "MachineGraph", "Placements", "Tables", "Keys", "Tags",
                     "SimResults"):
            assert name in store


class _Part:
    def __init__(self, pre):
        self.pre = pre
        self.id = (pre, "data")


def test_9_key_disjointness_and_compression():
    with criterion(9, "Keys: 1,000 random sets disjoint; compression preserves every emitted key"):
        rng = random.Random(9)
        merged_total = 0
        for trial in range(1000):
            n = rng.randint(1, 60)
            counts = {f"v{i}": rng.choice([1, 1, 2, 3, 5, 8, 100, 1000, 5000])
                      for i in range(n)}
            parts = [_Part(f"v{i}") for i in range(n)]
            keys = allocate_keys(parts, counts)
            blocks = [(pid, keys[pid]) for pid in keys]
            for pid, block in blocks:
                assert block.size >= counts[pid[0]]
                assert block.base % block.size == 0
            for i, (pa, a) in enumerate(blocks):
                for pb, b in blocks[i + 1:]:
                    # Two cubes share a key iff their keys agree on the common mask bits.
                    assert (a.base ^ b.base) & a.mask & b.mask != 0, (pa, pb)

            routes = [(frozenset({LinkDirection.EAST}), frozenset()),
                      (frozenset(), frozenset({1})),
                      (frozenset({LinkDirection.NORTH}), frozenset({2, 3}))]
            entries = []
            for pid, block in blocks:
                links, cores = rng.choice(routes)
                entries.append(RoutingEntry(block.base, block.mask, links, cores))
            entries.sort(key=lambda e: (e.key, e.mask))
            table = RoutingTable((0, 0), entries)
            small = compress_table(table)
            assert len(small) <= len(table)
            merged_total += len(table) - len(small)
            for pid, block in blocks:
                for key in list(keys.emitted_keys(pid))[:64] + [block.base + counts[pid[0]] - 1]:
                    for arrival in (None, LinkDirection.WEST):
                        assert (reference_route(table.entries, key, arrival)
                                == reference_route(small.entries, key, arrival)), (trial, key)
            # Keys outside every block keep default routing.
            top = max(b.base + b.size for _, b in blocks)
            for key in (top, top + 1, 0xFFFFFFFF):
                if key < 1 << 32:
                    assert (reference_route(table.entries, key, LinkDirection.WEST)
                            == reference_route(small.entries, key, LinkDirection.WEST))
        assert merged_total > 0
        print(f"    compression removed {merged_total} entries across 1,000 tables")
