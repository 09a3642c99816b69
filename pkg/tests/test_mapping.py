import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import reference_route, walk_key
from spt.errors import (DatabaseNotReadyError, PlacementError, RoutingError,
                        TableOverflowError, TagAllocationError,
                        UnsatisfiableVertexError)
from spt.graph import (Edge, IPTagRequest, MachineGraph, MachineVertex, Resources,
                       ReverseIPTagRequest, VirtualVertex)
from spt.machine import DeadLink, LinkDirection, ReducedChip, build_virtual_machine
from spt.mapping import (KeyBlock, MappingDatabase, MappingResult, Placement, Placements,
                         RoutingEntry, RoutingTable, allocate_graph_keys, allocate_keys,
                         allocate_tags, build_routing_tables, check_table_sizes,
                         compress_table, estimate_machine_size, lookup, place, route,
                         write_mapping_database)
from spt.session import map_graph

MB = 1_000_000
E, NE, N, W, SW, S = LinkDirection


def tiny_graph(n, sdram=0):
    g = MachineGraph()
    for i in range(n):
        g.add_vertex(MachineVertex(f"v{i}", resources=Resources(sdram_fixed=sdram)))
    return g


# -- placement -------------------------------------------------------------------

def test_machine_size_estimates():
    big = tiny_graph(10, 20 * MB)
    assert estimate_machine_size(big) >= 2
    assert estimate_machine_size(tiny_graph(17)) == 1
    assert estimate_machine_size(tiny_graph(35)) == math.ceil(35 / 17)
    with pytest.raises(UnsatisfiableVertexError):
        estimate_machine_size(tiny_graph(1, 200 * MB))


def test_two_vertices_one_chip():
    placements = place(tiny_graph(2), build_virtual_machine(1, 1))
    a, b = placements["v0"], placements["v1"]
    assert a.chip == b.chip == (0, 0)
    assert a.core != b.core and 0 not in (a.core, b.core)


def test_twenty_megabyte_vertices():
    with pytest.raises(PlacementError) as err:
        place(tiny_graph(10, 20 * MB), build_virtual_machine(1, 1))
    assert err.value.constraint == "sdram"
    placements = place(tiny_graph(10, 20 * MB), build_virtual_machine(2, 2))
    counts = {}
    for p in placements:
        counts[p.chip] = counts.get(p.chip, 0) + 1
    assert max(counts.values()) <= 6 and len(counts) >= 2


def test_core_exhaustion_names_cores():
    with pytest.raises(PlacementError) as err:
        place(tiny_graph(18), build_virtual_machine(1, 1))
    assert err.value.constraint == "cores"


def test_chip_constraint():
    g = tiny_graph(3)
    g.add_vertex(MachineVertex("pinned", chip_constraint=(1, 1)))
    assert place(g, build_virtual_machine(2, 2))["pinned"].chip == (1, 1)


def test_device_goes_on_virtual_chip():
    m = build_virtual_machine(2, 2)
    dev_chip = m.insert_virtual_chip((1, 0), E)
    g = tiny_graph(2)
    g.add_vertex(VirtualVertex("dev", (1, 0), E))
    placements = place(g, m)
    assert placements["dev"].chip == dev_chip and placements["dev"].core is None
    assert all(m[p.chip].is_virtual is (p.vertex == "dev") for p in placements)
    with pytest.raises(PlacementError):
        place(g, build_virtual_machine(2, 2))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3),
       st.lists(st.sampled_from([0, 1, MB, 10 * MB, 30 * MB, 60 * MB]), min_size=1,
                max_size=60))
def test_placement_feasibility(w, h, sizes):
    m = build_virtual_machine(w, h)
    g = MachineGraph()
    for i, s in enumerate(sizes):
        g.add_vertex(MachineVertex(f"v{i}", resources=Resources(sdram_fixed=s)))
    try:
        placements = place(g, m)
    except PlacementError:
        assert len(sizes) > m.n_application_cores or sum(sizes) > m[(0, 0)].sdram
        return
    used, sdram = set(), {}
    for p in placements:
        assert p.core in m[p.chip].application_cores
        assert (p.chip, p.core) not in used
        used.add((p.chip, p.core))
        sdram[p.chip] = sdram.get(p.chip, 0) + g[p.vertex].resources.sdram_fixed
    assert len(used) == len(sizes)
    assert all(sdram[c] <= m[c].sdram for c in sdram)


# -- routing -----------------------------------------------------------------------

def two_vertex_setup(machine, pre_chip, post_chip):
    g = MachineGraph()
    g.add_vertex(MachineVertex("a", chip_constraint=pre_chip))
    g.add_vertex(MachineVertex("b", chip_constraint=post_chip))
    g.add_edge(Edge("a", "b"))
    placements = place(g, machine)
    return g, placements, route(placements, g, machine)


def test_route_on_one_chip():
    m = build_virtual_machine(1, 1)
    _, placements, (tree,) = two_vertex_setup(m, (0, 0), (0, 0))
    assert tree.chips() == [(0, 0)]
    assert tree.nodes[(0, 0)].out_links == set()
    assert tree.nodes[(0, 0)].cores == {placements["b"].core}


def test_route_straight_line_east():
    m = build_virtual_machine(3, 1)
    g, placements, trees = two_vertex_setup(m, (0, 0), (2, 0))
    tree = trees[0]
    assert tree.nodes[(0, 0)].out_links == {E}
    assert tree.nodes[(1, 0)].out_links == {E} and tree.nodes[(1, 0)].in_link == W
    # The middle chip is a pass-through and gets no entry.
    tables = build_routing_tables(trees, allocate_graph_keys(g), m)
    assert sorted(tables) == [(0, 0), (2, 0)]
    assert tables[(2, 0)].entries[0].links == frozenset()
    assert tables[(2, 0)].entries[0].cores == {placements["b"].core}
    without = build_routing_tables(trees, allocate_graph_keys(g), m, default_route_elision=False)
    assert (1, 0) in without


def test_branching_entry_has_both_links():
    m = build_virtual_machine(2, 2)
    g = MachineGraph()
    g.add_vertex(MachineVertex("a", chip_constraint=(0, 0)))
    g.add_vertex(MachineVertex("b", chip_constraint=(1, 0)))
    g.add_vertex(MachineVertex("c", chip_constraint=(1, 1)))
    g.add_edges([Edge("a", "b"), Edge("a", "c")])
    placements = place(g, m)
    trees = route(placements, g, m)
    tables = build_routing_tables(trees, allocate_graph_keys(g), m)
    assert tables[(0, 0)].entries[0].links == {E, NE}


def test_route_into_device_ends_on_anchor_link():
    m = build_virtual_machine(2, 1)
    dev_chip = m.insert_virtual_chip((1, 0), E)
    g = MachineGraph()
    g.add_vertex(MachineVertex("a", chip_constraint=(0, 0)))
    g.add_vertex(VirtualVertex("dev", (1, 0), E))
    g.add_edge(Edge("a", "dev"))
    placements = place(g, m)
    (tree,) = route(placements, g, m)
    assert tree.nodes[dev_chip].to_device
    assert tree.nodes[dev_chip].in_link == W
    tables = build_routing_tables([tree], allocate_graph_keys(g), m)
    assert dev_chip not in tables
    cores, devices, anomalies = walk_key(tables, m, (0, 0), 0)
    assert devices == {dev_chip} and not cores and not anomalies


def test_unreachable_sink():
    m = build_virtual_machine(2, 1, faults=[DeadLink(0, 0, E)])
    with pytest.raises(RoutingError) as err:
        two_vertex_setup(m, (0, 0), (1, 0))
    assert err.value.sink == "b"


def test_routes_avoid_dead_links():
    m = build_virtual_machine(3, 3, faults=[DeadLink(0, 0, E), DeadLink(0, 0, NE)])
    g, placements, trees = two_vertex_setup(m, (0, 0), (2, 0))
    for coord, node in trees[0].nodes.items():
        for d in node.out_links:
            assert d in m[coord].links
    tables = build_routing_tables(trees, allocate_graph_keys(g), m)
    cores, _, anomalies = walk_key(tables, m, (0, 0), 0)
    assert cores == {(2, 0, placements["b"].core)} and not anomalies


def test_routing_is_deterministic():
    g = MachineGraph()
    for i in range(30):
        g.add_vertex(MachineVertex(f"v{i}", resources=Resources(sdram_fixed=8 * MB)))
    for i in range(30):
        g.add_edge(Edge(f"v{i}", f"v{(i * 7) % 30}"))
    first = map_graph(g, "4x4")
    second = map_graph(g, "4x4")
    assert ({c: t.to_json() for c, t in first["Tables"].items()}
            == {c: t.to_json() for c, t in second["Tables"].items()})


# -- keys ----------------------------------------------------------------------------

class Part:
    def __init__(self, pre, ident="data"):
        self.pre, self.id = pre, (pre, ident)


def test_key_examples():
    keys = allocate_keys([Part("a")], {"a": 6})
    assert keys[("a", "data")] == KeyBlock(0, 0xFFFFFFF8)
    keys = allocate_keys([Part("a"), Part("b")], {"a": 1, "b": 1})
    assert [(b.base, b.mask) for b in keys.values()] == [(0, 0xFFFFFFFF), (1, 0xFFFFFFFF)]
    keys = allocate_keys([Part("a")], {"a": 1024})
    assert keys[("a", "data")].size == 1024 and keys[("a", "data")].mask == 0xFFFFFC00
    assert list(keys.emitted_keys(("a", "data"))) == list(range(1024))
    assert keys.partition_for_key(1023) == ("a", "data")
    assert keys.partition_for_key(1024) is None


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(1, 3000), min_size=1, max_size=40))
def test_key_disjointness(counts):
    parts = [Part(f"v{i}") for i in range(len(counts))]
    keys = allocate_keys(parts, {f"v{i}": c for i, c in enumerate(counts)})
    blocks = list(keys.items())
    for pid, block in blocks:
        n = counts[int(pid[0][1:])]
        assert block.size >= n and block.size < 2 * n
        assert block.base & ~block.mask == 0
    for i, (_, a) in enumerate(blocks):
        for _, b in blocks[i + 1:]:
            assert a.base + a.size <= b.base or b.base + b.size <= a.base


# -- tables ----------------------------------------------------------------------------

def test_lookup_examples():
    entries = [RoutingEntry(0x00010000, 0xFFFF0000, frozenset({E}))]
    assert lookup(entries, 0x00010003).links == {E}
    assert lookup(entries, 0x00020003) is None
    with pytest.raises(ValueError):
        RoutingEntry(0b11, 0b10)


def test_compression_examples():
    a = RoutingEntry(0b10, 0xFFFFFFFF, frozenset({E}))
    b = RoutingEntry(0b11, 0xFFFFFFFF, frozenset({E}))
    merged = compress_table(RoutingTable((0, 0), [a, b]))
    assert merged.entries == [RoutingEntry(0b10, 0xFFFFFFFE, frozenset({E}))]
    assert compress_table(RoutingTable((0, 0), [a])).entries == [a]
    c = RoutingEntry(0b11, 0xFFFFFFFF, frozenset({N}))
    assert compress_table(RoutingTable((0, 0), [a, c])).entries == [a, c]


def test_compression_respects_shadowing():
    # Merging 0 and 2 would hoist key 2 above the entry for 0b01x, which
    # overlaps it and used to win for key 2.
    first = RoutingEntry(0b00, 0xFFFFFFFF, frozenset({E}))
    middle = RoutingEntry(0b00, 0xFFFFFFFC, frozenset({N}))
    last = RoutingEntry(0b10, 0xFFFFFFFF, frozenset({E}))
    table = RoutingTable((0, 0), [first, middle, last])
    small = compress_table(table)
    for key in range(8):
        assert reference_route(small.entries, key, W) == reference_route(table.entries, key, W)


@st.composite
def prefix_tables(draw):
    entries = []
    routes = [frozenset({E}), frozenset({N}), frozenset()]
    for _ in range(draw(st.integers(1, 24))):
        width = draw(st.integers(28, 32))
        mask = ((1 << width) - 1) << (32 - width) & 0xFFFFFFFF
        key = draw(st.integers(0, 63)) & mask
        links = draw(st.sampled_from(routes))
        cores = frozenset() if links else frozenset({1})
        entries.append(RoutingEntry(key, mask, links, cores))
    return entries


@settings(max_examples=300, deadline=None)
@given(prefix_tables())
def test_compression_equivalence(entries):
    table = RoutingTable((0, 0), entries)
    small = compress_table(table)
    assert len(small) <= len(table)
    for key in range(72):
        for arrival in (None, W):
            assert reference_route(small.entries, key, arrival) == \
                reference_route(table.entries, key, arrival)


def test_table_overflow():
    m = build_virtual_machine(1, 1, faults=[ReducedChip(0, 0, router_entries=2)])
    entries = [RoutingEntry(k, 0xFFFFFFFF, frozenset(), frozenset({1})) for k in (0, 5, 9)]
    with pytest.raises(TableOverflowError) as err:
        check_table_sizes({(0, 0): RoutingTable((0, 0), entries)}, m)
    assert err.value.chip == (0, 0)


# -- tags ------------------------------------------------------------------------------

def test_tag_examples():
    p = Placement("v", 0, 0, 1)
    (tag,) = allocate_tags([("v", IPTagRequest(), p)], build_virtual_machine(1, 1))
    assert tag.ethernet == (0, 0) and tag.slot == 0
    nine = [(f"v{i}", IPTagRequest(), p) for i in range(9)]
    with pytest.raises(TagAllocationError):
        allocate_tags(nine, build_virtual_machine(1, 1))
    tags = allocate_tags(nine, build_virtual_machine(9, 1))
    assert {t.ethernet for t in tags} == {(0, 0), (8, 0)}
    reverse = allocate_tags([("r", ReverseIPTagRequest(7000), Placement("r", 1, 0, 3))],
                            build_virtual_machine(2, 1))
    assert reverse[0].is_reverse and reverse[0].target == (1, 0, 3)


# -- database ----------------------------------------------------------------------------

def test_database_round_trip(tmp_path):
    g = MachineGraph()
    g.add_vertex(MachineVertex("a", n_keys=5, resources=Resources(tags=(IPTagRequest(),))))
    g.add_vertex(MachineVertex("b"))
    g.add_edge(Edge("a", "b", "spikes"))
    store = map_graph(g, "2x2")
    db = MappingDatabase(tmp_path / "mapping.json")
    with pytest.raises(DatabaseNotReadyError):
        db.result
    result = MappingResult(store["Placements"], store["Tables"], store["Keys"], store["Tags"])
    db = write_mapping_database(result, tmp_path / "mapping.json")
    assert db.ready
    assert [(p.vertex, p.chip, p.core) for p in db.result.placements] == \
        [(p.vertex, p.chip, p.core) for p in store["Placements"]]
    assert db.key_for("a", "spikes") == store["Keys"][("a", "spikes")]
    assert db.partition_for_key(db.key_for("a", "spikes").base + 3) == (("a", "spikes"), 3)
    assert db.result.tags[0].vertex == "a"


# -- whole mapping ------------------------------------------------------------------------

def test_route_realization_on_random_graphs():
    rng = random.Random(31)
    for trial in range(20):
        g = MachineGraph()
        n = rng.randint(2, 60)
        for i in range(n):
            g.add_vertex(MachineVertex(f"v{i}", n_keys=rng.randint(1, 9),
                                       resources=Resources(sdram_fixed=rng.randint(0, 9 * MB))))
        for i in range(n):
            for post in rng.sample(range(n), rng.randint(0, 4)):
                g.add_edge(Edge(f"v{i}", f"v{post}"))
        store = map_graph(g, rng.choice(["3x3", "4x4:wrap", "8x8"]))
        for part in g.partitions:
            want = {(store["Placements"][v].x, store["Placements"][v].y,
                     store["Placements"][v].core) for v in part.post_vertices}
            for key in store["Keys"].emitted_keys(part.id):
                cores, devices, anomalies = walk_key(
                    store["Tables"], store["Machine"], store["Placements"][part.pre].chip, key)
                assert cores == want and not devices and not anomalies
