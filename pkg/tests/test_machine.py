import json

import pytest
from hypothesis import given, settings, strategies as st

from spt.errors import InvalidFaultError, LinkOccupiedError, SptError
from spt.machine import (MAX_CORES, MAX_ROUTER_ENTRIES, SDRAM_PER_CHIP, DeadChip, DeadCore,
                         DeadLink, LinkDirection, ReducedChip, build_virtual_machine,
                         machine_from_json, parse_machine_spec)

OFFSETS = {0: (1, 0), 1: (1, 1), 2: (0, 1), 3: (-1, 0), 4: (-1, -1), 5: (0, -1)}


def test_directions():
    assert len(LinkDirection) == 6
    for d in LinkDirection:
        assert d.opposite.opposite == d
        assert d.opposite == (d + 3) % 6
        assert d.offset == OFFSETS[int(d)]
    assert LinkDirection.parse("NE") == LinkDirection.NORTH_EAST
    assert LinkDirection.parse("west") == LinkDirection.WEST
    assert LinkDirection.parse(5) == LinkDirection.SOUTH


def test_single_chip():
    m = build_virtual_machine(1, 1)
    assert len(m) == 1
    chip = m[(0, 0)]
    assert chip.n_cores == MAX_CORES and chip.sdram == SDRAM_PER_CHIP
    assert chip.router_entries == MAX_ROUTER_ENTRIES
    assert chip.links == {}
    assert chip.is_ethernet
    assert chip.monitor_core == 0 and 0 not in chip.application_cores


def test_wrapped_2x2_has_six_links_per_chip():
    m = build_virtual_machine(2, 2, wrap=True)
    assert len(m) == 4
    for chip in m:
        assert len(chip.links) == 6
        x, y = chip.coord
        for d, target in chip.links.items():
            dx, dy = OFFSETS[int(d)]
            assert target == ((x + dx) % 2, (y + dy) % 2)


def test_neighbor_examples():
    flat = build_virtual_machine(2, 2)
    torus = build_virtual_machine(2, 2, wrap=True)
    assert flat.neighbor((0, 0), LinkDirection.EAST) == (1, 0)
    assert torus.neighbor((1, 1), LinkDirection.NORTH_EAST) == (0, 0)
    assert flat.neighbor((1, 0), LinkDirection.EAST) is None


def test_presets():
    assert len(parse_machine_spec("spinn3")) == 4
    spinn5 = parse_machine_spec("spinn5")
    assert len(spinn5) == 48
    assert spinn5[(0, 0)].is_ethernet
    assert len(parse_machine_spec("3x2")) == 6
    assert parse_machine_spec("2x2:wrap").wrap
    with pytest.raises(SptError):
        parse_machine_spec("banana")


def test_ethernet_per_tile():
    m = build_virtual_machine(16, 9)
    assert sorted(m.ethernet_chips) == [(0, 0), (0, 8), (8, 0), (8, 8)]


def test_faults():
    m = build_virtual_machine(3, 3, faults=[DeadChip(1, 1), DeadCore(0, 0, 5),
                                            DeadLink(0, 0, LinkDirection.EAST),
                                            ReducedChip(2, 2, sdram=1000, router_entries=10)])
    assert (1, 1) not in m
    assert 5 not in m[(0, 0)].cores
    assert LinkDirection.EAST not in m[(0, 0)].links
    assert LinkDirection.WEST not in m[(1, 0)].links
    assert m[(2, 2)].sdram == 1000 and m[(2, 2)].router_entries == 10
    for chip in m:
        assert (1, 1) not in chip.links.values()


def test_out_of_bounds_fault():
    with pytest.raises(InvalidFaultError):
        build_virtual_machine(2, 2, faults=[DeadChip(5, 0)])
    with pytest.raises(InvalidFaultError):
        build_virtual_machine(2, 2, faults=[DeadCore(0, 0, 40)])


def test_virtual_chip_insertion():
    m = build_virtual_machine(2, 2)
    v = m.insert_virtual_chip((1, 0), LinkDirection.EAST)
    assert v == (2, 0)
    chip = m[v]
    assert chip.is_virtual and chip.application_cores == ()
    assert chip.links == {LinkDirection.WEST: (1, 0)}
    assert m.virtual_anchor(v) == ((1, 0), LinkDirection.EAST)
    other = m.insert_virtual_chip((0, 1), LinkDirection.NORTH)
    assert other != v and not m.in_bounds(other)
    with pytest.raises(LinkOccupiedError):
        m.insert_virtual_chip((0, 0), LinkDirection.EAST)
    with pytest.raises(LinkOccupiedError):
        m.insert_virtual_chip((1, 0), LinkDirection.EAST)
    # Virtual chips add nothing to capacity.
    assert m.n_application_cores == 4 * 17
    assert len(m.real_chips()) == 4


def test_json_round_trip():
    m = build_virtual_machine(3, 2, faults=[DeadLink(0, 0, LinkDirection.NORTH)])
    m.insert_virtual_chip((2, 1), LinkDirection.EAST)
    again = machine_from_json(json.loads(json.dumps(m.to_json())))
    assert again.to_json() == m.to_json()


@st.composite
def machines(draw):
    w = draw(st.integers(1, 6))
    h = draw(st.integers(1, 6))
    wrap = draw(st.booleans())
    coords = [(x, y) for x in range(w) for y in range(h)]
    dead = draw(st.lists(st.sampled_from(coords), max_size=min(3, len(coords) - 1),
                         unique=True))
    faults = [DeadChip(*c) for c in dead]
    alive = [c for c in coords if c not in dead]
    for c in draw(st.lists(st.sampled_from(alive), max_size=6)):
        faults.append(DeadLink(c[0], c[1], draw(st.sampled_from(list(LinkDirection)))))
    return build_virtual_machine(w, h, wrap=wrap, faults=faults), wrap, bool(faults)


@settings(max_examples=150, deadline=None)
@given(machines())
def test_link_symmetry_and_chip_limits(case):
    m, wrap, faulty = case
    for chip in m:
        assert chip.n_cores <= MAX_CORES and chip.router_entries <= MAX_ROUTER_ENTRIES
        for d, target in chip.links.items():
            assert target in m and m.in_bounds(target)
            assert m[target].links.get(d.opposite) == chip.coord
        if wrap and not faulty:
            assert len(chip.links) == 6
