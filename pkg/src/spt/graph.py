"""Application and machine graphs.

A machine graph holds vertices that each fit on one core.  An application
graph holds vertices made of *atoms*; splitting turns each application vertex
into machine vertices over contiguous atom slices and expands application
edges into machine edges between every pair of slices.

Edges leaving a vertex are grouped into outgoing edge partitions keyed by
``(pre_vertex, identifier)``; a partition is the unit that receives a block of
routing keys and a multicast route.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Iterable, List, Optional, Tuple, Union

from .errors import GraphError, MixedGraphError, UnsatisfiableVertexError
from .machine import (CPU_CYCLES_PER_STEP, DTCM_PER_CORE, SDRAM_PER_CHIP, Coord,
                      LinkDirection, Machine)

DEFAULT_PARTITION = "data"


@dataclass(frozen=True)
class IPTagRequest:
    """Outbound traffic to a host endpoint (``"host:port"`` or a label)."""
    endpoint: str = "host"


@dataclass(frozen=True)
class ReverseIPTagRequest:
    """Inbound host traffic arriving on ``port`` goes to the requesting core."""
    port: int


TagRequest = Union[IPTagRequest, ReverseIPTagRequest]


@dataclass(frozen=True)
class Resources:
    dtcm: int = 0
    sdram_fixed: int = 0
    sdram_per_step: int = 0
    cpu_cycles_per_step: int = 0
    tags: Tuple[TagRequest, ...] = ()
    sdram_min_recording: int = 0

    def __post_init__(self):
        for name in ("dtcm", "sdram_fixed", "sdram_per_step",
                     "cpu_cycles_per_step", "sdram_min_recording"):
            if getattr(self, name) < 0:
                raise GraphError(f"resource {name} must be non-negative")

    @property
    def sdram_to_place(self) -> int:
        """SDRAM a placer must reserve: fixed data plus the minimum
        recording space."""
        return self.sdram_fixed + self.sdram_min_recording


@dataclass
class MachineVertex:
    id: str
    kind: str = "generic"
    resources: Resources = field(default_factory=Resources)
    label: Optional[str] = None
    atom_slice: Optional[Tuple[int, int]] = None
    app_parent: Optional[str] = None
    params: dict = field(default_factory=dict)
    # Number of routing keys each outgoing partition needs; defaults to the
    # slice size (one key per atom).
    n_keys: Optional[int] = None
    chip_constraint: Optional[Coord] = None

    def __post_init__(self):
        if self.label is None:
            self.label = self.id
        if self.atom_slice is not None:
            lo, hi = self.atom_slice
            if hi < lo:
                raise GraphError(f"vertex {self.id} has an empty atom slice {self.atom_slice}")

    @property
    def n_atoms(self) -> int:
        if self.atom_slice is None:
            return 1
        return self.atom_slice[1] - self.atom_slice[0] + 1

    @property
    def keys_required(self) -> int:
        return self.n_keys if self.n_keys is not None else self.n_atoms


@dataclass
class ApplicationVertex:
    id: str
    n_atoms: int
    resource_fn: Callable[[int, int], Resources]
    kind: str = "generic"
    max_atoms_per_core: Optional[int] = None
    label: Optional[str] = None
    params: dict = field(default_factory=dict)
    keys_per_atom: int = 1

    def __post_init__(self):
        if self.label is None:
            self.label = self.id
        if self.n_atoms < 1:
            raise GraphError(f"application vertex {self.id} needs at least one atom")

    def resources_for(self, lo: int, hi: int) -> Resources:
        """Resources needed by the inclusive atom slice ``[lo, hi]``."""
        return self.resource_fn(lo, hi)

    def create_machine_vertex(self, lo: int, hi: int) -> MachineVertex:
        return MachineVertex(
            id=f"{self.id}[{lo}:{hi}]", kind=self.kind,
            resources=self.resources_for(lo, hi), label=f"{self.label}[{lo}:{hi}]",
            atom_slice=(lo, hi), app_parent=self.id, params=dict(self.params),
            n_keys=(hi - lo + 1) * self.keys_per_atom)


@dataclass
class VirtualVertex:
    """A device attached to the machine through ``anchor`` + ``anchor_link``."""
    id: str
    anchor: Coord
    anchor_link: LinkDirection
    n_atoms: int = 1
    kind: str = "device"
    label: Optional[str] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.anchor = tuple(self.anchor)
        self.anchor_link = LinkDirection.parse(self.anchor_link)
        if self.label is None:
            self.label = self.id

    # Machine-graph view of a virtual vertex: no core resources at all.
    @property
    def resources(self) -> Resources:
        return Resources()

    @property
    def keys_required(self) -> int:
        return self.n_atoms

    @property
    def atom_slice(self):
        return (0, self.n_atoms - 1)

    app_parent = None
    chip_constraint = None


@dataclass(frozen=True)
class Edge:
    pre: str
    post: str
    partition: str = DEFAULT_PARTITION


@dataclass
class OutgoingEdgePartition:
    pre: str
    identifier: str
    edges: List[Edge] = field(default_factory=list)

    @property
    def id(self) -> Tuple[str, str]:
        return (self.pre, self.identifier)

    @property
    def post_vertices(self) -> List[str]:
        """Distinct targets in first-seen order."""
        seen = {}
        for e in self.edges:
            seen.setdefault(e.post, None)
        return list(seen)


class _Graph:
    vertex_types: tuple = ()
    flavor = "graph"

    def __init__(self, label: str = ""):
        self.label = label
        self.vertices: Dict[str, object] = {}
        self.edges: List[Edge] = []
        self._partitions: Dict[Tuple[str, str], OutgoingEdgePartition] = {}
        self.frozen = False

    def _check_mutable(self):
        if self.frozen:
            raise GraphError(f"{self.flavor} graph is frozen once execution has started")

    def add_vertex(self, vertex):
        self._check_mutable()
        if not isinstance(vertex, self.vertex_types):
            raise MixedGraphError(
                f"cannot add {type(vertex).__name__} to a {self.flavor} graph")
        if vertex.id in self.vertices:
            raise GraphError(f"duplicate vertex id {vertex.id!r}")
        self.vertices[vertex.id] = vertex
        return vertex

    def add_vertices(self, vertices: Iterable):
        for v in vertices:
            self.add_vertex(v)

    def add_edge(self, edge: Edge) -> Edge:
        self._check_mutable()
        if not isinstance(edge, Edge):
            raise GraphError(f"expected an Edge, got {type(edge).__name__}")
        for end in (edge.pre, edge.post):
            if end not in self.vertices:
                raise GraphError(f"edge {edge} refers to unknown vertex {end!r}")
        self.edges.append(edge)
        key = (edge.pre, edge.partition)
        part = self._partitions.get(key)
        if part is None:
            part = self._partitions[key] = OutgoingEdgePartition(edge.pre, edge.partition)
        part.edges.append(edge)
        return edge

    def add_edges(self, edges: Iterable[Edge]):
        for e in edges:
            self.add_edge(e)

    @property
    def partitions(self) -> List[OutgoingEdgePartition]:
        return list(self._partitions.values())

    def partition(self, pre: str, identifier: str) -> OutgoingEdgePartition:
        return self._partitions[(pre, identifier)]

    def outgoing_partitions(self, vertex_id: str) -> List[OutgoingEdgePartition]:
        return [p for p in self._partitions.values() if p.pre == vertex_id]

    def incoming_partitions(self, vertex_id: str) -> List[OutgoingEdgePartition]:
        return [p for p in self._partitions.values()
                if any(e.post == vertex_id for e in p.edges)]

    @property
    def virtual_vertices(self) -> List[VirtualVertex]:
        return [v for v in self.vertices.values() if isinstance(v, VirtualVertex)]

    def __len__(self):
        return len(self.vertices)

    def __contains__(self, vertex_id):
        return vertex_id in self.vertices

    def __getitem__(self, vertex_id):
        return self.vertices[vertex_id]


class MachineGraph(_Graph):
    vertex_types = (MachineVertex, VirtualVertex)
    flavor = "machine"


class ApplicationGraph(_Graph):
    vertex_types = (ApplicationVertex, VirtualVertex)
    flavor = "application"


def linear_resources(sdram_fixed: int = 0, sdram_per_atom: int = 0, dtcm_fixed: int = 0,
                     dtcm_per_atom: int = 0, sdram_per_step_per_atom: int = 0,
                     cycles_per_atom: int = 0, tags: Tuple[TagRequest, ...] = (),
                     min_recording: int = 0) -> Callable[[int, int], Resources]:
    """Resource model ``fixed + per_atom * n`` used by the demo vertex kinds."""

    def resources(lo: int, hi: int) -> Resources:
        n = hi - lo + 1
        return Resources(
            dtcm=dtcm_fixed + dtcm_per_atom * n,
            sdram_fixed=sdram_fixed + sdram_per_atom * n,
            sdram_per_step=sdram_per_step_per_atom * n,
            cpu_cycles_per_step=cycles_per_atom * n,
            tags=tuple(tags), sdram_min_recording=min_recording)

    return resources


@dataclass(frozen=True)
class CoreLimits:
    dtcm: int = DTCM_PER_CORE
    sdram: int = SDRAM_PER_CHIP
    cpu_cycles_per_step: int = CPU_CYCLES_PER_STEP

    @classmethod
    def for_machine(cls, machine: Optional[Machine]) -> "CoreLimits":
        if machine is None:
            return cls()
        return cls(sdram=machine.max_sdram_per_chip)

    def fits(self, r: Resources) -> bool:
        return (r.dtcm <= self.dtcm and r.sdram_to_place <= self.sdram
                and r.cpu_cycles_per_step <= self.cpu_cycles_per_step)


def split_application_vertex(vertex: ApplicationVertex,
                             machine: Union[Machine, CoreLimits, None] = None
                             ) -> List[MachineVertex]:
    """Greedily cut ``vertex`` into maximal contiguous slices that fit a core.

    Each slice starts where the previous one ended and takes the largest
    feasible length up to ``max_atoms_per_core``, found by binary search.
    """
    limits = machine if isinstance(machine, CoreLimits) else CoreLimits.for_machine(machine)
    cap = vertex.max_atoms_per_core or vertex.n_atoms
    if cap < 1:
        raise GraphError(f"vertex {vertex.id} allows no atoms per core")
    slices = []
    lo = 0
    while lo < vertex.n_atoms:
        if not limits.fits(vertex.resources_for(lo, lo)):
            raise UnsatisfiableVertexError(
                f"atom {lo} of {vertex.id} needs {vertex.resources_for(lo, lo)}, "
                f"more than one core offers ({limits})")
        best = lo
        top = min(lo + cap - 1, vertex.n_atoms - 1)
        low_bound, high_bound = lo, top
        while low_bound <= high_bound:
            mid = (low_bound + high_bound) // 2
            if limits.fits(vertex.resources_for(lo, mid)):
                best = mid
                low_bound = mid + 1
            else:
                high_bound = mid - 1
        slices.append(vertex.create_machine_vertex(lo, best))
        lo = best + 1
    return slices


def expand_application_edges(app_edges: Iterable[Edge],
                             slice_map: Dict[str, List]) -> List[Edge]:
    """Machine edges from every slice of each pre vertex to every slice of
    its post vertex, keeping the partition identifier."""
    out = []
    for edge in app_edges:
        try:
            pres, posts = slice_map[edge.pre], slice_map[edge.post]
        except KeyError as exc:
            raise GraphError(f"slice map does not cover {exc.args[0]!r}") from None
        for pre in pres:
            for post in posts:
                out.append(Edge(pre.id, post.id, edge.partition))
    return out


@dataclass
class GraphMapping:
    """Which machine vertices came from which application vertex."""
    slices: Dict[str, List] = field(default_factory=dict)

    def machine_vertices(self, app_vertex_id: str) -> List:
        return self.slices[app_vertex_id]

    def parent_of(self, machine_vertex_id: str) -> Optional[str]:
        for app_id, mvs in self.slices.items():
            if any(mv.id == machine_vertex_id for mv in mvs):
                return app_id
        return None


def application_to_machine_graph(app_graph: ApplicationGraph,
                                 machine: Union[Machine, CoreLimits, None] = None
                                 ) -> Tuple[MachineGraph, GraphMapping]:
    """Split every vertex and expand every edge."""
    mgraph = MachineGraph(label=app_graph.label)
    mapping = GraphMapping()
    for vid, vertex in app_graph.vertices.items():
        if isinstance(vertex, VirtualVertex):
            mvs = [replace(vertex)]
        else:
            mvs = split_application_vertex(vertex, machine)
        mapping.slices[vid] = mvs
        mgraph.add_vertices(mvs)
    mgraph.add_edges(expand_application_edges(app_graph.edges, mapping.slices))
    return mgraph, mapping


# -- JSON ---------------------------------------------------------------------

_RESOURCE_FIELDS = ("dtcm", "sdram_fixed", "sdram_per_step", "cpu_cycles_per_step",
                    "sdram_min_recording")
_LINEAR_FIELDS = ("sdram_fixed", "sdram_per_atom", "dtcm_fixed", "dtcm_per_atom",
                  "sdram_per_step_per_atom", "cycles_per_atom", "min_recording")


def _tags_from_json(items) -> Tuple[TagRequest, ...]:
    out = []
    for t in items or ():
        if "port" in t:
            out.append(ReverseIPTagRequest(int(t["port"])))
        else:
            out.append(IPTagRequest(t.get("endpoint", "host")))
    return tuple(out)


def _tags_to_json(tags) -> List[dict]:
    return [{"port": t.port} if isinstance(t, ReverseIPTagRequest) else {"endpoint": t.endpoint}
            for t in tags]


def graph_from_json(data: dict) -> Union[MachineGraph, ApplicationGraph]:
    """Vertices with ``n_atoms`` make an application graph; their
    ``resources`` are a linear model (``sdram_fixed``, ``sdram_per_atom``,
    ...).  Otherwise ``resources`` are a machine vertex's fixed needs."""
    vertices = data.get("vertices", [])
    is_app = any("n_atoms" in v for v in vertices)
    graph = ApplicationGraph(data.get("label", "")) if is_app else MachineGraph(data.get("label", ""))
    for v in vertices:
        res = dict(v.get("resources", {}))
        tags = _tags_from_json(res.pop("tags", ()))
        params = dict(v.get("params", {}))
        if is_app:
            unknown = set(res) - set(_LINEAR_FIELDS)
            if unknown:
                raise GraphError(f"unknown resource fields {sorted(unknown)} on {v['id']}")
            graph.add_vertex(ApplicationVertex(
                v["id"], int(v.get("n_atoms", 1)), linear_resources(tags=tags, **res),
                kind=v.get("kind", "generic"), max_atoms_per_core=v.get("max_per_core"),
                label=v.get("label"), params=params))
        else:
            unknown = set(res) - set(_RESOURCE_FIELDS)
            if unknown:
                raise GraphError(f"unknown resource fields {sorted(unknown)} on {v['id']}")
            graph.add_vertex(MachineVertex(
                v["id"], v.get("kind", "generic"), Resources(tags=tags, **res),
                label=v.get("label"), params=params, n_keys=v.get("n_keys")))
    for v in data.get("virtual_vertices", []):
        anchor = v["anchor"]
        graph.add_vertex(VirtualVertex(v["id"], (anchor["x"], anchor["y"]), anchor["link"],
                                       n_atoms=int(v.get("n_atoms", 1)),
                                       kind=v.get("kind", "device"), label=v.get("label")))
    for e in data.get("edges", []):
        graph.add_edge(Edge(e["pre"], e["post"], e.get("partition", DEFAULT_PARTITION)))
    return graph


def graph_to_json(graph: MachineGraph) -> dict:
    """JSON form of a machine graph."""
    vertices, virtual = [], []
    for v in graph.vertices.values():
        if isinstance(v, VirtualVertex):
            virtual.append({"id": v.id, "kind": v.kind, "n_atoms": v.n_atoms,
                            "anchor": {"x": v.anchor[0], "y": v.anchor[1],
                                       "link": v.anchor_link.short}})
            continue
        if not isinstance(v, MachineVertex):
            raise GraphError("only machine graphs are serialised")
        res = {f: getattr(v.resources, f) for f in _RESOURCE_FIELDS}
        if v.resources.tags:
            res["tags"] = _tags_to_json(v.resources.tags)
        vertices.append({"id": v.id, "label": v.label, "kind": v.kind, "resources": res,
                         "params": v.params, "n_keys": v.n_keys})
    return {"label": graph.label, "vertices": vertices, "virtual_vertices": virtual,
            "edges": [{"pre": e.pre, "post": e.post, "partition": e.partition}
                      for e in graph.edges]}
