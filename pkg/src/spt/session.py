"""The standard tool flow and the user-facing :class:`Session`.

Every stage of the flow is an :class:`~spt.pipeline.Algorithm`; the planner
picks and orders those needed for the requested artifacts.  Artifact names:

``MachineSpec``, ``ApplicationGraph``, ``MachineGraph``, ``GraphMapping``,
``Machine``, ``Placements``, ``RoutingTrees``, ``Keys``, ``Tags``,
``UncompressedTables``, ``Tables``, ``DatabasePath``, ``MappingDatabase``,
``DataImages``, ``RunTime``, ``CycleLength``, ``RunPlan``, ``SimConfig``,
``Notifications``, ``Behaviors``, ``Simulator``, ``Buffers``, ``SimResults``,
``ProvenanceReport``.

Tokens: ``ApplicationLoaded``, ``TablesLoaded``, ``DataLoaded`` and
``SimulationRun``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

from .data.generation import MappingInfo, generate_all
from .data.recording import BufferManager, RunPlan, plan_runs, run_buffered
from .errors import GraphError, MixedGraphError, PipelineFailure, RunFailedError, SptError
from .graph import (ApplicationGraph, ApplicationVertex, CoreLimits, Edge, MachineGraph,
                    VirtualVertex, application_to_machine_graph)
from .machine import Machine, build_virtual_machine, parse_machine_spec
from .mapping import (MappingResult, NotificationHub, allocate_graph_keys, allocate_graph_tags,
                      build_routing_tables, check_table_sizes, compress_tables,
                      estimate_machine_size, grid_for_chips, place, route,
                      write_mapping_database)
from .pipeline import Algorithm, ArtifactStore, algorithm, execute, plan
from .sim.engine import SimConfig, Simulator
from .sim.behaviors import make_behavior
from .sim.provenance import ProvenanceReport

log = logging.getLogger(__name__)


@dataclass
class SimResults:
    steps: int
    plan: RunPlan
    recordings: Dict[str, bytes]
    provenance: ProvenanceReport
    buffers: BufferManager = None
    simulator: Simulator = None


# -- mapping stages ----------------------------------------------------------

def _attach_devices(machine: Machine, graph) -> Machine:
    for v in sorted(graph.virtual_vertices, key=lambda v: v.id):
        if machine.neighbor(v.anchor, v.anchor_link) is None:
            machine.insert_virtual_chip(v.anchor, v.anchor_link)
    return machine


@algorithm("machine_discovery", inputs={"MachineSpec"},
           optional_inputs={"ApplicationGraph", "MachineGraph"}, outputs={"Machine"})
def machine_discovery(a):
    spec = a["MachineSpec"]
    graph = a.get("MachineGraph", a.get("ApplicationGraph"))
    if isinstance(spec, str) and spec.strip().lower() == "auto":
        if graph is None:
            raise SptError("an 'auto' machine needs a graph to size it from")
        mgraph = graph
        if isinstance(graph, ApplicationGraph):
            mgraph, _ = application_to_machine_graph(graph, CoreLimits())
        width, height = grid_for_chips(estimate_machine_size(mgraph))
        machine = build_virtual_machine(width, height)
    else:
        machine = parse_machine_spec(spec).copy()
    if graph is not None:
        _attach_devices(machine, graph)
    return {"Machine": machine}


@algorithm("graph_splitter", inputs={"ApplicationGraph", "Machine"},
           outputs={"MachineGraph", "GraphMapping"})
def graph_splitter(a):
    mgraph, mapping = application_to_machine_graph(a["ApplicationGraph"], a["Machine"])
    return {"MachineGraph": mgraph, "GraphMapping": mapping}


@algorithm("placer", inputs={"MachineGraph", "Machine"}, outputs={"Placements"})
def placer(a):
    return {"Placements": place(a["MachineGraph"], a["Machine"])}


@algorithm("router", inputs={"MachineGraph", "Machine", "Placements"}, outputs={"RoutingTrees"})
def router(a):
    return {"RoutingTrees": route(a["Placements"], a["MachineGraph"], a["Machine"])}


@algorithm("key_allocator", inputs={"MachineGraph"}, outputs={"Keys"})
def key_allocator(a):
    return {"Keys": allocate_graph_keys(a["MachineGraph"])}


@algorithm("tag_allocator", inputs={"MachineGraph", "Placements", "Machine"}, outputs={"Tags"})
def tag_allocator(a):
    return {"Tags": allocate_graph_tags(a["MachineGraph"], a["Placements"], a["Machine"])}


@algorithm("table_generator", inputs={"RoutingTrees", "Keys", "Machine"},
           outputs={"UncompressedTables"})
def table_generator(a):
    return {"UncompressedTables": build_routing_tables(a["RoutingTrees"], a["Keys"], a["Machine"])}


@algorithm("table_compressor", inputs={"UncompressedTables", "Machine"}, outputs={"Tables"})
def table_compressor(a):
    tables = compress_tables(a["UncompressedTables"])
    check_table_sizes(tables, a["Machine"])
    return {"Tables": tables}


@algorithm("database_writer", inputs={"Placements", "Tables", "Keys", "Tags", "DatabasePath"},
           optional_inputs={"Notifications"}, outputs={"MappingDatabase"})
def database_writer(a):
    result = MappingResult(a["Placements"], a["Tables"], a["Keys"], a["Tags"])
    db = write_mapping_database(result, a["DatabasePath"])
    if "Notifications" in a:
        a["Notifications"].notify("database_ready", db)
    return {"MappingDatabase": db}


# -- data, loading and running -----------------------------------------------

@algorithm("data_generator", inputs={"MachineGraph", "Keys", "Tags", "RunTime"},
           outputs={"DataImages"})
def data_generator(a):
    info = MappingInfo(a["MachineGraph"], a["Keys"], a["Tags"], a["RunTime"])
    return {"DataImages": generate_all(a["MachineGraph"], info)}


@algorithm("run_planner", inputs={"Placements", "MachineGraph", "Machine", "RunTime"},
           optional_inputs={"CycleLength"}, outputs={"RunPlan"})
def run_planner(a):
    return {"RunPlan": plan_runs(a["Placements"], a["MachineGraph"], a["Machine"],
                                 a["RunTime"], a.get("CycleLength"))}


@algorithm("simulator_builder", inputs={"Machine"}, optional_inputs={"SimConfig"},
           outputs={"Simulator"})
def simulator_builder(a):
    return {"Simulator": Simulator(a["Machine"], a.get("SimConfig"))}


@algorithm("application_loader", inputs={"Simulator", "MachineGraph", "Placements", "Tags"},
           optional_inputs={"Behaviors"}, produced_tokens={"ApplicationLoaded"})
def application_loader(a):
    sim, graph = a["Simulator"], a["MachineGraph"]
    sim.load_tags(a["Tags"])
    for p in a["Placements"]:
        vertex = graph[p.vertex]
        if p.core is None:
            sim.add_core(vertex, p.x, p.y, None)
        else:
            sim.add_core(vertex, p.x, p.y, p.core, make_behavior(vertex, a.get("Behaviors")))
    sim.bind_tags()
    return {}


@algorithm("table_loader", inputs={"Simulator", "Tables"}, produced_tokens={"TablesLoaded"})
def table_loader(a):
    a["Simulator"].load_routing_tables(a["Tables"])
    return {}


@algorithm("data_loader", inputs={"Simulator", "DataImages", "RunPlan", "MachineGraph"},
           required_tokens={"ApplicationLoaded"}, produced_tokens={"DataLoaded"})
def data_loader(a):
    sim, plan_ = a["Simulator"], a["RunPlan"]
    for vid, image in sorted(a["DataImages"].items()):
        sim.load_image(vid, image.to_bytes())
    for vid, capacity in sorted(plan_.capacities.items()):
        r = a["MachineGraph"][vid].resources
        sim.allocate_recording(vid, capacity, r.sdram_per_step, r.sdram_min_recording)
    return {}


@algorithm("runner", inputs={"Simulator", "RunPlan"},
           optional_inputs={"Buffers", "Notifications"},
           required_tokens={"ApplicationLoaded", "TablesLoaded", "DataLoaded"},
           outputs={"SimResults"}, produced_tokens={"SimulationRun"})
def runner(a):
    sim, plan_ = a["Simulator"], a["RunPlan"]
    manager = a.get("Buffers")
    if manager is None:
        manager = BufferManager()
        manager.attach(sim)
    recordings = run_buffered(sim, plan_, manager, a.get("Notifications"))
    return {"SimResults": SimResults(plan_.total_steps, plan_, recordings, sim.provenance(),
                                     manager, sim)}


@algorithm("provenance_extractor", inputs={"Simulator"}, required_tokens={"SimulationRun"},
           outputs={"ProvenanceReport"})
def provenance_extractor(a):
    return {"ProvenanceReport": a["Simulator"].provenance()}


def standard_algorithms() -> List[Algorithm]:
    """The tool flow in registration order (which breaks ordering ties)."""
    return [machine_discovery, graph_splitter, placer, router, key_allocator, tag_allocator,
            table_generator, table_compressor, database_writer, data_generator,
            simulator_builder, application_loader, table_loader, run_planner, data_loader,
            runner, provenance_extractor]


def run_pipeline(store: ArtifactStore, goals: Iterable[str], goal_tokens: Iterable[str] = (),
                 algorithms: Optional[Sequence[Algorithm]] = None) -> ArtifactStore:
    order = plan(algorithms or standard_algorithms(), store.names(), store.tokens,
                 goals, goal_tokens)
    log.info("plan: %s", " -> ".join(a.name for a in order))
    return execute(order, store)


def map_graph(graph, machine="auto") -> ArtifactStore:
    """Run only the mapping stages; the store holds placements, keys, tags
    and compressed tables."""
    name = "ApplicationGraph" if isinstance(graph, ApplicationGraph) else "MachineGraph"
    store = ArtifactStore({"MachineSpec": machine, name: graph})
    return run_pipeline(store, ["Placements", "Keys", "Tags", "Tables"])


# -- front end ---------------------------------------------------------------

_MAPPING_ARTIFACTS = ("Machine", "MachineGraph", "GraphMapping", "Placements", "RoutingTrees",
                      "Keys", "Tags", "UncompressedTables", "Tables", "MappingDatabase")


class Session:
    """Build a graph, run it, extend the run, change it, reset it.

    Vertices and edges go into an application graph or a machine graph,
    whichever kind is added first; mixing the two is an error.  The graph
    is frozen by the first run.  Later ``run`` calls resume from where the
    previous one paused, re-using the mapping and the recording cycle;
    ``set_parameter`` re-generates and re-loads data from step 0 on the
    existing mapping; ``reset`` discards everything except the graph.
    """

    def __init__(self, machine="auto", config: Optional[SimConfig] = None,
                 database_path=None, listeners=(), behaviors=None):
        self.machine_spec = machine
        self.config = config or SimConfig()
        self.database_path = database_path
        self.hub = NotificationHub(listeners)
        self.behaviors = behaviors
        self.graph = None
        self.store: Optional[ArtifactStore] = None
        self.results: Optional[SimResults] = None
        self.steps_run = 0
        self._cycle = None
        self._stale_data = False
        self.trace: List[str] = []

    # graph construction

    def _graph_for(self, vertex):
        if isinstance(vertex, ApplicationVertex):
            wanted = ApplicationGraph
        elif isinstance(vertex, VirtualVertex) and self.graph is not None:
            wanted = type(self.graph)
        elif isinstance(vertex, VirtualVertex):
            wanted = ApplicationGraph
        else:
            wanted = MachineGraph
        if self.graph is None:
            self.graph = wanted()
        elif not isinstance(self.graph, wanted):
            raise MixedGraphError(
                f"session holds a {self.graph.flavor} graph; cannot add {type(vertex).__name__}")
        return self.graph

    def add_vertex(self, vertex):
        return self._graph_for(vertex).add_vertex(vertex)

    def add_edge(self, pre: str, post: str, partition: str = "data") -> Edge:
        if self.graph is None:
            raise GraphError("add vertices before edges")
        return self.graph.add_edge(Edge(pre, post, partition))

    def set_graph(self, graph):
        if self.graph is not None and len(self.graph):
            raise GraphError("session already has a graph")
        self.graph = graph

    def set_parameter(self, vertex_id: str, name: str, value):
        """Change a vertex parameter; the next run regenerates data."""
        vertex = self._machine_vertices_for(vertex_id)
        for v in vertex:
            v.params[name] = value
        if vertex_id in self.graph:
            self.graph[vertex_id].params[name] = value
        self._stale_data = True

    def _machine_vertices_for(self, vertex_id):
        if self.store is None or "MachineGraph" not in self.store:
            return []
        mgraph = self.store["MachineGraph"]
        if vertex_id in mgraph:
            return [mgraph[vertex_id]]
        mapping = self.store.get("GraphMapping")
        return list(mapping.machine_vertices(vertex_id)) if mapping else []

    # running

    def _initial_store(self, steps: int) -> ArtifactStore:
        artifacts = {"MachineSpec": self.machine_spec, "RunTime": steps,
                     "SimConfig": self.config, "Notifications": self.hub}
        if isinstance(self.graph, ApplicationGraph):
            artifacts["ApplicationGraph"] = self.graph
        else:
            artifacts["MachineGraph"] = self.graph
        if self.database_path is not None:
            artifacts["DatabasePath"] = self.database_path
        if self.behaviors is not None:
            artifacts["Behaviors"] = self.behaviors
        return ArtifactStore(artifacts)

    def _goals(self):
        goals = {"SimResults", "ProvenanceReport"}
        if self.database_path is not None and (self.store is None
                                               or "MappingDatabase" not in self.store):
            goals.add("MappingDatabase")
        return goals

    def run(self, steps: int) -> SimResults:
        if self.graph is None:
            raise GraphError("nothing to run: the graph is empty")
        if steps < 0:
            raise SptError("steps must be non-negative")
        self.graph.frozen = True
        previous = self.store
        if previous is None:
            store = self._initial_store(steps)
        elif self._stale_data:
            store = self._initial_store(steps)
            for name in _MAPPING_ARTIFACTS:
                if name in previous and name not in store:
                    store.put(name, previous[name])
            self.steps_run = 0
            self._cycle = None
        else:
            store = self._initial_store(steps)
            for name in _MAPPING_ARTIFACTS + ("Simulator",):
                if name in previous and name not in store:
                    store.put(name, previous[name])
            store.put("Buffers", previous["SimResults"].buffers)
            if self._cycle is not None:
                store.put("CycleLength", self._cycle)
            for token in ("ApplicationLoaded", "TablesLoaded", "DataLoaded"):
                store.grant(token)
        try:
            run_pipeline(store, self._goals())
        except PipelineFailure as exc:
            # A failed run is reported as itself, not as a pipeline error.
            if isinstance(exc.cause, RunFailedError):
                raise exc.cause from exc
            raise
        self.store = store
        self._stale_data = False
        self.trace += [str(t) for t in store.trace]
        results = store["SimResults"]
        if self._cycle is None:
            self._cycle = results.plan.cycle
        self.steps_run += steps
        self.results = results
        return results

    @property
    def simulator(self) -> Optional[Simulator]:
        return self.store.get("Simulator") if self.store is not None else None

    def artifact(self, name):
        return self.store[name]

    def recording(self, vertex_id: str) -> bytes:
        return self.results.recordings[vertex_id]

    def stop(self) -> Optional[ProvenanceReport]:
        sim = self.simulator
        return sim.stop(self.hub) if sim is not None else None

    def reset(self):
        """Forget mapping, simulator and recordings; the graph may change again."""
        if self.simulator is not None and not self.simulator.stopped:
            self.simulator.stop(self.hub)
        self.store = None
        self.results = None
        self.steps_run = 0
        self._cycle = None
        self._stale_data = False
        if self.graph is not None:
            self.graph.frozen = False
