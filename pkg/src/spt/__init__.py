"""Map graphs of communicating vertices onto a simulated many-core
multicast machine and run them."""

from .errors import SptError
from .graph import (ApplicationGraph, ApplicationVertex, Edge, MachineGraph, MachineVertex,
                    Resources, VirtualVertex)
from .machine import Machine, build_virtual_machine, parse_machine_spec
from .session import Session, SimResults
from .sim.engine import SimConfig

__all__ = ["SptError", "ApplicationGraph", "ApplicationVertex", "Edge", "MachineGraph",
           "MachineVertex", "Resources", "VirtualVertex", "Machine", "build_virtual_machine",
           "parse_machine_spec", "Session", "SimResults", "SimConfig"]
