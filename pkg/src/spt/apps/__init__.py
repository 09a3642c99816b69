"""Demo applications; importing this package registers their behaviors
and data generators."""

from . import conway, live, poisson  # noqa: F401
from .conway import build_conway_graph, life_oracle, life_step, run_conway
from .live import add_live_input, add_live_output
from .poisson import build_poisson_counter_graph, run_poisson
from .report import provenance_report

__all__ = ["build_conway_graph", "life_oracle", "life_step", "run_conway", "add_live_input",
           "add_live_output", "build_poisson_counter_graph", "run_poisson", "provenance_report"]
