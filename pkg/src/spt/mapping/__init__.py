"""Mapping a machine graph onto a machine: placements, routes, keys, tags."""

from .database import (LiveListener, MappingDatabase, MappingResult, NotificationHub,
                       write_mapping_database)
from .keys import KeyAllocation, KeyBlock, allocate_graph_keys, allocate_keys, next_pow2
from .placer import (Placement, Placements, estimate_machine_size, grid_for_chips, place)
from .router import MulticastTree, TreeNode, route, route_partition
from .tables import (RoutingEntry, RoutingTable, build_routing_tables, check_table_sizes,
                     compress_table, compress_tables, lookup)
from .tags import (TagAssignment, TagTable, allocate_graph_tags, allocate_tags)

__all__ = [
    "LiveListener", "MappingDatabase", "MappingResult", "NotificationHub",
    "write_mapping_database", "KeyAllocation", "KeyBlock", "allocate_graph_keys",
    "allocate_keys", "next_pow2", "Placement", "Placements", "estimate_machine_size",
    "grid_for_chips", "place", "MulticastTree", "TreeNode", "route", "route_partition",
    "RoutingEntry", "RoutingTable", "build_routing_tables", "check_table_sizes",
    "compress_table", "compress_tables", "lookup", "TagAssignment", "TagTable",
    "allocate_graph_tags", "allocate_tags",
]
