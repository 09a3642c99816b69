"""Discrete-event simulation of a loaded machine."""

from .behaviors import BEHAVIORS, CoreBehavior, KeyLogger, make_behavior, register_behavior
from .engine import (CoreContext, MulticastPacket, RecordingRegion, RouteDecision, SimConfig,
                     Simulator, load)
from .gateways import (Frame, HostChannel, LivePacketGatherer, ReverseInjector, decode_frame,
                       encode_frame, read_replay, write_replay)
from .provenance import CoreProvenance, PacketAccounting, ProvenanceReport, RouterProvenance

__all__ = [
    "BEHAVIORS", "CoreBehavior", "KeyLogger", "make_behavior", "register_behavior",
    "CoreContext", "MulticastPacket", "RecordingRegion", "RouteDecision", "SimConfig",
    "Simulator", "load", "Frame", "HostChannel", "LivePacketGatherer", "ReverseInjector",
    "decode_frame", "encode_frame", "read_replay", "write_replay", "CoreProvenance",
    "PacketAccounting", "ProvenanceReport", "RouterProvenance",
]
