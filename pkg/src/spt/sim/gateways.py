"""Host I/O: frame format, the host channel, and the gateway behaviors.

A frame is little-endian ``key:u32 [payload:u32] time:u32``: 8 bytes without
payload, 12 with.  For outbound frames ``time`` is the tick at which the
gateway forwarded the packet; for inbound frames it is the time step at
which the packet should be injected.  Replay files hold frames each
preceded by a ``u16`` length.
"""

from __future__ import annotations

import struct
import threading
from collections import defaultdict
from pathlib import Path
from typing import Iterable, List, NamedTuple, Optional

from ..errors import SptError
from .behaviors import CoreBehavior, register_behavior

_NO_PAYLOAD = struct.Struct("<II")
_WITH_PAYLOAD = struct.Struct("<III")
_LENGTH = struct.Struct("<H")


class Frame(NamedTuple):
    key: int
    payload: Optional[int]
    time: int


def encode_frame(key: int, time: int, payload: Optional[int] = None) -> bytes:
    if payload is None:
        return _NO_PAYLOAD.pack(key & 0xFFFFFFFF, time)
    return _WITH_PAYLOAD.pack(key & 0xFFFFFFFF, payload & 0xFFFFFFFF, time)


def decode_frame(data: bytes) -> Frame:
    if len(data) == _NO_PAYLOAD.size:
        key, time = _NO_PAYLOAD.unpack(data)
        return Frame(key, None, time)
    if len(data) == _WITH_PAYLOAD.size:
        return Frame(*_WITH_PAYLOAD.unpack(data))
    raise SptError(f"malformed frame of {len(data)} bytes")


def write_replay(path, frames: Iterable[bytes]):
    with open(path, "wb") as fh:
        for frame in frames:
            fh.write(_LENGTH.pack(len(frame)))
            fh.write(frame)


def read_replay(path) -> List[bytes]:
    data = Path(path).read_bytes()
    out, pos = [], 0
    while pos < len(data):
        if pos + _LENGTH.size > len(data):
            raise SptError("truncated replay file")
        (n,) = _LENGTH.unpack_from(data, pos)
        pos += _LENGTH.size
        if pos + n > len(data):
            raise SptError("truncated replay file")
        out.append(data[pos:pos + n])
        pos += n
    return out


class HostChannel:
    """In-process stand-in for UDP between host and Ethernet chips.

    ``send`` may be called from any thread; frames wait in an inbox until
    the receiving gateway drains them at a time-step boundary.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._inbox = defaultdict(list)
        self._seq = 0
        self.received = defaultdict(list)

    def send(self, port: int, frame: bytes):
        with self._lock:
            self._inbox[port].append((self._seq, bytes(frame)))
            self._seq += 1

    def drain(self, port: int, step: int) -> List[bytes]:
        """Frames for ``port`` due at or before ``step``.  Malformed frames
        are handed over at once so the gateway can count them."""
        with self._lock:
            pending = self._inbox.get(port, [])
            due, keep = [], []
            for seq, frame in pending:
                try:
                    when = decode_frame(frame).time
                except SptError:
                    when = -1
                (due if when <= step else keep).append((when, seq, frame))
            self._inbox[port] = [(seq, frame) for _, seq, frame in keep]
        return [frame for _, _, frame in sorted(due)]

    def deliver(self, endpoint: str, tick: int, frame: bytes):
        self.received[endpoint].append((tick, frame))

    def frames(self, endpoint: str = "host") -> List[Frame]:
        return [decode_frame(f) for _, f in self.received[endpoint]]


@register_behavior("live-gatherer")
class LivePacketGatherer(CoreBehavior):
    """Forwards every multicast packet it receives to the host."""

    needs_ip_tag = True

    def packet(self, ctx, key, payload):
        ctx.send_host(encode_frame(key, ctx.tick, payload))
        ctx.increment("forwarded")


@register_behavior("mc-source")
class ReverseInjector(CoreBehavior):
    """Injects host frames as multicast packets at their scheduled step."""

    needs_reverse_ip_tag = True

    def timer(self, ctx, step):
        for raw in ctx.host_frames():
            try:
                frame = decode_frame(raw)
            except SptError:
                ctx.increment("malformed_frames")
                ctx.warning(f"skipped malformed host frame of {len(raw)} bytes")
                continue
            ctx.send(frame.key, frame.payload)
            ctx.increment("injected")
