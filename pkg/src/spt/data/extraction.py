"""Reading SDRAM back to the host over an unreliable channel.

Two protocols:

* windowed: one request/response exchange per 256-byte window; a lost
  request or response is retried after a timeout.
* streamed: one request starts an on-chip extractor that streams
  sequence-numbered frames via the Ethernet chip's gatherer; the host then
  asks again for whatever sequences went missing, round after round.

The on-fabric leg of the streamed protocol is loss-free, so only the host
leg goes through the channel.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Optional, Set, Tuple

from ..errors import ExtractionTimeoutError, SptError

WINDOW_BYTES = 256
FRAME_BYTES = 256
WINDOW_TIMEOUT_TICKS = 100
WINDOW_MAX_RETRIES = 10
STREAM_MAX_ROUNDS = 1000


class LossyChannel:
    """Host link losing each message independently with probability ``p``."""

    def __init__(self, p: float = 0.0, latency: int = 1, seed: int = 0):
        if not 0.0 <= p < 1.0:
            raise SptError(f"loss probability must be in [0, 1), got {p}")
        if latency < 0:
            raise SptError("latency must be non-negative")
        self.p = p
        self.latency = latency
        self.seed = seed
        self._rng = random.Random(seed)
        self.sent = 0
        self.lost = 0
        self.clock = 0

    def deliver(self, kind: str = "", ident=None) -> bool:
        """Send one message; True if it arrives."""
        self.sent += 1
        self.clock += self.latency
        ok = self.p == 0.0 or self._rng.random() >= self.p
        if not ok:
            self.lost += 1
        return ok

    def fresh(self) -> "LossyChannel":
        """An identical channel starting from the same seed."""
        return type(self)(self.p, self.latency, self.seed)


class ScriptedChannel(LossyChannel):
    """Loses exactly the listed ``(kind, ident)`` messages the first time
    each is sent, and nothing else."""

    def __init__(self, drops: Iterable[Tuple[str, object]] = (), latency: int = 1):
        super().__init__(0.0, latency)
        self.drops = set(drops)
        self._pending = set(self.drops)

    def deliver(self, kind: str = "", ident=None) -> bool:
        self.sent += 1
        self.clock += self.latency
        if (kind, ident) in self._pending:
            self._pending.discard((kind, ident))
            self.lost += 1
            return False
        return True

    def fresh(self) -> "ScriptedChannel":
        return ScriptedChannel(self.drops, self.latency)


@dataclass
class WindowedStats:
    windows: int = 0
    # Every request sent counts as one exchange, answered or not.
    round_trips: int = 0
    retries: int = 0
    timeout_ticks: int = 0


@dataclass
class StreamSession:
    total: int
    received: Set[int] = field(default_factory=set)
    requests: int = 0
    frames: int = 0
    # Re-request rounds after the first stream.
    rounds: int = 0
    source: Optional[tuple] = None
    gatherer: Optional[tuple] = None

    @property
    def complete(self) -> bool:
        return len(self.received) == self.total

    def missing(self):
        return [s for s in range(self.total) if s not in self.received]


def _read(memory, chip, address: int, length: int) -> bytes:
    if hasattr(memory, "read_memory"):
        return memory.read_memory(chip, address, length)
    return bytes(memory[address:address + length])


def read_sdp_windowed(memory, chip, address: int, length: int, channel: LossyChannel,
                      window: int = WINDOW_BYTES, timeout: int = WINDOW_TIMEOUT_TICKS,
                      max_retries: int = WINDOW_MAX_RETRIES) -> Tuple[bytes, WindowedStats]:
    """Read ``length`` bytes one window at a time.

    ``memory`` is a simulator (anything with ``read_memory``) or a plain
    bytes-like object addressed from 0.
    """
    stats = WindowedStats()
    out = bytearray()
    for offset in range(0, length, window):
        n = min(window, length - offset)
        stats.windows += 1
        attempts = 0
        while True:
            attempts += 1
            stats.round_trips += 1
            if channel.deliver("request", offset) and channel.deliver("response", offset):
                break
            if attempts > max_retries:
                raise ExtractionTimeoutError(
                    f"window at {address + offset:#x} unanswered after {max_retries} retries")
            stats.retries += 1
            stats.timeout_ticks += timeout
        out += _read(memory, chip, address + offset, n)
    return bytes(out), stats


def read_streamed(memory, chip, address: int, length: int, channel: LossyChannel,
                  frame: int = FRAME_BYTES, max_rounds: int = STREAM_MAX_ROUNDS,
                  machine=None) -> Tuple[bytes, StreamSession]:
    """Read ``length`` bytes as a stream of sequence-numbered frames."""
    total = math.ceil(length / frame) if length else 0
    session = StreamSession(total, source=tuple(chip) if chip is not None else None)
    if machine is not None and chip is not None:
        session.gatherer = machine.nearest_ethernet(tuple(chip))
    if total == 0:
        return b"", session
    data = _read(memory, chip, address, length)
    buffers = {}

    def request(kind, wanted):
        while True:
            session.requests += 1
            if channel.deliver(kind, session.rounds):
                break
            if session.requests > max_rounds:
                raise ExtractionTimeoutError("stream request never reached the machine")
        for seq in wanted:
            session.frames += 1
            if channel.deliver("frame", seq):
                session.received.add(seq)
                buffers[seq] = data[seq * frame:(seq + 1) * frame]

    request("start", range(total))
    while not session.complete:
        if session.rounds >= max_rounds:
            raise ExtractionTimeoutError(
                f"{len(session.missing())} sequences still missing after {max_rounds} rounds")
        session.rounds += 1
        request("missing", session.missing())
    return b"".join(buffers[s] for s in range(total)), session


def compare_protocols(length: int, channel: LossyChannel, seed: int = 0) -> dict:
    """Read the same random ``length`` bytes with both protocols over
    identically seeded channels."""
    payload = random.Random(seed).randbytes(length)
    windowed, wstats = read_sdp_windowed(payload, None, 0, length, channel.fresh())
    streamed, session = read_streamed(payload, None, 0, length, channel.fresh())
    return {
        "bytes": length,
        "loss": channel.p,
        "windowed": {"round_trips": wstats.round_trips, "retries": wstats.retries,
                     "exact": windowed == payload},
        "streamed": {"frames": session.frames, "rounds": session.rounds,
                     "requests": session.requests, "exact": streamed == payload},
    }
