"""Core behaviors: host-language stand-ins for the programs cores run.

A behavior is registered under a vertex *kind*; the loader instantiates one
per placed vertex.  Handlers receive a :class:`~spt.sim.engine.CoreContext`
and must not block.
"""

from __future__ import annotations

from typing import Dict, Optional, Type

from ..errors import LoadError

BEHAVIORS: Dict[str, Type["CoreBehavior"]] = {}


def register_behavior(kind: str):
    def wrap(cls):
        BEHAVIORS[kind] = cls
        cls.kind = kind
        return cls
    return wrap


class CoreBehavior:
    """Default handlers do nothing; a behavior overrides what it needs."""

    kind = "generic"
    needs_ip_tag = False
    needs_reverse_ip_tag = False

    def __init__(self, vertex):
        self.vertex = vertex

    def start(self, ctx):
        pass

    def timer(self, ctx, step: int):
        pass

    def packet(self, ctx, key: int, payload: Optional[int]):
        pass

    def pause(self, ctx):
        pass

    def resume(self, ctx):
        pass

    def stop(self, ctx):
        pass

    def completed(self, ctx) -> bool:
        return True


@register_behavior("generic")
class IdleBehavior(CoreBehavior):
    pass


@register_behavior("key-logger")
class KeyLogger(CoreBehavior):
    """Remembers every packet it receives as ``(tick, key, payload)``."""

    def __init__(self, vertex):
        super().__init__(vertex)
        self.received = []

    def packet(self, ctx, key, payload):
        self.received.append((ctx.tick, key, payload))


@register_behavior("scripted-source")
class ScriptedSource(CoreBehavior):
    """Sends ``params["script"][step]`` (a list of keys) at each timer."""

    def timer(self, ctx, step):
        for key in self.vertex.params.get("script", {}).get(step, ()):
            ctx.send(key)


def make_behavior(vertex, overrides: Optional[Dict[str, type]] = None) -> CoreBehavior:
    # Importing the apps registers their kinds.
    from .. import apps  # noqa: F401
    from . import gateways  # noqa: F401
    table = {**BEHAVIORS, **(overrides or {})}
    try:
        cls = table[vertex.kind]
    except KeyError:
        raise LoadError(f"no behavior registered for vertex kind {vertex.kind!r}") from None
    return cls(vertex)
