"""Workflow planning and execution for algorithms with declared inputs.

Each :class:`Algorithm` names the artifacts it needs and produces, plus
*tokens*: artifact-free markers such as "data has been loaded" that order
algorithms with side effects.  :func:`plan` chains backwards from the goals
to pick the algorithms needed and orders them; :func:`execute` runs them
against an :class:`ArtifactStore`.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence

from .errors import AmbiguousPlanError, PipelineFailure, SptError, UnsatisfiablePlanError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Algorithm:
    name: str
    body: Callable[[Mapping[str, Any]], Mapping[str, Any]]
    inputs: FrozenSet[str] = frozenset()
    outputs: FrozenSet[str] = frozenset()
    optional_inputs: FrozenSet[str] = frozenset()
    required_tokens: FrozenSet[str] = frozenset()
    produced_tokens: FrozenSet[str] = frozenset()

    def __post_init__(self):
        for name in ("inputs", "outputs", "optional_inputs", "required_tokens",
                     "produced_tokens"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        if not self.outputs and not self.produced_tokens:
            raise SptError(f"algorithm {self.name} produces nothing")

    def __repr__(self):
        return f"Algorithm({self.name})"


def algorithm(name=None, *, inputs=(), outputs=(), optional_inputs=(),
              required_tokens=(), produced_tokens=()):
    """Decorator turning ``fn(inputs) -> outputs`` into an :class:`Algorithm`."""

    def wrap(fn):
        return Algorithm(name or fn.__name__, fn, frozenset(inputs), frozenset(outputs),
                         frozenset(optional_inputs), frozenset(required_tokens),
                         frozenset(produced_tokens))

    return wrap


@dataclass
class TraceRecord:
    algorithm: str
    consumed: List[str]
    produced: List[str]
    seconds: float

    def __str__(self):
        return (f"{self.algorithm}: in={','.join(self.consumed) or '-'} "
                f"out={','.join(self.produced) or '-'} ({self.seconds * 1000:.1f} ms)")


class ArtifactStore:
    """Artifacts by type name plus granted tokens; artifacts are
    write-once."""

    def __init__(self, artifacts: Optional[Mapping[str, Any]] = None, tokens: Iterable[str] = ()):
        self._artifacts: Dict[str, Any] = dict(artifacts or {})
        self.tokens = set(tokens)
        self.trace: List[TraceRecord] = []

    def __getitem__(self, name):
        return self._artifacts[name]

    def __contains__(self, name):
        return name in self._artifacts

    def get(self, name, default=None):
        return self._artifacts.get(name, default)

    def put(self, name, value):
        if name in self._artifacts:
            raise SptError(f"artifact {name} has already been written in this run")
        self._artifacts[name] = value

    def grant(self, token):
        self.tokens.add(token)

    def names(self) -> List[str]:
        return sorted(self._artifacts)

    def as_dict(self) -> Dict[str, Any]:
        return dict(self._artifacts)


def _producers(algorithms: Sequence[Algorithm], item: str, token: bool) -> List[Algorithm]:
    attr = "produced_tokens" if token else "outputs"
    return sorted((a for a in algorithms if item in getattr(a, attr)), key=lambda a: a.name)


def is_valid_order(order: Sequence[Algorithm], artifacts: Iterable[str], tokens: Iterable[str],
                   goal_outputs: Iterable[str] = (), goal_tokens: Iterable[str] = ()) -> bool:
    """Replay ``order`` symbolically: no algorithm reads an absent artifact
    or token, and the goals hold at the end."""
    have, toks = set(artifacts), set(tokens)
    for alg in order:
        if not alg.inputs <= have or not alg.required_tokens <= toks:
            return False
        have |= alg.outputs
        toks |= alg.produced_tokens
    return set(goal_outputs) <= have and set(goal_tokens) <= toks


def plan(algorithms: Sequence[Algorithm], initial_artifacts: Iterable[str] = (),
         initial_tokens: Iterable[str] = (), goal_outputs: Iterable[str] = (),
         goal_tokens: Iterable[str] = ()) -> List[Algorithm]:
    """Order the algorithms needed to reach the goals.

    Alternative producers are chosen alphabetically; algorithms are
    ordered topologically, ties broken by their position in ``algorithms``.
    """
    algorithms = list(algorithms)
    registration = {a.name: i for i, a in enumerate(algorithms)}
    if len(registration) != len(algorithms):
        raise SptError("algorithm names must be unique")
    have = set(initial_artifacts)
    toks = set(initial_tokens)
    goal_outputs, goal_tokens = set(goal_outputs), set(goal_tokens)

    selected: Dict[str, Algorithm] = {}
    missing = []
    pending = [(g, False) for g in sorted(goal_outputs - have)]
    pending += [(t, True) for t in sorted(goal_tokens - toks)]
    while pending:
        item, is_token = pending.pop(0)
        attr = "produced_tokens" if is_token else "outputs"
        if any(item in getattr(a, attr) for a in selected.values()):
            continue
        candidates = _producers(algorithms, item, is_token)
        if not candidates:
            missing.append(("token " if is_token else "") + item)
            continue
        chosen = candidates[0]
        selected[chosen.name] = chosen
        pending += [(i, False) for i in sorted(chosen.inputs - have)]
        pending += [(t, True) for t in sorted(chosen.required_tokens - toks)]
    if missing:
        raise UnsatisfiablePlanError(
            f"no algorithm produces: {', '.join(sorted(set(missing)))}", missing=sorted(set(missing)))

    producers_of: Dict[str, List[str]] = {}
    for a in selected.values():
        for out in a.outputs:
            producers_of.setdefault(out, []).append(a.name)
    for out, names in sorted(producers_of.items()):
        if len(names) > 1 or out in have:
            sources = sorted(names) + (["<initial store>"] if out in have else [])
            raise AmbiguousPlanError(f"artifact {out} would be produced by {', '.join(sources)}")

    # Kahn's algorithm over "produces something I need" edges.
    chosen = sorted(selected.values(), key=lambda a: registration[a.name])
    deps = {a.name: set() for a in chosen}
    for a in chosen:
        for b in chosen:
            if a is not b and (a.outputs & b.inputs or a.produced_tokens & b.required_tokens):
                deps[b.name].add(a.name)
    order: List[Algorithm] = []
    done = set()
    while len(order) < len(chosen):
        ready = [a for a in chosen if a.name not in done and deps[a.name] <= done]
        if not ready:
            stuck = sorted(a.name for a in chosen if a.name not in done)
            raise UnsatisfiablePlanError(f"dependency cycle among {', '.join(stuck)}",
                                         missing=stuck)
        order.append(ready[0])
        done.add(ready[0].name)

    if not is_valid_order(order, have, toks, goal_outputs, goal_tokens):
        raise UnsatisfiablePlanError("no valid ordering reaches the goals")
    for alg in reversed(list(order)):
        trial = [a for a in order if a is not alg]
        if is_valid_order(trial, have, toks, goal_outputs, goal_tokens):
            order = trial
    return order


def execute(order: Sequence[Algorithm], store: ArtifactStore) -> ArtifactStore:
    """Run ``order`` against ``store``, recording a trace line per step."""
    for alg in order:
        absent = sorted(alg.inputs - set(store.names()))
        tokens_absent = sorted(alg.required_tokens - store.tokens)
        if absent or tokens_absent:
            raise PipelineFailure(
                alg.name, SptError(f"missing inputs {absent} / tokens {tokens_absent}"), store)
        inputs = {name: store[name] for name in alg.inputs}
        inputs.update({name: store[name] for name in alg.optional_inputs if name in store})
        started = time.perf_counter()
        try:
            outputs = alg.body(inputs) or {}
        except Exception as exc:
            log.error("algorithm %s failed: %s", alg.name, exc)
            raise PipelineFailure(alg.name, exc, store) from exc
        if set(outputs) != alg.outputs:
            raise PipelineFailure(
                alg.name,
                SptError(f"declared outputs {sorted(alg.outputs)}, got {sorted(outputs)}"),
                store)
        for name in sorted(outputs):
            store.put(name, outputs[name])
        for token in alg.produced_tokens:
            store.grant(token)
        record = TraceRecord(alg.name, sorted(inputs), sorted(outputs) + sorted(alg.produced_tokens),
                             time.perf_counter() - started)
        store.trace.append(record)
        log.info("%s", record)
    return store
