"""Human-readable provenance summaries."""

from __future__ import annotations

from typing import Tuple

from ..sim.provenance import ProvenanceReport


def provenance_report(report: ProvenanceReport) -> Tuple[str, dict]:
    """Text summary and JSON form of ``report``."""
    lines = []
    if report.unrecoverable:
        lines.append("!" * 72)
        lines.append(f"WARNING: {report.unrecoverable} dropped packet(s) could not be "
                     f"re-injected and were lost")
        lines.append("!" * 72)
    lines.append(f"steps run: {report.steps_run}")
    lines.append(f"router drops: {report.dropped}  reinjected: {report.reinjected}  "
                 f"unrecoverable: {report.unrecoverable}  "
                 f"pending re-injection: {report.pending_reinjection}")
    lines.append(f"timer overruns: {report.timer_overruns}")
    p = report.packets
    lines.append(f"packets: injected {p.injected}, copies {p.created}, delivered "
                 f"{p.delivered_core} to cores and {p.delivered_device} to devices, "
                 f"in flight {p.in_flight}")
    for r in report.routers:
        if r.dropped or r.unrecoverable:
            lines.append(f"  chip ({r.x}, {r.y}): dropped {r.dropped}, reinjected "
                         f"{r.reinjected}, unrecoverable {r.unrecoverable}")
    counters = sorted({name for c in report.cores for name in c.counters})
    for name in counters:
        lines.append(f"counter {name}: {report.counter_total(name)}")
    overruns = [c for c in report.cores if c.timer_overruns]
    for c in overruns:
        lines.append(f"  {c.vertex}: {c.timer_overruns} timer overrun(s)")
    for vertex, line in report.diagnostic_lines():
        lines.append(f"{vertex}: {line}")
    return "\n".join(lines), report.to_json()
