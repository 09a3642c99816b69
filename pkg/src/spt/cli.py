"""Command-line entry point: ``spt <command> ...``.

Exit status is 0 on success, 1 when the tool flow fails, 2 on bad
arguments.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import SptError

log = logging.getLogger("spt")


class _BadArguments(Exception):
    pass


def _write_json(path: Path, data):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=1))


def _mapping_json(store) -> dict:
    from .mapping import MappingResult
    return MappingResult(store["Placements"], store["Tables"], store["Keys"],
                         store["Tags"]).to_json()


def _initial_grid(args):
    from .apps.conway import load_pattern, place_pattern
    if args.pattern and args.random is not None:
        raise _BadArguments("--pattern and --random are mutually exclusive")
    if args.pattern:
        try:
            return place_pattern(args.width, args.height, load_pattern(args.pattern))
        except (OSError, ValueError) as exc:
            raise _BadArguments(str(exc)) from None
    if args.random is not None:
        rng = np.random.default_rng(args.random)
        return (rng.random((args.height, args.width)) < args.density).astype(np.uint8)
    return place_pattern(args.width, args.height, None)


def cmd_conway(args) -> int:
    from .apps.conway import format_pattern, life_oracle, run_conway
    from .apps.report import provenance_report
    if args.width < 1 or args.height < 1 or args.steps < 0:
        raise _BadArguments("width and height must be >= 1 and steps >= 0")
    grid = _initial_grid(args)
    sessions = []
    grids = run_conway(args.width, args.height, args.steps, args.machine, grid,
                       live_output=args.live, session_out=sessions)
    session = sessions[0]
    text, report = provenance_report(session.results.provenance)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "states.jsonl", "w") as fh:
            for g in grids:
                fh.write(json.dumps(g.tolist()) + "\n")
        _write_json(out / "provenance.json", report)
        _write_json(out / "mapping.json", _mapping_json(session.store))
    print(format_pattern(grids[-1]), end="")
    print(text)
    if args.check:
        ok = all((a == b).all() for a, b in zip(grids, life_oracle(grid, args.steps)))
        print(f"oracle check: {'pass' if ok else 'FAIL'}")
        return 0 if ok else 1
    return 0


def _parse_rates(text: str, n: int):
    try:
        rates = [float(r) for r in text.split(",")]
    except ValueError:
        raise _BadArguments(f"cannot parse rates {text!r}") from None
    if len(rates) == 1:
        rates = rates * n
    if len(rates) != n:
        raise _BadArguments(f"{len(rates)} rates given for {n} sources")
    return rates


def cmd_poisson(args) -> int:
    from .apps.poisson import run_poisson
    from .apps.report import provenance_report
    if min(args.sources, args.atoms, args.counters) < 1 or args.steps < 0:
        raise _BadArguments("counts must be >= 1 and steps >= 0")
    rates = _parse_rates(args.rate, args.sources)
    sessions = []
    counts = run_poisson(args.sources, args.atoms, rates, args.counters, args.steps,
                         args.machine, args.max_atoms, args.seed, session_out=sessions)
    text, report = provenance_report(sessions[0].results.provenance)
    for name, c in counts.items():
        totals = ", ".join(str(int(t)) for t in c.sum(axis=0))
        print(f"{name}: per-source totals [{totals}]")
    print(text)
    if args.out:
        out = Path(args.out)
        _write_json(out / "counts.json", {k: v.tolist() for k, v in counts.items()})
        _write_json(out / "provenance.json", report)
        _write_json(out / "mapping.json", _mapping_json(sessions[0].store))
    return 0


def cmd_map(args) -> int:
    from .graph import graph_from_json
    from .apps.conway import build_conway_graph
    from .session import map_graph
    if args.graph:
        try:
            graph = graph_from_json(json.loads(Path(args.graph).read_text()))
        except (OSError, ValueError, KeyError) as exc:
            raise _BadArguments(f"cannot read graph: {exc}") from None
    elif args.conway:
        try:
            w, h = (int(v) for v in args.conway.lower().split("x"))
        except ValueError:
            raise _BadArguments(f"cannot parse --conway {args.conway!r}") from None
        graph = build_conway_graph(w, h)
    else:
        raise _BadArguments("give --graph FILE or --conway WxH")
    store = map_graph(graph, args.machine)
    data = _mapping_json(store)
    if args.out:
        _write_json(Path(args.out), data)
    n_entries = sum(len(t["entries"]) for t in data["tables"])
    print(f"placed {len(data['placements'])} vertices on "
          f"{len({(p['x'], p['y']) for p in data['placements']})} chips; "
          f"{len(data['keys'])} key blocks; {n_entries} routing entries on "
          f"{len(data['tables'])} chips; {len(data['tags'])} tags")
    return 0


def cmd_plan(args) -> int:
    from .pipeline import plan
    from .session import standard_algorithms
    goals = [g for g in args.goals.split(",") if g]
    have = [h for h in args.have.split(",") if h]
    tokens = [t for t in args.tokens.split(",") if t]
    if not goals:
        raise _BadArguments("no goals given")
    for i, alg in enumerate(plan(standard_algorithms(), have, tokens, goals), 1):
        extra = ""
        if alg.produced_tokens:
            extra = f" +tokens {','.join(sorted(alg.produced_tokens))}"
        print(f"{i:2d}. {alg.name}: {','.join(sorted(alg.inputs)) or '-'} -> "
              f"{','.join(sorted(alg.outputs)) or '-'}{extra}")
    return 0


def cmd_provenance(args) -> int:
    from .apps.report import provenance_report
    from .sim.provenance import ProvenanceReport
    try:
        data = json.loads(Path(args.file).read_text())
    except (OSError, ValueError) as exc:
        raise _BadArguments(f"cannot read {args.file}: {exc}") from None
    text, _ = provenance_report(ProvenanceReport.from_json(data))
    print(text)
    return 0


def cmd_compare(args) -> int:
    from .data.extraction import LossyChannel, compare_protocols
    if args.bytes < 0 or not 0 <= args.loss < 1:
        raise _BadArguments("--bytes must be >= 0 and --loss in [0, 1)")
    report = compare_protocols(args.bytes, LossyChannel(args.loss, seed=args.seed), args.seed)
    print(json.dumps(report, indent=1))
    return 0 if report["windowed"]["exact"] and report["streamed"]["exact"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spt", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log each pipeline stage")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("conway", help="run Conway's Game of Life")
    p.add_argument("--width", type=int, default=5)
    p.add_argument("--height", type=int, default=5)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--pattern", help="text grid of '.' and '#' rows")
    p.add_argument("--random", type=int, metavar="SEED", help="random initial grid")
    p.add_argument("--density", type=float, default=0.35)
    p.add_argument("--machine", default="auto", help="WxH[:wrap], preset, JSON file or auto")
    p.add_argument("--out", help="directory for states.jsonl, provenance.json, mapping.json")
    p.add_argument("--live", action="store_true", help="tap all cells into a live gatherer")
    p.add_argument("--check", action="store_true", help="compare against a direct oracle")
    p.set_defaults(func=cmd_conway)

    p = sub.add_parser("poisson", help="run Poisson sources into counters")
    p.add_argument("--sources", type=int, default=1)
    p.add_argument("--atoms", type=int, default=10)
    p.add_argument("--rate", default="1.0", help="events per step, one value or a list")
    p.add_argument("--counters", type=int, default=1)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--max-atoms", type=int, default=None, help="atoms per core")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--machine", default="auto")
    p.add_argument("--out")
    p.set_defaults(func=cmd_poisson)

    p = sub.add_parser("map", help="map a graph and write the mapping JSON")
    p.add_argument("--graph", help="graph JSON file")
    p.add_argument("--conway", metavar="WxH", help="map a Conway grid instead")
    p.add_argument("--machine", default="auto")
    p.add_argument("--out", help="mapping JSON output path")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("plan", help="print the ordered plan for some goals")
    p.add_argument("--goals", default="SimResults")
    p.add_argument("--have", default="MachineSpec,ApplicationGraph,RunTime",
                   help="artifacts available up front")
    p.add_argument("--tokens", default="", help="tokens granted up front")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("provenance", help="summarise a provenance.json")
    p.add_argument("file")
    p.set_defaults(func=cmd_provenance)

    p = sub.add_parser("compare-extraction", help="windowed vs streamed reads")
    p.add_argument("--bytes", type=int, default=10000)
    p.add_argument("--loss", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except _BadArguments as exc:
        parser.error(str(exc))
    except SptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
