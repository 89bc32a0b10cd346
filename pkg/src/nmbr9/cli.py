"""Command line entry point: ``nmbr9 {solve,oracle,export,render,gen-deck}``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .model.export import export_model, write_model
from .oracle import best_score_bruteforce
from .rules import (
    DEFAULT_GRID, DEFAULT_LEVELS, IllegalPlacementError, Instance, InstanceError, Placement,
    VariantError, parse_variant, replay, score,
)
from .shapes import CatalogError, default_catalog, load_catalog
from .solver import BOUND_LIMITED, SearchConfig, sample_deck, solve

FORMAT_VERSION = 1

EXIT_OK = 0
EXIT_LIMITED = 2
EXIT_USAGE = 64
EXIT_DATA = 65
ORACLE_MAX_K = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _instance_flags(p: argparse.ArgumentParser, deck: bool = True) -> None:
    p.add_argument("--variant", required=True, help="T-m-c-k with T in {F, K}, e.g. F-6-1-5")
    if deck:
        p.add_argument("--deck", help="comma-separated digits for K variants, e.g. 0,3,3,9")
    p.add_argument("--grid", type=int, default=DEFAULT_GRID, help="grid side length (default %(default)s)")
    p.add_argument("--levels", type=int, default=DEFAULT_LEVELS, help="level cap (default %(default)s)")
    p.add_argument("--catalog", help="shape catalog file (default: bundled)")


def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output", "-o", help="write the document here instead of stdout")
    p.add_argument("--log", help="append a run record to this JSON-lines file")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nmbr9", description="Exact solver workbench for Nmbr9.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="maximize the score with branch and bound")
    _instance_flags(p)
    _run_flags(p)
    p.add_argument("--time-limit", type=float, help="seconds")
    p.add_argument("--node-limit", type=int)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, help="accepted for symmetry with gen-deck; solve is deterministic")
    p.add_argument("--no-bound", action="store_true", help="disable upper-bound pruning")
    p.add_argument("--no-area", action="store_true", help="disable the area-monotonicity implied constraint")
    p.add_argument("--no-first-level", action="store_true", help="disable the first-card-on-level-1 constraint")
    p.add_argument("--level-order", choices=("descending", "ascending"), default="descending")
    p.add_argument("--anchor-order", choices=("canonical", "spiral"), default="canonical")

    p = sub.add_parser("oracle", help="exhaustive brute-force maximum (tiny instances)")
    _instance_flags(p)
    _run_flags(p)
    p.add_argument("--node-limit", type=int, help="node budget; the report is marked partial when hit")
    p.add_argument("--force", action="store_true", help=f"allow k > {ORACLE_MAX_K}")

    p = sub.add_parser("export", help="write the constraint model")
    _instance_flags(p)
    _run_flags(p)

    p = sub.add_parser("render", help="replay a solution document and draw each level")
    p.add_argument("solution", help="solution document written by solve")
    p.add_argument("--catalog", help="override the catalog recorded in the document")
    p.add_argument("--output", "-o")

    p = sub.add_parser("gen-deck", help="sample a reproducible shuffled deck")
    p.add_argument("--variant", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--output", "-o")
    return parser


def _catalog(path):
    return load_catalog(path) if path else default_catalog()


def _make_instance(args) -> Instance:
    deck = getattr(args, "deck", None)
    return Instance.from_variant(args.variant, deck=deck, s=args.grid, l_top=args.levels,
                                 catalog=_catalog(args.catalog))


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _log(path: str | None, record: dict) -> None:
    if not path:
        return
    record = {"format_version": FORMAT_VERSION,
              "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"), **record}
    with open(path, "a", encoding="utf-8") as f:
        f.write(json.dumps(record, sort_keys=True) + "\n")


def solution_document(instance: Instance, result) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "instance": instance.echo(),
        "deck": list(result.deck),
        "placements": [p.as_dict() for p in result.placements],
        "score": result.best_score,
        "status": result.status,
        "stats": asdict(result.stats),
    }


def cmd_solve(args) -> int:
    instance = _make_instance(args)
    try:
        config = SearchConfig(
            node_limit=args.node_limit, time_limit=args.time_limit, threads=args.threads,
            use_bound=not args.no_bound, area_monotonicity=not args.no_area,
            first_card_level1=not args.no_first_level, level_order=args.level_order,
            anchor_order=args.anchor_order,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = solve(instance, config)
    doc = solution_document(instance, result)
    _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.output)
    _log(args.log, {
        "command": "solve", "instance": instance.variant, "config": asdict(config) | instance.echo(),
        "result": {"score": result.best_score, "status": result.status},
        "stats": asdict(result.stats), "artifacts": [args.output] if args.output else [],
    })
    return EXIT_LIMITED if result.status == BOUND_LIMITED else EXIT_OK


def cmd_oracle(args) -> int:
    instance = _make_instance(args)
    if instance.k > ORACLE_MAX_K and not args.force:
        raise UsageError(f"oracle refuses k={instance.k} > {ORACLE_MAX_K} without --force")
    report = best_score_bruteforce(instance, cap=args.node_limit)
    doc = {"format_version": FORMAT_VERSION, **report.as_dict()}
    _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.output)
    _log(args.log, {
        "command": "oracle", "instance": instance.variant, "config": instance.echo(),
        "result": {"score": report.max_score, "status": "partial" if report.partial else "optimal"},
        "stats": {"nodes": report.nodes, "terminals": report.terminals},
        "artifacts": [args.output] if args.output else [],
    })
    return EXIT_LIMITED if report.partial else EXIT_OK


def cmd_export(args) -> int:
    instance = _make_instance(args)
    export = export_model(instance)
    if args.output:
        write_model(export, args.output)
    else:
        sys.stdout.write(export.dumps())
    _log(args.log, {
        "command": "export", "instance": instance.variant, "config": instance.echo(),
        "result": {"regular_constraints": export.count("regular"), "variables": len(export.variables),
                   "constraints": len(export.constraints)},
        "stats": {}, "artifacts": [args.output] if args.output else [],
    })
    return EXIT_OK


def render_state(state) -> str:
    """ASCII map per level: ``:`` border, ``.`` empty, digits for parts."""
    inst = state.instance
    s = inst.s
    out = []
    for level in range(1, inst.l_top + 1):
        grid = state.grid(level)
        out.append(f"level {level}")
        for r in range(s):
            row = []
            for c in range(s):
                pid = grid[r][c]
                if pid:
                    row.append(str(inst.part_of(pid)[0]))
                elif r in (0, s - 1) or c in (0, s - 1):
                    row.append(":")
                else:
                    row.append(".")
            out.append("".join(row))
        out.append("")
    out.append(f"score {score(state)}")
    return "\n".join(out) + "\n"


def load_solution(doc: dict, catalog_path: str | None = None):
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise InstanceError(f"unsupported solution format_version {version!r}")
    echo = doc["instance"]
    if catalog_path is None and echo.get("catalog") not in (None, "default"):
        catalog_path = echo["catalog"]
    instance = Instance.from_variant(echo["variant"], deck=echo.get("deck"), s=echo["grid"],
                                     l_top=echo["levels"], catalog=_catalog(catalog_path))
    placements = [Placement.from_dict(p) for p in doc.get("placements", [])]
    deck = doc.get("deck") if instance.kind == "F" and len(placements) == instance.k else None
    return instance, replay(instance, placements, deck)


def cmd_render(args) -> int:
    with open(args.solution, encoding="utf-8") as f:
        doc = json.load(f)
    _, state = load_solution(doc, args.catalog)
    recorded = doc.get("score")
    if recorded is not None and doc.get("placements") and recorded != score(state):
        raise InstanceError(f"recorded score {recorded} but replay scores {score(state)}")
    _emit(render_state(state), args.output)
    return EXIT_OK


def cmd_gen_deck(args) -> int:
    _, m, c, k = parse_variant(args.variant)
    instance = Instance("F", m, c, k)
    deck = sample_deck(instance, args.seed)
    _emit(",".join(str(d) for d in deck) + "\n", args.output)
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve, "oracle": cmd_oracle, "export": cmd_export,
    "render": cmd_render, "gen-deck": cmd_gen_deck,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"nmbr9: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InstanceError, VariantError, CatalogError, IllegalPlacementError, json.JSONDecodeError,
            OSError, KeyError) as exc:
        print(f"nmbr9: {exc}", file=sys.stderr)
        return EXIT_DATA

if __name__ == "__main__":
    sys.exit(main())
