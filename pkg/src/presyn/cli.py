"""presyn command-line interface."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .abstraction import CoverageError
from .automaton import BudgetExceeded, serialize_fta
from .binfmt import ArtifactError
from .bundle import (FTA_FILE, ORACLE_FILE, default_grammar, load_bundle, presynthesize,
                     write_bundle)
from .domains import make_domain
from .grammar import GrammarError, examples_from_json, grammar_from_dict, load_grammar, unroll
from .search import SearchBudget, concretize_and_search
from .slicer import slice_fta, slice_from_scratch, slice_no_oracle
from .tasks import Task, parse_k_range, run_scaling, write_scale_csv

log = logging.getLogger("presyn")

EXIT_FOUND, EXIT_EXHAUSTED, EXIT_BUDGET, EXIT_INPUT, EXIT_COVERAGE = 0, 2, 3, 4, 5
_STATUS_EXIT = {"found": EXIT_FOUND, "exhausted": EXIT_EXHAUSTED, "budget": EXIT_BUDGET}


def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _grammar_for(args, config):
    if args.grammar:
        return load_grammar(args.grammar)
    return default_grammar(config)


def _dump(obj):
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_presyn(args) -> int:
    config = _read_json(args.domain_config)
    g = _grammar_for(args, config)
    plugin, fta, oracle, index, timings = presynthesize(g, config, args.max_states,
                                                        args.max_transitions)
    manifest = write_bundle(args.out, g, plugin, fta, oracle, index)
    out = Path(args.out)
    report = dict(manifest["counts"])
    report["buildSeconds"] = {k: round(v, 6) for k, v in timings.items()}
    report["bytes"] = {"fta": (out / FTA_FILE).stat().st_size,
                       "oracle": (out / ORACLE_FILE).stat().st_size}
    _dump(report)
    return 0


def cmd_syn(args) -> int:
    b = load_bundle(args.bundle)
    examples = examples_from_json(b.grammar, b.plugin, _read_json(args.examples))
    if not examples:
        raise GrammarError("examples file is empty")
    if not 0 <= args.slice_example < len(examples):
        raise GrammarError(f"--slice-example {args.slice_example} out of range")
    e = examples[args.slice_example]
    if args.mode == "oracle":
        s = slice_fta(b.fta, b.oracle, b.index, b.plugin, e)
    elif args.mode == "no-oracle":
        s = slice_no_oracle(b.fta, b.plugin, e)
    else:
        s = slice_from_scratch(b.grammar, b.plugin, e)
    if args.emit_slice:
        Path(args.emit_slice).write_bytes(serialize_fta(s.fta))
        Path(str(args.emit_slice) + ".metrics.json").write_text(
            json.dumps(s.metrics.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    budget = SearchBudget(wall_timeout=args.timeout, max_concrete_states=args.max_concrete_states,
                          max_programs_checked=args.max_programs)
    res = concretize_and_search(s, b.plugin, examples, budget, args.slice_example)
    out = res.to_json()
    out["mode"] = args.mode
    out["slice"] = s.metrics.to_json()
    if res.reason:
        out["reason"] = res.reason
    _dump(out)
    return _STATUS_EXIT[res.status]


def cmd_scale(args) -> int:
    config = _read_json(args.domain_config)
    g = _grammar_for(args, config)
    probe = make_domain(config)
    tasks = []
    for i, item in enumerate(_read_json(args.tasks)):
        name = item.get("name", f"task{i}")
        tasks.append(Task(name, g, examples_from_json(g, probe, item["examples"])))
    rows = run_scaling(g, lambda k: make_domain(config, k), parse_k_range(args.k_range), tasks,
                       timeout=args.timeout)
    write_scale_csv(rows, args.out)
    failed = [r for r in rows if "error" in r]
    for r in failed:
        log.warning("row %s k=%s %s failed: %s", r["task"], r["k"], r["mode"], r["error"])
    print(f"wrote {len(rows)} rows to {args.out} ({len(failed)} failed)")
    return 0


def cmd_stats(args) -> int:
    b = load_bundle(args.bundle)
    d = Path(args.bundle)
    report = dict(b.manifest["counts"])
    report["bytes"] = {name: (d / name).stat().st_size for name in (FTA_FILE, ORACLE_FILE)}
    report["domainConfig"] = b.config
    for key in sorted(report):
        print(f"{key}: {json.dumps(report[key], sort_keys=True)}")
    return 0


def cmd_unroll(args) -> int:
    g = unroll(grammar_from_dict(_read_json(args.grammar)), args.depth)
    Path(args.out).write_text(json.dumps(g.to_dict(), indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(g.productions)} productions over {len(g.nonterminals)} symbols to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="presyn", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("presyn", help="build the offline FTA, oracle and final index")
    sp.add_argument("--grammar", help="grammar JSON (optional for the string domain)")
    sp.add_argument("--domain-config", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--max-states", type=int)
    sp.add_argument("--max-transitions", type=int)
    sp.set_defaults(func=cmd_presyn)

    sp = sub.add_parser("syn", help="synthesize a program from examples")
    sp.add_argument("--bundle", required=True)
    sp.add_argument("--examples", required=True)
    sp.add_argument("--mode", choices=("oracle", "no-oracle", "no-presyn"), default="oracle")
    sp.add_argument("--timeout", type=float, default=60.0)
    sp.add_argument("--max-concrete-states", type=int, default=10**6)
    sp.add_argument("--max-programs", type=int, default=10**6)
    sp.add_argument("--slice-example", type=int, default=0)
    sp.add_argument("--emit-slice")
    sp.set_defaults(func=cmd_syn)

    sp = sub.add_parser("scale", help="granularity scaling experiment to CSV")
    sp.add_argument("--grammar")
    sp.add_argument("--domain-config", required=True)
    sp.add_argument("--k-range", required=True, help="e.g. 1..4")
    sp.add_argument("--tasks", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--timeout", type=float, default=30.0)
    sp.set_defaults(func=cmd_scale)

    sp = sub.add_parser("stats", help="summarize a bundle")
    sp.add_argument("--bundle", required=True)
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("unroll", help="finitize a recursive grammar")
    sp.add_argument("--grammar", required=True)
    sp.add_argument("--depth", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_unroll)
    return p


def main(argv=None) -> int:
    level = os.environ.get("PRESYN_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CoverageError as exc:
        print(f"error: coverage fault: {exc}", file=sys.stderr)
        return EXIT_COVERAGE
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except GrammarError as exc:
        print("error: invalid input:", file=sys.stderr)
        for d in exc.diagnostics:
            print(f"  {d}", file=sys.stderr)
        return EXIT_INPUT
    except (ArtifactError, OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
