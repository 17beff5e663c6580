"""Random task generators and the granularity-scaling harness."""

from __future__ import annotations

import csv
import logging
import random
import time
from dataclasses import dataclass

from .abstraction import UNDEFINED, CoverageError
from .automaton import BudgetExceeded, build_offline_fta
from .grammar import (Example, Grammar, Production, Variable, count_programs, enumerate_programs,
                      eval_concrete)
from .oracle import build_final_index, build_oracle
from .search import SearchBudget, concretize_and_search
from .slicer import slice_fta, slice_from_scratch

log = logging.getLogger(__name__)

SCALE_COLUMNS = ["task", "k", "mode", "sliceMicros", "totalMicros", "peakStates",
                 "peakTransitions", "statesVisited"]


@dataclass
class Task:
    name: str
    grammar: Grammar
    examples: list


def random_bitvec_grammar(rng: random.Random, depth: int | None = None, variables=("x",),
                          consts=(1, 2, 3), binary_add: bool | None = None,
                          max_programs: int | None = None) -> Grammar:
    """t0 ::= variables | const c ; t_i ::= add c | shl c | add(t_{i-1}, t_{i-1}).

    With ``max_programs`` grammars whose program space is larger are redrawn.
    """
    while True:
        g = _draw_bitvec_grammar(rng, depth, variables, consts, binary_add)
        if max_programs is None or count_programs(g)[g.start] <= max_programs:
            return g


def _draw_bitvec_grammar(rng, depth, variables, consts, binary_add):
    depth = rng.randint(1, 3) if depth is None else depth
    binary_add = rng.random() < 0.3 if binary_add is None else binary_add
    prods = [Production("t0", x) for x in variables]
    if rng.random() < 0.3:
        prods.append(Production("t0", "const", (), rng.choice(consts)))
    for i in range(1, depth + 1):
        lhs, prev = f"t{i}", f"t{i - 1}"
        menu = [("add", c) for c in consts] + [("shl", c) for c in consts]
        chosen = sorted(rng.sample(menu, rng.randint(2, len(menu))))
        prods += [Production(lhs, op, (prev,), c) for op, c in chosen]
        if binary_add:
            prods.append(Production(lhs, "add", (prev, prev)))
    nts = tuple(f"t{i}" for i in range(depth, -1, -1))
    return Grammar(start=f"t{depth}", nonterminals=nts, productions=tuple(prods),
                   variables=tuple(Variable(x, "bitvec") for x in variables), domain="bitvec")


def random_examples(g: Grammar, plugin, rng: random.Random, n: int = 2, program=None,
                    tries: int = 50) -> list[Example]:
    """Examples produced by one random grammar program (so the task is solvable)."""
    if program is None:
        program = rng.choice(list(enumerate_programs(g)))
    out = []
    for _ in range(tries):
        env = plugin.sample_env(rng, g.variable_names)
        try:
            for x in env:
                plugin.abstract(x, env[x])
        except CoverageError:
            continue
        y = eval_concrete(g, plugin, program, env)
        if y is UNDEFINED:
            continue
        out.append(Example(env, y))
        if len(out) == n:
            break
    return out


def run_scaling(g: Grammar, make_plugin, ks, tasks, timeout: float = 30.0,
                modes=("oracle", "no-presyn")) -> list[dict]:
    """One row per (task, k, mode). Presynthesis per k is shared by all tasks."""
    rows = []
    for k in ks:
        plugin = make_plugin(k)
        art = None
        if "oracle" in modes:
            try:
                fta = build_offline_fta(g, plugin)
                oracle = build_oracle(fta)
                art = (fta, oracle, build_final_index(fta, oracle, plugin))
            except BudgetExceeded as exc:
                log.warning("presynthesis failed at k=%s: %s", k, exc)
        for task in tasks:
            for mode in modes:
                row = {"task": task.name, "k": k, "mode": mode}
                try:
                    row.update(_scale_row(g, plugin, task.examples, mode, art, timeout))
                except (BudgetExceeded, CoverageError, ValueError) as exc:
                    row["error"] = str(exc)
                rows.append(row)
    return rows


def _scale_row(g, plugin, examples, mode, art, timeout):
    if not examples:
        raise ValueError("task has no examples")
    t0 = time.perf_counter()
    e = examples[0]
    if mode == "oracle":
        if art is None:
            raise ValueError("no presynthesis artifact")
        s = slice_fta(*art, plugin, e)
    else:
        s = slice_from_scratch(g, plugin, e)
    t1 = time.perf_counter()
    res = concretize_and_search(s, plugin, examples, SearchBudget(wall_timeout=timeout))
    t2 = time.perf_counter()
    return {
        "sliceMicros": int((t1 - t0) * 1e6),
        "totalMicros": int((t2 - t0) * 1e6),
        "peakStates": s.metrics.peak_states,
        "peakTransitions": s.metrics.peak_transitions,
        "statesVisited": s.metrics.states_visited,
        "status": res.status,
    }


def write_scale_csv(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=SCALE_COLUMNS, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({c: r.get(c, "") for c in SCALE_COLUMNS})


def parse_k_range(text: str) -> list[int]:
    lo, sep, hi = text.partition("..")
    lo = int(lo)
    hi = int(hi) if sep else lo
    if hi < lo:
        raise ValueError(f"empty k range {text!r}")
    return list(range(lo, hi + 1))
