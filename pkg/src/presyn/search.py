"""Concretize a slice into a concrete-value FTA and search it for a program."""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass

from .abstraction import UNDEFINED
from .automaton import FTA, iter_programs
from .grammar import Example, Program, eval_concrete

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SearchBudget:
    wall_timeout: float = 60.0
    max_concrete_states: int = 10**6
    max_programs_checked: int = 10**6

    def __post_init__(self):
        if min(self.wall_timeout, self.max_concrete_states, self.max_programs_checked) <= 0:
            raise ValueError("search budget limits must be positive")


@dataclass
class SearchResult:
    status: str  # found | exhausted | budget
    program: Program | None = None
    examples_checked: int = 0
    programs_checked: int = 0
    concrete_states: int = 0
    wall_micros: int = 0
    reason: str = ""

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "program": None if self.program is None else str(self.program),
            "examplesChecked": self.examples_checked,
            "programsChecked": self.programs_checked,
            "concreteStates": self.concrete_states,
            "wallMicros": self.wall_micros,
        }


class _OutOfBudget(Exception):
    pass


def enumerate_accepting_runs(c: FTA, final: int, limit: int | None = None) -> list[Program]:
    """Programs whose run ends at ``final``, in transition order, at most ``limit``."""
    return list(itertools.islice(iter_programs(c, final), limit))


def satisfies(g, plugin, program: Program, examples) -> bool:
    return all(eval_concrete(g, plugin, program, e.inputs) == e.output for e in examples)


def concretize_and_search(s, plugin, examples: list[Example], budget: SearchBudget | None = None,
                          slice_example: int = 0) -> SearchResult:
    """Bottom-up concretization of ``s`` on the slice example's inputs.

    Slice transitions are fired in canonical order, grouped by symbol in
    topological order. After each slice transition that added a concrete
    transition into a final state, the new programs reaching that final
    are checked against every example.
    """
    if not examples:
        raise ValueError("at least one example is required")
    budget = budget or SearchBudget()
    t0 = time.perf_counter()
    slice_fta = s.fta if hasattr(s, "fta") else s
    g = slice_fta.grammar
    e = examples[slice_example]
    res = SearchResult("exhausted")
    conc = FTA(g, "concrete", plugin.tag, plugin.granularity)
    checked: set[Program] = set()

    def tick():
        if time.perf_counter() - t0 > budget.wall_timeout:
            raise _OutOfBudget("wall timeout")

    def check(final) -> Program | None:
        for p in iter_programs(conc, final):
            if p in checked:
                continue
            tick()
            if res.programs_checked >= budget.max_programs_checked:
                raise _OutOfBudget("programs-checked limit")
            checked.add(p)
            res.programs_checked += 1
            ok = True
            for ex in examples:
                res.examples_checked += 1
                if eval_concrete(g, plugin, p, ex.inputs) != ex.output:
                    ok = False
                    break
            if ok:
                return p
        return None

    try:
        for touched in _concretize(slice_fta, plugin, e, conc, budget.max_concrete_states, tick):
            for q in sorted(touched):
                found = check(q)
                if found is not None:
                    assert satisfies(g, plugin, found, examples)
                    res.status, res.program = "found", found
                    return res
        res.reason = "slice concretization exhausted"
    except _OutOfBudget as exc:
        res.status, res.reason = "budget", str(exc)
    finally:
        res.concrete_states = conc.num_states
        res.wall_micros = int((time.perf_counter() - t0) * 1e6)
        log.debug("search %s: %d programs, %d concrete states", res.status,
                  res.programs_checked, res.concrete_states)
    return res


def _concretize(slice_fta: FTA, plugin, e: Example, conc: FTA, max_states=None, tick=None):
    """Fire slice transitions into ``conc``; yields the finals touched by each one."""
    g = slice_fta.grammar
    env = e.inputs
    order = {sym: i for i, sym in enumerate(g.topological_symbols)}
    for t in sorted(slice_fta.transitions, key=lambda t: (order[g.productions[t.prod].lhs], t)):
        if tick is not None:
            tick()
        prod = g.productions[t.prod]
        target = slice_fta.value(t.result)
        if g.is_variable(prod):
            c = env[prod.op]
            combos = [((), c)] if plugin.gamma_contains(target, c, env) else []
        else:
            pools = []
            for a in t.args:
                sym, av = slice_fta.states[a]
                pools.append([q for q in conc.by_symbol.get(sym, ())
                              if plugin.gamma_contains(av, conc.value(q), env)])
            combos = []
            for combo in itertools.product(*pools):
                c = plugin.concrete(prod, [conc.value(q) for q in combo])
                if c is not UNDEFINED:
                    combos.append((combo, c))
        touched = set()
        for combo, c in combos:
            q = conc.add_state(prod.lhs, c)
            if max_states is not None and conc.num_states > max_states:
                raise _OutOfBudget("concrete-state limit")
            if conc.add_transition(t.prod, combo, q) and prod.lhs == g.start and c == e.output:
                conc.finals.add(q)
                touched.add(q)
        yield touched


def build_concrete_fta(s, plugin, example: Example) -> FTA:
    """The full concretization of a slice on one example, without searching."""
    slice_fta = s.fta if hasattr(s, "fta") else s
    conc = FTA(slice_fta.grammar, "concrete", plugin.tag, plugin.granularity)
    for _ in _concretize(slice_fta, plugin, example, conc):
        pass
    return conc
