"""Example-specific slices of the offline FTA."""

from __future__ import annotations

import hashlib
import json
import time
from collections import deque
from dataclasses import dataclass

from .abstraction import abstract_input
from .automaton import FTA, build_online_fta, fta_fingerprint, trim
from .grammar import Example
from .oracle import FinalIndex, Oracle


@dataclass
class SliceMetrics:
    states_visited: int = 0
    states_admitted: int = 0
    transitions_admitted: int = 0
    oracle_queries: int = 0
    wall_micros: int = 0
    # states/transitions held before the final trim
    peak_states: int = 0
    peak_transitions: int = 0

    def to_json(self) -> dict:
        return {
            "statesVisited": self.states_visited,
            "statesAdmitted": self.states_admitted,
            "transitionsAdmitted": self.transitions_admitted,
            "oracleQueries": self.oracle_queries,
            "wallMicros": self.wall_micros,
        }


@dataclass
class Slice:
    fta: FTA
    metrics: SliceMetrics
    provenance: tuple = ()
    mode: str = "oracle"

    @property
    def empty(self) -> bool:
        return not self.fta.finals


def example_digest(plugin, example: Example) -> str:
    blob = json.dumps({"inputs": {x: plugin.format_concrete(v) for x, v in sorted(example.inputs.items())},
                       "output": plugin.format_concrete(example.output)}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def slice_fta(fta: FTA, oracle: Oracle, index: FinalIndex, plugin, example: Example) -> Slice:
    """Oracle-guided top-down extraction of the slice for ``example``.

    Output rule: finals from the index lookup whose value admits the output.
    Transition rule: an incoming transition is admitted only when every
    argument state is input-consistent. Input rule: a variable transition
    survives only when it carries the abstraction of the example input.
    """
    t0 = time.perf_counter_ns()
    g = fta.grammar
    gamma = abstract_input(plugin, example.inputs)
    m = SliceMetrics()
    consistent: dict[int, bool] = {}

    def query(q):
        if q not in consistent:
            m.oracle_queries += 1
            consistent[q] = oracle.input_consistent(q, gamma)
        return consistent[q]

    finals = []
    for q in index.lookup(gamma):
        if plugin.gamma_contains(fta.value(q), example.output, example.inputs):
            finals.append(q)
    admitted = set(finals)
    kept_t = []
    work = deque(sorted(finals))
    while work:
        q = work.popleft()
        m.states_visited += 1
        for tid in fta.incoming[q]:
            t = fta.transitions[tid]
            prod = g.productions[t.prod]
            if g.is_variable(prod):
                if fta.value(q) == gamma[prod.op]:
                    kept_t.append(tid)
                continue
            if all(query(a) for a in t.args):
                kept_t.append(tid)
                for a in t.args:
                    if a not in admitted:
                        admitted.add(a)
                        work.append(a)
    raw = fta.sub_fta(admitted, kept_t, finals, "slice")
    m.peak_states = raw.num_states
    m.peak_transitions = raw.num_transitions
    out = trim(raw, "slice")
    m.states_admitted = out.num_states
    m.transitions_admitted = out.num_transitions
    m.wall_micros = (time.perf_counter_ns() - t0) // 1000
    return Slice(out, m, (fta_fingerprint_cached(fta), example_digest(plugin, example)),
                 "oracle")


def slice_no_oracle(fta: FTA, plugin, example: Example) -> Slice:
    """Two-pass slicing without an oracle (bottom-up reachability, then top-down)."""
    t0 = time.perf_counter_ns()
    g = fta.grammar
    gamma = abstract_input(plugin, example.inputs)
    m = SliceMetrics()
    pending = [len(t.args) for t in fta.transitions]
    reached: set[int] = set()
    fired: list[int] = []
    touched: set[int] = set()
    work: deque[int] = deque()

    def fire(tid):
        fired.append(tid)
        r = fta.transitions[tid].result
        touched.add(r)
        if r not in reached:
            reached.add(r)
            work.append(r)

    for tid, t in enumerate(fta.transitions):
        if t.args:
            continue
        prod = g.productions[t.prod]
        if g.is_variable(prod) and fta.value(t.result) != gamma[prod.op]:
            continue
        fire(tid)
    while work:
        q = work.popleft()
        for tid in fta.outgoing[q]:
            t = fta.transitions[tid]
            touched.update(t.args)
            touched.add(t.result)
            pending[tid] -= sum(1 for a in t.args if a == q)
            if pending[tid] == 0:
                fire(tid)
    # top-down from output-consistent reachable finals
    finals = [q for q in sorted(fta.finals & reached)
              if plugin.gamma_contains(fta.value(q), example.output, example.inputs)]
    keep = set(finals)
    stack = list(finals)
    fired_set = set(fired)
    kept_t = []
    while stack:
        q = stack.pop()
        for tid in fta.incoming[q]:
            if tid not in fired_set:
                continue
            kept_t.append(tid)
            for a in fta.transitions[tid].args:
                if a not in keep:
                    keep.add(a)
                    stack.append(a)
    out = fta.sub_fta(keep, sorted(set(kept_t)), finals, "slice")
    m.peak_states = len(reached)
    m.peak_transitions = len(fired)
    m.states_visited = len(touched)
    m.states_admitted = out.num_states
    m.transitions_admitted = out.num_transitions
    m.wall_micros = (time.perf_counter_ns() - t0) // 1000
    return Slice(out, m, (fta_fingerprint_cached(fta), example_digest(plugin, example)),
                 "no-oracle")


def slice_from_scratch(g, plugin, example: Example, max_states=None,
                       max_transitions=None) -> Slice:
    """Online FTA construction for the example followed by trimming."""
    t0 = time.perf_counter_ns()
    online = build_online_fta(g, plugin, example, max_states, max_transitions)
    out = trim(online, "slice")
    m = SliceMetrics(
        states_visited=online.num_states,
        states_admitted=out.num_states,
        transitions_admitted=out.num_transitions,
        peak_states=online.num_states,
        peak_transitions=online.num_transitions,
        wall_micros=(time.perf_counter_ns() - t0) // 1000,
    )
    return Slice(out, m, (b"", example_digest(plugin, example)), "no-presyn")


def fta_fingerprint_cached(fta: FTA) -> bytes:
    fp = getattr(fta, "_fingerprint", None)
    if fp is None:
        fp = fta_fingerprint(fta)
        fta._fingerprint = fp
    return fp


__all__ = ["Slice", "SliceMetrics", "slice_fta", "slice_no_oracle", "slice_from_scratch"]
