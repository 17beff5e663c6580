"""Reachability oracle over an offline FTA and the final-state index.

For every state the oracle keeps a set of disjuncts; a disjunct is a partial
abstract input (sorted ``(variable, value)`` pairs). A full abstract input
satisfies a state's entry when it agrees with every binding of at least one
disjunct. Variables a disjunct does not mention are unconstrained.
"""

from __future__ import annotations

import itertools
import logging
from math import prod as _product
from typing import Mapping

from .automaton import FTA, BudgetExceeded, fta_fingerprint
from .binfmt import FingerprintError, FormatError, Reader, Writer

log = logging.getLogger(__name__)

ORACLE_MAGIC = b"PORC"
ORACLE_VERSION = 1
DEFAULT_INDEX_CAP = 10**6


def _dkey(d):
    return tuple((x, str(v)) for x, v in d)


def merge(d1: tuple, d2: tuple) -> tuple | None:
    """Conjoin two disjuncts; None when they bind a variable to different values."""
    if not d1:
        return d2
    if not d2:
        return d1
    m = dict(d1)
    for x, v in d2:
        w = m.get(x)
        if w is None:
            m[x] = v
        elif w != v:
            return None
    return tuple(sorted(m.items(), key=lambda kv: (kv[0], str(kv[1]))))


def reduce_subsumed(ds) -> tuple:
    """Drop every disjunct that has a strictly smaller (weaker) disjunct in the set."""
    kept: list[tuple] = []
    for d in sorted(set(ds), key=lambda d: (len(d), _dkey(d))):
        s = set(d)
        if not any(set(k) <= s for k in kept):
            kept.append(d)
    return tuple(sorted(kept, key=_dkey))


class Oracle:
    def __init__(self, fta: FTA, clauses: list[tuple], fingerprint: bytes | None = None):
        self.fta = fta
        self.clauses = clauses
        self.fingerprint = fingerprint if fingerprint is not None else fta_fingerprint(fta)

    def __getitem__(self, q: int) -> tuple:
        return self.clauses[q]

    def input_consistent(self, q: int, gamma: Mapping) -> bool:
        if not 0 <= q < len(self.clauses):
            raise KeyError(f"unknown state {q}")
        for d in self.clauses[q]:
            for x, v in d:
                if gamma.get(x) != v:
                    break
            else:
                return True
        return False

    @property
    def total_clauses(self) -> int:
        return sum(len(c) for c in self.clauses)

    def __eq__(self, other):
        if not isinstance(other, Oracle):
            return NotImplemented
        return self.fingerprint == other.fingerprint and self.clauses == other.clauses


def build_oracle(fta: FTA, max_clauses: int | None = None) -> Oracle:
    """Bottom-up DNF construction with contradiction and subsumption pruning."""
    if fta.kind != "offline":
        raise FingerprintError(f"oracle needs an offline FTA, got kind={fta.kind}")
    g = fta.grammar
    clauses: list[tuple] = [()] * fta.num_states
    total = 0
    for q in fta.topological_states():
        ds = set()
        for tid in sorted(fta.incoming[q], key=lambda i: fta.transitions[i]):
            t = fta.transitions[tid]
            prod = g.productions[t.prod]
            if g.is_variable(prod):
                ds.add(((prod.op, fta.value(q)),))
                continue
            merged = {()}
            for a in t.args:
                merged = {m for d1 in merged for d2 in clauses[a]
                          if (m := merge(d1, d2)) is not None}
                if not merged:
                    break
            ds |= merged
        clauses[q] = reduce_subsumed(ds)
        total += len(clauses[q])
        if max_clauses is not None and total > max_clauses:
            raise BudgetExceeded(f"oracle clause budget {max_clauses} exceeded",
                                 {"clauses": total, "state": q})
    log.debug("oracle: %d clauses over %d states", total, fta.num_states)
    return Oracle(fta, clauses)


class FinalIndex:
    """Maps each full abstract input to the final states it input-consistently reaches.

    Materialized when the input-space product is at most ``cap`` entries,
    otherwise answered per query from the oracle.
    """

    def __init__(self, variables, spaces, oracle: Oracle, table: dict | None):
        self.variables = tuple(variables)
        self.spaces = tuple(tuple(s) for s in spaces)
        self.oracle = oracle
        self.table = table

    @property
    def materialized(self) -> bool:
        return self.table is not None

    def key(self, gamma: Mapping) -> tuple:
        return tuple(gamma[x] for x in self.variables)

    def lookup(self, gamma: Mapping) -> tuple:
        if self.table is not None:
            return self.table.get(self.key(gamma), ())
        o = self.oracle
        return tuple(q for q in sorted(o.fta.finals) if o.input_consistent(q, gamma))

    def __len__(self):
        return _product(len(s) for s in self.spaces)

    def entries(self):
        for values in itertools.product(*self.spaces):
            gamma = dict(zip(self.variables, values))
            yield gamma, self.lookup(gamma)

    def __eq__(self, other):
        if not isinstance(other, FinalIndex):
            return NotImplemented
        return (self.variables == other.variables and self.spaces == other.spaces
                and self.table == other.table)


def build_final_index(fta: FTA, oracle: Oracle, plugin, cap: int = DEFAULT_INDEX_CAP) -> FinalIndex:
    variables = fta.grammar.variable_names
    spaces = [plugin.input_space(x) for x in variables]
    if _product(len(s) for s in spaces) > cap:
        return FinalIndex(variables, spaces, oracle, None)
    table: dict[tuple, list[int]] = {k: [] for k in itertools.product(*spaces)}
    pos = {x: i for i, x in enumerate(variables)}
    for q in sorted(fta.finals):
        hit = set()
        for d in oracle.clauses[q]:
            bound = dict(d)
            choices = [(bound[x],) if x in bound else spaces[pos[x]] for x in variables]
            hit.update(itertools.product(*choices))
        for k in hit:
            table[k].append(q)
    return FinalIndex(variables, spaces, oracle, {k: tuple(v) for k, v in table.items()})


def serialize_oracle(oracle: Oracle, index: FinalIndex | None = None) -> bytes:
    fta = oracle.fta
    variables = fta.grammar.variable_names
    var_pos = {x: i for i, x in enumerate(variables)}
    w = Writer(ORACLE_MAGIC, ORACLE_VERSION)
    w.raw(oracle.fingerprint)
    w.u32(len(variables))
    for x in variables:
        w.str(x)
    w.u32(len(oracle.clauses))
    for q, ds in enumerate(oracle.clauses):
        w.u32(q)
        w.u32(len(ds))
        for d in ds:
            w.u32(len(d))
            for x, v in d:
                w.u32(var_pos[x])
                w.str(str(v))
    if index is None or not index.materialized:
        w.u8(0)
    else:
        w.u8(1)
        w.u32(len(index.table))
        for key in sorted(index.table, key=lambda k: tuple(map(str, k))):
            for v in key:
                w.str(str(v))
            qs = index.table[key]
            w.u32(len(qs))
            for q in qs:
                w.u32(q)
    return w.finish()


def deserialize_oracle(data: bytes, fta: FTA, plugin,
                       cap: int = DEFAULT_INDEX_CAP) -> tuple[Oracle, FinalIndex]:
    r = Reader(data, ORACLE_MAGIC, ORACLE_VERSION)
    fp = r.raw(32)
    expected = fta_fingerprint(fta)
    if fp != expected:
        raise FingerprintError("oracle was built for a different FTA")
    variables = tuple(r.str() for _ in range(r.u32()))
    if variables != fta.grammar.variable_names:
        raise FormatError("oracle variable table does not match the grammar")
    decoded: dict[str, object] = {}

    def value(text):
        if text not in decoded:
            decoded[text] = plugin.decode(text)
        return decoded[text]

    n = r.u32()
    if n != fta.num_states:
        raise FormatError("oracle state count does not match the FTA")
    clauses = []
    for expect in range(n):
        if r.u32() != expect:
            raise FormatError("oracle clause table is not dense")
        ds = []
        for _ in range(r.u32()):
            ds.append(tuple((variables[r.u32()], value(r.str())) for _ in range(r.u32())))
        clauses.append(tuple(ds))
    oracle = Oracle(fta, clauses, fp)
    spaces = [plugin.input_space(x) for x in variables]
    if r.u8():
        table = {}
        for _ in range(r.u32()):
            key = tuple(value(r.str()) for _ in variables)
            table[key] = tuple(r.u32() for _ in range(r.u32()))
        index = FinalIndex(variables, spaces, oracle, table)
    else:
        index = build_final_index(fta, oracle, plugin, cap)
    r.done()
    return oracle, index
