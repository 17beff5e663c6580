"""Bottom-up finite tree automata over (symbol, abstract value) states."""

from __future__ import annotations

import itertools
import json
import logging
from typing import Any, Iterable, Iterator, NamedTuple

from .abstraction import BOTTOM, abstract_input
from .binfmt import FingerprintError, FormatError, Reader, Writer, content_digest
from .grammar import Example, Grammar, Program

log = logging.getLogger(__name__)

FTA_MAGIC = b"PFTA"
FTA_VERSION = 1
KINDS = ("online", "offline", "slice", "concrete")


class BudgetExceeded(RuntimeError):
    """Construction stopped at a configured size limit."""

    def __init__(self, message, progress: dict):
        super().__init__(f"{message} (progress: {progress})")
        self.progress = progress


class Transition(NamedTuple):
    prod: int
    args: tuple
    result: int


class FTA:
    """States are interned by (symbol, value); transitions are a set with
    incoming/outgoing indexes. ``domain_tag``/``granularity`` record the
    abstraction the automaton was built with.
    """

    def __init__(self, grammar: Grammar, kind: str, domain_tag: str = "", granularity: int = 0):
        if kind not in KINDS:
            raise ValueError(f"unknown FTA kind {kind!r}")
        self.grammar = grammar
        self.kind = kind
        self.domain_tag = domain_tag
        self.granularity = granularity
        self.states: list[tuple[str, Any]] = []
        self.state_ids: dict[tuple[str, Any], int] = {}
        self.transitions: list[Transition] = []
        self._tset: set[Transition] = set()
        self.incoming: list[list[int]] = []
        self.outgoing: list[list[int]] = []
        self.by_symbol: dict[str, list[int]] = {}
        self.finals: set[int] = set()

    # construction
    def add_state(self, symbol: str, value) -> int:
        key = (symbol, value)
        sid = self.state_ids.get(key)
        if sid is None:
            sid = len(self.states)
            self.states.append(key)
            self.state_ids[key] = sid
            self.incoming.append([])
            self.outgoing.append([])
            self.by_symbol.setdefault(symbol, []).append(sid)
        return sid

    def add_transition(self, prod: int, args: Iterable[int], result: int) -> bool:
        t = Transition(prod, tuple(args), result)
        if t in self._tset:
            return False
        self._tset.add(t)
        tid = len(self.transitions)
        self.transitions.append(t)
        self.incoming[result].append(tid)
        for a in set(t.args):
            self.outgoing[a].append(tid)
        return True

    def has_transition(self, t: Transition) -> bool:
        return t in self._tset

    # queries
    def symbol(self, q: int) -> str:
        return self.states[q][0]

    def value(self, q: int):
        return self.states[q][1]

    @property
    def num_states(self):
        return len(self.states)

    @property
    def num_transitions(self):
        return len(self.transitions)

    def variable_transitions(self) -> list[int]:
        g = self.grammar
        return [i for i, t in enumerate(self.transitions)
                if g.is_variable(g.productions[t.prod])]

    def topological_states(self) -> list[int]:
        rank = {s: i for i, s in enumerate(self.grammar.topological_symbols)}
        return sorted(range(self.num_states), key=lambda q: (rank[self.symbol(q)], q))

    def state_label(self, q: int) -> str:
        s, v = self.states[q]
        return f"q[{s}]^{v}"

    def canonical(self) -> "FTA":
        """Copy with states numbered by (symbol, value encoding) and sorted transitions."""
        order = sorted(range(self.num_states), key=lambda q: (self.symbol(q), str(self.value(q))))
        new = FTA(self.grammar, self.kind, self.domain_tag, self.granularity)
        remap = {}
        for q in order:
            remap[q] = new.add_state(*self.states[q])
        for t in sorted(Transition(t.prod, tuple(remap[a] for a in t.args), remap[t.result])
                        for t in self.transitions):
            new.add_transition(*t)
        new.finals = {remap[q] for q in self.finals}
        return new

    def sub_fta(self, states: Iterable[int], transitions: Iterable[int], finals: Iterable[int],
                kind: str) -> "FTA":
        """Restriction to the given state/transition ids, renumbered canonically."""
        keep = set(states)
        new = FTA(self.grammar, kind, self.domain_tag, self.granularity)
        for q in sorted(keep):
            new.add_state(*self.states[q])
        for tid in transitions:
            t = self.transitions[tid]
            new.add_transition(t.prod, [new.state_ids[self.states[a]] for a in t.args],
                               new.state_ids[self.states[t.result]])
        new.finals = {new.state_ids[self.states[q]] for q in finals}
        return new.canonical()

    def key_sets(self):
        """(states, transitions, finals) expressed by state keys, for cross-FTA comparison."""
        states = set(self.states)
        trans = {(t.prod, tuple(self.states[a] for a in t.args), self.states[t.result])
                 for t in self.transitions}
        finals = {self.states[q] for q in self.finals}
        return states, trans, finals

    def __eq__(self, other):
        if not isinstance(other, FTA):
            return NotImplemented
        return (self.kind == other.kind and self.states == other.states
                and self.transitions == other.transitions and self.finals == other.finals
                and self.grammar == other.grammar)

    __hash__ = None

    def __repr__(self):
        return (f"FTA(kind={self.kind}, states={self.num_states}, "
                f"transitions={self.num_transitions}, finals={len(self.finals)})")


def _saturate(fta: FTA, plugin, var_values, max_states=None, max_transitions=None) -> int:
    """Apply the variable/production rules until nothing new appears.

    Productions are processed symbol by symbol in topological order, which
    reaches the fixpoint in one pass for an acyclic grammar. Returns the
    number of transitions added.
    """
    g = fta.grammar
    added = 0
    for s in g.topological_symbols:
        for pi in g.by_lhs.get(s, []):
            prod = g.productions[pi]
            if g.is_variable(prod):
                for a in var_values(prod.op):
                    added += fta.add_transition(pi, (), fta.add_state(s, a))
                continue
            pools = [list(fta.by_symbol.get(a, ())) for a in prod.args]
            for combo in itertools.product(*pools):
                a = plugin.transform(prod, [fta.value(q) for q in combo])
                if a is BOTTOM:
                    continue
                added += fta.add_transition(pi, combo, fta.add_state(s, a))
                if max_states is not None and fta.num_states > max_states:
                    raise BudgetExceeded(f"state budget {max_states} exceeded", _progress(fta, s))
                if max_transitions is not None and fta.num_transitions > max_transitions:
                    raise BudgetExceeded(f"transition budget {max_transitions} exceeded",
                                         _progress(fta, s))
    return added


def _progress(fta, symbol):
    return {"states": fta.num_states, "transitions": fta.num_transitions, "symbol": symbol}


def build_offline_fta(g: Grammar, plugin, max_states=None, max_transitions=None) -> FTA:
    """Every abstract input value seeds a variable transition; all start states are final."""
    fta = FTA(g, "offline", plugin.tag, plugin.granularity)
    _saturate(fta, plugin, plugin.input_space, max_states, max_transitions)
    fta.finals = set(fta.by_symbol.get(g.start, ()))
    log.debug("offline FTA: %d states, %d transitions", fta.num_states, fta.num_transitions)
    return fta.canonical()


def build_online_fta(g: Grammar, plugin, example: Example, max_states=None,
                     max_transitions=None) -> FTA:
    """FTA for one example: one seed per variable, finals consistent with the output."""
    gamma = abstract_input(plugin, example.inputs)
    fta = FTA(g, "online", plugin.tag, plugin.granularity)
    _saturate(fta, plugin, lambda x: (gamma[x],), max_states, max_transitions)
    fta.finals = {q for q in fta.by_symbol.get(g.start, ())
                  if plugin.gamma_contains(fta.value(q), example.output, example.inputs)}
    return fta.canonical()


def resaturate(fta: FTA, plugin, example: Example | None = None) -> int:
    """Re-apply the construction rules to a built automaton; returns transitions added."""
    if example is None:
        var_values = plugin.input_space
    else:
        gamma = abstract_input(plugin, example.inputs)
        var_values = lambda x: (gamma[x],)  # noqa: E731
    before = fta.num_states
    added = _saturate(fta, plugin, var_values)
    return added + fta.num_states - before


def count_accepting_runs(fta: FTA) -> int:
    runs = [0] * fta.num_states
    for q in fta.topological_states():
        total = 0
        for tid in fta.incoming[q]:
            n = 1
            for a in fta.transitions[tid].args:
                n *= runs[a]
            total += n
        runs[q] = total
    return sum(runs[q] for q in fta.finals)


def run_states(fta: FTA, program: Program, bindings=None) -> set[int]:
    """All states some run of ``fta`` maps ``program`` to.

    With ``bindings`` (variable -> abstract value), variable leaves may only
    take the transition carrying their bound value.
    """
    g = fta.grammar
    pi = g.production_of(program)
    if pi is None:
        return set()
    prod = g.productions[pi]
    if not program.children:
        out = set()
        for tid in _transitions_of(fta, pi):
            q = fta.transitions[tid].result
            if bindings is not None and g.is_variable(prod) and fta.value(q) != bindings[prod.op]:
                continue
            out.add(q)
        return out
    child_sets = [run_states(fta, c, bindings) for c in program.children]
    if any(not s for s in child_sets):
        return set()
    out = set()
    for tid in _transitions_of(fta, pi):
        t = fta.transitions[tid]
        if all(a in cs for a, cs in zip(t.args, child_sets)):
            out.add(t.result)
    return out


def _transitions_of(fta: FTA, pi: int) -> list[int]:
    index = getattr(fta, "_by_prod", None)
    if index is None or index[0] != fta.num_transitions:
        by = {}
        for tid, t in enumerate(fta.transitions):
            by.setdefault(t.prod, []).append(tid)
        index = (fta.num_transitions, by)
        fta._by_prod = index
    return index[1].get(pi, [])


def language_contains(fta: FTA, program: Program, bindings=None) -> bool:
    return bool(run_states(fta, program, bindings) & fta.finals)


def programs_at(fta: FTA, q: int, memo: dict | None = None) -> list[Program]:
    """Distinct programs with a run ending at ``q`` (materialized; desk-scale use)."""
    memo = {} if memo is None else memo
    if q in memo:
        return memo[q]
    g = fta.grammar
    seen = {}
    for tid in sorted(fta.incoming[q], key=lambda i: fta.transitions[i]):
        t = fta.transitions[tid]
        prod = g.productions[t.prod]
        for kids in itertools.product(*(programs_at(fta, a, memo) for a in t.args)):
            p = Program(prod.lhs, prod.op, tuple(kids), prod.const)
            seen.setdefault(p, None)
    memo[q] = list(seen)
    return memo[q]


def accepted_programs(fta: FTA) -> set[Program]:
    memo: dict = {}
    out = set()
    for q in sorted(fta.finals):
        out.update(programs_at(fta, q, memo))
    return out


def iter_programs(fta: FTA, q: int) -> Iterator[Program]:
    """Lazily enumerate programs for the runs ending at ``q`` in transition order."""
    g = fta.grammar
    for tid in sorted(fta.incoming[q], key=lambda i: fta.transitions[i]):
        t = fta.transitions[tid]
        prod = g.productions[t.prod]
        for kids in _iter_product([lambda a=a: iter_programs(fta, a) for a in t.args]):
            yield Program(prod.lhs, prod.op, tuple(kids), prod.const)


def _iter_product(factories):
    if not factories:
        yield ()
        return
    head, rest = factories[0], factories[1:]
    for x in head():
        for tail in _iter_product(rest):
            yield (x,) + tail


def trim(fta: FTA, kind: str | None = None) -> FTA:
    """Drop states and transitions that lie on no accepting run."""
    productive = set()
    live_t = []
    for q in fta.topological_states():
        for tid in fta.incoming[q]:
            if all(a in productive for a in fta.transitions[tid].args):
                productive.add(q)
                break
    useful = set()
    stack = [q for q in fta.finals if q in productive]
    useful.update(stack)
    while stack:
        q = stack.pop()
        for tid in fta.incoming[q]:
            t = fta.transitions[tid]
            if all(a in productive for a in t.args):
                for a in t.args:
                    if a not in useful:
                        useful.add(a)
                        stack.append(a)
    for tid, t in enumerate(fta.transitions):
        if t.result in useful and all(a in useful for a in t.args):
            live_t.append(tid)
    return fta.sub_fta(useful, live_t, fta.finals & useful, kind or fta.kind)


# serialization

def serialize_fta(fta: FTA) -> bytes:
    g = fta.grammar
    w = Writer(FTA_MAGIC, FTA_VERSION)
    w.raw(g.fingerprint)
    w.str(fta.domain_tag)
    w.u32(fta.granularity)
    w.u8(KINDS.index(fta.kind))
    sym_index = {s: i for i, s in enumerate(g.nonterminals)}
    # concrete automata hold plain values (ints, strings), kept apart by JSON
    encode = json.dumps if fta.kind == "concrete" else str
    w.u32(fta.num_states)
    for q, (sym, val) in enumerate(fta.states):
        w.u32(q)
        w.u32(sym_index[sym])
        w.str(encode(val))
    w.u32(fta.num_transitions)
    for t in fta.transitions:
        w.u32(t.prod)
        w.u32(len(t.args))
        for a in t.args:
            w.u32(a)
        w.u32(t.result)
    finals = sorted(fta.finals)
    w.u32(len(finals))
    for q in finals:
        w.u32(q)
    return w.finish()


def fta_fingerprint(fta: FTA) -> bytes:
    return content_digest(serialize_fta(fta))


def deserialize_fta(data: bytes, g: Grammar, plugin) -> FTA:
    r = Reader(data, FTA_MAGIC, FTA_VERSION)
    if r.raw(32) != g.fingerprint:
        raise FingerprintError("FTA was built for a different grammar")
    tag = r.str()
    granularity = r.u32()
    if (tag, granularity) != (plugin.tag, plugin.granularity):
        raise FingerprintError(
            f"FTA built for {tag} granularity {granularity}, "
            f"loader uses {plugin.tag} granularity {plugin.granularity}")
    kind = KINDS[r.u8()]
    fta = FTA(g, kind, tag, granularity)
    decode = json.loads if kind == "concrete" else plugin.decode
    for expect in range(r.u32()):
        q = r.u32()
        if q != expect:
            raise FormatError("state table is not dense")
        sym = g.nonterminals[r.u32()]
        if fta.add_state(sym, decode(r.str())) != q:
            raise FormatError("duplicate state in state table")
    n_states = fta.num_states
    for _ in range(r.u32()):
        prod = r.u32()
        args = tuple(r.u32() for _ in range(r.u32()))
        res = r.u32()
        if prod >= len(g.productions) or any(a >= n_states for a in (*args, res)):
            raise FormatError("transition references an unknown state or production")
        fta.add_transition(prod, args, res)
    fta.finals = {r.u32() for _ in range(r.u32())}
    r.done()
    return fta
