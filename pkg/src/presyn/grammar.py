"""Finitized DSL grammars, programs as terms, and concrete evaluation."""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from graphlib import CycleError, TopologicalSorter
from typing import Any, Iterator, Mapping


class GrammarError(ValueError):
    """Raised when a grammar or examples file is malformed."""

    def __init__(self, diagnostics):
        if isinstance(diagnostics, str):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


@dataclass(frozen=True)
class Production:
    lhs: str
    op: str
    args: tuple[str, ...] = ()
    const: Any = None

    def key(self):
        return (self.lhs, self.op, self.const, self.args)


@dataclass(frozen=True)
class Variable:
    name: str
    domain: str


@dataclass(frozen=True)
class Program:
    """A term derived at ``symbol``.

    ``const`` is the literal attached to a parameterized production
    (``shl`` by 2, index constant 3, ...); it prints after the children.
    """

    symbol: str
    op: str
    children: tuple["Program", ...] = ()
    const: Any = None

    def __str__(self):
        if not self.children and self.const is not None:
            return str(self.const)
        if not self.children:
            return self.op
        parts = [self.op] + [str(c) for c in self.children]
        if self.const is not None:
            parts.append(str(self.const))
        return "(" + " ".join(parts) + ")"

    def size(self):
        return 1 + sum(c.size() for c in self.children)


@dataclass(frozen=True)
class Example:
    inputs: Mapping[str, Any]
    output: Any


@dataclass(frozen=True)
class Grammar:
    start: str
    nonterminals: tuple[str, ...]
    productions: tuple[Production, ...]
    variables: tuple[Variable, ...] = ()
    domain: str = field(default="", compare=False)

    @cached_property
    def variable_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @cached_property
    def by_lhs(self) -> dict[str, list[int]]:
        out: dict[str, list[int]] = {s: [] for s in self.nonterminals}
        for i, p in enumerate(self.productions):
            out.setdefault(p.lhs, []).append(i)
        return out

    @cached_property
    def production_index(self) -> dict[tuple, int]:
        return {p.key(): i for i, p in enumerate(self.productions)}

    def is_variable(self, prod: Production) -> bool:
        return not prod.args and prod.const is None and prod.op in self.variable_names

    @cached_property
    def topological_symbols(self) -> tuple[str, ...]:
        """Nonterminals by derivation height, ties in declaration order (acyclic grammars only)."""
        height: dict[str, int] = {}

        def h(s, stack=()):
            if s not in height:
                if s in stack:
                    raise GrammarError(f"cyclic production graph at {s!r}")
                args = [a for i in self.by_lhs.get(s, []) for a in self.productions[i].args]
                height[s] = 1 + max((h(a, stack + (s,)) for a in args), default=-1)
            return height[s]

        decl = {s: i for i, s in enumerate(self.nonterminals)}
        return tuple(sorted(self.nonterminals, key=lambda s: (h(s), decl[s])))

    def production_of(self, program: Program) -> int | None:
        key = (program.symbol, program.op, program.const,
               tuple(c.symbol for c in program.children))
        return self.production_index.get(key)

    def to_dict(self) -> dict:
        prods = []
        for p in self.productions:
            d: dict[str, Any] = {"lhs": p.lhs, "op": p.op}
            if p.const is not None:
                d["const"] = p.const
            d["args"] = list(p.args)
            prods.append(d)
        return {
            "start": self.start,
            "variables": [{"name": v.name, "domain": v.domain} for v in self.variables],
            "nonterminals": list(self.nonterminals),
            "productions": prods,
        }

    @cached_property
    def fingerprint(self) -> bytes:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).digest()


_GRAMMAR_KEYS = {"start", "variables", "nonterminals", "productions"}
_PROD_KEYS = {"lhs", "op", "const", "args"}
_VAR_KEYS = {"name", "domain"}


def grammar_from_dict(data: Mapping[str, Any]) -> Grammar:
    """Build a grammar from its JSON form. Unknown fields are rejected."""
    if not isinstance(data, Mapping):
        raise GrammarError("grammar must be a JSON object")
    unknown = set(data) - _GRAMMAR_KEYS
    if unknown:
        raise GrammarError(f"unknown grammar fields: {sorted(unknown)}")
    missing = {"start", "nonterminals", "productions"} - set(data)
    if missing:
        raise GrammarError(f"missing grammar fields: {sorted(missing)}")
    variables = []
    for v in data.get("variables", []):
        if set(v) - _VAR_KEYS or "name" not in v:
            raise GrammarError(f"bad variable entry: {v}")
        variables.append(Variable(v["name"], v.get("domain", "")))
    prods = []
    for p in data["productions"]:
        if set(p) - _PROD_KEYS:
            raise GrammarError(f"unknown production fields: {sorted(set(p) - _PROD_KEYS)}")
        if "lhs" not in p or "op" not in p:
            raise GrammarError(f"production needs lhs and op: {p}")
        prods.append(Production(p["lhs"], p["op"], tuple(p.get("args", [])), p.get("const")))
    domains = {v.domain for v in variables}
    return Grammar(
        start=data["start"],
        nonterminals=tuple(data["nonterminals"]),
        productions=tuple(prods),
        variables=tuple(variables),
        domain=domains.pop() if len(domains) == 1 else "",
    )


def load_grammar(path) -> Grammar:
    with open(path, encoding="utf-8") as fh:
        return grammar_from_dict(json.load(fh))


def validate_grammar(g: Grammar, plugin=None) -> list[str]:
    """Return a list of diagnostics; an empty list means the grammar is fine.

    With a domain ``plugin`` the operator shapes are checked against it too.
    """
    diags = []
    declared = set(g.nonterminals)
    if len(declared) != len(g.nonterminals):
        diags.append("duplicate nonterminal declaration")
    if g.start not in declared:
        diags.append(f"unknown start symbol: {g.start}")
    var_names = set(g.variable_names)
    if len(var_names) != len(g.variables):
        diags.append("duplicate variable declaration")
    for p in g.productions:
        for sym in (p.lhs, *p.args):
            if sym not in declared:
                diags.append(f"undeclared symbol {sym!r} in production {p.lhs} -> {p.op}")
        if p.op in var_names and (p.args or p.const is not None):
            diags.append(f"variable {p.op!r} used as an operator with arguments")
    seen = set()
    for p in g.productions:
        if p.key() in seen:
            diags.append(f"duplicate production {p.lhs} -> {p.op}")
        seen.add(p.key())
    arity: dict[tuple[str, bool], int] = {}
    for p in g.productions:
        k = (p.op, p.const is not None)
        if arity.setdefault(k, len(p.args)) != len(p.args):
            diags.append(f"operator {p.op!r} used with inconsistent arity")
    if plugin is not None:
        for p in g.productions:
            diags += plugin.check_production(p, g.is_variable(p))
    used = {p.op for p in g.productions if not p.args and p.const is None}
    for v in g.variables:
        if v.name not in used:
            diags.append(f"variable {v.name!r} appears in no production")
    if not diags:
        ts = TopologicalSorter({s: () for s in g.nonterminals})
        for p in g.productions:
            ts.add(p.lhs, *p.args)
        try:
            ts.prepare()
        except CycleError as exc:
            diags.append(f"cyclic production graph: {' -> '.join(exc.args[1])}")
    if not diags:
        counts = count_programs(g)
        for s in g.nonterminals:
            if counts[s] == 0:
                diags.append(f"symbol {s!r} derives no program")
    return diags


def check_grammar(g: Grammar, plugin=None) -> Grammar:
    diags = validate_grammar(g, plugin)
    if diags:
        raise GrammarError(diags)
    return g


def count_programs(g: Grammar) -> dict[str, int]:
    """Number of programs derivable from every symbol (sum-of-products recurrence)."""
    counts: dict[str, int] = {}
    for s in g.topological_symbols:
        total = 0
        for i in g.by_lhs.get(s, []):
            n = 1
            for a in g.productions[i].args:
                n *= counts[a]
            total += n
        counts[s] = total
    return counts


def enumerate_programs(g: Grammar, symbol: str | None = None) -> Iterator[Program]:
    """Yield every program derivable from ``symbol`` exactly once.

    Order: productions in declaration order, then the cartesian product of
    children with the leftmost child varying slowest.
    """
    cache: dict[str, list[Program]] = {}

    def progs(s: str) -> list[Program]:
        if s not in cache:
            cache[s] = list(gen(s))
        return cache[s]

    def gen(s: str) -> Iterator[Program]:
        for i in g.by_lhs.get(s, []):
            p = g.productions[i]
            for kids in itertools.product(*(progs(a) for a in p.args)):
                yield Program(s, p.op, tuple(kids), p.const)

    symbol = g.start if symbol is None else symbol
    # Children are materialized (they are shared); the root level streams.
    yield from gen(symbol)


def eval_concrete(g: Grammar, plugin, program: Program, inputs: Mapping[str, Any]):
    """Evaluate bottom-up with the plugin's concrete semantics.

    Returns ``UNDEFINED`` when a partial operator's precondition fails.
    Raises ``KeyError`` for an operator that is not in the grammar.
    """
    from .abstraction import UNDEFINED

    idx = g.production_of(program)
    if idx is None:
        raise KeyError(f"no production for {program.symbol} -> {program.op}")
    prod = g.productions[idx]
    if g.is_variable(prod):
        return inputs[prod.op]
    args = []
    for child in program.children:
        v = eval_concrete(g, plugin, child, inputs)
        if v is UNDEFINED:
            return UNDEFINED
        args.append(v)
    return plugin.concrete(prod, args)


def program_from_sexpr(g: Grammar, text: str, symbol: str | None = None) -> Program:
    """Parse the s-expression output format back into a program of ``g``."""
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    pos = 0

    def read():
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            items = []
            while tokens[pos] != ")":
                items.append(read())
            pos += 1
            return items
        return tok

    tree = read()
    if pos != len(tokens):
        raise GrammarError(f"trailing tokens in {text!r}")

    def literal(tok, const):
        return not isinstance(tok, list) and str(const) == tok

    def match(node, s) -> Program | None:
        for i in g.by_lhs.get(s, []):
            p = g.productions[i]
            if not isinstance(node, list):
                if not p.args and (p.const is None and node == p.op or
                                   p.const is not None and literal(node, p.const)):
                    return Program(s, p.op, (), p.const)
                continue
            if not node or node[0] != p.op:
                continue
            rest = node[1:]
            expect = len(p.args) + (p.const is not None)
            if len(rest) != expect:
                continue
            if p.const is not None and not literal(rest[-1], p.const):
                continue
            kids = []
            for child, a in zip(rest, p.args):
                m = match(child, a)
                if m is None:
                    break
                kids.append(m)
            else:
                return Program(s, p.op, tuple(kids), p.const)
        return None

    prog = match(tree, g.start if symbol is None else symbol)
    if prog is None:
        raise GrammarError(f"{text!r} is not derivable in the grammar")
    return prog


def unroll(g: Grammar, depth: int) -> Grammar:
    """Mechanically unroll a recursive grammar to ``depth``.

    Every symbol that lies on or reaches a cycle becomes ``s_0 .. s_depth``;
    ``s_d`` keeps each production whose recursive arguments can be taken at
    ``d-1``. Unproductive and unreachable copies are pruned afterwards.
    """
    graph: dict[str, set[str]] = {s: set() for s in g.nonterminals}
    for p in g.productions:
        graph[p.lhs].update(p.args)

    def reaches(s, target, seen):
        for a in graph[s]:
            if a == target:
                return True
            if a not in seen:
                seen.add(a)
                if reaches(a, target, seen):
                    return True
        return False

    on_cycle = {s for s in g.nonterminals if reaches(s, s, set())}
    recursive = {s for s in g.nonterminals
                 if s in on_cycle or any(reaches(s, c, set()) for c in on_cycle)}

    def name(s, d):
        return f"{s}_{d}" if s in recursive else s

    prods = []
    symbols = []
    for s in g.nonterminals:
        if s not in recursive:
            symbols.append(s)
    for d in range(depth + 1):
        for s in g.nonterminals:
            if s in recursive:
                symbols.append(name(s, d))
    for p in g.productions:
        if p.lhs not in recursive:
            prods.append(p)
    for d in range(depth + 1):
        for p in g.productions:
            if p.lhs not in recursive:
                continue
            if any(a in recursive for a in p.args) and d == 0:
                continue
            args = tuple(name(a, d - 1) if a in recursive else a for a in p.args)
            prods.append(Production(name(p.lhs, d), p.op, args, p.const))
    start = name(g.start, depth)

    # prune: productive first, then reachable from start
    productive: set[str] = set()
    changed = True
    while changed:
        changed = False
        for p in prods:
            if p.lhs not in productive and all(a in productive for a in p.args):
                productive.add(p.lhs)
                changed = True
    prods = [p for p in prods if p.lhs in productive and all(a in productive for a in p.args)]
    reach = {start}
    stack = [start]
    while stack:
        s = stack.pop()
        for p in prods:
            if p.lhs == s:
                for a in p.args:
                    if a not in reach:
                        reach.add(a)
                        stack.append(a)
    prods = [p for p in prods if p.lhs in reach]
    return Grammar(
        start=start,
        nonterminals=tuple(s for s in symbols if s in reach),
        productions=tuple(prods),
        variables=g.variables,
        domain=g.domain,
    )


def examples_from_json(g: Grammar, plugin, data) -> list[Example]:
    """Parse the examples file format, checking variable bindings."""
    if not isinstance(data, list):
        raise GrammarError("examples file must be a JSON list")
    out = []
    declared = set(g.variable_names)
    sorts = {v.name: v.domain for v in g.variables}
    for i, item in enumerate(data):
        if not isinstance(item, Mapping) or set(item) != {"inputs", "output"}:
            raise GrammarError(f"example {i}: expected keys 'inputs' and 'output'")
        bound = set(item["inputs"])
        if bound != declared:
            extra, missing = sorted(bound - declared), sorted(declared - bound)
            raise GrammarError(
                f"example {i}: unknown variables {extra}, missing variables {missing}")
        inputs = {x: plugin.parse_concrete(v, sorts[x]) for x, v in item["inputs"].items()}
        out.append(Example(inputs, plugin.parse_concrete(item["output"], None)))
    return out


def examples_to_json(plugin, examples) -> list[dict]:
    return [{"inputs": {x: plugin.format_concrete(v) for x, v in e.inputs.items()},
             "output": plugin.format_concrete(e.output)} for e in examples]
