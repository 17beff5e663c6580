"""Concat/Substr string DSL with Len, FromInp and CharEq predicate templates.

Granularity levels enable template prefixes: level 1 tracks ``Len``, level 2
adds ``FromInp``, level 3 adds ``CharEq``. Index nonterminals are tracked
exactly with ``Index``.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass
from typing import NamedTuple

from ..abstraction import BOTTOM, UNDEFINED, CoverageError, DomainPlugin, conjoin_transform
from ..grammar import Grammar, GrammarError, Production, Variable

ALPHABET = string.ascii_lowercase + string.digits


class Len(NamedTuple):
    n: int

    def __str__(self):
        return f"Len({self.n})"


class FromInp(NamedTuple):
    idx: tuple
    var: str

    def __str__(self):
        return f"FromInp({_fmt_set(self.idx)},{self.var})"


class CharEq(NamedTuple):
    idx: tuple
    var: str
    pos: int

    def __str__(self):
        return f"CharEq({_fmt_set(self.idx)},{self.var},{self.pos})"


class Index(NamedTuple):
    j: int

    def __str__(self):
        return f"Index({self.j})"


_RANK = {Len: 0, FromInp: 1, CharEq: 2, Index: 3}
_LEVEL = {Len: 1, FromInp: 2, CharEq: 3, Index: 1}


def _fmt_set(idx):
    return "{" + ",".join(map(str, idx)) + "}"


def _sort_key(p):
    return (_RANK[type(p)], tuple(p))


@dataclass(frozen=True)
class StrAbs:
    """Canonical conjunction of predicates (sorted, merged, contradiction-free)."""

    preds: tuple

    def __str__(self):
        return "&".join(map(str, self.preds)) if self.preds else "True"

    def get(self, kind):
        return [p for p in self.preds if type(p) is kind]

    @property
    def length(self):
        for p in self.preds:
            if type(p) is Len:
                return p.n
        return None


def canonical(preds, level=3):
    """Merge, sort and check a predicate collection; BOTTOM on contradiction."""
    lens, idxs = set(), set()
    from_inp: dict[str, set] = {}
    char_eq: dict[tuple, set] = {}
    for p in preds:
        t = type(p)
        if _LEVEL[t] > level:
            continue
        if t is Len:
            lens.add(p.n)
        elif t is Index:
            idxs.add(p.j)
        elif t is FromInp:
            from_inp.setdefault(p.var, set()).update(p.idx)
        else:
            char_eq.setdefault((p.var, p.pos), set()).update(p.idx)
    if len(lens) > 1 or len(idxs) > 1:
        return BOTTOM
    n = next(iter(lens)) if lens else None
    out = [Len(n)] if lens else []
    out += [Index(j) for j in idxs]
    for var, js in from_inp.items():
        if js:
            if n is not None and max(js) >= n:
                return BOTTOM
            out.append(FromInp(tuple(sorted(js)), var))
    for (var, pos), js in char_eq.items():
        if js:
            if n is not None and max(js) >= n:
                return BOTTOM
            out.append(CharEq(tuple(sorted(js)), var, pos))
    out.sort(key=_sort_key)
    return StrAbs(tuple(out))


_PRED_RE = re.compile(r"(Len|Index)\((\d+)\)|FromInp\(\{([\d,]*)\},(\w+)\)|CharEq\(\{([\d,]*)\},(\w+),(\d+)\)")


def _ints(text):
    return tuple(int(t) for t in text.split(",") if t)


def decode_value(text: str) -> StrAbs:
    if text == "True":
        return StrAbs(())
    preds = []
    for part in text.split("&"):
        m = _PRED_RE.fullmatch(part)
        if not m:
            raise ValueError(f"bad string predicate {part!r}")
        if m.group(1) == "Len":
            preds.append(Len(int(m.group(2))))
        elif m.group(1) == "Index":
            preds.append(Index(int(m.group(2))))
        elif m.group(3) is not None:
            preds.append(FromInp(_ints(m.group(3)), m.group(4)))
        else:
            preds.append(CharEq(_ints(m.group(5)), m.group(6), int(m.group(7))))
    return StrAbs(tuple(preds))


def _shift(idx, k):
    return tuple(j + k for j in idx)


def _window(idx, lo, hi):
    return tuple(j - lo for j in idx if lo <= j < hi)


def atomic_concat(p1, p2):
    t1, t2 = type(p1), type(p2)
    if t1 is Len and t2 is Len:
        return Len(p1.n + p2.n)
    if t1 is FromInp or t1 is CharEq:
        return p1
    if t1 is Len and t2 is FromInp:
        return FromInp(_shift(p2.idx, p1.n), p2.var)
    if t1 is Len and t2 is CharEq:
        return CharEq(_shift(p2.idx, p1.n), p2.var, p2.pos)
    return None


def atomic_substr(p, left, right):
    lo, hi = left.j, right.j
    t = type(p)
    if t is Len:
        return Len(hi - lo) if lo <= hi <= p.n else BOTTOM
    if lo > hi:
        return BOTTOM
    if t is FromInp:
        return FromInp(_window(p.idx, lo, hi), p.var)
    if t is CharEq:
        return CharEq(_window(p.idx, lo, hi), p.var, p.pos)
    return None


class StringDomain(DomainPlugin):
    tag = "string"

    def __init__(self, level: int = 3, max_input_len: int = 8, max_index: int = 6,
                 unroll_depth: int = 2):
        if level not in (1, 2, 3):
            raise ValueError(f"string level must be 1, 2 or 3, got {level}")
        self.level = level
        self.granularity = level
        self.max_input_len = max_input_len
        self.max_index = max_index
        self.unroll_depth = unroll_depth
        self._spaces: dict[str, tuple] = {}

    def config(self):
        return {"domain": "string", "level": self.level, "maxInputLen": self.max_input_len,
                "maxIndex": self.max_index, "unrollDepth": self.unroll_depth}

    def check_production(self, prod, is_variable):
        if is_variable:
            return []
        want = {"concat": (2, False), "substr": (3, False), "idx": (0, True)}.get(prod.op)
        if want is None:
            return [f"string: unknown operator {prod.op!r}"]
        if want != (len(prod.args), prod.const is not None):
            return [f"string: bad shape for {prod.op!r}"]
        return []

    # concrete semantics
    def concrete(self, prod, args):
        op = prod.op
        if op == "concat":
            return args[0] + args[1]
        if op == "substr":
            s, lo, hi = args
            if 0 <= lo <= hi <= len(s):
                return s[lo:hi]
            return UNDEFINED
        if op == "idx":
            return prod.const
        raise ValueError(f"string: unknown operator {op!r}")

    # abstract semantics
    def atomic(self, prod, preds):
        op = prod.op
        if op == "concat":
            return atomic_concat(*preds)
        if op == "substr":
            return atomic_substr(*preds)
        if op == "idx":
            return Index(prod.const)
        raise ValueError(f"string: unknown operator {op!r}")

    def canonical(self, preds):
        return canonical(preds, self.level)

    def transform(self, prod, args):
        return conjoin_transform(self, prod, args)

    def input_value(self, var, length):
        preds = [Len(length)]
        if self.level >= 2:
            preds.append(FromInp(tuple(range(length)), var))
        if self.level >= 3:
            preds += [CharEq((j,), var, j) for j in range(length)]
        return canonical(preds, self.level)

    def abstract(self, var, value):
        if len(value) > self.max_input_len:
            raise CoverageError(
                f"input {var!r} has length {len(value)} > maxInputLen {self.max_input_len}")
        return self.input_value(var, len(value))

    def input_space(self, var):
        if var not in self._spaces:
            self._spaces[var] = tuple(self.input_value(var, n)
                                      for n in range(self.max_input_len + 1))
        return self._spaces[var]

    def gamma_contains(self, value, concrete, env=None):
        env = env or {}
        for p in value.preds:
            t = type(p)
            if t is Index:
                if not isinstance(concrete, int) or concrete != p.j:
                    return False
                continue
            if not isinstance(concrete, str):
                return False
            if t is Len:
                if len(concrete) != p.n:
                    return False
            elif t is FromInp:
                src = env.get(p.var)
                if src is None or any(j >= len(concrete) or concrete[j] not in src for j in p.idx):
                    return False
            elif t is CharEq:
                src = env.get(p.var)
                if src is None or p.pos >= len(src):
                    return False
                if any(j >= len(concrete) or concrete[j] != src[p.pos] for j in p.idx):
                    return False
        return True

    def decode(self, text):
        return decode_value(text)

    def parse_concrete(self, raw, sort):
        if isinstance(raw, (str, int)) and not isinstance(raw, bool):
            return raw
        raise GrammarError(f"bad string-domain literal {raw!r}")

    # samplers
    def arg_sorts(self, prod):
        return {"concat": ("str", "str"), "substr": ("str", "idx", "idx")}.get(prod.op, ())

    def sample_env(self, rng, variables):
        # a small alphabet makes FromInp/CharEq constraints non-trivial
        alpha = rng.choice([ALPHABET, "abc", "ab0"])
        return {x: "".join(rng.choice(alpha) for _ in range(rng.randint(0, self.max_input_len)))
                for x in variables}

    def sample_concrete(self, value, env, rng):
        if value.get(Index):
            return value.get(Index)[0].j
        n = value.length
        if n is None:
            n = rng.randint(0, self.max_input_len)
        chars = [None] * n
        for p in value.get(CharEq):
            src = env.get(p.var, "")
            if p.pos >= len(src):
                return None
            for j in p.idx:
                if j >= n or chars[j] not in (None, src[p.pos]):
                    return None
                chars[j] = src[p.pos]
        for p in value.get(FromInp):
            src = env.get(p.var, "")
            for j in p.idx:
                if j >= n:
                    return None
                if chars[j] is None:
                    if not src:
                        return None
                    chars[j] = rng.choice(src)
                elif chars[j] not in src:
                    return None
        return "".join(c if c is not None else rng.choice(ALPHABET) for c in chars)

    def best_abstraction(self, s, env):
        preds = [Len(len(s))]
        for var, src in sorted(env.items()):
            preds.append(FromInp(tuple(j for j, ch in enumerate(s) if ch in src), var))
            for pos, ch in enumerate(src):
                preds.append(CharEq(tuple(j for j, c in enumerate(s) if c == ch), var, pos))
        return canonical(preds, self.level)

    def random_abstract(self, sort, env, rng):
        if sort == "idx":
            return StrAbs((Index(rng.randint(0, self.max_index)),))
        pieces = []
        while rng.random() < 0.7 and len("".join(pieces)) < self.max_input_len:
            src = rng.choice(list(env.values()) or [""])
            if src and rng.random() < 0.7:
                lo = rng.randrange(len(src))
                pieces.append(src[lo:rng.randint(lo, len(src))])
            else:
                pieces.append(rng.choice(ALPHABET))
        best = self.best_abstraction("".join(pieces)[: self.max_input_len], env)
        # randomly weaken by dropping non-Len predicates
        kept = [p for p in best.preds if type(p) is Len or rng.random() < 0.6]
        return StrAbs(tuple(kept))


def string_grammar(depth: int = 2, max_index: int = 6, variables=("x",)) -> Grammar:
    """The finitized Concat/Substr DSL: S_d ::= x | concat(S_{d-1},S_{d-1}) | substr(S_{d-1},I,I)."""
    nts = ["I"] + [f"S{d}" for d in range(depth + 1)]
    prods = [Production("I", "idx", (), j) for j in range(max_index + 1)]
    for d in range(depth + 1):
        s = f"S{d}"
        prods += [Production(s, x) for x in variables]
        if d > 0:
            prev = f"S{d - 1}"
            prods.append(Production(s, "concat", (prev, prev)))
            prods.append(Production(s, "substr", (prev, "I", "I")))
    return Grammar(start=f"S{depth}", nonterminals=tuple(nts), productions=tuple(prods),
                   variables=tuple(Variable(x, "string") for x in variables), domain="string")
