"""Fixed-width bit-vectors abstracted to their lowest k bits."""

from __future__ import annotations

from dataclasses import dataclass

from ..abstraction import BOTTOM, DomainPlugin
from ..grammar import GrammarError


@dataclass(frozen=True, order=True)
class LowBits:
    k: int
    low: int

    def __str__(self):
        return "?" + format(self.low, f"0{self.k}b")


# op -> (arity with const, arity without const)
_ARITY = {"add": (1, 2), "shl": (1, None), "const": (0, None)}


class BitVecDomain(DomainPlugin):
    tag = "bitvec"

    def __init__(self, width: int = 4, k: int = 2):
        if not 1 <= k <= width:
            raise ValueError(f"k must be in 1..{width}, got {k}")
        self.width = width
        self.k = k
        self.granularity = k
        self._mask = (1 << width) - 1
        self._amask = (1 << k) - 1
        self._space = tuple(LowBits(k, i) for i in range(1 << k))

    def config(self):
        return {"domain": "bitvec", "width": self.width, "k": self.k}

    def check_production(self, prod, is_variable):
        if is_variable:
            return []
        arities = _ARITY.get(prod.op)
        if arities is None:
            return [f"bitvec: unknown operator {prod.op!r}"]
        want = arities[0] if prod.const is not None else arities[1]
        if want is None or want != len(prod.args):
            return [f"bitvec: operator {prod.op!r} with {len(prod.args)} arguments "
                    f"and const={prod.const!r} is not supported"]
        return []

    def _apply(self, prod, args, mask):
        op, c = prod.op, prod.const
        if op == "add":
            return ((args[0] + c) if c is not None else (args[0] + args[1])) & mask
        if op == "shl":
            return (args[0] << c) & mask
        if op == "const":
            return c & mask
        raise ValueError(f"bitvec: unknown operator {op!r}")

    def concrete(self, prod, args):
        return self._apply(prod, args, self._mask)

    def transform(self, prod, args):
        if any(a is BOTTOM for a in args):
            return BOTTOM
        return LowBits(self.k, self._apply(prod, [a.low for a in args], self._amask))

    def abstract(self, var, value):
        return LowBits(self.k, value & self._amask)

    def gamma_contains(self, value, concrete, env=None):
        return (isinstance(concrete, int) and 0 <= concrete <= self._mask
                and (concrete & self._amask) == value.low)

    def input_space(self, var):
        return self._space

    def decode(self, text):
        if not text.startswith("?") or len(text) != self.k + 1:
            raise ValueError(f"bad bit-vector abstract value {text!r}")
        return LowBits(self.k, int(text[1:], 2))

    def parse_concrete(self, raw, sort):
        if isinstance(raw, str):
            try:
                v = int(raw, 2) if raw.startswith("0b") else int(raw, 0)
            except ValueError:
                raise GrammarError(f"bad bit-vector literal {raw!r}") from None
        elif isinstance(raw, int) and not isinstance(raw, bool):
            v = raw
        else:
            raise GrammarError(f"bad bit-vector literal {raw!r}")
        if not 0 <= v <= self._mask:
            raise GrammarError(f"bit-vector literal {raw!r} exceeds width {self.width}")
        return v

    def format_concrete(self, value):
        return "0b" + format(value, f"0{self.width}b")

    # samplers
    def arg_sorts(self, prod):
        return ("bv",) * len(prod.args)

    def sample_env(self, rng, variables):
        return {x: rng.randrange(1 << self.width) for x in variables}

    def sample_concrete(self, value, env, rng):
        high = rng.randrange(1 << (self.width - self.k))
        return (high << self.k) | value.low

    def random_abstract(self, sort, env, rng):
        return LowBits(self.k, rng.randrange(1 << self.k))
