"""Abstract-domain plugin contract and the shared conjunction machinery."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Any, Mapping, Sequence


class _Sentinel:
    def __init__(self, name):
        self.name = name

    def __repr__(self):
        return self.name

    def __reduce__(self):
        return self.name


BOTTOM = _Sentinel("BOTTOM")
"""Abstract result meaning "no state": the transformer rule does not apply."""

UNDEFINED = _Sentinel("UNDEFINED")
"""Concrete result of a partial operator outside its precondition."""


class CoverageError(ValueError):
    """An example input abstracts to a value outside the abstract input space."""


class DomainPlugin:
    """Base class for abstract domains.

    Subclasses supply concrete semantics, the abstraction of input values,
    concretization membership, abstract transformers and the finite space
    of abstract inputs per variable. Abstract values must be hashable and
    ``str(value)`` must be their canonical text encoding.
    """

    tag = ""
    granularity = 0

    def config(self) -> dict:
        raise NotImplementedError

    # concrete side
    def concrete(self, prod, args: Sequence[Any]):
        raise NotImplementedError

    def parse_concrete(self, raw, sort):
        return raw

    def format_concrete(self, value):
        return value

    # abstract side
    def abstract(self, var: str, value):
        raise NotImplementedError

    def gamma_contains(self, value, concrete, env: Mapping[str, Any] | None = None) -> bool:
        raise NotImplementedError

    def transform(self, prod, args: Sequence[Any]):
        raise NotImplementedError

    def input_space(self, var: str) -> tuple:
        raise NotImplementedError

    def decode(self, text: str):
        raise NotImplementedError

    def check_production(self, prod, is_variable: bool) -> list[str]:
        return []

    # samplers for randomized soundness checks
    def arg_sorts(self, prod) -> tuple:
        raise NotImplementedError

    def sample_env(self, rng: random.Random, variables: Sequence[str]) -> dict:
        raise NotImplementedError

    def sample_concrete(self, value, env, rng: random.Random):
        """Draw a member of gamma(value) under ``env``, or None if none is found."""
        raise NotImplementedError

    def random_abstract(self, sort, env, rng: random.Random):
        raise NotImplementedError


def abstract_input(plugin: DomainPlugin, inputs: Mapping[str, Any]) -> dict:
    """Abstract every bound variable; fail if the result is not in the input space."""
    out = {}
    for var in sorted(inputs):
        a = plugin.abstract(var, inputs[var])
        if a not in plugin.input_space(var):
            raise CoverageError(f"abstraction {a} of input {var!r} is outside the abstract input space")
        out[var] = a
    return out


def input_key(bindings: Mapping[str, Any]) -> tuple:
    """Hashable, canonically ordered form of a (partial) abstract input."""
    return tuple(sorted(bindings.items(), key=lambda kv: kv[0]))


def conjoin_transform(plugin, prod, args: Sequence[Any]):
    """Lift an atomic predicate transformer to conjunctions.

    The plugin's ``atomic(prod, preds)`` is applied to every tuple holding one
    predicate per argument. ``None`` results carry no information, a BOTTOM
    result makes the whole application BOTTOM, everything else is conjoined
    and canonicalized by ``plugin.canonical``.
    """
    if len(args) != len(prod.args):
        raise ValueError(f"{prod.op}: expected {len(prod.args)} arguments, got {len(args)}")
    if any(a is BOTTOM for a in args):
        raise ValueError(f"{prod.op}: bottom argument")
    out = []
    for preds in itertools.product(*(a.preds for a in args)):
        r = plugin.atomic(prod, preds)
        if r is BOTTOM:
            return BOTTOM
        if r is not None:
            out.append(r)
    return plugin.canonical(out)


def abstract_eval(g, plugin, program, gamma: Mapping[str, Any], memo: dict | None = None):
    """Abstract output of ``program`` under the abstract input ``gamma``."""
    if memo is not None and program in memo:
        return memo[program]
    idx = g.production_of(program)
    if idx is None:
        raise KeyError(f"no production for {program.symbol} -> {program.op}")
    prod = g.productions[idx]
    if g.is_variable(prod):
        result = gamma[prod.op]
    else:
        args = []
        result = None
        for child in program.children:
            v = abstract_eval(g, plugin, child, gamma, memo)
            if v is BOTTOM:
                result = BOTTOM
                break
            args.append(v)
        if result is None:
            result = plugin.transform(prod, args)
    if memo is not None:
        memo[program] = result
    return result


@dataclass(frozen=True)
class Counterexample:
    abstract_args: tuple
    concrete_args: tuple
    env: dict
    concrete_result: Any
    abstract_result: Any

    def __str__(self):
        return (f"f#{self.abstract_args} = {self.abstract_result} but "
                f"f{self.concrete_args} = {self.concrete_result!r} (env {self.env})")


@dataclass(frozen=True)
class SoundnessResult:
    trials: int
    skipped: int
    counterexample: Counterexample | None = None

    @property
    def passed(self) -> bool:
        return self.counterexample is None


def check_transformer_soundness(plugin: DomainPlugin, prod, trials: int = 1000,
                                seed: int = 0, pool: Sequence[tuple] | None = None,
                                variables: Sequence[str] = ("x",)) -> SoundnessResult:
    """Randomized check that f(c1..cn) is in gamma(f#(a1..an)) whenever ci is in gamma(ai).

    Abstract argument tuples come from ``pool`` when given (for instance the
    argument values of an offline FTA's transitions), otherwise from the
    plugin's ``random_abstract``. Trials where some gamma(ai) cannot be
    sampled, or where the concrete operator is undefined, are skipped and do
    not count towards ``trials``.
    """
    rng = random.Random(seed)
    sorts = plugin.arg_sorts(prod)
    done = skipped = 0
    attempts = 0
    while done < trials and attempts < 50 * trials:
        attempts += 1
        env = plugin.sample_env(rng, variables)
        if pool:
            absargs = tuple(pool[rng.randrange(len(pool))])
        else:
            absargs = tuple(plugin.random_abstract(s, env, rng) for s in sorts)
        cs = []
        for a in absargs:
            c = plugin.sample_concrete(a, env, rng)
            if c is None:
                break
            cs.append(c)
        else:
            c_out = plugin.concrete(prod, cs)
            if c_out is UNDEFINED:
                skipped += 1
                continue
            a_out = plugin.transform(prod, absargs)
            done += 1
            if a_out is BOTTOM or not plugin.gamma_contains(a_out, c_out, env):
                return SoundnessResult(done, skipped, Counterexample(
                    absargs, tuple(cs), dict(env), c_out, a_out))
            continue
        skipped += 1
    return SoundnessResult(done, skipped)
