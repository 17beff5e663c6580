import json

import pytest
from hypothesis import given, strategies as st

from presyn.abstraction import UNDEFINED
from presyn.domains import BitVecDomain, StringDomain, string_grammar
from presyn.grammar import (Example, GrammarError, Production, Program, check_grammar,
                            count_programs, enumerate_programs, eval_concrete, examples_from_json,
                            examples_to_json, grammar_from_dict, load_grammar, program_from_sexpr,
                            unroll, validate_grammar)

from brute import bv_eval, concretely_satisfying


def _bv_dict(**overrides):
    d = {
        "start": "t1",
        "variables": [{"name": "x", "domain": "bitvec"}],
        "nonterminals": ["t1", "t0"],
        "productions": [
            {"lhs": "t1", "op": "add", "const": 1, "args": ["t0"]},
            {"lhs": "t0", "op": "x", "args": []},
        ],
    }
    d.update(overrides)
    return d


def test_worked_grammar_validates(bv_grammar):
    assert validate_grammar(bv_grammar, BitVecDomain()) == []
    assert bv_grammar.topological_symbols == ("t0", "t1", "t2")


def test_self_recursive_production_is_cyclic():
    d = _bv_dict()
    d["productions"].append({"lhs": "t1", "op": "shl", "const": 1, "args": ["t1"]})
    diags = validate_grammar(grammar_from_dict(d))
    assert any("cyclic production graph" in m for m in diags)


def test_unknown_start_symbol():
    diags = validate_grammar(grammar_from_dict(_bv_dict(start="t9")))
    assert any("unknown start symbol" in m for m in diags)


def test_undeclared_symbol_and_unused_variable():
    d = _bv_dict()
    d["productions"][0]["args"] = ["zz"]
    d["variables"].append({"name": "y", "domain": "bitvec"})
    diags = validate_grammar(grammar_from_dict(d))
    assert any("'zz'" in m for m in diags)
    assert any("'y' appears in no production" in m for m in diags)


def test_unknown_fields_rejected():
    with pytest.raises(GrammarError):
        grammar_from_dict(_bv_dict(extra=1))
    d = _bv_dict()
    d["productions"][0]["weight"] = 3
    with pytest.raises(GrammarError):
        grammar_from_dict(d)


def test_plugin_shape_check():
    d = _bv_dict()
    d["productions"][0] = {"lhs": "t1", "op": "xor", "const": 1, "args": ["t0"]}
    with pytest.raises(GrammarError, match="unknown operator"):
        check_grammar(grammar_from_dict(d), BitVecDomain())


def test_round_trip_dict(bv_grammar):
    assert grammar_from_dict(json.loads(json.dumps(bv_grammar.to_dict()))) == bv_grammar
    assert grammar_from_dict(bv_grammar.to_dict()).fingerprint == bv_grammar.fingerprint


@pytest.mark.parametrize("symbol,count", [("t2", 16), ("t1", 4), ("t0", 1)])
def test_enumeration_counts(bv_grammar, symbol, count):
    progs = list(enumerate_programs(bv_grammar, symbol))
    assert len(progs) == count == len(set(progs))
    assert count_programs(bv_grammar)[symbol] == count


def test_enumeration_order_is_declaration_order(bv_grammar):
    progs = [str(p) for p in enumerate_programs(bv_grammar)]
    assert progs[0] == "(add (add x 1) 1)"
    assert progs[-1] == "(shl (shl x 2) 2)"
    assert [str(p) for p in enumerate_programs(bv_grammar, "t0")] == ["x"]


def test_string_grammar_count_matches_recurrence():
    g = string_grammar(2, 6)
    n = count_programs(g)
    # I has 7 constants; S1 = x + concat + substr*7*7
    assert n["S1"] == 1 + 1 + 49
    assert n["S2"] == 1 + 51 * 51 + 51 * 49
    assert sum(1 for _ in enumerate_programs(g)) == n["S2"]


def test_eval_worked_programs(bv_grammar):
    p = BitVecDomain(4, 2)
    sol = program_from_sexpr(bv_grammar, "(add (shl x 2) 2)")
    assert eval_concrete(bv_grammar, p, sol, {"x": 0b0010}) == 0b1010
    assert eval_concrete(bv_grammar, p, sol, {"x": 0b0001}) == 0b0110
    other = program_from_sexpr(bv_grammar, "(shl (add x 2) 1)")
    assert eval_concrete(bv_grammar, p, other, {"x": 0b0001}) == 0b0110
    x = next(enumerate_programs(bv_grammar, "t0"))
    assert eval_concrete(bv_grammar, p, x, {"x": 0b0001}) == 0b0001


def test_unique_solution_of_both_examples(bv_grammar, bv2):
    plugin, E = bv2
    got = concretely_satisfying(bv_grammar, plugin, E, lambda p, env: bv_eval(p, env))
    assert {str(p) for p in got} == {"(add (shl x 2) 2)"}
    got1 = concretely_satisfying(bv_grammar, plugin, E[:1], lambda p, env: bv_eval(p, env))
    assert {str(p) for p in got1} == {"(add (shl x 2) 2)", "(shl (add x 2) 1)"}


def test_eval_unknown_operator_is_a_fault(bv_grammar):
    with pytest.raises(KeyError):
        eval_concrete(bv_grammar, BitVecDomain(), Program("t2", "mul", (), 3), {"x": 1})


def test_eval_undefined_propagates():
    g = string_grammar(1, 6)
    p = program_from_sexpr(g, "(substr x 1 5)")
    assert eval_concrete(g, StringDomain(), p, {"x": "ab"}) is UNDEFINED
    assert eval_concrete(g, StringDomain(), p, {"x": "abcdef"}) == "bcde"


@given(st.integers(0, 15))
def test_eval_matches_reference_and_is_deterministic(bv_grammar, x):
    plugin = BitVecDomain(4, 2)
    for p in enumerate_programs(bv_grammar):
        a = eval_concrete(bv_grammar, plugin, p, {"x": x})
        assert a == eval_concrete(bv_grammar, plugin, p, {"x": x}) == bv_eval(p, {"x": x})


def test_sexpr_round_trip(bv_grammar):
    for p in enumerate_programs(bv_grammar):
        assert program_from_sexpr(bv_grammar, str(p)) == p
    with pytest.raises(GrammarError):
        program_from_sexpr(bv_grammar, "(mul x 2)")


def test_examples_file(bv_grammar, data_dir):
    plugin = BitVecDomain(4, 2)
    raw = json.loads((data_dir / "bitvec_examples.json").read_text())
    E = examples_from_json(bv_grammar, plugin, raw)
    assert E[0] == Example({"x": 1}, 6)
    assert examples_to_json(plugin, E) == raw


@pytest.mark.parametrize("bad", [
    [{"inputs": {"y": "0b0001"}, "output": "0b0110"}],
    [{"inputs": {}, "output": "0b0110"}],
    [{"inputs": {"x": "0b10000"}, "output": "0b0110"}],
    [{"inputs": {"x": "0b0001"}}],
    {"inputs": {"x": "0b0001"}, "output": "0b0110"},
])
def test_bad_examples_rejected(bv_grammar, bad):
    with pytest.raises(GrammarError):
        examples_from_json(bv_grammar, BitVecDomain(), bad)


def test_unroll_recursive_grammar():
    rec = grammar_from_dict({
        "start": "S",
        "variables": [{"name": "x", "domain": "bitvec"}],
        "nonterminals": ["S"],
        "productions": [
            {"lhs": "S", "op": "x", "args": []},
            {"lhs": "S", "op": "add", "const": 1, "args": ["S"]},
            {"lhs": "S", "op": "shl", "const": 1, "args": ["S"]},
        ],
    })
    assert any("cyclic" in m for m in validate_grammar(rec))
    for depth in range(4):
        g = unroll(rec, depth)
        assert validate_grammar(g, BitVecDomain()) == []
        assert g.start == f"S_{depth}"
        # every program of height <= depth: 1 + 2 + 4 + ... + 2^depth
        assert count_programs(g)[g.start] == 2 ** (depth + 1) - 1


def test_unroll_keeps_acyclic_grammar(bv_grammar):
    assert unroll(bv_grammar, 3) == bv_grammar


def test_load_grammar_file(data_dir):
    g = load_grammar(data_dir / "bitvec_grammar.json")
    assert g.start == "t2" and g.variable_names == ("x",)
    assert Production("t2", "add", ("t1",), 2) in g.productions
