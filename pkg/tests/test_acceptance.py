"""Acceptance criteria. Each test prints a PASS/FAIL line in the terminal summary."""

import hashlib
import itertools
import json
import math
import os
import random
import subprocess
import sys

import pytest

from presyn.abstraction import check_transformer_soundness
from presyn.automaton import (accepted_programs, build_offline_fta, build_online_fta,
                              count_accepting_runs, deserialize_fta, serialize_fta)
from presyn.binfmt import ChecksumError, FingerprintError, VersionError
from presyn.domains import BitVecDomain, StringDomain, string_grammar
from presyn.grammar import (Example, Production, count_programs, enumerate_programs,
                            grammar_from_dict)
from presyn.oracle import build_final_index, build_oracle, deserialize_oracle, serialize_oracle
from presyn.search import build_concrete_fta, concretize_and_search
from presyn.slicer import slice_fta, slice_from_scratch, slice_no_oracle
from presyn.tasks import Task, random_bitvec_grammar, random_examples, run_scaling

from acceptance_report import criterion
from brute import abstractly_satisfying, bv_eval, reachable_under
from conftest import DATA

GOLDEN = {
    "fta.bin": "8ff1f1c953bf428c81efa449499129fda4046c0fad615c6287f6efa08077a511",
    "oracle.bin": "40fe3d4bb7f02dad1dcbcb5f422df58afad3e1a745879e90f748aa8bcb8de44e",
    "manifest.json": "9e07857db37a46193b85da583b75517546987e133e5310702cf377e2e4de0168",
}

TWO_VAR = {
    "start": "t2",
    "variables": [{"name": "x", "domain": "bitvec"}, {"name": "y", "domain": "bitvec"}],
    "nonterminals": ["t2", "t1", "t0"],
    "productions": [
        {"lhs": "t2", "op": "add", "args": ["t1", "t1"]},
        {"lhs": "t2", "op": "shl", "const": 2, "args": ["t1"]},
        {"lhs": "t1", "op": "add", "args": ["t0", "t0"]},
        {"lhs": "t1", "op": "add", "const": 3, "args": ["t0"]},
        {"lhs": "t0", "op": "x"},
        {"lhs": "t0", "op": "y"},
        {"lhs": "t0", "op": "const", "const": 1},
    ],
}


def artifact(g, plugin):
    fta = build_offline_fta(g, plugin)
    oracle = build_oracle(fta)
    return fta, oracle, build_final_index(fta, oracle, plugin)


def slices(g, plugin, e, art):
    fta, oracle, index = art
    return (slice_fta(fta, oracle, index, plugin, e), slice_no_oracle(fta, plugin, e),
            slice_from_scratch(g, plugin, e))


def gmean(xs):
    return math.exp(sum(map(math.log, xs)) / len(xs))


def test_worked_run_counts(bv_grammar, bv1, bv2):
    with criterion(1, "worked example run counts and program space", limit=1.0):
        runs = [count_accepting_runs(build_online_fta(bv_grammar, p, E[0])) for p, E in (bv1, bv2)]
        assert runs == [12, 2]
        assert count_programs(bv_grammar)[bv_grammar.start] == 16
        assert len(set(enumerate_programs(bv_grammar))) == 16


def test_worked_synthesis(bv_grammar, bv2):
    with criterion(2, "worked synthesis in all three modes", limit=1.0):
        plugin, E = bv2
        art = artifact(bv_grammar, plugin)
        found = set()
        for s in slices(bv_grammar, plugin, E[0], art):
            res = concretize_and_search(s, plugin, E)
            assert res.status == "found"
            found.add(str(res.program))
        assert found == {"(add (shl x 2) 2)"}
        # independent check that the answer is the unique solution
        sols = [p for p in enumerate_programs(bv_grammar)
                if all(bv_eval(p, e.inputs) == e.output for e in E)]
        assert [str(p) for p in sols] == ["(add (shl x 2) 2)"]


def test_golden_oracle_entries(bv_grammar):
    with criterion(3, "golden oracle entries", limit=1.0):
        plugin = BitVecDomain(4, 2)
        fta, oracle, _ = artifact(bv_grammar, plugin)

        def entry(sym, val):
            q = fta.state_ids[(sym, plugin.decode(val))]
            return {tuple((x, str(v)) for x, v in d) for d in oracle[q]}

        assert entry("t1", "?01") == {(("x", "?00"),), (("x", "?11"),)}
        assert entry("t1", "?11") == {(("x", "?01"),), (("x", "?10"),)}
        for v in ("?00", "?01", "?10", "?11"):
            assert entry("t0", v) == {(("x", v),)}


def test_slice_equivalence_suite():
    with criterion(4, "slice language equals brute force (200 bit-vector + 50 string tasks)",
                   limit=300.0):
        rng = random.Random(2024)
        mismatches = tasks = 0
        for i in range(200):
            k = i % 4 + 1
            plugin = BitVecDomain(4, k)
            g = random_bitvec_grammar(rng, variables=("x", "y")[: rng.randint(1, 2)],
                                      max_programs=5000)
            art = artifact(g, plugin)
            if i % 3 == 2:
                e = Example({x: rng.randrange(16) for x in g.variable_names}, rng.randrange(16))
            else:
                (e,) = random_examples(g, plugin, rng, 1)
            expected = {str(p) for p in abstractly_satisfying(g, plugin, e)}
            got = [{str(p) for p in accepted_programs(s.fta)} for s in slices(g, plugin, e, art)]
            mismatches += sum(x != expected for x in got)
            tasks += 1
        assert tasks >= 200

        string_tasks = 0
        for level in (1, 2, 3):
            for variables in (("x",), ("x", "y")):
                plugin = StringDomain(level, max_input_len=4, max_index=3)
                g = string_grammar(2, 3, variables)
                art = artifact(g, plugin)
                n = 9 if len(variables) == 1 else 8
                while n:
                    ex = random_examples(g, plugin, rng, 1)
                    if not ex:
                        continue
                    e = ex[0]
                    expected = {str(p) for p in abstractly_satisfying(g, plugin, e)}
                    got = [{str(p) for p in accepted_programs(s.fta)}
                           for s in slices(g, plugin, e, art)]
                    mismatches += sum(x != expected for x in got)
                    string_tasks += 1
                    n -= 1
        assert string_tasks >= 50
        assert mismatches == 0


def _test_ftas():
    bv = grammar_from_dict(json.loads((DATA / "bitvec_grammar.json").read_text()))
    out = [(bv, BitVecDomain(4, k)) for k in (1, 2, 3, 4)]
    two = grammar_from_dict(TWO_VAR)
    out += [(two, BitVecDomain(4, k)) for k in (1, 2, 3)]
    rng = random.Random(5)
    for _ in range(20):
        g = random_bitvec_grammar(rng, variables=("x", "y")[: rng.randint(1, 2)], max_programs=5000)
        out.append((g, BitVecDomain(4, rng.randint(1, 4))))
    for level in (1, 2, 3):
        for variables in (("x",), ("x", "y")):
            out.append((string_grammar(2, 3, variables), StringDomain(level, 4, 3)))
    return out


def test_oracle_preciseness_suite():
    with criterion(5, "oracle agrees with brute-force reachability", limit=120.0):
        mismatches = checked = 0
        for g, plugin in _test_ftas():
            fta = build_offline_fta(g, plugin)
            assert fta.num_states <= 10**5
            oracle = build_oracle(fta)
            names = g.variable_names
            for values in itertools.product(*(plugin.input_space(x) for x in names)):
                gamma = dict(zip(names, values))
                reach = reachable_under(fta, gamma)
                for q in range(fta.num_states):
                    checked += 1
                    mismatches += oracle.input_consistent(q, gamma) != (q in reach)
        assert checked > 0 and mismatches == 0


def test_transformer_soundness():
    with criterion(6, "transformer soundness (10^4 trials per rule, exhaustive bit-vector)"):
        unary = [Production("t", op, ("s",), c) for op in ("add", "shl") for c in (1, 2, 3)]
        binadd = Production("t", "add", ("s", "s"))
        consts = [Production("t", "const", (), c) for c in (1, 2, 3)]
        for k in (1, 2, 3, 4):
            d = BitVecDomain(4, k)
            for prod in unary + [binadd] + consts:
                res = check_transformer_soundness(d, prod, trials=10**4, seed=k)
                assert res.passed, str(res.counterexample)
                assert res.trials == 10**4
            # exhaustive: every concrete argument in every matching abstract value
            for prod in unary:
                for a in d.input_space("x"):
                    out = d.transform(prod, [a])
                    for c in range(16):
                        if d.gamma_contains(a, c):
                            assert d.gamma_contains(out, d.concrete(prod, [c]))
            for a, b in itertools.product(d.input_space("x"), repeat=2):
                out = d.transform(binadd, [a, b])
                for c1, c2 in itertools.product(range(16), repeat=2):
                    if d.gamma_contains(a, c1) and d.gamma_contains(b, c2):
                        assert d.gamma_contains(out, d.concrete(binadd, [c1, c2]))
        string_rules = [Production("S", "concat", ("S", "S")), Production("S", "substr", ("S", "I", "I"))]
        string_rules += [Production("I", "idx", (), j) for j in range(4)]
        for level in (1, 2, 3):
            d = StringDomain(level)
            for prod in string_rules:
                res = check_transformer_soundness(d, prod, trials=10**4, seed=level)
                assert res.passed, str(res.counterexample)
                assert res.trials == 10**4


def test_scaling_direction():
    with criterion(7, "scaling direction over k=1..4"):
        rng = random.Random(0)
        rows = []
        for i in range(40):
            g = random_bitvec_grammar(rng, depth=rng.choice([2, 3]), max_programs=5000)
            task = Task(f"bv{i}", g, random_examples(g, BitVecDomain(4, 4), rng))
            rows += run_scaling(g, lambda k: BitVecDomain(4, k), [1, 2, 3, 4], [task])
        assert not any("error" in r for r in rows)
        by = {(r["task"], r["k"], r["mode"]): r for r in rows}
        names = sorted({r["task"] for r in rows})
        ratio, visited, peak = [], [], []
        for k in (1, 2, 3, 4):
            ratio.append(gmean([by[t, k, "no-presyn"]["peakStates"] / by[t, k, "oracle"]["peakStates"]
                                for t in names]))
            visited.append(gmean([by[t, k, "oracle"]["statesVisited"] for t in names]))
            peak.append(gmean([by[t, k, "no-presyn"]["peakStates"] for t in names]))
        print("ratio", [round(r, 3) for r in ratio], "visited growth", round(visited[3] / visited[0], 3),
              "peak growth", round(peak[3] / peak[0], 3))
        assert all(a < b for a, b in zip(ratio, ratio[1:]))
        assert visited[3] / visited[0] < 3
        assert peak[3] / peak[0] > 3


def _cli(args, seed, cwd):
    env = dict(os.environ, PYTHONHASHSEED=str(seed))
    return subprocess.run([sys.executable, "-m", "presyn.cli", *map(str, args)], cwd=cwd,
                          env=env, capture_output=True, text=True)


def _mask(obj):
    if isinstance(obj, dict):
        return {k: ("<masked>" if k == "wallMicros" else _mask(v)) for k, v in obj.items()}
    return obj


def test_determinism(tmp_path):
    with criterion(8, "determinism of bundles and synthesis JSON"):
        string_cfg = tmp_path / "string.json"
        string_cfg.write_text(json.dumps({"domain": "string", "level": 3, "maxInputLen": 4,
                                          "maxIndex": 3, "unrollDepth": 2}))
        string_ex = tmp_path / "string_ex.json"
        string_ex.write_text(json.dumps([{"inputs": {"x": "abc"}, "output": "bc"}]))
        setups = {
            "bv": (["--grammar", DATA / "bitvec_grammar.json", "--domain-config",
                    DATA / "bitvec_k2.json"], DATA / "bitvec_examples.json"),
            "str": (["--domain-config", string_cfg], string_ex),
        }
        runs = []
        for seed in (11, 12345):
            run = {}
            for name, (args, examples) in setups.items():
                out = tmp_path / f"{name}-{seed}"
                r = _cli(["presyn", *args, "--out", out], seed, tmp_path)
                assert r.returncode == 0, r.stderr
                for f in ("fta.bin", "oracle.bin", "manifest.json"):
                    run[name, f] = (out / f).read_bytes()
                for mode in ("oracle", "no-oracle", "no-presyn"):
                    r = _cli(["syn", "--bundle", out, "--examples", examples, "--mode", mode],
                             seed, tmp_path)
                    assert r.returncode == 0, r.stderr
                    run[name, mode] = json.dumps(_mask(json.loads(r.stdout)), sort_keys=True)
            runs.append(run)
        assert runs[0] == runs[1]
        for f, digest in GOLDEN.items():
            assert hashlib.sha256(runs[0]["bv", f]).hexdigest() == digest


def _reseal(data, offset, value):
    body = bytearray(data[:-32])
    body[offset] = value
    return bytes(body) + hashlib.sha256(body).digest()


def test_round_trip_and_faults():
    with criterion(9, "round-trip identity and fault detection"):
        corpus = 0
        rng = random.Random(9)
        for g, plugin in _test_ftas():
            fta, oracle, index = artifact(g, plugin)
            ex = random_examples(g, plugin, rng, 1)
            ftas = [fta]
            if ex:
                s = slice_fta(fta, oracle, index, plugin, ex[0])
                ftas += [build_online_fta(g, plugin, ex[0]), s.fta,
                         build_concrete_fta(s, plugin, ex[0])]
            for f in ftas:
                data = serialize_fta(f)
                back = deserialize_fta(data, g, plugin)
                assert back == f and serialize_fta(back) == data
                corpus += 1
            data = serialize_oracle(oracle, index)
            o2, i2 = deserialize_oracle(data, fta, plugin)
            assert o2 == oracle and i2 == index and serialize_oracle(o2, i2) == data

            fdata = serialize_fta(fta)
            for bad in (fdata[:-1], fdata[: len(fdata) // 2], _flip(fdata, rng)):
                with pytest.raises(ChecksumError):
                    deserialize_fta(bad, g, plugin)
            for bad in (data[:-1], _flip(data, rng)):
                with pytest.raises(ChecksumError):
                    deserialize_oracle(bad, fta, plugin)
            with pytest.raises(VersionError):
                deserialize_fta(_reseal(fdata, 4, 99), g, plugin)
            with pytest.raises(VersionError):
                deserialize_oracle(_reseal(data, 4, 99), fta, plugin)
            start = next(n for n in g.nonterminals if n != g.start)
            other = grammar_from_dict({**g.to_dict(), "start": start})
            with pytest.raises(FingerprintError):
                deserialize_fta(fdata, other, plugin)
        assert corpus > 50

        bv = grammar_from_dict(json.loads((DATA / "bitvec_grammar.json").read_text()))
        f1, o1, i1 = artifact(bv, BitVecDomain(4, 1))
        f2 = build_offline_fta(bv, BitVecDomain(4, 2))
        with pytest.raises(FingerprintError):
            deserialize_fta(serialize_fta(f1), bv, BitVecDomain(4, 2))
        with pytest.raises(FingerprintError):
            deserialize_oracle(serialize_oracle(o1, i1), f2, BitVecDomain(4, 2))


def _flip(data, rng):
    b = bytearray(data)
    b[rng.randrange(len(b) - 32)] ^= 0x40
    return bytes(b)
