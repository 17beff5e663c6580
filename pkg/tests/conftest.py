import json
from pathlib import Path

import pytest

from presyn.domains import BitVecDomain, StringDomain, string_grammar
from presyn.grammar import check_grammar, examples_from_json, load_grammar

DATA = Path(__file__).resolve().parents[1] / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def bv_grammar():
    return check_grammar(load_grammar(DATA / "bitvec_grammar.json"))


def bv_examples(g, k):
    plugin = BitVecDomain(4, k)
    return plugin, examples_from_json(g, plugin, json.loads((DATA / "bitvec_examples.json").read_text()))


@pytest.fixture(scope="session")
def bv2(bv_grammar):
    return bv_examples(bv_grammar, 2)


@pytest.fixture(scope="session")
def bv1(bv_grammar):
    return bv_examples(bv_grammar, 1)


@pytest.fixture(scope="session")
def small_strings():
    """Level-3 string domain small enough for exhaustive checks."""
    plugin = StringDomain(level=3, max_input_len=4, max_index=3, unroll_depth=2)
    return plugin, string_grammar(2, 3)


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
