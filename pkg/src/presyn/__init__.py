"""Presynthesis: offline abstract FTAs, reachability oracles, slicing and search."""

from .abstraction import BOTTOM, UNDEFINED, CoverageError, abstract_eval, abstract_input
from .automaton import (FTA, BudgetExceeded, build_offline_fta, build_online_fta,
                        count_accepting_runs, deserialize_fta, serialize_fta, trim)
from .binfmt import ArtifactError, ChecksumError, FingerprintError, FormatError, VersionError
from .grammar import (Example, Grammar, GrammarError, Program, check_grammar, count_programs,
                      enumerate_programs, eval_concrete, load_grammar, program_from_sexpr)
from .oracle import FinalIndex, Oracle, build_final_index, build_oracle
from .search import SearchBudget, SearchResult, concretize_and_search
from .slicer import Slice, SliceMetrics, slice_fta, slice_from_scratch, slice_no_oracle

__all__ = [
    "BOTTOM", "UNDEFINED", "CoverageError", "abstract_eval", "abstract_input",
    "FTA", "BudgetExceeded", "build_offline_fta", "build_online_fta", "count_accepting_runs",
    "deserialize_fta", "serialize_fta", "trim",
    "ArtifactError", "ChecksumError", "FingerprintError", "FormatError", "VersionError",
    "Example", "Grammar", "GrammarError", "Program", "check_grammar", "count_programs",
    "enumerate_programs", "eval_concrete", "load_grammar", "program_from_sexpr",
    "FinalIndex", "Oracle", "build_final_index", "build_oracle",
    "SearchBudget", "SearchResult", "concretize_and_search",
    "Slice", "SliceMetrics", "slice_fta", "slice_from_scratch", "slice_no_oracle",
]
