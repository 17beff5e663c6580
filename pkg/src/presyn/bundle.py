"""On-disk presynthesis bundles: fta.bin, oracle.bin and manifest.json."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

from .automaton import FTA, build_offline_fta, deserialize_fta, serialize_fta
from .binfmt import FormatError, content_digest
from .domains import make_domain, string_grammar
from .grammar import Grammar, check_grammar, grammar_from_dict
from .oracle import (DEFAULT_INDEX_CAP, FinalIndex, Oracle, build_final_index, build_oracle,
                     deserialize_oracle, serialize_oracle)

FTA_FILE = "fta.bin"
ORACLE_FILE = "oracle.bin"
MANIFEST_FILE = "manifest.json"


@dataclass
class Bundle:
    grammar: Grammar
    plugin: object
    config: dict
    fta: FTA
    oracle: Oracle
    index: FinalIndex
    manifest: dict


def default_grammar(config: dict) -> Grammar:
    """Grammar implied by a string-domain config (unrolled Concat/Substr DSL)."""
    if config.get("domain") != "string":
        raise ValueError("a grammar file is required for this domain")
    return string_grammar(config.get("unrollDepth", 2), config.get("maxIndex", 6))


def counts(fta: FTA, oracle: Oracle, index: FinalIndex) -> dict:
    return {
        "states": fta.num_states,
        "transitions": fta.num_transitions,
        "finals": len(fta.finals),
        "variableTransitions": len(fta.variable_transitions()),
        "oracleClauses": oracle.total_clauses,
        "finalIndexEntries": len(index) if index.materialized else 0,
        "finalIndexMaterialized": index.materialized,
    }


def presynthesize(g: Grammar, config: dict, max_states=None, max_transitions=None,
                  index_cap: int = DEFAULT_INDEX_CAP):
    """Offline FTA, oracle and final index, with build timings (seconds)."""
    plugin = make_domain(config)
    check_grammar(g, plugin)
    t0 = time.perf_counter()
    fta = build_offline_fta(g, plugin, max_states, max_transitions)
    t1 = time.perf_counter()
    oracle = build_oracle(fta)
    t2 = time.perf_counter()
    index = build_final_index(fta, oracle, plugin, index_cap)
    t3 = time.perf_counter()
    timings = {"fta": t1 - t0, "oracle": t2 - t1, "index": t3 - t2}
    return plugin, fta, oracle, index, timings


def write_bundle(out_dir, g: Grammar, plugin, fta: FTA, oracle: Oracle, index: FinalIndex) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fta_bytes = serialize_fta(fta)
    oracle_bytes = serialize_oracle(oracle, index)
    manifest = {
        "formatVersion": 1,
        "grammar": g.to_dict(),
        "domainConfig": plugin.config(),
        "grammarFingerprint": g.fingerprint.hex(),
        "ftaFingerprint": content_digest(fta_bytes).hex(),
        "oracleFingerprint": content_digest(oracle_bytes).hex(),
        "counts": counts(fta, oracle, index),
    }
    (out / FTA_FILE).write_bytes(fta_bytes)
    (out / ORACLE_FILE).write_bytes(oracle_bytes)
    (out / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")
    return manifest


def read_manifest(bundle_dir) -> dict:
    path = Path(bundle_dir) / MANIFEST_FILE
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from None


def load_bundle(bundle_dir, index_cap: int = DEFAULT_INDEX_CAP) -> Bundle:
    """Load and cross-check a bundle: fingerprints chain and manifest counts match."""
    d = Path(bundle_dir)
    manifest = read_manifest(d)
    g = grammar_from_dict(manifest["grammar"])
    if g.fingerprint.hex() != manifest["grammarFingerprint"]:
        raise FormatError("manifest grammar does not match its fingerprint")
    config = manifest["domainConfig"]
    plugin = make_domain(config)
    fta_bytes = (d / FTA_FILE).read_bytes()
    fta = deserialize_fta(fta_bytes, g, plugin)
    if content_digest(fta_bytes).hex() != manifest["ftaFingerprint"]:
        raise FormatError("fta.bin does not match the manifest fingerprint")
    oracle, index = deserialize_oracle((d / ORACLE_FILE).read_bytes(), fta, plugin, index_cap)
    found = counts(fta, oracle, index)
    if found != manifest["counts"]:
        raise FormatError(f"manifest counts {manifest['counts']} differ from artifact {found}")
    return Bundle(g, plugin, config, fta, oracle, index, manifest)
