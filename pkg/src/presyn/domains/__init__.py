from .bitvec import BitVecDomain, LowBits
from .strings import StringDomain, string_grammar

__all__ = ["BitVecDomain", "LowBits", "StringDomain", "make_domain", "string_grammar"]

_CONFIG_KEYS = {
    "bitvec": {"domain", "width", "k"},
    "string": {"domain", "level", "maxInputLen", "maxIndex", "unrollDepth"},
}


def make_domain(config: dict, granularity: int | None = None):
    """Instantiate a plugin from a domain config; ``granularity`` overrides k/level."""
    tag = config.get("domain")
    if tag not in _CONFIG_KEYS:
        raise ValueError(f"unknown domain {tag!r}")
    unknown = set(config) - _CONFIG_KEYS[tag]
    if unknown:
        raise ValueError(f"unknown {tag} config fields: {sorted(unknown)}")
    if tag == "bitvec":
        k = config.get("k", 2) if granularity is None else granularity
        return BitVecDomain(width=config.get("width", 4), k=k)
    level = config.get("level", 3) if granularity is None else granularity
    return StringDomain(level=level, max_input_len=config.get("maxInputLen", 8),
                        max_index=config.get("maxIndex", 6),
                        unroll_depth=config.get("unrollDepth", 2))
