"""N-gram token map: build, rank, prune/merge, query and (de)serialize.

A token map sends every n-gram key (n = 1..max_n) seen in the training
transcriptions to a short ranked list of continuations that followed it.
Continuations are stored as full suffixes up to and including EOS; pruning
shortens them by merging candidates to their longest common prefix.
"""

from __future__ import annotations

import json
import os
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .corpus import RESERVED
from .errors import CorruptMap, EmptyMerge, InvalidConfig, SchemaVersionMismatch

SCHEMA_VERSION = 1
DEFAULT_MAX_N = 3

NgramKey = tuple[int, ...]

_RESERVED = frozenset(RESERVED)


@dataclass(frozen=True, order=False)
class Candidate:
    continuation: tuple[int, ...]
    frequency: int = 1

    def __post_init__(self):
        if not self.continuation:
            raise ValueError("candidate continuation must be non-empty")
        if self.frequency < 1:
            raise ValueError("candidate frequency must be >= 1")

    def __len__(self) -> int:
        return len(self.continuation)

    @property
    def rank_key(self) -> tuple:
        # longer first, then more frequent, then lexicographically smaller
        return (-len(self.continuation), -self.frequency, self.continuation)


def rank(candidates: Iterable[Candidate]) -> list[Candidate]:
    return sorted(candidates, key=lambda c: c.rank_key)


@dataclass(frozen=True)
class PruneConfig:
    """Pruning thresholds.

    ``min_len_by_count[k]`` is the shortest continuation a key may keep when it
    retains ``k`` candidates. The defaults are the crossover lengths where
    verifying 2 or 3 candidates per step starts to beat plain decoding.
    """

    max_candidates: int = 3
    min_len_by_count: Mapping[int, int] = field(
        default_factory=lambda: {1: 1, 2: 9, 3: 16}
    )
    min_frequency: int = 1

    def __post_init__(self):
        if self.max_candidates < 1:
            raise InvalidConfig("max_candidates must be >= 1")
        if self.min_frequency < 1:
            raise InvalidConfig("min_frequency must be >= 1")
        table = {int(k): int(v) for k, v in self.min_len_by_count.items()}
        missing = [k for k in range(1, self.max_candidates + 1) if k not in table]
        if missing:
            raise InvalidConfig(f"min_len_by_count missing candidate counts {missing}")
        lens = [table[k] for k in range(1, self.max_candidates + 1)]
        if any(b < a for a, b in zip(lens, lens[1:])):
            raise InvalidConfig("min_len_by_count must be non-decreasing in count")
        if lens[0] < 1:
            raise InvalidConfig("minimum continuation length must be >= 1")
        object.__setattr__(self, "min_len_by_count", table)

    def min_len_for(self, count: int) -> int:
        return self.min_len_by_count[count]

    def satisfied_by(self, candidates: Sequence[Candidate]) -> bool:
        k = len(candidates)
        if k == 0:
            return True
        if k > self.max_candidates:
            return False
        return min(len(c) for c in candidates) >= self.min_len_for(k)

    def to_dict(self) -> dict:
        return {
            "max_candidates": self.max_candidates,
            "min_len_by_count": {str(k): v for k, v in sorted(self.min_len_by_count.items())},
            "min_frequency": self.min_frequency,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PruneConfig":
        return cls(
            max_candidates=int(d["max_candidates"]),
            min_len_by_count={int(k): int(v) for k, v in d["min_len_by_count"].items()},
            min_frequency=int(d["min_frequency"]),
        )


@dataclass(frozen=True)
class TokenMap:
    max_n: int
    entries: dict[NgramKey, tuple[Candidate, ...]]
    prune_config: PruneConfig | None = None
    vocab: tuple[str, ...] | None = None

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key) -> bool:
        return tuple(key) in self.entries

    def __getitem__(self, key) -> tuple[Candidate, ...]:
        return self.entries[tuple(key)]

    @property
    def n_candidates(self) -> int:
        return sum(len(v) for v in self.entries.values())

    @property
    def vocab_size(self) -> int | None:
        return None if self.vocab is None else len(self.vocab)

    def lookup(self, context: Sequence[int]) -> list[Candidate]:
        return lookup(self, context)


def _check_max_n(max_n: int) -> None:
    if max_n < 1:
        raise InvalidConfig(f"max_n must be >= 1, got {max_n}")


def build_raw_map(
    sequences: Sequence[Sequence[int]],
    max_n: int = DEFAULT_MAX_N,
    vocab: Sequence[str] | None = None,
) -> TokenMap:
    """Map every n-gram (n <= max_n) to the suffixes that followed it, with counts.

    Keys containing reserved ids are skipped. Each position ``p`` contributes
    the full remaining suffix ``tokens[p:]`` to the keys ending just before it.
    """
    _check_max_n(max_n)
    counts: dict[NgramKey, Counter] = defaultdict(Counter)
    for seq in sequences:
        toks = tuple(seq)
        for p in range(1, len(toks)):
            suffix = toks[p:]
            for n in range(1, min(max_n, p) + 1):
                key = toks[p - n:p]
                if _RESERVED.intersection(key):
                    break
                counts[key][suffix] += 1
    entries = {
        key: tuple(rank(Candidate(c, f) for c, f in ctr.items()))
        for key, ctr in counts.items()
    }
    return TokenMap(max_n, entries, None, None if vocab is None else tuple(vocab))


def common_prefix_len(a: Sequence[int], b: Sequence[int]) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


def merge_candidates(a: Candidate, b: Candidate) -> Candidate:
    """Collapse two candidates to their longest common prefix with summed frequency."""
    n = common_prefix_len(a.continuation, b.continuation)
    if n == 0:
        raise EmptyMerge(f"no common prefix between {a.continuation} and {b.continuation}")
    return Candidate(a.continuation[:n], a.frequency + b.frequency)


def _nearest_pair(cands: list[Candidate]) -> tuple[int, int, int]:
    # cands is ranked, so scanning pairs in (i, j) order breaks LCP ties by rank
    best = (0, 1, -1)
    for i in range(len(cands)):
        for j in range(i + 1, len(cands)):
            lcp = common_prefix_len(cands[i].continuation, cands[j].continuation)
            if lcp > best[2]:
                best = (i, j, lcp)
    return best


def _absorb(cands: list[Candidate], new: Candidate) -> list[Candidate]:
    for idx, c in enumerate(cands):
        if c.continuation == new.continuation:
            cands[idx] = Candidate(c.continuation, c.frequency + new.frequency)
            return rank(cands)
    return rank(cands + [new])


def _settle(cands: list[Candidate], config: PruneConfig) -> list[Candidate]:
    while cands and not config.satisfied_by(cands):
        if len(cands) == 1:
            return []
        i, j, lcp = _nearest_pair(cands)
        if lcp == 0:
            cands = cands[:-1]
            continue
        merged = merge_candidates(cands[i], cands[j])
        rest = [c for k, c in enumerate(cands) if k not in (i, j)]
        cands = _absorb(rest, merged)
    return cands


def prune_candidates(candidates: Iterable[Candidate], config: PruneConfig) -> list[Candidate]:
    """Filter, rank, truncate and merge one key's candidate list."""
    kept = rank(c for c in candidates if c.frequency >= config.min_frequency)
    return _settle(kept[: config.max_candidates], config)


def prune(token_map: TokenMap, config: PruneConfig | None = None) -> TokenMap:
    config = config or PruneConfig()
    entries: dict[NgramKey, tuple[Candidate, ...]] = {}
    for key, cands in token_map.entries.items():
        kept = prune_candidates(cands, config)
        if kept:
            entries[key] = tuple(kept)
    return TokenMap(token_map.max_n, entries, config, token_map.vocab)


def build_map(
    sequences: Sequence[Sequence[int]],
    max_n: int = DEFAULT_MAX_N,
    config: PruneConfig | None = None,
    vocab: Sequence[str] | None = None,
) -> TokenMap:
    return prune(build_raw_map(sequences, max_n, vocab), config)


def context_keys(token_map: TokenMap, context: Sequence[int]) -> list[NgramKey]:
    """Candidate keys for ``context``, longest first, reserved ids skipped."""
    usable: list[int] = []
    for t in reversed(context):
        if len(usable) == token_map.max_n:
            break
        if t not in _RESERVED:
            usable.append(t)
    usable.reverse()
    return [tuple(usable[-n:]) for n in range(len(usable), 0, -1)]


def lookup(token_map: TokenMap, context: Sequence[int]) -> list[Candidate]:
    """Candidates of the longest n-gram key ending the context; [] on a miss."""
    entries = token_map.entries
    for key in context_keys(token_map, context):
        hit = entries.get(key)
        if hit is not None:
            return list(hit)
    return []


# --- serialization -------------------------------------------------------


def map_to_dict(token_map: TokenMap) -> dict:
    return {
        "version": SCHEMA_VERSION,
        "max_n": token_map.max_n,
        "n_entries": len(token_map.entries),
        "n_candidates": token_map.n_candidates,
        "prune_config": None if token_map.prune_config is None else token_map.prune_config.to_dict(),
        "vocab": None if token_map.vocab is None else list(token_map.vocab),
        "entries": [
            {
                "key": list(key),
                "candidates": [{"c": list(c.continuation), "f": c.frequency} for c in cands],
            }
            for key, cands in token_map.entries.items()
        ],
    }


def map_from_dict(doc: Mapping) -> TokenMap:
    if not isinstance(doc, Mapping) or "version" not in doc:
        raise CorruptMap("missing version header")
    if doc["version"] != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"map schema version {doc['version']!r} is not supported (expected {SCHEMA_VERSION})"
        )
    try:
        max_n = int(doc["max_n"])
        entries: dict[NgramKey, tuple[Candidate, ...]] = {}
        for item in doc["entries"]:
            key = tuple(int(t) for t in item["key"])
            cands = tuple(Candidate(tuple(int(t) for t in c["c"]), int(c["f"])) for c in item["candidates"])
            if not key or len(key) > max_n or not cands or key in entries:
                raise CorruptMap(f"invalid entry for key {list(key)}")
            if list(cands) != rank(cands) or len(set(c.continuation for c in cands)) != len(cands):
                raise CorruptMap(f"candidates for key {list(key)} are not in ranked order")
            entries[key] = cands
        cfg = doc["prune_config"]
        prune_config = None if cfg is None else PruneConfig.from_dict(cfg)
        vocab = None if doc["vocab"] is None else tuple(str(v) for v in doc["vocab"])
        n_entries, n_candidates = int(doc["n_entries"]), int(doc["n_candidates"])
    except CorruptMap:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptMap(f"malformed map document: {exc}") from exc
    token_map = TokenMap(max_n, entries, prune_config, vocab)
    if n_entries != len(entries) or n_candidates != token_map.n_candidates:
        raise CorruptMap(
            f"integrity check failed: header says {n_entries} entries/{n_candidates} candidates, "
            f"found {len(entries)}/{token_map.n_candidates}"
        )
    return token_map


def save_map(token_map: TokenMap, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(map_to_dict(token_map), fh, separators=(",", ":"))
        fh.write("\n")


def load_map(path: str | os.PathLike) -> TokenMap:
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptMap(f"{path}: not a readable map document ({exc})") from exc
    return map_from_dict(doc)
