"""Main-model interface and two table-driven reference models.

The engine only needs a deterministic greedy next-token oracle. ``CorpusLM``
is a stupid-backoff n-gram model over a corpus; ``NoisyLM`` wraps any model and
deviates from it on a seeded, context-keyed fraction of positions.
"""

from __future__ import annotations

import abc
import hashlib
from collections import Counter, defaultdict
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .corpus import EOS, SOT, UNK, Vocab, build_vocab, tokenize_corpus
from .errors import InvalidConfig
from .trace import DecodeTrace, StepRecord

BACKOFF = Fraction(2, 5)


class MainModel(abc.ABC):
    """A deterministic autoregressive next-token oracle."""

    vocab_size: int

    @abc.abstractmethod
    def greedy_next(self, context: Sequence[int]) -> int:
        """Argmax next token given ``context`` (which starts with SOT)."""

    def verify_draft(self, context: Sequence[int], draft: Sequence[int]) -> list[int]:
        """Greedy tokens after each draft prefix; one batched pass of size len(draft) + 1.

        Element ``i`` is ``greedy_next(context + draft[:i])``.
        """
        ctx = list(context)
        out = []
        for tok in draft:
            out.append(self.greedy_next(ctx))
            ctx.append(tok)
        out.append(self.greedy_next(ctx))
        return out


class CorpusLM(MainModel):
    """Stupid-backoff n-gram LM with greedy decoding; ties go to the smallest id.

    Sentences are padded with SOT on the left; the EOS already present in each
    token sequence is a regular target.
    """

    def __init__(self, sequences: Sequence[Sequence[int]], vocab_size: int, order: int = 4,
                 vocab: Vocab | None = None):
        if order < 1:
            raise InvalidConfig(f"order must be >= 1, got {order}")
        self.order = order
        self.vocab_size = vocab_size
        self.vocab = vocab
        counts: dict[tuple[int, ...], Counter] = defaultdict(Counter)
        for seq in sequences:
            padded = (SOT, *seq)
            for i in range(1, len(padded)):
                target = padded[i]
                for k in range(0, min(order - 1, i) + 1):
                    counts[padded[i - k:i]][target] += 1
        # each level: (total count, targets ordered by count desc then id asc)
        self._tables = {
            ctx: (sum(ctr.values()), sorted(ctr.items(), key=lambda kv: (-kv[1], kv[0])))
            for ctx, ctr in counts.items()
        }
        self._best = lru_cache(maxsize=None)(self._best_uncached)

    @classmethod
    def from_corpus(cls, sentences: Sequence[str], vocab: Vocab | None = None,
                    order: int = 4) -> "CorpusLM":
        vocab = vocab or build_vocab(sentences)
        return cls(tokenize_corpus(sentences, vocab), len(vocab), order, vocab)

    def _best_uncached(self, ctx: tuple[int, ...]) -> int:
        seen: set[int] = set()
        best: tuple[Fraction, int] | None = None
        weight = Fraction(1)
        for k in range(len(ctx), -1, -1):
            table = self._tables.get(ctx[len(ctx) - k:])
            if table is not None:
                total, ranked = table
                for tok, n in ranked:
                    if tok not in seen:
                        score = weight * n / total
                        if best is None or score > best[0] or (score == best[0] and tok < best[1]):
                            best = (score, tok)
                        break
                if k:
                    seen.update(tok for tok, _ in ranked)
            weight *= BACKOFF
        return EOS if best is None else best[1]

    def greedy_next(self, context: Sequence[int]) -> int:
        window = self.order - 1
        return self._best(tuple(context[-window:]) if window else ())


class NoisyLM(MainModel):
    """Deviates from ``inner`` with probability ``deviation_rate`` per context.

    The decision and the replacement token are derived from a hash of
    ``(seed, context)``, so calls are reproducible and order-independent.
    Replacements are drawn from EOS and the non-reserved ids.
    """

    def __init__(self, inner: MainModel, deviation_rate: float, seed: int = 0):
        if not 0.0 <= deviation_rate <= 1.0:
            raise InvalidConfig(f"deviation_rate must lie in [0, 1], got {deviation_rate}")
        self.inner = inner
        self.deviation_rate = float(deviation_rate)
        self.seed = int(seed)
        self.vocab_size = inner.vocab_size
        self.vocab = getattr(inner, "vocab", None)
        self._choices = [EOS] + [t for t in range(self.vocab_size) if t not in (SOT, EOS, UNK)]
        self._next = lru_cache(maxsize=None)(self._next_uncached)

    def _next_uncached(self, ctx: tuple[int, ...]) -> int:
        tok = self.inner.greedy_next(ctx)
        if self.deviation_rate == 0.0:
            return tok
        payload = np.asarray((self.seed, *ctx), dtype=np.int64).tobytes()
        digest = hashlib.blake2b(payload, digest_size=16).digest()
        u = int.from_bytes(digest[:8], "little") / 2.0**64
        if u >= self.deviation_rate:
            return tok
        others = [t for t in self._choices if t != tok]
        if not others:
            return tok
        return others[int.from_bytes(digest[8:], "little") % len(others)]

    def greedy_next(self, context: Sequence[int]) -> int:
        return self._next(tuple(context))


def autoregressive_decode(model: MainModel, prompt: Sequence[int], max_len: int = 448
                          ) -> tuple[list[int], DecodeTrace]:
    """Plain greedy decoding: one batch-1 forward pass per generated token."""
    if max_len < 1:
        raise InvalidConfig("max_len must be >= 1")
    out = list(prompt)
    trace = DecodeTrace(prompt_len=len(out), output=out)
    for _ in range(max_len):
        tok = model.greedy_next(out)
        out.append(tok)
        trace.steps.append(StepRecord.ar())
        if tok == EOS:
            break
    return out, trace
