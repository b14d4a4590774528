"""Speculative decoding driven by token-map drafts.

Each step looks up the longest n-gram key ending the current output, verifies
up to ``max_candidates_per_step`` of its continuations against the main model,
and keeps the candidate with the longest greedy-consistent prefix plus the
model's own token at the first mismatch (or the bonus token after a fully
accepted draft). When the map has nothing for the context, the engine falls
back to plain greedy steps and retries the lookup.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

from .corpus import EOS
from .errors import BatchItemError, InvalidConfig, VocabMismatch
from .main_model import MainModel
from .token_map import TokenMap, lookup
from .trace import DecodeTrace, StepKind, StepRecord

THREADS_ENV = "TOKENMAP_SD_THREADS"


def exact_match(draft_token: int, model_token: int) -> bool:
    return draft_token == model_token


@dataclass(frozen=True)
class EngineConfig:
    max_candidates_per_step: int = 3
    max_draft_len: int = 64
    max_output_len: int = 448
    fallback_ar_steps: int = 1
    # acceptance test for one draft position; anything but exact match gives up losslessness
    accepts: Callable[[int, int], bool] = exact_match

    def __post_init__(self):
        for name in ("max_candidates_per_step", "max_draft_len", "max_output_len", "fallback_ar_steps"):
            if getattr(self, name) < 1:
                raise InvalidConfig(f"{name} must be >= 1")


def check_vocab(model: MainModel, token_map: TokenMap) -> None:
    if token_map.vocab is None:
        return
    if token_map.vocab_size != model.vocab_size:
        raise VocabMismatch(
            f"token map has {token_map.vocab_size} vocab entries, model has {model.vocab_size}"
        )
    model_vocab = getattr(model, "vocab", None)
    if model_vocab is not None and tuple(model_vocab.id_to_string) != token_map.vocab:
        raise VocabMismatch("token map and model use different vocabularies")


def accepted_prefix(draft: Sequence[int], verified: Sequence[int],
                    accepts: Callable[[int, int], bool] = exact_match) -> int:
    n = 0
    for d, v in zip(draft, verified):
        if not accepts(d, v):
            break
        n += 1
    return n


def speculative_decode(model: MainModel, token_map: TokenMap, prompt: Sequence[int],
                       config: EngineConfig | None = None) -> tuple[list[int], DecodeTrace]:
    config = config or EngineConfig()
    check_vocab(model, token_map)
    out = list(prompt)
    trace = DecodeTrace(prompt_len=len(out), output=out)
    cap = config.max_output_len
    generated = 0
    done = False

    while not done and generated < cap:
        remaining = cap - generated
        # leave room for the correction / bonus token
        draft_len = min(config.max_draft_len, remaining - 1)
        drafts = []
        if draft_len > 0:
            hits = lookup(token_map, out)[: config.max_candidates_per_step]
            drafts = [c.continuation[:draft_len] for c in hits]

        if drafts:
            best_idx, best_acc, best_verified = 0, -1, None
            for idx, draft in enumerate(drafts):
                verified = model.verify_draft(out, draft)
                acc = accepted_prefix(draft, verified, config.accepts)
                if acc > best_acc:
                    best_idx, best_acc, best_verified = idx, acc, verified
            draft = drafts[best_idx]
            new = list(draft[:best_acc])
            if best_acc and draft[best_acc - 1] == EOS:
                emitted = 0
            else:
                new.append(best_verified[best_acc])
                emitted = 1
            proposed = sum(len(d) for d in drafts)
            trace.steps.append(StepRecord(
                kind=StepKind.DRAFT,
                proposed=proposed,
                accepted=best_acc,
                candidate_index=best_idx,
                batch_size=proposed + 1,
                n_candidates=len(drafts),
                winner_proposed=len(draft),
                emitted=emitted,
            ))
            out.extend(new)
            generated += len(new)
            done = new[-1] == EOS
            continue

        for _ in range(min(config.fallback_ar_steps, remaining)):
            tok = model.greedy_next(out)
            out.append(tok)
            trace.steps.append(StepRecord.ar())
            generated += 1
            if tok == EOS:
                done = True
                break

    return out, trace


def resolve_threads(default: int = 1) -> int:
    """Worker count from TOKENMAP_SD_THREADS (0 means one per CPU)."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return default
    try:
        n = int(raw)
    except ValueError as exc:
        raise InvalidConfig(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    if n < 0:
        raise InvalidConfig(f"{THREADS_ENV} must be >= 0")
    return n or (os.cpu_count() or 1)


def batch_decode(model: MainModel, token_map: TokenMap, prompts: Sequence[Sequence[int]],
                 config: EngineConfig | None = None, threads: int | None = None
                 ) -> list[tuple[list[int], DecodeTrace]]:
    if not prompts:
        raise InvalidConfig("batch_decode needs at least one prompt")
    threads = resolve_threads() if threads is None else threads

    def run(item):
        idx, prompt = item
        try:
            return speculative_decode(model, token_map, prompt, config)
        except Exception as exc:
            raise BatchItemError(idx, exc) from exc

    items = list(enumerate(prompts))
    if threads <= 1:
        return [run(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, items))
