import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_world
from tokenmap_sd.corpus import EOS, SOT, build_vocab, tokenize_corpus
from tokenmap_sd.demo import maintenance_corpus
from tokenmap_sd.engine import (
    THREADS_ENV, EngineConfig, batch_decode, resolve_threads, speculative_decode,
)
from tokenmap_sd.errors import BatchItemError, InvalidConfig, VocabMismatch
from tokenmap_sd.main_model import CorpusLM, NoisyLM, autoregressive_decode
from tokenmap_sd.token_map import PruneConfig, TokenMap, build_map
from tokenmap_sd.trace import StepKind


def test_whole_sentence_in_one_step(single_sentence_world):
    vocab, _, model, token_map = single_sentence_world
    a = vocab.id("a")
    out, trace = speculative_decode(model, token_map, [SOT, a])
    ar_out, ar_trace = autoregressive_decode(model, [SOT, a])
    assert out == ar_out == [SOT, a, *(vocab.id(w) for w in "bcde"), EOS]
    assert len(trace.steps) == 1
    step = trace.steps[0]
    assert step.kind is StepKind.DRAFT
    assert (step.proposed, step.accepted, step.emitted, step.batch_size) == (5, 5, 0, 6)
    assert trace.forward_passes == 1 and ar_trace.forward_passes == 5
    trace.check()


def test_empty_map_is_autoregressive(single_sentence_world):
    vocab, _, model, _ = single_sentence_world
    empty = TokenMap(3, {}, PruneConfig(), vocab.id_to_string)
    out, trace = speculative_decode(model, empty, [SOT, vocab.id("a")])
    assert out == autoregressive_decode(model, [SOT, vocab.id("a")])[0]
    assert all(s.kind is StepKind.AR for s in trace.steps)
    assert trace.proposed == 0


def _seed_deviating_at(model, ctx, draft, position):
    for seed in range(10_000):
        noisy = NoisyLM(model, 0.3, seed)
        verified = noisy.verify_draft(ctx, draft)
        if verified[:position] == draft[:position] and verified[position] != draft[position]:
            return noisy
    raise AssertionError("no seed found")


def test_partial_acceptance_takes_model_token(single_sentence_world):
    vocab, _, model, token_map = single_sentence_world
    ctx = [SOT, vocab.id("a")]
    draft = [vocab.id(w) for w in "bcde"] + [EOS]
    noisy = _seed_deviating_at(model, ctx, draft, 2)
    out, trace = speculative_decode(noisy, token_map, ctx)
    first = trace.steps[0]
    assert first.accepted == 2 and first.emitted == 1
    assert out[2:5] == [draft[0], draft[1], noisy.greedy_next(ctx + draft[:2])]
    assert out == autoregressive_decode(noisy, ctx)[0]
    trace.check()


def test_draft_capped_by_output_budget(single_sentence_world):
    vocab, _, model, token_map = single_sentence_world
    config = EngineConfig(max_output_len=3)
    out, trace = speculative_decode(model, token_map, [SOT, vocab.id("a")], config)
    assert len(out) - 2 == 3
    assert trace.steps[0].proposed == 2
    assert out == autoregressive_decode(model, [SOT, vocab.id("a")], 3)[0]


def test_max_draft_len(single_sentence_world):
    vocab, _, model, token_map = single_sentence_world
    out, trace = speculative_decode(model, token_map, [SOT, vocab.id("a")],
                                    EngineConfig(max_draft_len=2))
    assert all(s.proposed <= 2 for s in trace.steps)
    assert out[-1] == EOS


def test_winner_is_longest_accepted():
    sentences = ["x a b c", "x a b c", "x a q", "y a q r s"]
    permissive = PruneConfig(min_len_by_count={1: 1, 2: 1, 3: 1})
    vocab, _, model, token_map = make_world(sentences, max_n=1, config=permissive)
    # ranked candidates after "a": (q r s EOS), (b c EOS), (q EOS); the model says "b c"
    ctx = [SOT, vocab.id("x"), vocab.id("a")]
    out, trace = speculative_decode(model, token_map, ctx)
    assert out == autoregressive_decode(model, ctx)[0]
    step = trace.steps[0]
    assert step.n_candidates == 3 and step.proposed == 9
    assert step.candidate_index == 1 and step.accepted == 3 and step.winner_proposed == 3


def test_vocab_mismatch():
    _, _, model, _ = make_world(["a b c"])
    _, _, _, other = make_world(["p q r s t"])
    with pytest.raises(VocabMismatch):
        speculative_decode(model, other, [SOT])


def test_invalid_config():
    with pytest.raises(InvalidConfig):
        EngineConfig(max_draft_len=0)


@pytest.fixture(scope="module")
def domain_world():
    train = maintenance_corpus(300, seed=1)
    model_sents = maintenance_corpus(300, seed=2)
    vocab = build_vocab(train + model_sents)
    model = CorpusLM(tokenize_corpus(model_sents, vocab), len(vocab), 4, vocab)
    token_map = build_map(tokenize_corpus(train, vocab), 3, None, vocab.id_to_string)
    return vocab, model, token_map


def test_batch_decode_matches_single(domain_world, monkeypatch):
    vocab, model, token_map = domain_world
    prompts = [[SOT, vocab.id("check")], [SOT, vocab.id("record")]]
    single = [speculative_decode(model, token_map, p)[0] for p in prompts]
    monkeypatch.delenv(THREADS_ENV, raising=False)
    assert [o for o, _ in batch_decode(model, token_map, prompts)] == single
    assert [o for o, _ in batch_decode(model, token_map, prompts, threads=4)] == single


def test_batch_decode_empty(domain_world):
    _, model, token_map = domain_world
    with pytest.raises(InvalidConfig):
        batch_decode(model, token_map, [])


def test_batch_item_error_index(domain_world):
    vocab, model, token_map = domain_world

    class Broken(CorpusLM):
        def greedy_next(self, context):
            if len(context) > 1 and context[1] == vocab.id("record"):
                raise RuntimeError("boom")
            return super().greedy_next(context)

    broken = Broken.__new__(Broken)
    broken.__dict__.update(model.__dict__)
    with pytest.raises(BatchItemError) as info:
        batch_decode(broken, token_map, [[SOT, vocab.id("check")], [SOT, vocab.id("record")]])
    assert info.value.index == 1


def test_threads_env(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert resolve_threads() == 3
    monkeypatch.setenv(THREADS_ENV, "0")
    assert resolve_threads() >= 1
    monkeypatch.setenv(THREADS_ENV, "many")
    with pytest.raises(InvalidConfig):
        resolve_threads()


@st.composite
def worlds(draw):
    seed = draw(st.integers(0, 10_000))
    rng = random.Random(seed)
    words = [f"t{i}" for i in range(draw(st.integers(2, 8)))]
    sentences = [" ".join(rng.choices(words, k=rng.randint(1, 8)))
                 for _ in range(draw(st.integers(1, 12)))]
    return sentences, rng


@given(worlds(), st.integers(1, 4), st.integers(1, 5), st.floats(0, 0.6),
       st.integers(1, 4), st.integers(1, 30))
@settings(max_examples=150, deadline=None)
def test_lossless_against_autoregressive(world, max_n, order, eps, k, max_len):
    sentences, rng = world
    vocab = build_vocab(sentences)
    seqs = tokenize_corpus(sentences, vocab)
    model = NoisyLM(CorpusLM(seqs, len(vocab), order, vocab), eps, rng.randint(0, 99))
    token_map = build_map(seqs, max_n, None, vocab.id_to_string)
    prompt = [SOT] + rng.choice(seqs)[: rng.randint(0, 3)]
    prompt = [t for t in prompt if t != EOS]
    config = EngineConfig(max_candidates_per_step=k, max_output_len=max_len)
    out, trace = speculative_decode(model, token_map, prompt, config)
    assert out == autoregressive_decode(model, prompt, max_len)[0]
    trace.check()
    assert trace.forward_passes <= len(trace.generated)
    # every draft step's tokens land contiguously in the output
    pos = len(prompt)
    for s in trace.steps:
        pos += s.new_tokens
    assert pos == len(out)
