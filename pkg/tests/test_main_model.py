import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_world
from oracles import greedy_rollout
from tokenmap_sd.corpus import EOS, SOT, UNK, build_vocab, tokenize_corpus
from tokenmap_sd.demo import maintenance_corpus
from tokenmap_sd.errors import InvalidConfig
from tokenmap_sd.main_model import CorpusLM, NoisyLM, autoregressive_decode


@pytest.fixture(scope="module")
def abc_lm():
    return CorpusLM.from_corpus(["a b c"])


def ids(lm, words):
    return [lm.vocab.id(w) for w in words.split()]


def test_unique_continuation(abc_lm):
    assert abc_lm.greedy_next([SOT] + ids(abc_lm, "a b")) == abc_lm.vocab.id("c")


def test_sentence_end(abc_lm):
    assert abc_lm.greedy_next([SOT] + ids(abc_lm, "a b c")) == EOS


def test_tie_break_smallest_id():
    lm = CorpusLM.from_corpus(["a b", "a c"])
    assert lm.greedy_next([SOT, lm.vocab.id("a")]) == lm.vocab.id("b")


def test_majority_wins():
    lm = CorpusLM.from_corpus(["a b", "a c", "a c"])
    assert lm.greedy_next([SOT, lm.vocab.id("a")]) == lm.vocab.id("c")


def test_stupid_backoff_prefers_discounted_lower_order():
    # After (x, y) the trigram table has only "p" (1 of 1 -> 1.0); nothing beats it.
    # After an unseen (q, y) we back off to the bigram y -> {p:1, r:3}, so r wins.
    lm = CorpusLM.from_corpus(["x y p", "z y r", "z y r", "z y r"], order=3)
    v = lm.vocab
    assert lm.greedy_next([SOT, v.id("x"), v.id("y")]) == v.id("p")
    assert lm.greedy_next([SOT, UNK, v.id("y")]) == v.id("r")


def test_noisy_zero_is_inner(abc_lm):
    noisy = NoisyLM(abc_lm, 0.0, seed=5)
    for ctx in ([SOT], [SOT, 3], [SOT, 3, 4], [SOT, 3, 4, 5], [SOT, 5, 5, 5]):
        assert noisy.greedy_next(ctx) == abc_lm.greedy_next(ctx)


def test_noisy_rate_validation(abc_lm):
    with pytest.raises(InvalidConfig):
        NoisyLM(abc_lm, 1.5)


def test_noisy_full_rate_always_deviates():
    lm = CorpusLM.from_corpus(maintenance_corpus(50, seed=1))
    noisy = NoisyLM(lm, 1.0, seed=3)
    ctx = [SOT]
    for _ in range(20):
        tok = noisy.greedy_next(ctx)
        assert tok != lm.greedy_next(ctx)
        assert 0 < tok < lm.vocab_size and tok != 2
        ctx.append(tok)


def test_noisy_reproducible():
    lm = CorpusLM.from_corpus(maintenance_corpus(100, seed=2))
    prompt = [SOT, lm.vocab.id("check")]
    a = autoregressive_decode(NoisyLM(lm, 0.2, seed=11), prompt, 60)[0]
    b = autoregressive_decode(NoisyLM(lm, 0.2, seed=11), prompt, 60)[0]
    assert a == b


def test_verify_draft_matching_rollout():
    lm = CorpusLM.from_corpus(maintenance_corpus(100, seed=4))
    ctx = [SOT, lm.vocab.id("check")]
    rollout = greedy_rollout(lm, ctx, 6)
    draft = rollout[:5]
    assert lm.verify_draft(ctx, draft) == rollout[:6]
    assert lm.verify_draft(ctx, draft)[:-1] == draft


def test_verify_draft_length(abc_lm):
    assert len(abc_lm.verify_draft([SOT], [3])) == 2


def test_autoregressive_single_sentence():
    _, _, lm, _ = make_world(["a b c d e"])
    out, trace = autoregressive_decode(lm, [SOT, 3], 100)
    assert out == [SOT, 3, 4, 5, 6, 7, EOS]
    assert trace.forward_passes == 5
    assert all(s.batch_size == 1 for s in trace.steps)
    trace.check()


def test_autoregressive_cap(abc_lm):
    out, trace = autoregressive_decode(abc_lm, [SOT], 1)
    assert len(out) == 2 and trace.forward_passes == 1


def test_autoregressive_immediate_eos(abc_lm):
    out, _ = autoregressive_decode(abc_lm, [SOT] + ids(abc_lm, "a b c"), 10)
    assert out[-1] == EOS and len(out) == 5


contexts = st.lists(st.integers(1, 30), min_size=0, max_size=10).map(lambda c: [SOT] + c)


@given(contexts, st.lists(st.integers(1, 30), min_size=1, max_size=8),
       st.floats(0, 0.5), st.integers(0, 1000))
@settings(max_examples=200, deadline=None)
def test_verify_equals_sequential_greedy(ctx, draft, eps, seed):
    model = NoisyLM(_shared_lm(), eps, seed)
    expected = [model.greedy_next(ctx + draft[:i]) for i in range(len(draft) + 1)]
    assert model.verify_draft(ctx, draft) == expected
    # prefix consistency
    assert model.verify_draft(ctx, draft[:1]) == expected[:2]


_LM = None


def _shared_lm():
    global _LM
    if _LM is None:
        sentences = maintenance_corpus(80, seed=9)
        vocab = build_vocab(sentences + [" ".join(f"w{i}" for i in range(31))])
        _LM = CorpusLM(tokenize_corpus(sentences, vocab), len(vocab), 4, vocab)
    return _LM
