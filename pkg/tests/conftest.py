import pytest

from tokenmap_sd.corpus import build_vocab, tokenize_corpus
from tokenmap_sd.main_model import CorpusLM


def make_world(sentences, max_n=3, order=4, config=None):
    """Vocab, token sequences, CorpusLM and pruned map over one corpus."""
    from tokenmap_sd.token_map import build_map

    vocab = build_vocab(sentences)
    seqs = tokenize_corpus(sentences, vocab)
    model = CorpusLM(seqs, len(vocab), order, vocab)
    token_map = build_map(seqs, max_n, config, vocab.id_to_string)
    return vocab, seqs, model, token_map


@pytest.fixture
def abc_vocab():
    return build_vocab(["a b", "b c"])


@pytest.fixture
def single_sentence_world():
    return make_world(["a b c d e"])


ACCEPTANCE_RESULTS = []


def record_criterion(number, name, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number} {name}" + (f": {detail}" if detail else "")
    ACCEPTANCE_RESULTS.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_RESULTS):
            terminalreporter.write_line(line)
