"""Corpus ingestion, vocabulary and the deterministic whitespace tokenizer."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

from .errors import CorpusEncodingError, EmptyCorpus

SOT = 0
EOS = 1
UNK = 2
RESERVED = (SOT, EOS, UNK)
RESERVED_STRINGS = ("<|sot|>", "<|eos|>", "<|unk|>")

TokenSeq = list[int]


@dataclass(frozen=True)
class Vocab:
    """Bidirectional token <-> id mapping with ids 0..2 reserved."""

    id_to_string: tuple[str, ...]
    string_to_id: dict[str, int] = field(compare=False, repr=False)

    @classmethod
    def from_tokens(cls, tokens: Iterable[str]) -> "Vocab":
        id_to_string = list(RESERVED_STRINGS)
        string_to_id: dict[str, int] = {}
        for tok in tokens:
            if tok not in string_to_id:
                string_to_id[tok] = len(id_to_string)
                id_to_string.append(tok)
        return cls(tuple(id_to_string), string_to_id)

    def __len__(self) -> int:
        return len(self.id_to_string)

    def __contains__(self, token: str) -> bool:
        return token in self.string_to_id

    def id(self, token: str) -> int:
        return self.string_to_id.get(token, UNK)

    def string(self, token_id: int) -> str:
        return self.id_to_string[token_id]

    def words(self) -> list[str]:
        """Non-reserved token strings in id order."""
        return list(self.id_to_string[len(RESERVED):])


class Tokenizer(Protocol):
    vocab: Vocab

    def encode(self, sentence: str) -> TokenSeq: ...

    def decode(self, tokens: Sequence[int]) -> str: ...


class WhitespaceTokenizer:
    """Splits on Unicode whitespace; unknown pieces map to UNK, EOS is appended."""

    def __init__(self, vocab: Vocab):
        self.vocab = vocab

    def encode(self, sentence: str) -> TokenSeq:
        return [self.vocab.id(piece) for piece in sentence.split()] + [EOS]

    def decode(self, tokens: Sequence[int]) -> str:
        return " ".join(self.vocab.string(t) for t in tokens if t not in RESERVED)


def build_vocab(corpus: Sequence[str]) -> Vocab:
    """Assign ids to distinct whitespace pieces in first-appearance order, starting at 3."""
    if not corpus:
        raise EmptyCorpus("cannot build a vocabulary from an empty corpus")
    return Vocab.from_tokens(piece for sentence in corpus for piece in sentence.split())


def tokenize(sentence: str, vocab: Vocab) -> TokenSeq:
    return WhitespaceTokenizer(vocab).encode(sentence)


def detokenize(tokens: Sequence[int], vocab: Vocab) -> str:
    return WhitespaceTokenizer(vocab).decode(tokens)


def tokenize_corpus(corpus: Iterable[str], vocab: Vocab) -> list[TokenSeq]:
    tok = WhitespaceTokenizer(vocab)
    return [tok.encode(s) for s in corpus]


def load_corpus(path: str | os.PathLike) -> list[str]:
    """Read one sentence per line, skipping blank lines and trimming trailing whitespace.

    Raises OSError if the file cannot be read and CorpusEncodingError on
    invalid UTF-8.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorpusEncodingError(f"{path}: invalid UTF-8 at byte {exc.start}") from exc
    # splitlines would also break on \x0b, \x1c etc.; lines are LF-delimited only
    lines = (line.rstrip() for line in text.split("\n"))
    return [line for line in lines if line.strip()]


def write_corpus(sentences: Iterable[str], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in sentences:
            fh.write(s + "\n")
