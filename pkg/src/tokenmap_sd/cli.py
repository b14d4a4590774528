"""Command-line driver: build-map, decode, bench, sweep, demo-corpus.

Exit codes: 0 ok, 1 I/O or unreadable data, 2 invalid configuration,
3 vocabulary mismatch between map and model.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Sequence

from . import bench, demo
from .corpus import EOS, SOT, Vocab, build_vocab, load_corpus, tokenize_corpus, write_corpus
from .engine import EngineConfig, speculative_decode
from .errors import (CorpusEncodingError, CorruptMap, EmptyCorpus, InvalidConfig,
                     SchemaVersionMismatch, VocabMismatch)
from .main_model import CorpusLM, NoisyLM, autoregressive_decode
from .token_map import PruneConfig, TokenMap, build_raw_map, load_map, prune, save_map

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_VOCAB = 0, 1, 2, 3


class ConfigError(Exception):
    pass


def _int_range(text: str) -> range:
    try:
        lo, hi = (int(x) for x in text.split(".."))
    except ValueError:
        raise ConfigError(f"range must look like A..B, got {text!r}") from None
    if lo > hi:
        raise ConfigError(f"reversed range {text!r}")
    return range(lo, hi + 1)


def _check_readable(*paths: str | None) -> None:
    for p in paths:
        if p is not None and not os.access(p, os.R_OK):
            raise FileNotFoundError(f"cannot read {p}")


def _check_writable(path: str | None) -> None:
    if path is None:
        return
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
        raise FileNotFoundError(f"cannot write to {path}")


def _say(args, line: str) -> None:
    if not args.quiet:
        print(line)


def _emit(args, obj) -> None:
    if args.quiet:
        return
    if args.format == "json":
        print(json.dumps(obj, sort_keys=False))
    else:
        print(",".join(str(k) for k in obj))
        print(",".join(str(v) for v in obj.values()))


def _map_vocab(token_map: TokenMap) -> Vocab:
    if token_map.vocab is None:
        raise VocabMismatch("map file carries no vocabulary")
    return Vocab.from_tokens(token_map.vocab[3:])


def _model_for_map(token_map: TokenMap, model_sentences: Sequence[str], order: int,
                   noise: float, seed: int):
    vocab = _map_vocab(token_map)
    unknown = {w for s in model_sentences for w in s.split() if w not in vocab}
    if unknown:
        sample = ", ".join(sorted(unknown)[:5])
        raise VocabMismatch(f"model corpus has {len(unknown)} words missing from the map vocabulary ({sample})")
    model = CorpusLM(tokenize_corpus(model_sentences, vocab), len(vocab), order, vocab)
    if noise:
        return NoisyLM(model, noise, seed), vocab
    return model, vocab


def _prune_config(args) -> PruneConfig:
    # counts beyond 3 reuse the 3-candidate threshold
    table = {k: 1 if k == 1 else args.min_len_2 if k == 2 else args.min_len_3
             for k in range(1, args.max_candidates + 1)}
    return PruneConfig(args.max_candidates, table, args.min_freq)


def cmd_build_map(args) -> int:
    if args.max_n < 1:
        raise ConfigError("--max-n must be >= 1")
    config = _prune_config(args)
    if (args.corpus is None) == (args.demo_corpus is None):
        raise ConfigError("give exactly one of --corpus or --demo-corpus")
    _check_readable(args.corpus, *args.vocab_corpus)
    _check_writable(args.out)
    if args.corpus is not None:
        sentences = load_corpus(args.corpus)
    else:
        sentences = demo.maintenance_corpus(args.demo_corpus, args.seed)
    extra = [s for p in args.vocab_corpus for s in load_corpus(p)]
    vocab = build_vocab(sentences + extra)
    raw = build_raw_map(tokenize_corpus(sentences, vocab), args.max_n, vocab.id_to_string)
    pruned = prune(raw, config)
    save_map(pruned, args.out)
    _emit(args, {
        "sentences": len(sentences),
        "vocab": len(vocab),
        "raw_keys": len(raw),
        "raw_candidates": raw.n_candidates,
        "keys": len(pruned),
        "candidates": pruned.n_candidates,
        "pruned_keys": len(raw) - len(pruned),
        "pruned_candidates": raw.n_candidates - pruned.n_candidates,
    })
    return EXIT_OK


def cmd_decode(args) -> int:
    _check_readable(args.map, args.model_corpus)
    if args.max_len < 1:
        raise ConfigError("--max-len must be >= 1")
    token_map = load_map(args.map)
    model, vocab = _model_for_map(token_map, load_corpus(args.model_corpus), args.order,
                                  args.noise, args.seed)
    prompt = [SOT] + [vocab.id(w) for w in args.prompt.split()]
    config = EngineConfig(max_output_len=args.max_len)
    out, trace = speculative_decode(model, token_map, prompt, config)
    _, ar = autoregressive_decode(model, prompt, args.max_len)
    print(" ".join(vocab.string(t) for t in out[len(prompt):] if t != EOS))
    _emit(args, {
        "forward_passes": trace.forward_passes,
        "ar_forward_passes": ar.forward_passes,
        "accepted": trace.accepted,
        "proposed": trace.proposed,
        "lossless": ar.output == out,
    })
    return EXIT_OK


def cmd_bench(args) -> int:
    _check_readable(args.map, args.model_corpus, args.test)
    _check_writable(args.out)
    cost = bench.get_preset(args.cost_preset)
    token_map = load_map(args.map)
    model, vocab = _model_for_map(token_map, load_corpus(args.model_corpus), args.order,
                                  args.noise, args.seed)
    prompts = bench.make_prompts(tokenize_corpus(load_corpus(args.test), vocab), args.prompt_words)
    config = EngineConfig(max_output_len=args.max_len)
    report = bench.run_benchmark(model, token_map, prompts, cost, config,
                                 count_all_candidates=not args.winner_only,
                                 wall_clock=args.wall_clock)
    report.write(args.out, args.format)
    _say(args, report.line())
    return EXIT_OK


def cmd_sweep(args) -> int:
    _check_writable(args.out)
    if args.mode == "candidates":
        ks, lengths = _int_range(args.k_range), _int_range(args.len_range)
        if ks.start < 1 or lengths.start < 1:
            raise ConfigError("candidate counts and lengths start at 1")
        cost = bench.get_preset(args.cost_preset or "paper-fit")
        sweep = bench.sweep_candidates_vs_length(cost, ks, lengths)
        text = bench.sweep_to_csv(sweep.rows())
        for k, c in sweep.crossovers.items():
            _say(args, f"K={k} crossover={bench._fmt_crossover(c)}")
    else:
        ns = _int_range(args.range)
        if ns.start < 1 or ns.stop - 1 > 8:
            raise ConfigError("--range must lie within 1..8")
        cost = bench.get_preset(args.cost_preset or "forward-pass")
        if args.demo_corpus is not None:
            train, test, model_corpus = demo.domain_split(args.demo_corpus, max(args.demo_corpus // 5, 1),
                                                          seed=args.seed)
        else:
            if not (args.train and args.test):
                raise ConfigError("ngram sweep needs --train and --test, or --demo-corpus")
            _check_readable(args.train, args.test, args.model_corpus)
            train, test = load_corpus(args.train), load_corpus(args.test)
            model_corpus = load_corpus(args.model_corpus) if args.model_corpus else train
        vocab = build_vocab(train + test + model_corpus)
        model = CorpusLM(tokenize_corpus(model_corpus, vocab), len(vocab), args.order, vocab)
        if args.noise:
            model = NoisyLM(model, args.noise, args.seed)
        rows = bench.sweep_ngram_order(
            tokenize_corpus(train, vocab), tokenize_corpus(test, vocab), model, cost, ns,
            config=EngineConfig(max_output_len=args.max_len), prompt_words=args.prompt_words,
            vocab=vocab.id_to_string)
        text = bench.sweep_to_csv(rows)
        best = max(rows, key=lambda r: r["S"])
        _say(args, f"best N={best['value']} S={best['S']:.4f}")
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return EXIT_OK


def cmd_demo_corpus(args) -> int:
    _check_writable(args.out)
    if args.n < 1:
        raise ConfigError("--n must be >= 1")
    if args.kind == "random":
        sentences = demo.random_corpus(args.n, seed=args.seed)
    else:
        sentences = demo.maintenance_corpus(args.n, args.seed)
    write_corpus(sentences, args.out)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("csv", "json"), default="json")
    common.add_argument("--quiet", action="store_true", help="suppress summaries on stdout")

    parser = _Parser(prog="tokenmap-sd", description="Model-free speculative decoding with n-gram token maps.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("build-map", parents=[common], help="build and prune a token map")
    p.add_argument("--corpus")
    p.add_argument("--demo-corpus", type=int, metavar="N_SENTENCES")
    p.add_argument("--vocab-corpus", action="append", default=[],
                   help="extra corpus whose words join the vocabulary (repeatable)")
    p.add_argument("--out", required=True)
    p.add_argument("--max-n", type=int, default=3)
    p.add_argument("--max-candidates", type=int, default=3)
    p.add_argument("--min-len-2", type=int, default=9)
    p.add_argument("--min-len-3", type=int, default=16)
    p.add_argument("--min-freq", type=int, default=1)
    p.set_defaults(func=cmd_build_map)

    p = sub.add_parser("decode", parents=[common], help="speculatively decode one prompt")
    p.add_argument("--map", required=True)
    p.add_argument("--model-corpus", required=True)
    p.add_argument("--prompt", required=True)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--max-len", type=int, default=448)
    p.add_argument("--order", type=int, default=4)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("bench", parents=[common], help="compare speculative and plain decoding")
    p.add_argument("--map", required=True)
    p.add_argument("--model-corpus", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--cost-preset", default="paper-fit", choices=sorted(bench.PRESETS))
    p.add_argument("--out", required=True)
    p.add_argument("--prompt-words", type=int, default=1)
    p.add_argument("--max-len", type=int, default=448)
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--winner-only", action="store_true",
                   help="count only the winning candidate's tokens as proposed")
    p.add_argument("--wall-clock", action="store_true", help="also record wall-clock seconds")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", parents=[common], help="n-gram order or candidate-count sweep")
    p.add_argument("--mode", choices=("ngram", "candidates"), required=True)
    p.add_argument("--range", default="1..6", help="n-gram orders, A..B")
    p.add_argument("--k-range", default="1..4")
    p.add_argument("--len-range", default="1..32")
    p.add_argument("--cost-preset", choices=sorted(bench.PRESETS))
    p.add_argument("--train")
    p.add_argument("--test")
    p.add_argument("--model-corpus")
    p.add_argument("--demo-corpus", type=int, metavar="N_SENTENCES")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--prompt-words", type=int, default=1)
    p.add_argument("--max-len", type=int, default=448)
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("demo-corpus", parents=[common], help="write a synthetic corpus")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--kind", choices=("maintenance", "random"), default="maintenance")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_demo_corpus)
    return parser


def _fail(exc: BaseException) -> None:
    print(f"tokenmap-sd: error: {exc}", file=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidConfig, EmptyCorpus) as exc:
        _fail(exc)
        return EXIT_CONFIG
    except VocabMismatch as exc:
        _fail(exc)
        return EXIT_VOCAB
    except (OSError, CorpusEncodingError, CorruptMap, SchemaVersionMismatch) as exc:
        _fail(exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
