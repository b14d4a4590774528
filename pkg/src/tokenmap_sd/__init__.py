"""Model-free speculative decoding with n-gram token maps."""

from .bench import (CALIBRATED, BenchReport, CostModel, compute_metrics, fit_cost_preset,
                    run_benchmark, sweep_candidates_vs_length, sweep_ngram_order)
from .corpus import EOS, SOT, UNK, Vocab, build_vocab, detokenize, load_corpus, tokenize
from .engine import EngineConfig, batch_decode, speculative_decode
from .errors import (BatchItemError, CorpusEncodingError, CorruptMap, EmptyCorpus, EmptyMerge,
                     InvalidConfig, LengthMismatch, SchemaVersionMismatch, TokenMapError,
                     VocabMismatch)
from .main_model import CorpusLM, MainModel, NoisyLM, autoregressive_decode
from .token_map import (Candidate, PruneConfig, TokenMap, build_map, build_raw_map, load_map,
                        lookup, merge_candidates, prune, save_map)
from .trace import DecodeTrace, StepKind, StepRecord

__version__ = "0.1.0"
