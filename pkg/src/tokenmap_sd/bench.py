"""Speedup / acceptance metrics, the decode cost model, and parameter sweeps."""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .corpus import EOS, SOT
from .engine import EngineConfig, resolve_threads, speculative_decode
from .errors import InvalidConfig, LengthMismatch
from .main_model import MainModel, autoregressive_decode
from .token_map import PruneConfig, TokenMap, build_map
from .trace import DecodeTrace, StepKind

SWEEP_HEADER = ["param", "value", "S", "A_r", "A_l", "crossover"]


@dataclass(frozen=True)
class CostModel:
    """Simulated latency of one forward pass as a function of its batch size.

    ``cost(b) = base_latency + per_token_latency * (b - 1)``; every extra
    candidate verified in the same step adds ``candidate_overhead``.
    """

    base_latency: float = 1.0
    per_token_latency: float = 0.0
    candidate_overhead: float = 0.0

    def __post_init__(self):
        if min(self.base_latency, self.per_token_latency, self.candidate_overhead) < 0:
            raise InvalidConfig("cost model constants must be non-negative")

    def cost(self, batch_size):
        return self.base_latency + self.per_token_latency * (batch_size - 1)

    def step_cost(self, step) -> float:
        t = self.cost(step.batch_size)
        if step.kind is StepKind.DRAFT:
            t += self.candidate_overhead * (step.n_candidates - 1)
        return t

    def trace_cost(self, trace: DecodeTrace) -> float:
        return float(sum(self.step_cost(s) for s in trace.steps))


# Frozen output of fit_cost_preset() with its default grids: 2 candidates break
# even at 9 draft tokens, 3 candidates at 16.
CALIBRATED = CostModel(base_latency=1.0, per_token_latency=0.011, candidate_overhead=7.1)

PRESETS = {
    "paper-fit": CALIBRATED,
    "forward-pass": CostModel(1.0, 0.0, 0.0),
}


def get_preset(name: str) -> CostModel:
    try:
        return PRESETS[name]
    except KeyError:
        raise InvalidConfig(f"unknown cost preset {name!r}; choose from {sorted(PRESETS)}") from None


# --- metrics ---------------------------------------------------------------


@dataclass
class BenchReport:
    speedup: float
    acceptance_rate: float
    avg_acceptance_length: float
    t_baseline: float
    t_speculative: float
    forward_passes_baseline: int
    forward_passes_speculative: int
    proposed: int
    accepted: int
    n_sequences: int
    no_drafts: bool
    rows: list[dict] = field(default_factory=list)
    wall_baseline_s: float | None = None
    wall_speculative_s: float | None = None

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("rows")
        if self.wall_baseline_s is None:
            d.pop("wall_baseline_s")
            d.pop("wall_speculative_s")
        return d

    def to_json(self) -> str:
        return json.dumps({"summary": self.summary(), "rows": self.rows}, indent=2) + "\n"

    def to_csv(self) -> str:
        cols = list(self.rows[0]) if self.rows else ["index"]
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n", extrasaction="ignore")
        writer.writeheader()
        writer.writerows(self.rows)
        s = self.summary()
        writer.writerow({
            "index": "summary",
            "ar_forward_passes": s["forward_passes_baseline"],
            "sd_forward_passes": s["forward_passes_speculative"],
            "proposed": s["proposed"],
            "accepted": s["accepted"],
            "t_baseline": s["t_baseline"],
            "t_speculative": s["t_speculative"],
            "speedup": s["speedup"],
            "acceptance_rate": s["acceptance_rate"],
        })
        return buf.getvalue()

    def write(self, path, fmt: str = "json") -> None:
        text = self.to_csv() if fmt == "csv" else self.to_json()
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)

    def line(self) -> str:
        flag = " (no drafts)" if self.no_drafts else ""
        return (f"S={self.speedup:.4f} A_r={self.acceptance_rate:.2f}%{flag} "
                f"A_l={self.avg_acceptance_length:.3f}")


def _proposed(trace: DecodeTrace, count_all_candidates: bool) -> int:
    if count_all_candidates:
        return trace.proposed
    return sum(s.winner_proposed for s in trace.steps)


def compute_metrics(traces: Sequence[DecodeTrace], ar_traces: Sequence[DecodeTrace],
                    cost: CostModel, count_all_candidates: bool = True) -> BenchReport:
    """Aggregate speculative traces against their autoregressive counterparts.

    acceptance_rate is a percentage of proposed draft tokens; with
    ``count_all_candidates`` the denominator includes tokens of losing
    candidates. avg_acceptance_length is accepted draft tokens per sequence.
    """
    if len(traces) != len(ar_traces):
        raise LengthMismatch(f"{len(traces)} speculative traces vs {len(ar_traces)} baseline traces")
    if not traces:
        raise LengthMismatch("no traces to summarize")
    rows = []
    for i, (sd, ar) in enumerate(zip(traces, ar_traces)):
        t_ar, t_sd = cost.trace_cost(ar), cost.trace_cost(sd)
        rows.append({
            "index": i,
            "tokens": len(sd.output) - sd.prompt_len,
            "ar_forward_passes": ar.forward_passes,
            "sd_forward_passes": sd.forward_passes,
            "proposed": _proposed(sd, count_all_candidates),
            "accepted": sd.accepted,
            "t_baseline": t_ar,
            "t_speculative": t_sd,
            "speedup": t_ar / t_sd if t_sd else float("nan"),
            "acceptance_rate": 100.0 * sd.accepted / max(_proposed(sd, count_all_candidates), 1),
            "match": sd.output == ar.output,
        })
    proposed = sum(r["proposed"] for r in rows)
    accepted = sum(r["accepted"] for r in rows)
    t_base = float(sum(r["t_baseline"] for r in rows))
    t_spec = float(sum(r["t_speculative"] for r in rows))
    return BenchReport(
        speedup=t_base / t_spec,
        acceptance_rate=100.0 * accepted / proposed if proposed else 0.0,
        avg_acceptance_length=accepted / len(rows),
        t_baseline=t_base,
        t_speculative=t_spec,
        forward_passes_baseline=sum(r["ar_forward_passes"] for r in rows),
        forward_passes_speculative=sum(r["sd_forward_passes"] for r in rows),
        proposed=proposed,
        accepted=accepted,
        n_sequences=len(rows),
        no_drafts=proposed == 0,
        rows=rows,
    )


def make_prompts(test_sequences: Iterable[Sequence[int]], prompt_words: int = 1) -> list[list[int]]:
    """SOT followed by the first ``prompt_words`` tokens of each test utterance."""
    out = []
    for seq in test_sequences:
        out.append([SOT] + [t for t in seq[:prompt_words] if t != EOS])
    return out


def run_benchmark(model: MainModel, token_map: TokenMap, prompts: Sequence[Sequence[int]],
                  cost: CostModel, config: EngineConfig | None = None,
                  count_all_candidates: bool = True, wall_clock: bool = False) -> BenchReport:
    config = config or EngineConfig()
    ar_traces, sd_traces = [], []
    wall_ar = wall_sd = 0.0
    for prompt in prompts:
        t0 = time.perf_counter()
        _, ar = autoregressive_decode(model, prompt, config.max_output_len)
        t1 = time.perf_counter()
        _, sd = speculative_decode(model, token_map, prompt, config)
        t2 = time.perf_counter()
        wall_ar += t1 - t0
        wall_sd += t2 - t1
        ar_traces.append(ar)
        sd_traces.append(sd)
    report = compute_metrics(sd_traces, ar_traces, cost, count_all_candidates)
    if wall_clock:
        report.wall_baseline_s = wall_ar
        report.wall_speculative_s = wall_sd
    return report


# --- sweeps ------------------------------------------------------------------


@dataclass
class CandidateSweep:
    """Simulated times for K candidates of draft length L versus L plain steps."""

    ks: np.ndarray
    lengths: np.ndarray
    t_sd: np.ndarray  # shape (len(ks), len(lengths))
    t_ar: np.ndarray  # shape (len(lengths),)
    crossovers: dict[int, int | None]

    def rows(self) -> list[dict]:
        out = []
        for i, k in enumerate(self.ks):
            for j, length in enumerate(self.lengths):
                out.append({
                    "param": f"K{int(k)}",
                    "value": int(length),
                    "S": float(self.t_ar[j] / self.t_sd[i, j]),
                    "A_r": "",
                    "A_l": "",
                    "crossover": _fmt_crossover(self.crossovers[int(k)]),
                })
        return out


def _fmt_crossover(c: int | None) -> str:
    return "none" if c is None else str(c)


def sd_step_times(cost: CostModel, ks: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """One verification step packing K drafts of length L: batch K*L + 1."""
    k = ks[:, None].astype(float)
    length = lengths[None, :].astype(float)
    return cost.base_latency + cost.per_token_latency * k * length + cost.candidate_overhead * (k - 1)


def crossover_lengths(t_sd: np.ndarray, t_ar: np.ndarray, ks: np.ndarray, lengths: np.ndarray
                      ) -> dict[int, int | None]:
    """Smallest draft length at which SD is no slower than plain decoding, per K."""
    ok = t_sd <= t_ar[None, :]
    return {int(k): (int(lengths[row.argmax()]) if row.any() else None) for k, row in zip(ks, ok)}


def sweep_candidates_vs_length(cost: CostModel, ks: Iterable[int] = range(1, 5),
                               lengths: Iterable[int] = range(1, 33)) -> CandidateSweep:
    ks = np.asarray(list(ks), dtype=int)
    lengths = np.asarray(list(lengths), dtype=int)
    t_sd = sd_step_times(cost, ks, lengths)
    t_ar = lengths * cost.cost(1)
    return CandidateSweep(ks, lengths, t_sd, t_ar, crossover_lengths(t_sd, t_ar, ks, lengths))


def fit_cost_preset(targets: dict[int, int] | None = None,
                    per_token_grid: np.ndarray | None = None,
                    overhead_grid: np.ndarray | None = None,
                    base_latency: float = 1.0) -> CostModel:
    """Grid-search (per_token_latency, candidate_overhead) reproducing target crossovers.

    Among grid points whose crossovers equal ``targets`` exactly, picks the one
    whose break-even lengths sit furthest from the integer boundaries.
    """
    targets = targets or {2: 9, 3: 16}
    p = np.linspace(0.01, 0.1, 91) if per_token_grid is None else np.asarray(per_token_grid, float)
    o = np.linspace(0.0, 20.0, 801) if overhead_grid is None else np.asarray(overhead_grid, float)
    pp, oo = np.meshgrid(p, o, indexing="ij")
    margin = np.full(pp.shape, np.inf)
    for k, length in targets.items():
        slope = base_latency - pp * k
        # SD <= AR  <=>  L >= (base + overhead*(k-1)) / (base - k*per_token)
        with np.errstate(divide="ignore"):
            threshold = np.where(slope > 0, (base_latency + oo * (k - 1)) / np.maximum(slope, 1e-300), np.inf)
        lower, upper = threshold - (length - 1), length - threshold
        valid = (lower > 0) & (upper >= 0)
        margin = np.where(valid, np.minimum(margin, np.minimum(lower, upper)), -np.inf)
    best = np.unravel_index(np.argmax(margin), margin.shape)
    if not np.isfinite(margin[best]):
        raise InvalidConfig(f"no grid point reproduces crossovers {targets}")
    return CostModel(base_latency, float(pp[best]), float(oo[best]))


def sweep_ngram_order(train_sequences: Sequence[Sequence[int]], test_sequences: Sequence[Sequence[int]],
                      model: MainModel, cost: CostModel, n_range: Iterable[int] = range(1, 7),
                      prune_config: PruneConfig | None = None, config: EngineConfig | None = None,
                      prompt_words: int = 1, vocab: Sequence[str] | None = None,
                      threads: int | None = None) -> list[dict]:
    """Speedup, acceptance rate and acceptance length for each max n-gram order."""
    ns = list(n_range)
    if not ns or min(ns) < 1 or max(ns) > 8:
        raise InvalidConfig("n_range must lie within 1..8")
    prompts = make_prompts(test_sequences, prompt_words)

    def one(n: int) -> dict:
        token_map = build_map(train_sequences, n, prune_config, vocab)
        rep = run_benchmark(model, token_map, prompts, cost, config)
        return {"param": "N", "value": n, "S": rep.speedup, "A_r": rep.acceptance_rate,
                "A_l": rep.avg_acceptance_length, "crossover": ""}

    threads = resolve_threads() if threads is None else threads
    if threads <= 1:
        return [one(n) for n in ns]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, ns))


def sweep_to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_HEADER, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()
