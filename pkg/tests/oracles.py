"""Independent reference computations used by several test modules."""

from collections import Counter

RESERVED = {0, 1, 2}


def brute_force_ngram_map(sequences, max_n):
    """Enumerate every (substring, following suffix) pair by substring start.

    Returns {key tuple: Counter(suffix tuple -> count)}.
    """
    table = {}
    for seq in sequences:
        seq = list(seq)
        for start in range(len(seq)):
            for length in range(1, max_n + 1):
                end = start + length
                if end >= len(seq):
                    break
                key = tuple(seq[start:end])
                if any(t in RESERVED for t in key):
                    break
                table.setdefault(key, Counter())[tuple(seq[end:])] += 1
    return table


def raw_map_as_table(token_map):
    return {k: Counter({c.continuation: c.frequency for c in v}) for k, v in token_map.entries.items()}


def greedy_rollout(model, context, steps):
    ctx = list(context)
    out = []
    for _ in range(steps):
        tok = model.greedy_next(ctx)
        out.append(tok)
        ctx.append(tok)
    return out
