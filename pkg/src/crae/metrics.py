"""Ranking and generation metrics: recall@M, mAP@cutoff, corpus BLEU."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import RatingMatrix


@dataclass
class EvalConfig:
    M_values: list[int] = field(default_factory=lambda: [50, 100, 150, 200, 250, 300])
    map_cutoff: int = 500
    bleu_max_n: int = 4
    P: int = 1

    def __post_init__(self):
        if any(m < 1 for m in self.M_values) or self.map_cutoff < 1 or self.bleu_max_n < 1:
            raise ValueError("cutoffs must be >= 1")


def _as_sets(test) -> list[set]:
    if isinstance(test, RatingMatrix):
        return [set(map(int, r)) for r in test.user_items()]
    return [set(map(int, r)) for r in test]


def recall_at_m(rankings: Sequence[Sequence[int]], test, M: int) -> tuple[np.ndarray, float]:
    """Per-user recall@M (NaN where a user has no test positives) and its mean."""
    test_sets = _as_sets(test)
    per_user = np.full(len(test_sets), np.nan)
    for u, (ranked, pos) in enumerate(zip(rankings, test_sets)):
        if pos:
            hits = sum(1 for j in list(ranked)[:M] if int(j) in pos)
            per_user[u] = hits / len(pos)
    valid = ~np.isnan(per_user)
    return per_user, float(per_user[valid].mean()) if valid.any() else 0.0


def average_precision(ranked: Sequence[int], positives: set, cutoff: int) -> float:
    hits, total = 0, 0.0
    for k, j in enumerate(list(ranked)[:cutoff], 1):
        if int(j) in positives:
            hits += 1
            total += hits / k
    return total / min(len(positives), cutoff)


def mean_average_precision(rankings: Sequence[Sequence[int]], test, cutoff: int = 500) -> float:
    aps = [average_precision(r, pos, cutoff) for r, pos in zip(rankings, _as_sets(test)) if pos]
    return float(np.mean(aps)) if aps else 0.0


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidates: Mapping | Sequence, references: Mapping | Sequence, max_n: int = 4) -> float:
    """Corpus BLEU in [0, 100] without smoothing.

    ``candidates`` maps key -> token list and ``references`` maps the same
    key -> list of token lists (plain sequences are zipped positionally).
    Clipped n-gram counts are pooled over the corpus; an order for which
    the candidates hold no n-grams at all is left out of the geometric
    mean, and any order with zero matches gives 0. The brevity penalty
    uses the reference length closest to each candidate (shorter on ties).
    """
    if isinstance(candidates, Mapping):
        keys = list(candidates)
        cands = [list(candidates[k]) for k in keys]
        refs = [[list(r) for r in references[k]] for k in keys]
    else:
        cands = [list(c) for c in candidates]
        refs = [[list(r) for r in rs] for rs in references]
    if not cands:
        raise ValueError("no candidates to score")
    if any(len(r) == 0 for r in refs):
        raise ValueError("every candidate needs at least one reference")

    matched = [0] * max_n
    possible = [0] * max_n
    cand_len = ref_len = 0
    for cand, rs in zip(cands, refs):
        cand_len += len(cand)
        ref_len += min((abs(len(r) - len(cand)), len(r)) for r in rs)[1]
        for n in range(1, max_n + 1):
            counts = _ngrams(cand, n)
            max_ref: Counter = Counter()
            for r in rs:
                max_ref |= _ngrams(r, n)
            matched[n - 1] += sum(min(c, max_ref[g]) for g, c in counts.items())
            possible[n - 1] += sum(counts.values())

    orders = [n for n in range(max_n) if possible[n] > 0]
    if not orders or any(matched[n] == 0 for n in orders):
        return 0.0
    log_p = sum(math.log(matched[n] / possible[n]) for n in orders) / len(orders)
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return 100.0 * bp * math.exp(log_p)


def nn_generate_baseline(V: np.ndarray, known: Mapping[int, Sequence], queries: Sequence[int]) -> dict[int, list]:
    """Give each query item the sequence of its Euclidean nearest neighbour
    (in item-factor space) among the items with known content."""
    if not known:
        raise ValueError("no items with known content")
    ids = np.array(sorted(known))
    pool = V[:, ids]
    out = {}
    for q in queries:
        d = np.sum((pool - V[:, [q]]) ** 2, axis=0)
        out[int(q)] = list(known[int(ids[int(np.argmin(d))])])
    return out


def write_report(rows: Sequence[tuple[str, str, float]], path: str | Path, summary: dict | None = None) -> None:
    """Tab-separated ``metric  cutoff  value`` rows followed by a JSON summary block."""
    lines = ["metric\tcutoff\tvalue"]
    lines += [f"{m}\t{c}\t{v:.6f}" for m, c, v in rows]
    payload = summary if summary is not None else {f"{m}@{c}" if c else m: v for m, c, v in rows}
    lines += ["", "# summary", json.dumps(payload, sort_keys=True, indent=2)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
