"""Clustered synthetic dataset: items in a cluster share a word pool and
users mostly like items from their own cluster."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import RatingMatrix


@dataclass
class SyntheticData:
    documents: dict[int, list[str]]
    ratings: RatingMatrix
    item_cluster: np.ndarray
    user_cluster: np.ndarray


def make_synthetic(n_clusters: int = 5, n_users: int = 50, n_items: int = 60, vocab_size: int = 80,
                   min_len: int = 4, max_len: int = 10, likes: tuple[int, int] = (5, 9),
                   off_cluster: float = 0.1, seed: int = 0) -> SyntheticData:
    """Generate documents and positives.

    ``vocab_size`` content words are split evenly across clusters; each
    item's document draws ``min_len..max_len`` words from its cluster's
    pool. Each user likes ``likes`` items of its own cluster, plus one
    random item from elsewhere with probability ``off_cluster``.
    """
    rng = np.random.default_rng(seed)
    per = vocab_size // n_clusters
    words = [[f"w{c}x{k}" for k in range(per)] for c in range(n_clusters)]
    item_cluster = np.arange(n_items) % n_clusters
    user_cluster = np.arange(n_users) % n_clusters
    docs = {}
    for j in range(n_items):
        length = int(rng.integers(min_len, max_len + 1))
        pool = words[item_cluster[j]]
        docs[j] = [pool[k] for k in rng.integers(0, len(pool), size=length)]
    pairs = set()
    for i in range(n_users):
        own = np.flatnonzero(item_cluster == user_cluster[i])
        n = int(rng.integers(likes[0], likes[1] + 1))
        for j in rng.choice(own, size=min(n, len(own)), replace=False):
            pairs.add((i, int(j)))
        if rng.random() < off_cluster:
            other = np.flatnonzero(item_cluster != user_cluster[i])
            pairs.add((i, int(rng.choice(other))))
    return SyntheticData(docs, RatingMatrix(n_users, n_items, pairs), item_cluster, user_cluster)
