"""Text and rating ingestion: vocabulary, sequence encoding, wildcard
corruption and per-user train/test splitting."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

WILDCARD = "⟨wildcard⟩"
EOS = "$"

_PUNCT = re.compile(r"[^\w\s]", flags=re.UNICODE)


class CorpusError(ValueError):
    """Raised for malformed corpus, ratings or vocabulary input."""


def tokenize(text: str) -> list[str]:
    """Lowercase, strip punctuation and split on whitespace."""
    return _PUNCT.sub(" ", text.lower()).split()


@dataclass(frozen=True)
class Vocabulary:
    """Dense token <-> id map. The wildcard and end-of-sequence tokens are
    always the last two ids."""

    id_to_token: tuple[str, ...]
    token_to_id: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mapping = {tok: i for i, tok in enumerate(self.id_to_token)}
        if len(mapping) != len(self.id_to_token):
            raise CorpusError("duplicate tokens in vocabulary")
        if WILDCARD not in mapping or EOS not in mapping:
            raise CorpusError("vocabulary must contain the wildcard and eos tokens")
        object.__setattr__(self, "token_to_id", mapping)

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    @property
    def wildcard_id(self) -> int:
        return self.token_to_id[WILDCARD]

    @property
    def eos_id(self) -> int:
        return self.token_to_id[EOS]

    def __len__(self) -> int:
        return self.size

    def decode(self, ids: Iterable[int], strip_eos: bool = True) -> list[str]:
        out = [self.id_to_token[i] for i in ids]
        if strip_eos and out and out[-1] == EOS:
            out = out[:-1]
        return out

    def save(self, path: str | Path) -> None:
        Path(path).write_text("".join(tok + "\n" for tok in self.id_to_token), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls(tuple(lines))


@dataclass
class SequencePair:
    item_id: int
    clean: list[int]
    corrupted: list[int]

    def __post_init__(self):
        if len(self.clean) == 0 or len(self.clean) != len(self.corrupted):
            raise CorpusError(f"item {self.item_id}: clean/corrupted lengths differ or are empty")


@dataclass
class RatingMatrix:
    """Binary implicit-feedback matrix stored as its set of positive pairs."""

    n_users: int
    n_items: int
    positives: set[tuple[int, int]]

    def __post_init__(self):
        self.positives = set(self.positives)
        for i, j in self.positives:
            if not (0 <= i < self.n_users and 0 <= j < self.n_items):
                raise CorpusError(f"rating ({i}, {j}) out of range {self.n_users}x{self.n_items}")

    def user_items(self) -> list[np.ndarray]:
        """Sorted positive item ids for each user."""
        rows: list[list[int]] = [[] for _ in range(self.n_users)]
        for i, j in self.positives:
            rows[i].append(j)
        return [np.array(sorted(r), dtype=np.int64) for r in rows]

    def item_users(self) -> list[np.ndarray]:
        cols: list[list[int]] = [[] for _ in range(self.n_items)]
        for i, j in self.positives:
            cols[j].append(i)
        return [np.array(sorted(c), dtype=np.int64) for c in cols]

    def dense(self) -> np.ndarray:
        R = np.zeros((self.n_users, self.n_items))
        for i, j in self.positives:
            R[i, j] = 1.0
        return R

    def __len__(self) -> int:
        return len(self.positives)


@dataclass(frozen=True)
class SplitSpec:
    P: int
    seed: int = 0

    def __post_init__(self):
        if self.P < 1:
            raise ValueError("P must be >= 1")


def build_vocabulary(documents: Sequence[Sequence[str]], min_count: int = 1) -> Vocabulary:
    """Build a vocabulary ordered by descending frequency, ties broken
    lexicographically; the wildcard and eos tokens are appended last."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    if len(documents) == 0:
        raise CorpusError("empty corpus")
    counts = Counter(tok for doc in documents for tok in doc if tok not in (WILDCARD, EOS))
    kept = sorted((tok for tok, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    if not kept:
        raise CorpusError(f"no token occurs at least {min_count} times")
    return Vocabulary(tuple(kept) + (WILDCARD, EOS))


def encode_document(tokens: Sequence[str], vocab: Vocabulary) -> list[int]:
    """Map tokens to ids (unknown tokens become the wildcard) and append eos."""
    wc = vocab.wildcard_id
    ids = [vocab.token_to_id.get(tok, wc) for tok in tokens]
    ids.append(vocab.eos_id)
    return ids


def wildcard_corrupt(clean: Sequence[int], rate: float, seed, wildcard_id: int, eos_id: int) -> list[int]:
    """Replace each non-eos position with the wildcard with probability `rate`.

    `seed` may be an int or a ``numpy.random.Generator``; a generator is
    advanced by exactly ``len(clean)`` uniform draws.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"corruption rate {rate} outside [0, 1]")
    if len(clean) == 0 or clean[-1] != eos_id:
        raise CorpusError("sequence must end with eos")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    hit = rng.random(len(clean)) < rate
    return [wildcard_id if (h and tok != eos_id) else tok for tok, h in zip(clean, hit)]


def split_ratings(r: RatingMatrix, spec: SplitSpec) -> tuple[RatingMatrix, RatingMatrix]:
    """Keep ``min(P, n)`` random positives per user for training, the rest for testing."""
    rng = np.random.default_rng(spec.seed)
    train, test = set(), set()
    for i, items in enumerate(r.user_items()):
        if len(items) == 0:
            continue
        chosen = rng.choice(len(items), size=min(spec.P, len(items)), replace=False)
        mask = np.zeros(len(items), dtype=bool)
        mask[chosen] = True
        train.update((i, int(j)) for j in items[mask])
        test.update((i, int(j)) for j in items[~mask])
    return RatingMatrix(r.n_users, r.n_items, train), RatingMatrix(r.n_users, r.n_items, test)


# -- files -------------------------------------------------------------------


def read_corpus(path: str | Path) -> dict[int, list[str]]:
    """Read ``item_id<TAB>text`` lines into tokenized documents."""
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"corpus file not found: {path}")
    docs: dict[int, list[str]] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            head, sep, text = line.partition("\t")
            if not sep:
                raise CorpusError(f"{path}:{lineno}: expected 'item_id<TAB>text'")
            try:
                item = int(head)
            except ValueError:
                raise CorpusError(f"{path}:{lineno}: bad item id {head!r}") from None
            if item < 0:
                raise CorpusError(f"{path}:{lineno}: negative item id")
            docs[item] = tokenize(text)
    if not docs:
        raise CorpusError(f"{path}: no documents")
    return docs


def write_corpus(docs: dict[int, Sequence[str]], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for item in sorted(docs):
            fh.write(f"{item}\t{' '.join(docs[item])}\n")


def read_ratings(path: str | Path, n_users: int | None = None, n_items: int | None = None) -> RatingMatrix:
    """Read ``user_id<TAB>item_id`` lines; dimensions default to max id + 1."""
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"ratings file not found: {path}")
    pairs = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 2:
                raise CorpusError(f"{path}:{lineno}: expected 'user_id<TAB>item_id'")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise CorpusError(f"{path}:{lineno}: non-integer id") from None
            if i < 0 or j < 0:
                raise CorpusError(f"{path}:{lineno}: negative id")
            pairs.add((i, j))
    if n_users is None:
        n_users = 1 + max((i for i, _ in pairs), default=-1)
    if n_items is None:
        n_items = 1 + max((j for _, j in pairs), default=-1)
    return RatingMatrix(n_users, n_items, pairs)


def write_ratings(r: RatingMatrix, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for i, j in sorted(r.positives):
            fh.write(f"{i}\t{j}\n")
