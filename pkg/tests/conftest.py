import numpy as np
import pytest

from crae.corpus import SplitSpec, build_vocabulary, encode_document, split_ratings
from crae.synth import make_synthetic
from crae.trainer import TrainConfig


class Micro:
    """Small synthetic problem shared by the training tests."""

    def __init__(self, n_users=20, n_items=15, seed=0, P=3):
        data = make_synthetic(n_clusters=3, n_users=n_users, n_items=n_items, vocab_size=30, min_len=3,
                              max_len=6, likes=(3, 6), seed=seed)
        self.data = data
        self.vocab = build_vocabulary(list(data.documents.values()))
        self.sequences = {j: encode_document(t, self.vocab) for j, t in data.documents.items()}
        self.train, self.test = split_ratings(data.ratings, SplitSpec(P, seed))

    def config(self, **kw):
        base = dict(K=3, K_W=6, epochs=3, learning_rate=0.01, record_wall_time=False, seed=0)
        base.update(kw)
        return TrainConfig(**base)


@pytest.fixture(scope="session")
def micro():
    return Micro()


@pytest.fixture
def rng():
    return np.random.default_rng(0)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
