import numpy as np
import pytest
from threadpoolctl import threadpool_limits

from capsner.corpus import generate_synthetic
from capsner.embedding import random_embeddings
from capsner.training import TrainConfig, train

# single-threaded BLAS keeps reductions in a fixed order
threadpool_limits(1)


TINY = dict(
    embedding_dim=8,
    hidden_dim=6,
    attention_heads=2,
    num_primary=4,
    primary_dim=3,
    digit_dim=4,
    batch_size=4,
    epochs=2,
    seed=3,
)


@pytest.fixture(scope="session")
def tiny_corpus():
    return generate_synthetic(sentences=12, vocab_size=20, min_length=4, max_length=8, seed=11)


@pytest.fixture(scope="session")
def tiny_embeddings(tiny_corpus):
    return random_embeddings(tiny_corpus.char_vocabulary, TINY["embedding_dim"], seed=11)


@pytest.fixture
def tiny_config():
    return TrainConfig(**TINY)


@pytest.fixture(scope="session")
def tiny_trained(tiny_corpus, tiny_embeddings):
    config = TrainConfig(**TINY)
    return config, train(config, tiny_corpus, embeddings=tiny_embeddings)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line[1])
