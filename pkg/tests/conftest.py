import numpy as np
import pytest

from ymap import kernels
from ymap.captions import load_embeddings

from helpers import write_embedding_file


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # first kernel call pays JIT compilation on the numba backend; keep that
    # cost out of every timed assertion
    kernels.warmup()


@pytest.fixture(scope="session")
def small_table(tmp_path_factory):
    """105-word embedding table with a few real words for readable tests."""
    rng = np.random.default_rng(1234)
    words = ["cat", "dog", "mat", "car", "tree"] + [f"w{i:04d}" for i in range(100)]
    path = write_embedding_file(tmp_path_factory.mktemp("emb") / "small.txt", words, rng)
    return load_embeddings(path)


@pytest.fixture(scope="session")
def big_table(tmp_path_factory):
    """2200-word table backing the full-size vocabulary tests."""
    rng = np.random.default_rng(99)
    words = [f"tok{i:05d}" for i in range(2200)]
    path = write_embedding_file(tmp_path_factory.mktemp("emb") / "big.txt", words, rng)
    return load_embeddings(path)


@pytest.fixture(scope="session")
def big_corpus():
    """Corpus whose top-2048 tokens are exactly the thrice-repeated ones."""
    lines = []
    for i in range(2200):
        reps = 3 if i < 2048 else 1
        lines.extend([f"tok{i:05d}"] * reps)
    return [" ".join(lines[i : i + 40]) for i in range(0, len(lines), 40)]
