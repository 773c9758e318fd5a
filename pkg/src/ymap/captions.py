"""Caption codec: word-embedding table, filtered vocabulary, and the
8-slot x 300-dim encode/decode path plus the multi-hot conversion."""

import re
from collections import Counter
from pathlib import Path

import numpy as np

TOKEN_SLOTS = 8
EMBED_DIMS = 300
VOCAB_SIZE = 2048

# The 19 high-frequency tokens removed before vocabulary construction.
STOP_WORDS = frozenset(
    ["(", ")", ".", "a", "an", "s", "of", "on", "and", "I", "in", "the",
     "is", "it", "at", "to", "with", "for", "from"]
)
_STOP_LOWER = frozenset(w.lower() for w in STOP_WORDS)

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text):
    """Lowercase tokens split on non-alphanumerics."""
    return _TOKEN_RE.findall(text.lower())


class EmbeddingTable:
    """word -> embedding, min-max normalized per dimension into [-1, 1].

    The raw per-dimension bounds are kept so normalization is invertible;
    rank is the load order (embedding files are frequency-sorted).
    """

    def __init__(self, words, vectors, lo, hi):
        self.words = list(words)
        self.vectors = np.asarray(vectors, dtype=np.float64)
        self.lo = np.asarray(lo, dtype=np.float64)
        self.hi = np.asarray(hi, dtype=np.float64)
        self.index = {w: i for i, w in enumerate(self.words)}
        self.rank = dict(self.index)

    def __contains__(self, word):
        return word in self.index

    def __len__(self):
        return len(self.words)

    @property
    def dims(self):
        return self.vectors.shape[1]

    def vector(self, word):
        return self.vectors[self.index[word]]


def load_embeddings(path, dims=EMBED_DIMS):
    """Parse a text embedding file: one 'word v1 .. vN' entry per line."""
    words = []
    rows = []
    for lineno, line in enumerate(Path(path).open(encoding="utf-8"), 1):
        parts = line.rstrip("\n").split(" ")
        if len(parts) < 2 and not parts[0]:
            continue
        if len(parts) != dims + 1:
            raise ValueError(f"{path}:{lineno}: expected {dims} components, got {len(parts) - 1}")
        words.append(parts[0])
        rows.append(np.asarray(parts[1:], dtype=np.float64))
    if not words:
        raise ValueError(f"{path}: empty embedding file")
    if len(set(words)) != len(words):
        dupe = next(w for w, c in Counter(words).items() if c > 1)
        raise ValueError(f"{path}: duplicate word {dupe!r}")
    raw = np.vstack(rows)
    lo = raw.min(axis=0)
    hi = raw.max(axis=0)
    span = hi - lo
    safe = np.where(span == 0, 1.0, span)
    norm = 2.0 * (raw - lo) / safe - 1.0
    norm[:, span == 0] = 0.0  # constant dimension carries no signal
    return EmbeddingTable(words, norm, lo, hi)


class Vocabulary:
    """Up to `capacity` usable words, ordered by descending corpus frequency."""

    def __init__(self, words, capacity=VOCAB_SIZE):
        self.words = list(words)
        self.capacity = capacity
        self.index = {w: i for i, w in enumerate(self.words)}
        self.stop_words = STOP_WORDS

    def __contains__(self, word):
        return word in self.index

    def __len__(self):
        return len(self.words)


def build_vocab(caption_corpus, table, k=VOCAB_SIZE):
    """Count tokens, drop stop-words and words without embeddings, keep the
    top-k by frequency (ties by lexicographic order)."""
    counts = Counter()
    for text in caption_corpus:
        for tok in tokenize(text):
            if tok in _STOP_LOWER or tok not in table:
                continue
            counts[tok] += 1
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary([w for w, _ in ordered[:k]], capacity=k)


def encode_caption(caption, vocab, table, slots=TOKEN_SLOTS):
    """First `slots` distinct in-vocabulary words as normalized embeddings.

    Stop-words and out-of-vocabulary tokens are dropped, repeats keep their
    first occurrence, unused slots stay zero.
    """
    out = np.zeros((slots, table.dims), dtype=np.float32)
    seen = []
    for tok in tokenize(caption):
        if tok in _STOP_LOWER or tok not in vocab or tok in seen:
            continue
        seen.append(tok)
        if len(seen) == slots:
            break
    for i, w in enumerate(seen):
        out[i] = table.vector(w)
    return out


def decode_tokens(pred, table, vocab, norm_thresh=0.01, sim_thresh=0.5):
    """Rows back to words: skip near-zero rows, pick the vocabulary word
    with highest cosine similarity, keep it when similarity >= sim_thresh.

    Returns a list of (word, cosine) pairs in slot order.
    """
    pred = np.asarray(pred, dtype=np.float64)
    if not len(vocab):
        return []
    mat = np.vstack([table.vector(w) for w in vocab.words])
    mat_norm = np.linalg.norm(mat, axis=1)
    mat_norm[mat_norm == 0] = 1.0
    results = []
    for row in pred:
        n = np.linalg.norm(row)
        if n < norm_thresh:
            continue
        sims = (mat @ row) / (mat_norm * n)
        best = int(np.argmax(sims))
        if sims[best] >= sim_thresh:
            results.append((vocab.words[best], float(sims[best])))
    return results


def to_multihot(words, vocab):
    """Binary vector of length vocab.capacity with 1 at each word's index."""
    out = np.zeros(vocab.capacity, dtype=np.float32)
    for w in words:
        if w not in vocab:
            raise KeyError(f"word not in vocabulary: {w!r}")
        out[vocab.index[w]] = 1.0
    return out


def save_vocab(vocab, table, path):
    """Persist the vocabulary word order plus the normalization bounds.

    <path> holds one word per line; <path>.bounds holds 'lo hi' per
    embedding dimension.
    """
    path = Path(path)
    path.write_text("\n".join(vocab.words) + "\n")
    bounds = "\n".join(f"{lo!r} {hi!r}" for lo, hi in zip(table.lo, table.hi))
    Path(str(path) + ".bounds").write_text(bounds + "\n")


def load_vocab(path, capacity=VOCAB_SIZE):
    words = [w for w in Path(path).read_text().splitlines() if w]
    return Vocabulary(words, capacity=capacity)
