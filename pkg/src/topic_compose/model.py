"""Core types and file formats for spectral topic models.

A model is a pair (B, A): B holds one word distribution per topic in its
columns, A holds the joint probability of drawing each ordered topic pair.
Corpora are bags of word counts. Everything is 0-based in memory; the TSV
formats use 1-based document and word ids.
"""

import os

import numpy as np
import scipy.sparse as sparse
from dataclasses import dataclass, field

NEG_TOL = 1e-12        # entries this far below zero are treated as rounding noise
COL_SUM_TOL = 1e-8     # tolerance on stochastic column / total sums
SYM_TOL = 1e-10        # tolerance on symmetry of topic-topic matrices
COMP_SUM_TOL = 1e-6    # looser sum tolerance for inferred composition columns

_FLOAT_FMT = "%.17g"   # round-trips float64 exactly


def _clean_nonnegative(X, name):
    """Validate entries of X are >= -NEG_TOL, clamping rounding noise to 0."""
    if not np.isfinite(X).all():
        raise ValueError(f"{name} contains non-finite entries")
    lo = X.min() if X.size else 0.0
    if lo < -NEG_TOL:
        i = np.unravel_index(int(np.argmin(X)), X.shape)
        raise ValueError(f"{name} has a negative entry {lo!r} at index {tuple(int(v) for v in i)}")
    np.clip(X, 0.0, None, out=X)


@dataclass(frozen=True)
class TopicModel:
    """Word-topic matrix B (N x K, column-stochastic) and topic-topic
    joint probability matrix A (K x K, symmetric, entries summing to 1)."""

    B: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        B = np.array(self.B, dtype=np.float64, order="C")
        A = np.array(self.A, dtype=np.float64, order="C")
        if B.ndim != 2:
            raise ValueError(f"B must be a matrix, got ndim={B.ndim}")
        N, K = B.shape
        if K < 1:
            raise ValueError("model must have at least one topic")
        if K > N:
            raise ValueError(
                f"overcomplete model: {K} topics over a vocabulary of {N} words"
            )
        _clean_nonnegative(B, "B")
        sums = B.sum(axis=0)
        j = int(np.argmax(np.abs(sums - 1.0)))
        if abs(sums[j] - 1.0) > COL_SUM_TOL:
            raise ValueError(f"column {j} of B sums to {sums[j]!r}, expected 1")
        if A.shape != (K, K):
            raise ValueError(f"A has shape {A.shape}, expected ({K}, {K}) to match B")
        asym = float(np.abs(A - A.T).max()) if K > 1 else 0.0
        if asym > SYM_TOL:
            raise ValueError(f"A is not symmetric: max |A - A^T| = {asym:.3e}")
        _clean_nonnegative(A, "A")
        total = float(A.sum())
        if abs(total - 1.0) > COL_SUM_TOL:
            raise ValueError(f"entries of A sum to {total!r}, expected 1")
        B.setflags(write=False)
        A.setflags(write=False)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "A", A)

    @property
    def N(self):
        return self.B.shape[0]

    @property
    def K(self):
        return self.B.shape[1]


@dataclass(frozen=True)
class WordTopicPosterior:
    """Per-word topic posterior matrix (K x N); every column is a
    distribution over topics."""

    Bbreve: np.ndarray

    def __post_init__(self):
        Bb = np.array(self.Bbreve, dtype=np.float64, order="C")
        if Bb.ndim != 2:
            raise ValueError("Bbreve must be a matrix")
        _clean_nonnegative(Bb, "Bbreve")
        sums = Bb.sum(axis=0)
        j = int(np.argmax(np.abs(sums - 1.0)))
        if abs(sums[j] - 1.0) > COL_SUM_TOL:
            raise ValueError(f"posterior column {j} sums to {sums[j]!r}, expected 1")
        Bb.setflags(write=False)
        object.__setattr__(self, "Bbreve", Bb)


@dataclass(frozen=True)
class CompositionMatrix:
    """Topic compositions for a corpus, one document per column (K x M);
    every column lies on the probability simplex."""

    W: np.ndarray

    def __post_init__(self):
        W = np.array(self.W, dtype=np.float64, order="C")
        if W.ndim != 2:
            raise ValueError("W must be a matrix")
        if W.shape[0] < 1 or W.shape[1] < 1:
            raise ValueError(f"W has degenerate shape {W.shape}")
        _clean_nonnegative(W, "W")
        sums = W.sum(axis=0)
        j = int(np.argmax(np.abs(sums - 1.0)))
        if abs(sums[j] - 1.0) > COMP_SUM_TOL:
            raise ValueError(f"composition column {j} sums to {sums[j]!r}, expected 1")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @property
    def K(self):
        return self.W.shape[0]

    @property
    def M(self):
        return self.W.shape[1]


@dataclass(frozen=True)
class Corpus:
    """Sparse word counts for M documents over an N-word vocabulary.

    Stored as parallel (docs, words, counts) arrays sorted by document
    then word, with at most one entry per (document, word) pair. Every
    document must contain at least one word.
    """

    docs: np.ndarray
    words: np.ndarray
    counts: np.ndarray
    M: int
    N: int
    lengths: np.ndarray = field(init=False)

    def __post_init__(self):
        docs = np.asarray(self.docs, dtype=np.int64).ravel()
        words = np.asarray(self.words, dtype=np.int64).ravel()
        counts = np.asarray(self.counts, dtype=np.int64).ravel()
        if not (docs.size == words.size == counts.size):
            raise ValueError("docs, words and counts must have equal lengths")
        if self.M < 1 or self.N < 1:
            raise ValueError(f"corpus dimensions M={self.M}, N={self.N} must be positive")
        if docs.size:
            if docs.min() < 0 or docs.max() >= self.M:
                raise ValueError(f"document index out of range [0, {self.M})")
            if words.min() < 0 or words.max() >= self.N:
                raise ValueError(f"word index out of range [0, {self.N})")
        if (counts < 1).any():
            i = int(np.argmax(counts < 1))
            raise ValueError(f"count must be >= 1, got {counts[i]} at entry {i}")
        order = np.lexsort((words, docs))
        docs, words, counts = docs[order], words[order], counts[order]
        key = docs * self.N + words
        if key.size and (np.diff(key) == 0).any():
            i = int(np.argmax(np.diff(key) == 0))
            raise ValueError(
                f"duplicate entry for document {docs[i]}, word {words[i]}"
            )
        lengths = np.bincount(docs, weights=counts, minlength=self.M).astype(np.int64)
        if (lengths == 0).any():
            m = int(np.argmax(lengths == 0))
            raise ValueError(f"document {m} is empty")
        for arr in (docs, words, counts, lengths):
            arr.setflags(write=False)
        object.__setattr__(self, "docs", docs)
        object.__setattr__(self, "words", words)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "lengths", lengths)

    def to_sparse(self):
        """Word-document count matrix (N x M) in CSC form."""
        H = sparse.csc_array(
            (self.counts.astype(np.float64), (self.words, self.docs)),
            shape=(self.N, self.M),
        )
        return H


def normalize_corpus(corpus):
    """Column-normalize the count matrix: word frequencies per document."""
    H = corpus.to_sparse()
    inv = sparse.dia_array(
        (1.0 / corpus.lengths.astype(np.float64)[None, :], [0]),
        shape=(corpus.M, corpus.M),
    )
    return (H @ inv).tocsc()


def topic_marginals(model):
    """Corpus-level topic probabilities p(z=k), the row sums of A."""
    return model.A.sum(axis=1)


def word_topic_posterior(model):
    """Posterior p(z=k | x=i) under the model's topic marginals.

    Words the model gives zero probability to under every topic fall back
    to the marginal distribution.
    """
    pz = topic_marginals(model)
    joint = model.B * pz[None, :]          # (N, K): p(x=i, z=k)
    px = joint.sum(axis=1)
    Bb = np.empty((model.K, model.N))
    seen = px > 0.0
    Bb[:, seen] = (joint[seen, :] / px[seen, None]).T
    if not seen.all():
        Bb[:, ~seen] = pz[:, None]
    return WordTopicPosterior(Bb)


# ---------------------------------------------------------------------------
# file formats

def write_dense_tsv(path, X):
    """Write a dense matrix: `rows<TAB>cols` header, one row per line,
    tab-separated %.17g values."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("expected a matrix")
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{X.shape[0]}\t{X.shape[1]}\n")
        np.savetxt(fh, X, fmt=_FLOAT_FMT, delimiter="\t")


def read_dense_tsv(path):
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: malformed header {header!r}")
        rows, cols = int(header[0]), int(header[1])
        X = np.loadtxt(fh, dtype=np.float64, delimiter="\t", ndmin=2)
    if X.size == 0:
        X = X.reshape(rows, cols) if rows * cols == 0 else X
    if X.shape != (rows, cols):
        raise ValueError(f"{path}: header says {rows}x{cols}, body is {X.shape}")
    return X


def write_corpus_tsv(path, corpus):
    """Write sparse counts: `M<TAB>N<TAB>NNZ` header, then 1-based
    `doc<TAB>word<TAB>count` triplets sorted by document then word."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{corpus.M}\t{corpus.N}\t{corpus.docs.size}\n")
        body = np.column_stack((corpus.docs + 1, corpus.words + 1, corpus.counts))
        np.savetxt(fh, body, fmt="%d", delimiter="\t")


def read_corpus_tsv(path):
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ValueError(f"{path}: malformed header {header!r}")
        M, N, nnz = (int(v) for v in header)
        body = np.loadtxt(fh, dtype=np.int64, delimiter="\t", ndmin=2)
    if body.size == 0:
        body = body.reshape(0, 3)
    if body.shape != (nnz, 3):
        raise ValueError(f"{path}: header says {nnz} entries, body has shape {body.shape}")
    docs, words, counts = body[:, 0], body[:, 1], body[:, 2]
    if body.size and (docs.min() < 1 or words.min() < 1):
        raise ValueError(f"{path}: document and word ids are 1-based")
    return Corpus(docs=docs - 1, words=words - 1, counts=counts, M=M, N=N)


def write_composition_tsv(path, comp):
    write_dense_tsv(path, comp.W)


def read_composition_tsv(path):
    return CompositionMatrix(read_dense_tsv(path))


def save_model(directory, model):
    """Write B.tsv and A.tsv into `directory` (created if missing)."""
    os.makedirs(directory, exist_ok=True)
    write_dense_tsv(os.path.join(directory, "B.tsv"), model.B)
    write_dense_tsv(os.path.join(directory, "A.tsv"), model.A)


def load_model(directory):
    """Read B.tsv and A.tsv from a model directory.

    A is symmetrized as (A + A^T) / 2 before validation, so files only
    need to be symmetric up to write precision.
    """
    B = read_dense_tsv(os.path.join(directory, "B.tsv"))
    A = read_dense_tsv(os.path.join(directory, "A.tsv"))
    return TopicModel(B=B, A=(A + A.T) / 2.0)
