"""Sparse TF-IDF / BM25 featurization over a corpus.

Weighting families:
    tfidf_log   (1 + ln tf) * ln(n_docs / df)
    bm25        idf * tf*(k1+1) / (tf + k1*(1 - b + b*len/avg_len)),
                idf = ln((n_docs - df + 0.5) / (df + 0.5) + 1)
    tfidf_bm25  both families concatenated; bm25 block starts at vocab_size

Vectors are L2-normalized by default (jointly, over all stored entries).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .corpus import Corpus, Document, tokenize

WEIGHTINGS = ("tfidf_log", "bm25", "tfidf_bm25")


@dataclass(frozen=True)
class FeatureSpace:
    weighting: str = "tfidf_log"
    k1: float = 0.9
    b: float = 0.4
    normalized: bool = True
    vocab_size: int = 0

    def __post_init__(self):
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"unknown weighting {self.weighting!r}")
        if self.k1 <= 0:
            raise ValueError("k1 must be > 0")
        if not 0 <= self.b <= 1:
            raise ValueError("b must be in [0, 1]")

    @property
    def width(self) -> int:
        """Total sparse dimensionality (doubled for the concatenated family)."""
        return 2 * self.vocab_size if self.weighting == "tfidf_bm25" else self.vocab_size

    def for_corpus(self, corpus: Corpus) -> "FeatureSpace":
        return replace(self, vocab_size=len(corpus.vocab))


@dataclass(frozen=True)
class SparseVector:
    """Entries strictly increasing by term_id; zero weights never stored."""

    entries: tuple[tuple[int, float], ...]

    def __len__(self) -> int:
        return len(self.entries)

    def ids_array(self) -> np.ndarray:
        return np.array([i for i, _ in self.entries], dtype=np.int64)

    def vals_array(self) -> np.ndarray:
        return np.array([w for _, w in self.entries], dtype=np.float64)

    def norm(self) -> float:
        v = self.vals_array()
        return float(np.sqrt(np.sum(v * v)))


EMPTY_SPARSE = SparseVector(())


def _term_weights(corpus: Corpus, space: FeatureSpace, tokens: list[str],
                  drop_oov: bool) -> tuple[np.ndarray, np.ndarray]:
    """Sorted (term_id, weight) arrays for one document's tokens."""
    counts = Counter(tokens)
    if drop_oov:
        items = [(corpus.vocab[t], c) for t, c in counts.items() if t in corpus.vocab]
    else:
        items = [(corpus.vocab[t], c) for t, c in counts.items()]
    if not items:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
    items.sort()
    ids = np.array([i for i, _ in items], dtype=np.int64)
    tf = np.array([c for _, c in items], dtype=np.float64)
    df = corpus.df[ids].astype(np.float64)
    n = float(corpus.n_docs)
    doc_len = float(tf.sum())

    def tfidf_block():
        return (1.0 + np.log(tf)) * np.log(n / df)

    def bm25_block():
        idf = np.log((n - df + 0.5) / (df + 0.5) + 1.0)
        denom = tf + space.k1 * (1.0 - space.b + space.b * doc_len / corpus.avg_doc_len)
        return idf * tf * (space.k1 + 1.0) / denom

    if space.weighting == "tfidf_log":
        weights = tfidf_block()
    elif space.weighting == "bm25":
        weights = bm25_block()
    else:
        ids = np.concatenate([ids, ids + space.vocab_size])
        weights = np.concatenate([tfidf_block(), bm25_block()])

    keep = weights != 0.0
    ids, weights = ids[keep], weights[keep]
    if space.normalized and len(weights):
        norm = np.sqrt(np.sum(weights * weights))
        if norm > 0:
            weights = weights / norm
    return ids, weights


def featurize_doc(corpus: Corpus, space: FeatureSpace, doc: Document) -> SparseVector:
    """Weight one corpus document. The document must belong to the corpus."""
    corpus.doc_index(doc.doc_id)
    if space.vocab_size != len(corpus.vocab):
        space = space.for_corpus(corpus)
    ids, weights = _term_weights(corpus, space, doc.tokens, drop_oov=False)
    return SparseVector(tuple(zip(ids.tolist(), weights.tolist())))


def featurize_query(corpus: Corpus, space: FeatureSpace, query: str) -> SparseVector:
    """Weight a query as a pseudo-document; out-of-vocabulary terms dropped."""
    if space.vocab_size != len(corpus.vocab):
        space = space.for_corpus(corpus)
    ids, weights = _term_weights(corpus, space, tokenize(query), drop_oov=True)
    return SparseVector(tuple(zip(ids.tolist(), weights.tolist())))


def dot(a: SparseVector, b: SparseVector) -> float:
    """Merge-based sparse dot product, O(|a| + |b|)."""
    total = 0.0
    i = j = 0
    ea, eb = a.entries, b.entries
    while i < len(ea) and j < len(eb):
        ta, wa = ea[i]
        tb, wb = eb[j]
        if ta == tb:
            total += wa * wb
            i += 1
            j += 1
        elif ta < tb:
            i += 1
        else:
            j += 1
    return total


class FeatureMatrix:
    """CSR matrix of document feature vectors, rows in corpus document order."""

    def __init__(self, matrix: sp.csr_matrix, space: FeatureSpace):
        self.matrix = matrix
        self.space = space

    @property
    def n_docs(self) -> int:
        return self.matrix.shape[0]

    def row_arrays(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """(ids, weights) views of row i; no copy."""
        m = self.matrix
        start, end = m.indptr[i], m.indptr[i + 1]
        return m.indices[start:end], m.data[start:end]


def featurize_corpus(corpus: Corpus, space: FeatureSpace) -> FeatureMatrix:
    if space.vocab_size != len(corpus.vocab):
        space = space.for_corpus(corpus)
    indptr = np.zeros(corpus.n_docs + 1, dtype=np.int64)
    all_ids: list[np.ndarray] = []
    all_weights: list[np.ndarray] = []
    for i, doc in enumerate(corpus.docs):
        ids, weights = _term_weights(corpus, space, doc.tokens, drop_oov=False)
        all_ids.append(ids)
        all_weights.append(weights)
        indptr[i + 1] = indptr[i] + len(ids)
    indices = np.concatenate(all_ids) if all_ids else np.empty(0, dtype=np.int64)
    data = np.concatenate(all_weights) if all_weights else np.empty(0, dtype=np.float64)
    matrix = sp.csr_matrix((data, indices, indptr), shape=(corpus.n_docs, space.width))
    return FeatureMatrix(matrix, space)


def write_feature_cache(corpus: Corpus, features: FeatureMatrix, path: str | Path) -> None:
    """Cache format: ``doc_id<TAB>term_id:weight,term_id:weight,...`` per document."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for i, doc in enumerate(corpus.docs):
            ids, weights = features.row_arrays(i)
            cells = ",".join(f"{t}:{w!r}" for t, w in zip(ids.tolist(), weights.tolist()))
            fh.write(f"{doc.doc_id}\t{cells}\n")


def load_feature_cache(path: str | Path, space: FeatureSpace) -> tuple[list[str], FeatureMatrix]:
    doc_ids: list[str] = []
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise ValueError(f"{path}:{lineno}: malformed cache line")
            doc_id, cells = line.split("\t", 1)
            doc_ids.append(doc_id)
            if cells:
                for cell in cells.split(","):
                    tid, w = cell.split(":", 1)
                    indices.append(int(tid))
                    data.append(float(w))
            indptr.append(len(indices))
    matrix = sp.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int64),
         np.asarray(indptr, dtype=np.int64)),
        shape=(len(doc_ids), space.width))
    return doc_ids, FeatureMatrix(matrix, space)
