"""Precomputed dense embeddings and sparse/dense feature fusion.

Fusion kinds:
    e1  sparse features only
    e2  dense embedding only
    e3  logical concatenation; the dense block occupies indices
        [sparse_width, sparse_width + dim)
    e4  both parts kept separate for dual-model scoring

Embedding file formats:
    tsv     ``id<TAB>v1,v2,...,v_dim`` per line (decimal)
    binary  magic "EMB1", dim uint32 LE, n uint32 LE, then n records of
            id_len uint16 LE, id bytes (UTF-8), dim float32 LE values
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus
from .features import SparseVector

FUSION_KINDS = ("e1", "e2", "e3", "e4")

_MAGIC = b"EMB1"


class EmbeddingError(ValueError):
    pass


class EmbeddingStore:
    """Immutable id -> vector map; all vectors have length dim (float64)."""

    def __init__(self, dim: int, by_doc: dict[str, np.ndarray],
                 query_embeddings: dict[str, np.ndarray] | None = None):
        self.dim = dim
        self.by_doc = by_doc
        self.query_embeddings = query_embeddings or {}
        for vid, vec in self.by_doc.items():
            if vec.shape != (dim,):
                raise EmbeddingError(f"vector {vid!r} has length {vec.shape[0]}, expected {dim}")

    def __len__(self) -> int:
        return len(self.by_doc)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.by_doc

    def get(self, doc_id: str) -> np.ndarray:
        try:
            return self.by_doc[doc_id]
        except KeyError:
            raise EmbeddingError(f"no embedding for doc {doc_id!r}") from None

    def query_vector(self, topic_id: str) -> np.ndarray:
        try:
            return self.query_embeddings[topic_id]
        except KeyError:
            raise EmbeddingError(f"no query embedding for topic {topic_id!r}") from None

    def matrix_for(self, corpus: Corpus) -> np.ndarray:
        """Dense (n_docs, dim) matrix in corpus order; errors on the first gap."""
        out = np.empty((corpus.n_docs, self.dim), dtype=np.float64)
        for i, doc in enumerate(corpus.docs):
            vec = self.by_doc.get(doc.doc_id)
            if vec is None:
                raise EmbeddingError(f"no embedding for doc {doc.doc_id!r}")
            out[i] = vec
        return out


@dataclass
class FeatureVector:
    """One document's features: sparse ids/weights plus an optional dense block.

    ``dense_offset`` is where the dense block starts in the combined index
    space (sparse_width under e3, 0 under e2/e4).
    """

    ids: np.ndarray
    vals: np.ndarray
    dense: np.ndarray | None = None
    dense_offset: int = 0
    kind: str = "e1"

    @classmethod
    def from_sparse(cls, sparse: SparseVector, kind: str = "e1") -> "FeatureVector":
        return cls(sparse.ids_array(), sparse.vals_array(), kind=kind)

    @property
    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.ids.tolist(), self.vals.tolist()))

    def combined_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Single (ids, weights) view over sparse entries and dense block."""
        if self.dense is None:
            return self.ids, self.vals
        dense_ids = np.arange(self.dense_offset, self.dense_offset + len(self.dense),
                              dtype=np.int64)
        if len(self.ids) == 0:
            return dense_ids, self.dense
        return (np.concatenate([self.ids, dense_ids]),
                np.concatenate([self.vals, self.dense]))

    def support(self) -> list[int]:
        return self.combined_arrays()[0].tolist()


def fuse(sparse: SparseVector, dense: np.ndarray | None, kind: str,
         sparse_width: int, doc_id: str = "?") -> FeatureVector:
    """Build the feature representation for one document under a fusion kind."""
    if kind not in FUSION_KINDS:
        raise EmbeddingError(f"unknown fusion kind {kind!r}")
    if kind == "e1":
        return FeatureVector.from_sparse(sparse, kind="e1")
    if dense is None:
        raise EmbeddingError(f"fusion {kind!r} requires a dense vector for doc {doc_id!r}")
    if kind == "e2":
        return FeatureVector(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64),
                             dense=dense, dense_offset=0, kind="e2")
    if kind == "e3":
        return FeatureVector(sparse.ids_array(), sparse.vals_array(),
                             dense=dense, dense_offset=sparse_width, kind="e3")
    return FeatureVector(sparse.ids_array(), sparse.vals_array(),
                         dense=dense, dense_offset=0, kind="e4")


def load_embeddings(path: str | Path, dim: int | None = None) -> EmbeddingStore:
    """Load tsv or binary embeddings; tsv requires dim, binary carries it."""
    path = Path(path)
    with path.open("rb") as fh:
        head = fh.read(4)
    if head == _MAGIC:
        return _load_binary(path)
    if dim is None:
        raise EmbeddingError("dim is required for tsv embedding files")
    return _load_tsv(path, dim)


def _load_tsv(path: Path, dim: int) -> EmbeddingStore:
    by_doc: dict[str, np.ndarray] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise EmbeddingError(f"{path}:{lineno}: malformed line (no tab)")
            doc_id, cells = line.split("\t", 1)
            parts = cells.split(",") if cells else []
            if len(parts) != dim:
                raise EmbeddingError(f"{path}:{lineno}: expected {dim} values, got {len(parts)}")
            try:
                vec = np.array([float(p) for p in parts], dtype=np.float64)
            except ValueError:
                raise EmbeddingError(f"{path}:{lineno}: non-numeric value") from None
            if not np.all(np.isfinite(vec)):
                raise EmbeddingError(f"{path}:{lineno}: non-finite value")
            by_doc[doc_id] = vec
    return EmbeddingStore(dim, by_doc)


def _load_binary(path: Path) -> EmbeddingStore:
    with path.open("rb") as fh:
        header = fh.read(12)
        if len(header) != 12 or header[:4] != _MAGIC:
            raise EmbeddingError(f"{path}: not a binary embedding file")
        dim, n = struct.unpack("<II", header[4:])
        by_doc: dict[str, np.ndarray] = {}
        for rec in range(n):
            raw = fh.read(2)
            if len(raw) != 2:
                raise EmbeddingError(f"{path}: truncated at record {rec}")
            (id_len,) = struct.unpack("<H", raw)
            doc_id = fh.read(id_len).decode("utf-8")
            buf = fh.read(4 * dim)
            if len(buf) != 4 * dim:
                raise EmbeddingError(f"{path}: truncated vector for {doc_id!r}")
            vec = np.frombuffer(buf, dtype="<f4").astype(np.float64)
            if not np.all(np.isfinite(vec)):
                raise EmbeddingError(f"{path}: non-finite value for {doc_id!r}")
            by_doc[doc_id] = vec
    return EmbeddingStore(int(dim), by_doc)


def write_embeddings_tsv(store: EmbeddingStore, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for doc_id, vec in store.by_doc.items():
            cells = ",".join(repr(float(v)) for v in vec)
            fh.write(f"{doc_id}\t{cells}\n")


def write_embeddings_binary(store: EmbeddingStore, path: str | Path) -> None:
    with Path(path).open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", store.dim, len(store.by_doc)))
        for doc_id, vec in store.by_doc.items():
            encoded = doc_id.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(vec.astype("<f4").tobytes())
