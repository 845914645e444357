"""Corpora, topics, relevance judgments, and the synthetic fixture generator.

File formats:
    corpus tsv    one ``doc_id<TAB>text`` per line, UTF-8
    corpus jsonl  one ``{"id": ..., "text": ...}`` object per line
    topics tsv    one ``topic_id<TAB>query`` per line
    qrels         whitespace-separated ``topic 0 doc_id rel`` (rel > 0 means relevant)
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class CorpusError(ValueError):
    """Raised for unloadable or inconsistent corpus/qrels input."""


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any non-alphanumeric run; empty tokens dropped."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Document:
    doc_id: str
    text: str
    _tokens: list[str] | None = field(default=None, repr=False, compare=False)

    @property
    def tokens(self) -> list[str]:
        if self._tokens is None:
            self._tokens = tokenize(self.text)
        return self._tokens


@dataclass(frozen=True)
class Topic:
    topic_id: str
    query: str

    def __post_init__(self):
        if not self.query:
            raise CorpusError(f"topic {self.topic_id!r} has an empty query")


class Corpus:
    """Immutable document collection with vocabulary and frequency statistics.

    ``vocab`` maps term -> term_id (first-occurrence order), ``df`` is an
    array indexed by term_id holding document frequencies, ``doc_lengths``
    holds per-document token counts in document order.
    """

    def __init__(self, docs: list[Document], vocab: dict[str, int],
                 df: np.ndarray, doc_lengths: np.ndarray):
        if not docs:
            raise CorpusError("empty corpus")
        self.docs = docs
        self.vocab = vocab
        self.df = df
        self.doc_lengths = doc_lengths
        self.n_docs = len(docs)
        self.avg_doc_len = float(doc_lengths.mean()) if self.n_docs else 0.0
        self._index = {d.doc_id: i for i, d in enumerate(docs)}
        if len(self._index) != len(docs):
            seen = set()
            for d in docs:
                if d.doc_id in seen:
                    raise CorpusError(f"duplicate doc_id {d.doc_id!r}")
                seen.add(d.doc_id)

    @classmethod
    def from_documents(cls, docs: list[Document]) -> "Corpus":
        vocab: dict[str, int] = {}
        df_counts: list[int] = []
        lengths = np.zeros(len(docs), dtype=np.int64)
        seen_ids: set[str] = set()
        for i, doc in enumerate(docs):
            if not doc.doc_id:
                raise CorpusError(f"document at position {i} has an empty doc_id")
            if doc.doc_id in seen_ids:
                raise CorpusError(f"duplicate doc_id {doc.doc_id!r}")
            seen_ids.add(doc.doc_id)
            tokens = doc.tokens if doc._tokens is not None else tokenize(doc.text)
            lengths[i] = len(tokens)
            for term in set(tokens):
                tid = vocab.get(term)
                if tid is None:
                    vocab[term] = len(df_counts)
                    df_counts.append(1)
                else:
                    df_counts[tid] += 1
        return cls(docs, vocab, np.asarray(df_counts, dtype=np.int64), lengths)

    def __len__(self) -> int:
        return self.n_docs

    def doc_index(self, doc_id: str) -> int:
        try:
            return self._index[doc_id]
        except KeyError:
            raise KeyError(f"unknown doc_id {doc_id!r}") from None

    def get(self, doc_id: str) -> Document:
        return self.docs[self.doc_index(doc_id)]

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._index

    def doc_ids(self) -> list[str]:
        return [d.doc_id for d in self.docs]


class QrelsOracle:
    """Relevance judgments; lookups for unjudged (topic, doc) pairs are nonrelevant."""

    def __init__(self, judgments: dict[tuple[str, str], bool]):
        self.judgments = judgments
        self.r_t: dict[str, int] = {}
        for (topic_id, _), rel in judgments.items():
            if rel:
                self.r_t[topic_id] = self.r_t.get(topic_id, 0) + 1
            else:
                self.r_t.setdefault(topic_id, 0)

    def is_relevant(self, topic_id: str, doc_id: str) -> bool:
        return self.judgments.get((topic_id, doc_id), False)

    def relevant_count(self, topic_id: str) -> int:
        return self.r_t.get(topic_id, 0)

    def has_topic(self, topic_id: str) -> bool:
        return topic_id in self.r_t


def load_corpus(path: str | Path, fmt: str | None = None) -> Corpus:
    """Load a corpus from tsv or jsonl; document order equals file order.

    fmt defaults from the file extension (.jsonl means jsonl, anything
    else tsv). Duplicate ids and malformed lines are hard errors.
    """
    path = Path(path)
    if fmt is None:
        fmt = "jsonl" if path.suffix == ".jsonl" else "tsv"
    if fmt not in ("tsv", "jsonl"):
        raise CorpusError(f"unknown corpus format {fmt!r}")
    docs: list[Document] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if fmt == "tsv":
                if "\t" not in line:
                    raise CorpusError(f"{path}:{lineno}: malformed line (no tab)")
                doc_id, text = line.split("\t", 1)
            else:
                try:
                    obj = json.loads(line)
                    doc_id, text = obj["id"], obj["text"]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise CorpusError(f"{path}:{lineno}: malformed line ({exc})") from None
                if not isinstance(doc_id, str) or not isinstance(text, str):
                    raise CorpusError(f"{path}:{lineno}: id and text must be strings")
            if not doc_id:
                raise CorpusError(f"{path}:{lineno}: empty doc_id")
            docs.append(Document(doc_id, text))
    if not docs:
        raise CorpusError("empty corpus")
    return Corpus.from_documents(docs)


def write_corpus(corpus: Corpus, path: str | Path, fmt: str | None = None) -> None:
    path = Path(path)
    if fmt is None:
        fmt = "jsonl" if path.suffix == ".jsonl" else "tsv"
    with path.open("w", encoding="utf-8") as fh:
        for doc in corpus.docs:
            if fmt == "tsv":
                if "\n" in doc.text:
                    raise CorpusError(f"doc {doc.doc_id!r}: newline in text cannot round-trip tsv")
                fh.write(f"{doc.doc_id}\t{doc.text}\n")
            else:
                fh.write(json.dumps({"id": doc.doc_id, "text": doc.text}, ensure_ascii=False) + "\n")


def load_topics(path: str | Path) -> list[Topic]:
    """Topics tsv: ``topic_id<TAB>query`` per line."""
    topics: list[Topic] = []
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise CorpusError(f"{path}:{lineno}: malformed topic line (no tab)")
            topic_id, query = line.split("\t", 1)
            if not query:
                raise CorpusError(f"{path}:{lineno}: topic {topic_id!r} has an empty query")
            topics.append(Topic(topic_id, query))
    return topics


def write_topics(topics: list[Topic], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for t in topics:
            fh.write(f"{t.topic_id}\t{t.query}\n")


def load_qrels(path: str | Path) -> QrelsOracle:
    """Qrels: whitespace-separated ``topic 0 doc_id rel``; rel > 1 maps to relevant."""
    judgments: dict[tuple[str, str], bool] = {}
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise CorpusError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            topic_id, _, doc_id, rel_str = parts
            try:
                rel = int(rel_str)
            except ValueError:
                raise CorpusError(f"{path}:{lineno}: non-integer relevance {rel_str!r}") from None
            if rel < 0:
                raise CorpusError(f"{path}:{lineno}: negative relevance {rel}")
            judgments[(topic_id, doc_id)] = rel > 0
    return QrelsOracle(judgments)


def write_qrels(oracle: QrelsOracle, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for (topic_id, doc_id), rel in oracle.judgments.items():
            fh.write(f"{topic_id} 0 {doc_id} {1 if rel else 0}\n")


def generate_synthetic(seed: int, n_docs: int, n_topics: int,
                       relevant_per_topic: int) -> tuple[Corpus, list[Topic], QrelsOracle]:
    """Generate a desk-scale corpus with linearly separable planted topics.

    Each topic gets a marker vocabulary that occurs only in its
    relevant_per_topic documents; everything else is background noise, so a
    linear model trained on the topic query can reach total recall.
    Deterministic in seed.
    """
    if relevant_per_topic > n_docs:
        raise ValueError("relevant_per_topic cannot exceed n_docs")
    rng = np.random.default_rng(seed)
    n_background = min(2000, max(50, n_docs // 5))
    background = [f"w{i:04d}" for i in range(n_background)]
    # Zipf-ish background distribution keeps df statistics realistic.
    probs = 1.0 / np.arange(1, n_background + 1)
    probs /= probs.sum()

    n_markers = 8
    markers = [[f"topic{t:02d}marker{j}" for j in range(n_markers)] for t in range(n_topics)]

    lengths = rng.integers(60, 141, size=n_docs)
    relevant_sets = [rng.choice(n_docs, size=relevant_per_topic, replace=False)
                     for _ in range(n_topics)]

    total_background = int(lengths.sum())
    bg_stream = rng.choice(n_background, size=total_background, p=probs)

    doc_markers: list[list[str]] = [[] for _ in range(n_docs)]
    for t in range(n_topics):
        reps = rng.integers(1, 3, size=(relevant_per_topic, n_markers))
        for row, di in enumerate(relevant_sets[t]):
            planted = []
            for j in range(n_markers):
                planted.extend([markers[t][j]] * int(reps[row, j]))
            doc_markers[di].extend(planted)

    docs: list[Document] = []
    offset = 0
    for i in range(n_docs):
        n_bg = int(lengths[i])
        words = [background[w] for w in bg_stream[offset:offset + n_bg]]
        offset += n_bg
        words.extend(doc_markers[i])
        docs.append(Document(f"doc{i:06d}", " ".join(words)))

    corpus = Corpus.from_documents(docs)
    topics = [Topic(f"t{t + 1:02d}", " ".join(markers[t])) for t in range(n_topics)]
    judgments = {}
    for t in range(n_topics):
        for di in relevant_sets[t]:
            judgments[(topics[t].topic_id, docs[di].doc_id)] = True
    return corpus, topics, QrelsOracle(judgments)
