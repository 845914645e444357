"""Run manifests: one flat INI document describing a whole experiment.

Sections and keys (all optional unless noted):

    [paths]
    corpus = corpus.tsv          (required)
    format = tsv | jsonl
    topics = topics.tsv          (required)
    qrels = qrels.txt            (required for simulation / eval; optional for serve)
    embeddings = docs.emb
    query_embeddings = queries.emb
    embedding_dim = 384          (needed when embedding files are tsv)
    output = out

    [features]
    weighting = tfidf_log | bm25 | tfidf_bm25
    k1 = 0.9
    b = 0.4
    normalized = true

    [session]
    fusion = e1 | e2 | e3 | e4
    negatives = bmi | balanced
    negatives_count = 100
    literal_min = false
    batch_size = 1
    retrain_every = 1
    stop_after = 1200
    cold_start = none | static_rank
    seed = 0

    [train]
    lambda = 1e-4
    epochs = 5
    mode = scratch | incremental

    [rerank]
    k = 10
    fuse_sum = false
    normalization = none | minmax_within_k
    template = monobert | monot5
    scorer_url = http://...      (or)
    scorer_offline = scores.tsv  (or)
    identity = true
    timeout_s = 10
    query_tokens = 64
    doc_tokens = 445
    stateless = false

    [eval]
    ks = 10,100
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .classifier import TrainConfig
from .corpus import Corpus, QrelsOracle, Topic, load_corpus, load_qrels, load_topics
from .embeddings import EmbeddingStore, load_embeddings
from .engine import NegativeSampling, SessionConfig
from .features import FeatureSpace
from .rerank import RerankPolicy, ScorerEndpoint


class ManifestError(ValueError):
    pass


@dataclass
class RunManifest:
    corpus_path: Path
    topics_path: Path
    qrels_path: Path | None
    output_dir: Path
    corpus_format: str | None = None
    embeddings_path: Path | None = None
    query_embeddings_path: Path | None = None
    embedding_dim: int | None = None
    session: SessionConfig = field(default_factory=SessionConfig)
    eval_ks: tuple[int, ...] = (10, 100)

    def validate_paths(self) -> None:
        for name, p in (("corpus", self.corpus_path), ("topics", self.topics_path),
                        ("qrels", self.qrels_path), ("embeddings", self.embeddings_path),
                        ("query_embeddings", self.query_embeddings_path)):
            if p is not None and not Path(p).exists():
                raise ManifestError(f"{name} path does not exist: {p}")

    def load_corpus(self) -> Corpus:
        return load_corpus(self.corpus_path, self.corpus_format)

    def load_topics(self) -> list[Topic]:
        return load_topics(self.topics_path)

    def load_qrels(self) -> QrelsOracle | None:
        return load_qrels(self.qrels_path) if self.qrels_path else None

    def load_embeddings(self) -> EmbeddingStore | None:
        if self.embeddings_path is None:
            return None
        store = load_embeddings(self.embeddings_path, self.embedding_dim)
        if self.query_embeddings_path is not None:
            queries = load_embeddings(self.query_embeddings_path, self.embedding_dim)
            store = EmbeddingStore(store.dim, store.by_doc, dict(queries.by_doc))
        return store


def _get(parser, section, key, default=None):
    if parser.has_option(section, key):
        return parser.get(section, key)
    return default


def _getbool(parser, section, key, default):
    if parser.has_option(section, key):
        return parser.getboolean(section, key)
    return default


def load_manifest(path: str | Path) -> RunManifest:
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest does not exist: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ManifestError(f"cannot parse manifest {path}: {exc}") from None
    if not parser.has_section("paths") or not parser.has_option("paths", "corpus"):
        raise ManifestError(f"{path}: missing [paths] corpus")
    if not parser.has_option("paths", "topics"):
        raise ManifestError(f"{path}: missing [paths] topics")

    base = path.parent

    def respath(value):
        p = Path(value)
        return p if p.is_absolute() else base / p

    corpus_path = respath(parser.get("paths", "corpus"))
    topics_path = respath(parser.get("paths", "topics"))
    qrels = _get(parser, "paths", "qrels")
    embeddings = _get(parser, "paths", "embeddings")
    query_embeddings = _get(parser, "paths", "query_embeddings")
    dim = _get(parser, "paths", "embedding_dim")
    output = respath(_get(parser, "paths", "output", "out"))

    space = FeatureSpace(
        weighting=_get(parser, "features", "weighting", "tfidf_log"),
        k1=float(_get(parser, "features", "k1", 0.9)),
        b=float(_get(parser, "features", "b", 0.4)),
        normalized=_getbool(parser, "features", "normalized", True),
    )
    train = TrainConfig(
        lam=float(_get(parser, "train", "lambda", 1e-4)),
        epochs=int(_get(parser, "train", "epochs", 5)),
        mode=_get(parser, "train", "mode", "scratch"),
    )
    neg_kind = _get(parser, "session", "negatives", "bmi")
    negatives = NegativeSampling(
        kind={"bmi": "bmi_fixed", "bmi_fixed": "bmi_fixed", "balanced": "balanced"}.get(
            neg_kind, neg_kind),
        count=int(_get(parser, "session", "negatives_count", 100)),
        literal_min=_getbool(parser, "session", "literal_min", False),
    )
    rerank = None
    if parser.has_section("rerank"):
        scorer = ScorerEndpoint(
            url=_get(parser, "rerank", "scorer_url"),
            offline_path=_get(parser, "rerank", "scorer_offline"),
            identity=_getbool(parser, "rerank", "identity", False),
            template=_get(parser, "rerank", "template", "monobert"),
            timeout_s=float(_get(parser, "rerank", "timeout_s", 10.0)),
            query_tokens=int(_get(parser, "rerank", "query_tokens", 64)),
            doc_tokens=int(_get(parser, "rerank", "doc_tokens", 445)),
            stateless=_getbool(parser, "rerank", "stateless", False),
        )
        rerank = RerankPolicy(
            k=int(_get(parser, "rerank", "k", 10)),
            fuse_sum=_getbool(parser, "rerank", "fuse_sum", False),
            scorer=scorer,
            normalization=_get(parser, "rerank", "normalization"),
        )
    stop_after = _get(parser, "session", "stop_after")
    session = SessionConfig(
        fusion=_get(parser, "session", "fusion", "e1"),
        space=space,
        train=train,
        negatives=negatives,
        retrain_every=int(_get(parser, "session", "retrain_every", 1)),
        batch_size=int(_get(parser, "session", "batch_size", 1)),
        rerank=rerank,
        stop_after=int(stop_after) if stop_after is not None else None,
        cold_start=_get(parser, "session", "cold_start", "none"),
        seed=int(_get(parser, "session", "seed", 0)),
    )
    ks = tuple(int(k.strip()) for k in _get(parser, "eval", "ks", "10,100").split(","))
    return RunManifest(
        corpus_path=corpus_path,
        topics_path=topics_path,
        qrels_path=respath(qrels) if qrels else None,
        output_dir=output,
        corpus_format=_get(parser, "paths", "format"),
        embeddings_path=respath(embeddings) if embeddings else None,
        query_embeddings_path=respath(query_embeddings) if query_embeddings else None,
        embedding_dim=int(dim) if dim is not None else None,
        session=session,
        eval_ks=ks,
    )


def topic_seed(base_seed: int, topic_id: str) -> int:
    """Stable per-topic seed so parallel runs stay reproducible."""
    digest = hashlib.sha256(f"{base_seed}:{topic_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % (2 ** 63)
