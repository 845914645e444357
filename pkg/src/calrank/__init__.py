"""calrank: continuous active learning engine for high-recall document review."""

from .classifier import LabeledExample, Model, TrainConfig, score, score_dual, train
from .corpus import (Corpus, Document, QrelsOracle, Topic, generate_synthetic,
                     load_corpus, load_qrels, load_topics, tokenize, write_corpus)
from .embeddings import EmbeddingStore, FeatureVector, fuse, load_embeddings
from .engine import (NegativeSampling, Session, SessionConfig, init_session,
                     run_simulation)
from .evaluation import (MetricsReport, aggregate, build_report, gain_curve,
                         precision_at, recall_at, recall_at_4r_1000)
from .features import (FeatureSpace, SparseVector, dot, featurize_corpus,
                       featurize_doc, featurize_query)
from .rerank import (RerankPolicy, ScorerEndpoint, apply_rerank,
                     build_monobert_input, build_monot5_input)
from .runlog import RunLog, RunLogEntry, load_runlog, write_runlog
from .stats import PairedTestResult, ZeroVarianceError, paired_t_test

__version__ = "0.1.0"

__all__ = [
    "Corpus", "Document", "QrelsOracle", "Topic", "generate_synthetic",
    "load_corpus", "load_qrels", "load_topics", "tokenize", "write_corpus",
    "FeatureSpace", "SparseVector", "dot", "featurize_corpus", "featurize_doc",
    "featurize_query", "EmbeddingStore", "FeatureVector", "fuse", "load_embeddings",
    "LabeledExample", "Model", "TrainConfig", "score", "score_dual", "train",
    "NegativeSampling", "Session", "SessionConfig", "init_session", "run_simulation",
    "RunLog", "RunLogEntry", "load_runlog", "write_runlog",
    "MetricsReport", "aggregate", "build_report", "gain_curve", "precision_at",
    "recall_at", "recall_at_4r_1000",
    "RerankPolicy", "ScorerEndpoint", "apply_rerank", "build_monobert_input",
    "build_monot5_input",
    "PairedTestResult", "ZeroVarianceError", "paired_t_test",
]
