"""The per-topic continuous active learning loop.

One iteration: score every unjudged document, offer the top batch, collect a
judgment, rebuild the training pool (human judgments + the synthetic query
seed + freshly sampled pseudo-negatives), retrain, repeat. Seeding: the topic
query, featurized as a pseudo-document and labeled positive, stands in for a
known-relevant document.

All randomness flows from one generator seeded by SessionConfig.seed; at each
retrain the pseudo-negatives are drawn first, then the shuffle seed for the
trainer, so whole runs replay exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .classifier import (CLAMP, LabeledExample, Model, TrainConfig, sigmoid, train)
from .corpus import Corpus, QrelsOracle, Topic
from .embeddings import EmbeddingStore, FeatureVector, fuse
from .features import FeatureMatrix, FeatureSpace, featurize_corpus, featurize_query
from .rerank import RerankPolicy, ScorerClient, apply_rerank, build_scorer_input
from .runlog import RunLog, RunLogEntry


class SessionError(ValueError):
    pass


@dataclass(frozen=True)
class NegativeSampling:
    kind: str = "bmi_fixed"  # bmi_fixed | balanced
    count: int = 100
    # Erratum mode: apply the balancing formula exactly as printed,
    # min(p - n, 0), which never yields any pseudo-negatives.
    literal_min: bool = False

    def __post_init__(self):
        if self.kind not in ("bmi_fixed", "balanced"):
            raise ValueError(f"unknown negative sampling {self.kind!r}")
        if self.count < 0:
            raise ValueError("count must be >= 0")

    def n_negatives(self, p: int, n: int, unjudged: int) -> int:
        if self.kind == "bmi_fixed":
            return min(self.count, unjudged)
        wanted = min(p - n, 0) if self.literal_min else max(p - n, 0)
        return min(max(wanted, 0), unjudged)


@dataclass
class SessionConfig:
    fusion: str = "e1"
    space: FeatureSpace = field(default_factory=FeatureSpace)
    train: TrainConfig = field(default_factory=TrainConfig)
    negatives: NegativeSampling = field(default_factory=NegativeSampling)
    retrain_every: int = 1
    batch_size: int = 1
    rerank: Optional[RerankPolicy] = None
    stop_after: Optional[int] = None
    cold_start: str = "none"  # none | static_rank
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.retrain_every < 1:
            raise ValueError("retrain_every must be >= 1")
        if self.fusion not in ("e1", "e2", "e3", "e4"):
            raise ValueError(f"unknown fusion {self.fusion!r}")
        if self.cold_start not in ("none", "static_rank"):
            raise ValueError(f"unknown cold_start {self.cold_start!r}")


class Session:
    """Mutable per-topic review state. Single-writer; see record_judgment."""

    def __init__(self, topic: Topic, corpus: Corpus, config: SessionConfig,
                 space: FeatureSpace, features: FeatureMatrix,
                 dense: np.ndarray | None, seed_example: LabeledExample):
        self.topic = topic
        self.corpus = corpus
        self.config = config
        self.space = space
        self.features = features
        self.dense = dense
        self.seed_example = seed_example
        self.judged: dict[str, bool] = {}
        self.shown_log = RunLog()
        self.iteration = 0
        self.model: Model | None = None        # e1/e2/e3
        self.model_dense: Model | None = None  # e4 second model
        self.rng = np.random.default_rng(config.seed)
        self.offered: dict[str, tuple[float, float]] = {}
        self._judged_mask = np.zeros(corpus.n_docs, dtype=bool)
        self._doc_ids = corpus.doc_ids()
        self._docid_rank = np.empty(corpus.n_docs, dtype=np.int64)
        self._docid_rank[np.argsort(np.array(self._doc_ids))] = np.arange(corpus.n_docs)
        self._pending_delta: list[int] = []  # doc indices judged since last retrain
        self._judged_order: list[int] = []   # doc indices in judgment order
        self._fv_cache: dict[int, FeatureVector] = {}
        self._example_cache: dict[tuple[int, int], LabeledExample] = {}
        self._scorer = ScorerClient(config.rerank.scorer) if config.rerank else None
        self._static_scores: np.ndarray | None = None

    # -- plumbing -----------------------------------------------------------

    @property
    def rng_state(self) -> dict:
        return self.rng.bit_generator.state

    @rng_state.setter
    def rng_state(self, state: dict) -> None:
        self.rng.bit_generator.state = state

    @property
    def width(self) -> int:
        if self.config.fusion == "e2":
            return self.dense.shape[1]
        if self.config.fusion == "e3":
            return self.space.width + self.dense.shape[1]
        return self.space.width

    def n_unjudged(self) -> int:
        return self.corpus.n_docs - len(self.judged)

    def is_exhausted(self) -> bool:
        return self.n_unjudged() == 0

    def positive_count(self) -> int:
        return sum(1 for rel in self.judged.values() if rel)

    def negative_count(self) -> int:
        return len(self.judged) - self.positive_count()

    def doc_features(self, doc_index: int) -> FeatureVector:
        fv = self._fv_cache.get(doc_index)
        if fv is None:
            ids, vals = self.features.row_arrays(doc_index)
            kind = self.config.fusion
            if kind == "e1":
                fv = FeatureVector(ids, vals, kind="e1")
            elif kind == "e2":
                fv = FeatureVector(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64),
                                   dense=self.dense[doc_index], dense_offset=0, kind="e2")
            elif kind == "e3":
                fv = FeatureVector(ids, vals, dense=self.dense[doc_index],
                                   dense_offset=self.space.width, kind="e3")
            else:
                fv = FeatureVector(ids, vals, dense=self.dense[doc_index],
                                   dense_offset=0, kind="e4")
            self._fv_cache[doc_index] = fv
        return fv

    # -- scoring ------------------------------------------------------------

    def _linear_scores(self, model: Model, use_sparse: bool, use_dense: bool,
                       dense_block_at: int = 0) -> np.ndarray:
        lin = np.full(self.corpus.n_docs, model.bias, dtype=np.float64)
        if use_sparse:
            lin += self.features.matrix @ model.w[:self.space.width]
        if use_dense:
            lin += self.dense @ model.w[dense_block_at:dense_block_at + self.dense.shape[1]]
        return lin

    def first_stage_scores(self):
        """(ranking scores, rank-to-reported converter) over all documents.

        Ranking uses the raw linear form so the numeric clamp inside the
        sigmoid can never collapse distinct documents into ties; the reported
        score is the clamped sigmoid of the same value (computed lazily, only
        for documents that get offered). Both orderings agree wherever the
        sigmoid has not saturated.
        """
        kind = self.config.fusion
        identity = lambda value: value  # noqa: E731 - trivial converter
        if self.config.cold_start == "static_rank" and self.positive_count() == 0:
            return self._static_rank_scores(), identity
        if kind == "e1":
            lin = self._linear_scores(self.model, True, False)
        elif kind == "e2":
            lin = self._linear_scores(self.model, False, True)
        elif kind == "e3":
            lin = self._linear_scores(self.model, True, True, dense_block_at=self.space.width)
        else:
            lin1 = self._linear_scores(self.model, True, False)
            lin2 = self._linear_scores(self.model_dense, False, True)
            dual = sigmoid(np.clip(lin1, -CLAMP, CLAMP)) + sigmoid(np.clip(lin2, -CLAMP, CLAMP))
            return dual, identity
        return lin, lambda value: float(sigmoid(min(max(value, -CLAMP), CLAMP)))

    def _static_rank_scores(self) -> np.ndarray:
        if self._static_scores is None:
            q = np.zeros(self.space.width, dtype=np.float64)
            for i, weight in self.seed_example.features.entries:
                q[i] = weight
            self._static_scores = np.asarray(self.features.matrix @ q, dtype=np.float64)
        return self._static_scores

    def _ranked_unjudged(self, scores: np.ndarray, limit: int | None = None) -> np.ndarray:
        """Indices of the top `limit` unjudged docs by (score desc, doc_id asc).

        Exact: partition first, then widen to every doc tied with the
        boundary score before breaking ties, so the prefix equals what a full
        sort would produce.
        """
        masked = scores.copy()
        masked[self._judged_mask] = -np.inf
        n_unjudged = self.n_unjudged()
        if limit is None or limit >= n_unjudged:
            order = np.lexsort((self._docid_rank, -masked))
            return order[:n_unjudged]
        part = np.argpartition(-masked, limit - 1)[:limit]
        boundary = masked[part].min()
        candidates = np.flatnonzero(masked >= boundary)
        order = candidates[np.lexsort((self._docid_rank[candidates], -masked[candidates]))]
        return order[:limit]

    # -- training -----------------------------------------------------------

    def _sample_pseudo_negatives(self) -> list[int]:
        k = self.config.negatives.n_negatives(
            self.positive_count(), self.negative_count(), self.n_unjudged())
        if k == 0:
            return []
        unjudged = np.flatnonzero(~self._judged_mask)
        picks = self.rng.choice(unjudged, size=k, replace=False)
        return [int(i) for i in picks]

    def _example(self, doc_index: int, label: int, provenance: str) -> LabeledExample:
        key = (doc_index, label)
        ex = self._example_cache.get(key)
        if ex is None or ex.provenance != provenance:
            ex = LabeledExample(self.doc_features(doc_index), label, provenance=provenance)
            self._example_cache[key] = ex
        return ex

    def _human_examples(self, doc_indices: list[int]) -> list[LabeledExample]:
        return [self._example(i, 1 if self.judged[self._doc_ids[i]] else -1,
                              "human_judgment") for i in doc_indices]

    def assemble_training_set(self) -> list[LabeledExample]:
        """Full training pool: judgments, the synthetic seed, fresh pseudo-negatives.

        Draws pseudo-negatives from the session RNG, so calling this advances
        the replayable random stream.
        """
        examples = [self.seed_example]
        examples.extend(self._human_examples(self._judged_order))
        for i in self._sample_pseudo_negatives():
            examples.append(self._example(i, -1, "pseudo_negative"))
        return examples

    def _train_models(self, examples: list[LabeledExample], mode: str,
                      use_prior: bool) -> None:
        train_seed = int(self.rng.integers(0, 2 ** 63))
        cfg = replace(self.config.train, mode=mode, seed=train_seed)
        if self.config.fusion == "e4":
            sparse_exs = [LabeledExample(FeatureVector(ex.features.ids, ex.features.vals),
                                         ex.label, ex.provenance) for ex in examples]
            dense_exs = [LabeledExample(
                FeatureVector(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64),
                              dense=ex.features.dense, dense_offset=0),
                ex.label, ex.provenance) for ex in examples]
            self.model = train(sparse_exs, cfg, prior=self.model if use_prior else None,
                               width=self.space.width)
            self.model_dense = train(dense_exs, cfg,
                                     prior=self.model_dense if use_prior else None,
                                     width=self.dense.shape[1])
        else:
            self.model = train(examples, cfg, prior=self.model if use_prior else None,
                               width=self.width)

    def _retrain(self) -> None:
        if self.config.train.mode == "incremental":
            examples = self._human_examples(self._pending_delta)
            for i in self._sample_pseudo_negatives():
                examples.append(self._example(i, -1, "pseudo_negative"))
            if examples:
                self._train_models(examples, "incremental", use_prior=True)
        else:
            self._train_models(self.assemble_training_set(), "scratch", use_prior=False)
        self._pending_delta = []

    # -- the loop -----------------------------------------------------------

    def next_candidates(self) -> list[tuple[str, float]]:
        """Top unjudged documents by final score, at most batch_size of them.

        Empty list signals an exhausted corpus. Repeated calls without an
        intervening judgment return the same batch.
        """
        if self.is_exhausted():
            self.offered = {}
            return []
        rank_scores, to_reported = self.first_stage_scores()
        if self.config.rerank is not None:
            ranked = self._ranked_unjudged(
                rank_scores, limit=max(self.config.rerank.k, self.config.batch_size))
            batch = self._reranked_batch(rank_scores, to_reported, ranked)
        else:
            ranked = self._ranked_unjudged(rank_scores, limit=self.config.batch_size)
            batch = []
            for i in ranked:
                value = to_reported(float(rank_scores[i]))
                batch.append((self._doc_ids[i], value, value))
        self.offered = {doc_id: (fs, final) for doc_id, fs, final in batch}
        return [(doc_id, final) for doc_id, fs, final in batch]

    def _reranked_batch(self, rank_scores: np.ndarray, to_reported,
                        ranked: np.ndarray) -> list[tuple[str, float, float]]:
        policy = self.config.rerank
        k = min(policy.k, len(ranked))
        top = [(self._doc_ids[i], to_reported(float(rank_scores[i]))) for i in ranked[:k]]
        if policy.scorer.identity:
            response = dict(top)
        else:
            history = [(e.doc_id, "relevant" if e.relevant else "nonrelevant")
                       for e in self.shown_log]
            candidates = [(doc_id, build_scorer_input(
                policy.scorer, self.topic.query, self.corpus.get(doc_id).text))
                for doc_id, _ in top]
            response = self._scorer.score(
                topic_id=self.topic.topic_id, query=self.topic.query,
                candidates=candidates, history=history, iteration=self.iteration + 1)
        reranked = apply_rerank(top, policy, response)
        fs_of = dict(top)
        ordered = [(doc_id, fs_of[doc_id], final) for doc_id, final in reranked]
        for i in ranked[k:]:
            value = to_reported(float(rank_scores[i]))
            ordered.append((self._doc_ids[i], value, value))
        take = min(self.config.batch_size, len(ordered))
        return ordered[:take]

    def record_judgment(self, doc_id: str, relevant: bool) -> None:
        """Append one judgment; retrains when the iteration hits the cadence."""
        if doc_id in self.judged:
            raise SessionError(f"doc {doc_id!r} already judged")
        if doc_id not in self.offered:
            raise SessionError(f"doc {doc_id!r} was not offered")
        first_stage, final = self.offered.pop(doc_id)
        self._apply_judgment(doc_id, relevant, first_stage, final)

    def _apply_judgment(self, doc_id: str, relevant: bool,
                        first_stage: float, final: float) -> None:
        idx = self.corpus.doc_index(doc_id)
        self.iteration += 1
        self.shown_log.append(RunLogEntry(self.iteration, doc_id, first_stage, final, relevant))
        self.judged[doc_id] = relevant
        self._judged_mask[idx] = True
        self._judged_order.append(idx)
        self._pending_delta.append(idx)
        if self.iteration % self.config.retrain_every == 0:
            self._retrain()

    # -- persistence hooks (used by the review service) ----------------------

    def restore_entries(self, entries: list[RunLogEntry]) -> None:
        """Reapply already-trained-on entries without touching models or RNG."""
        for e in entries:
            idx = self.corpus.doc_index(e.doc_id)
            self.iteration += 1
            self.shown_log.append(e)
            self.judged[e.doc_id] = e.relevant
            self._judged_mask[idx] = True
            self._judged_order.append(idx)
        self._pending_delta = []

    def replay_entry(self, entry: RunLogEntry) -> None:
        """Reapply one journaled judgment, retraining exactly as live would."""
        if entry.doc_id in self.judged:
            raise SessionError(f"doc {entry.doc_id!r} already judged")
        self._apply_judgment(entry.doc_id, entry.relevant,
                             entry.first_stage_score, entry.final_score)


def init_session(topic: Topic, corpus: Corpus, config: SessionConfig,
                 embeddings: EmbeddingStore | None = None,
                 features: FeatureMatrix | None = None) -> Session:
    """Seed a fresh session and train its initial model.

    The synthetic seed is the topic query featurized as a pseudo-document and
    labeled positive; it never enters the shown log. e2/e3/e4 require an
    embedding store covering the corpus plus a query embedding for the topic.
    """
    space = config.space.for_corpus(corpus)
    if features is None:
        features = featurize_corpus(corpus, space)
    elif features.space != space:
        raise SessionError("precomputed features use a different feature space")
    dense = None
    query_dense = None
    if config.fusion in ("e2", "e3", "e4"):
        if embeddings is None:
            raise SessionError(f"fusion {config.fusion!r} requires an embedding store")
        dense = embeddings.matrix_for(corpus)
        query_dense = embeddings.query_vector(topic.topic_id)
    query_sparse = featurize_query(corpus, space, topic.query)
    seed_fv = fuse(query_sparse, query_dense, config.fusion, space.width,
                   doc_id=f"query:{topic.topic_id}")
    seed_example = LabeledExample(seed_fv, 1, provenance="synthetic_seed")
    session = Session(topic, corpus, config, space, features, dense, seed_example)
    session._train_models(session.assemble_training_set(), "scratch", use_prior=False)
    return session


def run_simulation(topic: Topic, corpus: Corpus, oracle: QrelsOracle,
                   config: SessionConfig, embeddings: EmbeddingStore | None = None,
                   features: FeatureMatrix | None = None) -> RunLog:
    """Drive a full session with oracle judgments; deterministic in config.seed."""
    session = init_session(topic, corpus, config, embeddings=embeddings, features=features)
    stop = config.stop_after
    while stop is None or session.iteration < stop:
        batch = session.next_candidates()
        if not batch:
            break
        for doc_id, _ in batch:
            if stop is not None and session.iteration >= stop:
                break
            session.record_judgment(doc_id, oracle.is_relevant(topic.topic_id, doc_id))
    return session.shown_log
