import numpy as np
import pytest

from calrank.classifier import TrainConfig
from calrank.corpus import Corpus, Document, QrelsOracle, Topic
from calrank.embeddings import EmbeddingStore
from calrank.engine import (NegativeSampling, SessionConfig, SessionError,
                            init_session, run_simulation)
from calrank.evaluation import gain_curve, recall_at_4r_1000


def tiny_world(n_docs=30, seed=3):
    """Hand-built corpus where docs containing "signal" are relevant to t1."""
    rng = np.random.default_rng(seed)
    docs = []
    relevant = set(rng.choice(n_docs, size=6, replace=False).tolist())
    judgments = {}
    for i in range(n_docs):
        words = [f"w{rng.integers(0, 15)}" for _ in range(8)]
        if i in relevant:
            words += ["signal", "signal", "beacon"]
        doc_id = f"d{i:03d}"
        docs.append(Document(doc_id, " ".join(words)))
        judgments[("t1", doc_id)] = i in relevant
    corpus = Corpus.from_documents(docs)
    return corpus, Topic("t1", "signal beacon"), QrelsOracle(judgments)


class TestInit:
    def test_fresh_session_state(self):
        corpus, topic, _ = tiny_world()
        session = init_session(topic, corpus, SessionConfig(seed=1))
        assert session.iteration == 0
        assert len(session.shown_log) == 0
        assert session.model is not None

    def test_equal_seeds_equal_models(self):
        corpus, topic, _ = tiny_world()
        a = init_session(topic, corpus, SessionConfig(seed=5))
        b = init_session(topic, corpus, SessionConfig(seed=5))
        assert np.array_equal(a.model.w, b.model.w)
        assert a.model.bias == b.model.bias

    def test_dense_fusion_requires_store(self):
        corpus, topic, _ = tiny_world()
        for fusion in ("e2", "e3", "e4"):
            with pytest.raises(SessionError):
                init_session(topic, corpus, SessionConfig(fusion=fusion, seed=1))

    def test_dense_fusion_requires_query_embedding(self):
        corpus, topic, _ = tiny_world()
        store = EmbeddingStore(2, {d: np.zeros(2) for d in corpus.doc_ids()})
        with pytest.raises(Exception, match="t1"):
            init_session(topic, corpus, SessionConfig(fusion="e3", seed=1),
                         embeddings=store)


class TestNextCandidates:
    def test_batch_is_argmax(self):
        corpus, topic, _ = tiny_world()
        session = init_session(topic, corpus, SessionConfig(seed=1))
        batch = session.next_candidates()
        assert len(batch) == 1
        rank_scores, _ = session.first_stage_scores()
        assert batch[0][0] == corpus.docs[int(np.argmax(rank_scores))].doc_id

    def test_tie_broken_by_doc_id(self):
        # two byte-identical documents produce bit-equal scores
        docs = [Document("zz", "apple pie"), Document("aa", "apple pie"),
                Document("mm", "other words entirely")]
        corpus = Corpus.from_documents(docs)
        topic = Topic("t", "apple pie")
        session = init_session(topic, corpus, SessionConfig(seed=2))
        first = session.next_candidates()[0][0]
        assert first == "aa"
        session.record_judgment("aa", True)
        assert session.next_candidates()[0][0] == "zz"

    def test_idempotent_until_judgment(self):
        corpus, topic, _ = tiny_world()
        session = init_session(topic, corpus, SessionConfig(seed=1))
        assert session.next_candidates() == session.next_candidates()

    def test_exhaustion_signal(self):
        docs = [Document("a", "x"), Document("b", "y")]
        corpus = Corpus.from_documents(docs)
        session = init_session(Topic("t", "x"), corpus, SessionConfig(seed=1))
        for _ in range(2):
            doc_id, _ = session.next_candidates()[0]
            session.record_judgment(doc_id, False)
        assert session.next_candidates() == []
        assert session.is_exhausted()

    def test_batch_size(self):
        corpus, topic, _ = tiny_world()
        session = init_session(topic, corpus, SessionConfig(seed=1, batch_size=3))
        batch = session.next_candidates()
        assert len(batch) == 3
        assert len({d for d, _ in batch}) == 3


class TestRecordJudgment:
    def test_iteration_increments(self):
        corpus, topic, _ = tiny_world()
        session = init_session(topic, corpus, SessionConfig(seed=1))
        doc_id, _ = session.next_candidates()[0]
        session.record_judgment(doc_id, True)
        assert session.iteration == 1
        assert session.shown_log[0].doc_id == doc_id

    def test_double_judgment_rejected(self):
        corpus, topic, _ = tiny_world()
        session = init_session(topic, corpus, SessionConfig(seed=1))
        doc_id, _ = session.next_candidates()[0]
        session.record_judgment(doc_id, True)
        with pytest.raises(SessionError):
            session.record_judgment(doc_id, True)

    def test_unoffered_judgment_rejected(self):
        corpus, topic, _ = tiny_world()
        session = init_session(topic, corpus, SessionConfig(seed=1))
        session.next_candidates()
        with pytest.raises(SessionError):
            session.record_judgment("d999", True)

    def test_retrain_every_iteration_advances_model(self):
        # corpus big enough that the bmi pool stays at 100, so the scratch
        # training set (and with it steps_taken) grows every judgment
        corpus, topic, oracle = tiny_world(n_docs=150)
        session = init_session(topic, corpus, SessionConfig(seed=1))
        steps = session.model.steps_taken
        w = session.model.w.copy()
        for _ in range(3):
            doc_id, _ = session.next_candidates()[0]
            session.record_judgment(doc_id, oracle.is_relevant("t1", doc_id))
            assert session.model.steps_taken > steps
            assert not np.array_equal(session.model.w, w)
            steps = session.model.steps_taken
            w = session.model.w.copy()

    def test_retrain_cadence(self):
        corpus, topic, oracle = tiny_world()
        session = init_session(topic, corpus, SessionConfig(seed=1, retrain_every=3))
        w0 = session.model.w.copy()
        for i in range(1, 4):
            doc_id, _ = session.next_candidates()[0]
            session.record_judgment(doc_id, oracle.is_relevant("t1", doc_id))
            if i < 3:
                assert np.array_equal(session.model.w, w0)
        assert not np.array_equal(session.model.w, w0)


class TestAssembleTrainingSet:
    def make_session_with_counts(self, p, n, negatives=NegativeSampling(kind="balanced")):
        corpus, topic, _ = tiny_world(n_docs=60)
        config = SessionConfig(seed=1, negatives=negatives,
                               retrain_every=10 ** 9)  # keep retrains out of the way
        session = init_session(topic, corpus, config)
        for i in range(p + n):
            doc_id, _ = session.next_candidates()[0]
            session.record_judgment(doc_id, i < p)
        return session

    def test_balanced_counts(self):
        session = self.make_session_with_counts(5, 2)
        examples = session.assemble_training_set()
        pseudo = [e for e in examples if e.provenance == "pseudo_negative"]
        assert len(pseudo) == 3

    def test_balanced_clamped_at_zero(self):
        session = self.make_session_with_counts(2, 5)
        pseudo = [e for e in session.assemble_training_set()
                  if e.provenance == "pseudo_negative"]
        assert pseudo == []

    def test_bmi_fixed_capped_by_unjudged(self):
        corpus, topic, _ = tiny_world(n_docs=50)
        session = init_session(topic, corpus,
                               SessionConfig(seed=1, retrain_every=10 ** 9))
        for _ in range(10):
            doc_id, _ = session.next_candidates()[0]
            session.record_judgment(doc_id, False)
        pseudo = [e for e in session.assemble_training_set()
                  if e.provenance == "pseudo_negative"]
        assert len(pseudo) == 40

    def test_literal_min_erratum_mode(self):
        session = self.make_session_with_counts(
            5, 2, negatives=NegativeSampling(kind="balanced", literal_min=True))
        pseudo = [e for e in session.assemble_training_set()
                  if e.provenance == "pseudo_negative"]
        assert pseudo == []

    def test_seed_always_present(self):
        session = self.make_session_with_counts(1, 1)
        examples = session.assemble_training_set()
        seeds = [e for e in examples if e.provenance == "synthetic_seed"]
        assert len(seeds) == 1 and seeds[0].label == 1

    def test_pseudo_negatives_never_judged(self):
        corpus, topic, oracle = tiny_world(n_docs=40)
        session = init_session(topic, corpus, SessionConfig(seed=1))
        for _ in range(15):
            doc_id, _ = session.next_candidates()[0]
            session.record_judgment(doc_id, oracle.is_relevant("t1", doc_id))
        judged_idx = {corpus.doc_index(d) for d in session.judged}
        for _ in range(20):
            for i in session._sample_pseudo_negatives():
                assert i not in judged_idx


class TestRunSimulation:
    def test_stop_after_zero(self):
        corpus, topic, oracle = tiny_world()
        log = run_simulation(topic, corpus, oracle, SessionConfig(seed=1, stop_after=0))
        assert len(log) == 0

    def test_deterministic(self):
        corpus, topic, oracle = tiny_world()
        cfg = SessionConfig(seed=9, stop_after=20)
        a = run_simulation(topic, corpus, oracle, cfg)
        b = run_simulation(topic, corpus, oracle, cfg)
        assert a.entries == b.entries

    def test_no_document_shown_twice(self):
        corpus, topic, oracle = tiny_world()
        log = run_simulation(topic, corpus, oracle, SessionConfig(seed=1))
        ids = log.doc_ids()
        assert len(ids) == len(set(ids)) == corpus.n_docs

    def test_recall_monotone(self):
        corpus, topic, oracle = tiny_world()
        log = run_simulation(topic, corpus, oracle, SessionConfig(seed=1, stop_after=25))
        curve = gain_curve(log, oracle.relevant_count("t1"))
        values = [r for _, r in curve]
        assert all(a <= b for a, b in zip(values, values[1:]))

    def test_total_recall_on_separable_topic(self, small_synthetic):
        corpus, topics, oracle = small_synthetic
        r_t = oracle.relevant_count(topics[0].topic_id)
        cfg = SessionConfig(seed=2, stop_after=4 * r_t + 1000)
        log = run_simulation(topics[0], corpus, oracle, cfg)
        assert recall_at_4r_1000(log, r_t) == 1.0

    def test_batch_and_cadence_knobs(self):
        corpus, topic, oracle = tiny_world()
        cfg = SessionConfig(seed=4, stop_after=12, batch_size=3, retrain_every=2)
        log = run_simulation(topic, corpus, oracle, cfg)
        assert len(log) == 12

    def test_incremental_mode_runs(self):
        corpus, topic, oracle = tiny_world()
        cfg = SessionConfig(seed=4, stop_after=15,
                            train=TrainConfig(mode="incremental"))
        log = run_simulation(topic, corpus, oracle, cfg)
        assert len(log) == 15
        found = sum(1 for e in log if e.relevant)
        assert found >= 4  # still learns the planted signal


class TestFusionBehavior:
    def zero_store(self, corpus, topics, dim=4):
        vecs = {d: np.zeros(dim) for d in corpus.doc_ids()}
        queries = {t.topic_id: np.zeros(dim) for t in topics}
        return EmbeddingStore(dim, vecs, queries)

    def test_e1_ignores_embedding_store(self):
        corpus, topic, oracle = tiny_world()
        cfg = SessionConfig(seed=6, stop_after=15)
        without = run_simulation(topic, corpus, oracle, cfg)
        with_store = run_simulation(topic, corpus, oracle, cfg,
                                    embeddings=self.zero_store(corpus, [topic]))
        assert without.doc_ids() == with_store.doc_ids()
        assert [e.first_stage_score for e in without] == \
            [e.first_stage_score for e in with_store]

    def test_e3_zero_embeddings_match_e1(self):
        corpus, topic, oracle = tiny_world()
        e1 = run_simulation(topic, corpus, oracle, SessionConfig(seed=6, stop_after=15))
        e3 = run_simulation(topic, corpus, oracle,
                            SessionConfig(seed=6, stop_after=15, fusion="e3"),
                            embeddings=self.zero_store(corpus, [topic]))
        assert e1.doc_ids() == e3.doc_ids()

    def test_e2_and_e4_run(self):
        corpus, topic, oracle = tiny_world()
        rng = np.random.default_rng(0)
        dim = 4
        # informative dense vectors: relevant docs cluster along axis 0
        vecs = {}
        for d in corpus.doc_ids():
            base = rng.normal(scale=0.1, size=dim)
            if oracle.is_relevant("t1", d):
                base[0] += 2.0
            vecs[d] = base
        queries = {"t1": np.array([2.0, 0, 0, 0], dtype=float)}
        store = EmbeddingStore(dim, vecs, queries)
        for fusion in ("e2", "e4"):
            log = run_simulation(topic, corpus, oracle,
                                 SessionConfig(seed=6, stop_after=12, fusion=fusion),
                                 embeddings=store)
            assert len(log) == 12
            assert sum(1 for e in log if e.relevant) >= 4


class TestSelectionIndependence:
    def test_negative_sampling_does_not_touch_selection(self):
        corpus, topic, _ = tiny_world()
        configs = [SessionConfig(seed=1, negatives=NegativeSampling(kind="bmi_fixed")),
                   SessionConfig(seed=1, negatives=NegativeSampling(kind="balanced"))]
        sessions = [init_session(topic, corpus, c) for c in configs]
        fixed = sessions[0].model
        for s in sessions:
            s.model = fixed  # inject one fixed model into both
        batches = [s.next_candidates() for s in sessions]
        assert batches[0] == batches[1]


class TestColdStart:
    def test_static_rank_before_first_positive(self):
        corpus, topic, oracle = tiny_world()
        cfg = SessionConfig(seed=1, cold_start="static_rank")
        session = init_session(topic, corpus, cfg)
        ranked, _ = session.first_stage_scores()
        # before any positive judgment the ranking is query similarity
        q = np.zeros(session.space.width)
        for i, w in session.seed_example.features.entries:
            q[i] = w
        expected = session.features.matrix @ q
        assert np.array_equal(ranked, expected)
        # once a positive judgment lands, the trained model takes over
        relevant_doc = next(d for d in corpus.doc_ids() if oracle.is_relevant("t1", d))
        session.next_candidates()
        # force-judge the offered doc as relevant regardless of oracle
        offered = next(iter(session.offered))
        session.record_judgment(offered, True)
        after, _ = session.first_stage_scores()
        assert not np.array_equal(after, expected)


class TestSeedExample:
    def test_seed_not_in_corpus_and_never_shown(self):
        corpus, topic, oracle = tiny_world()
        log = run_simulation(topic, corpus, oracle, SessionConfig(seed=1))
        assert set(log.doc_ids()) == set(corpus.doc_ids())
