"""Service-side session registry with crash-safe persistence.

Each session owns a directory under DATA_DIR/sessions/{id}:
    meta.json      topic, creation time, config overrides
    journal.tsv    append-only judgments (run-log format), fsynced before ack
    snapshot.json  iteration + RNG state at the last snapshot
    model.snap     classifier snapshot (model_dense.snap under e4)

Resume = rebuild the session from config, fast-forward the pre-snapshot
journal prefix without retraining, restore the models and RNG, then replay
the journal tail exactly as live judgments; classifier determinism makes the
result identical to an uninterrupted run.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from ..classifier import load_model, save_model
from ..corpus import Corpus, QrelsOracle, Topic
from ..embeddings import EmbeddingStore
from ..engine import NegativeSampling, Session, SessionConfig, init_session
from ..features import FeatureMatrix, featurize_corpus
from ..manifest import RunManifest
from ..runlog import RunLog, RunLogEntry, load_runlog


class UnknownTopicError(KeyError):
    pass


class ConfigFieldError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field


# Override keys accepted from POST /sessions.
_OVERRIDE_KEYS = {
    "seed": int,
    "batch_size": int,
    "retrain_every": int,
    "stop_after": int,
    "fusion": str,
    "negatives": str,
    "negatives_count": int,
    "literal_min": bool,
    "cold_start": str,
}


def apply_overrides(config: SessionConfig, overrides: dict) -> SessionConfig:
    for key, value in overrides.items():
        if key not in _OVERRIDE_KEYS:
            raise ConfigFieldError(key, f"unknown config field {key!r}")
        expected = _OVERRIDE_KEYS[key]
        if not isinstance(value, expected) or isinstance(value, bool) and expected is int:
            raise ConfigFieldError(key, f"config field {key!r} must be {expected.__name__}")
    try:
        if "negatives" in overrides or "negatives_count" in overrides or \
                "literal_min" in overrides:
            kind = overrides.get("negatives", config.negatives.kind)
            kind = {"bmi": "bmi_fixed"}.get(kind, kind)
            config = replace(config, negatives=NegativeSampling(
                kind=kind,
                count=overrides.get("negatives_count", config.negatives.count),
                literal_min=overrides.get("literal_min", config.negatives.literal_min)))
        simple = {k: v for k, v in overrides.items()
                  if k in ("seed", "batch_size", "retrain_every", "stop_after",
                           "fusion", "cold_start")}
        if simple:
            config = replace(config, **simple)
    except ValueError as exc:
        key = next(iter(overrides))
        raise ConfigFieldError(key, str(exc)) from None
    return config


class LiveSession:
    def __init__(self, session_id: str, topic_id: str, created_at: str,
                 session: Session, directory: Path, overrides: dict):
        self.session_id = session_id
        self.topic_id = topic_id
        self.created_at = created_at
        self.session = session
        self.directory = directory
        self.overrides = overrides
        self.state = "active"
        self.lock = threading.Lock()
        self._journal = None

    @property
    def journal_path(self) -> Path:
        return self.directory / "journal.tsv"

    def journal_append(self, entry: RunLogEntry) -> None:
        if self._journal is None:
            self._journal = self.journal_path.open("a", encoding="utf-8")
        self._journal.write(f"{entry.iteration}\t{entry.doc_id}\t"
                            f"{entry.first_stage_score!r}\t{entry.final_score!r}\t"
                            f"{1 if entry.relevant else 0}\n")
        self._journal.flush()
        os.fsync(self._journal.fileno())

    def snapshot(self) -> None:
        """Persist models + RNG; only taken at a retrain boundary.

        Model files are versioned by iteration and snapshot.json is renamed
        into place last, so a crash mid-snapshot leaves the previous snapshot
        intact and consistent.
        """
        s = self.session
        if s.iteration % s.config.retrain_every != 0:
            return
        it = s.iteration
        model_name = f"model.{it}.snap"
        save_model(s.model, self.directory / model_name)
        dense_name = None
        if s.model_dense is not None:
            dense_name = f"model_dense.{it}.snap"
            save_model(s.model_dense, self.directory / dense_name)
        tmp = self.directory / "snapshot.json.tmp"
        with tmp.open("w", encoding="utf-8") as fh:
            json.dump({"iteration": it, "rng_state": s.rng_state,
                       "model": model_name, "model_dense": dense_name}, fh)
            fh.flush()
            os.fsync(fh.fileno())
        tmp.replace(self.directory / "snapshot.json")
        for stale in self.directory.glob("model*.snap"):
            if stale.name not in (model_name, dense_name):
                stale.unlink(missing_ok=True)

    def close_files(self) -> None:
        if self._journal is not None:
            self._journal.close()
            self._journal = None


class ServiceState:
    """Loaded manifest artifacts plus all live sessions."""

    def __init__(self, corpus: Corpus, topics: dict[str, Topic],
                 features: FeatureMatrix, default_config: SessionConfig,
                 data_dir: Path, oracle: QrelsOracle | None = None,
                 embeddings: EmbeddingStore | None = None,
                 eval_ks: tuple[int, ...] = (10, 100),
                 snapshot_every: int = 25,
                 auth_token: str | None = None):
        self.corpus = corpus
        self.topics = topics
        self.features = features
        self.default_config = default_config
        self.data_dir = Path(data_dir)
        self.oracle = oracle
        self.embeddings = embeddings
        self.eval_ks = eval_ks
        self.snapshot_every = snapshot_every
        self.auth_token = auth_token if auth_token is not None else os.environ.get("AUTH_TOKEN")
        self.sessions: dict[str, LiveSession] = {}
        (self.data_dir / "sessions").mkdir(parents=True, exist_ok=True)
        self.resume_all()

    @classmethod
    def from_manifest(cls, manifest: RunManifest, data_dir: str | None = None,
                      snapshot_every: int = 25) -> "ServiceState":
        corpus = manifest.load_corpus()
        space = manifest.session.space.for_corpus(corpus)
        resolved = data_dir or os.environ.get("DATA_DIR") or str(manifest.output_dir / "service")
        return cls(
            corpus=corpus,
            topics={t.topic_id: t for t in manifest.load_topics()},
            features=featurize_corpus(corpus, space),
            default_config=manifest.session,
            data_dir=Path(resolved),
            oracle=manifest.load_qrels(),
            embeddings=manifest.load_embeddings(),
            eval_ks=manifest.eval_ks,
            snapshot_every=snapshot_every,
        )

    # -- session lifecycle ----------------------------------------------------

    def create_session(self, topic_id: str, overrides: dict) -> LiveSession:
        topic = self.topics.get(topic_id)
        if topic is None:
            raise UnknownTopicError(topic_id)
        config = apply_overrides(self.default_config, overrides)
        session = init_session(topic, self.corpus, config,
                               embeddings=self.embeddings, features=self.features)
        session_id = uuid.uuid4().hex
        directory = self.data_dir / "sessions" / session_id
        directory.mkdir(parents=True)
        created_at = datetime.now(timezone.utc).isoformat()
        live = LiveSession(session_id, topic_id, created_at, session, directory, overrides)
        with (directory / "meta.json").open("w", encoding="utf-8") as fh:
            json.dump({"session_id": session_id, "topic_id": topic_id,
                       "created_at": created_at, "overrides": overrides}, fh)
            fh.flush()
            os.fsync(fh.fileno())
        self.sessions[session_id] = live
        return live

    def get(self, session_id: str) -> LiveSession | None:
        return self.sessions.get(session_id)

    def resume_all(self) -> None:
        root = self.data_dir / "sessions"
        for directory in sorted(root.iterdir()) if root.exists() else []:
            meta_path = directory / "meta.json"
            if not meta_path.is_file():
                continue
            with meta_path.open("r", encoding="utf-8") as fh:
                meta = json.load(fh)
            self._resume_one(directory, meta)

    def _resume_one(self, directory: Path, meta: dict) -> None:
        topic = self.topics.get(meta["topic_id"])
        if topic is None:
            return
        config = apply_overrides(self.default_config, meta.get("overrides", {}))
        session = init_session(topic, self.corpus, config,
                               embeddings=self.embeddings, features=self.features)
        journal = (load_runlog(directory / "journal.tsv")
                   if (directory / "journal.tsv").exists() else RunLog())
        entries = list(journal)
        snap_path = directory / "snapshot.json"
        start = 0
        if snap_path.exists():
            with snap_path.open("r", encoding="utf-8") as fh:
                snap = json.load(fh)
            k = int(snap["iteration"])
            model_path = directory / snap.get("model", "")
            if k <= len(entries) and model_path.is_file():
                session.restore_entries(entries[:k])
                session.model = load_model(model_path)
                if snap.get("model_dense"):
                    session.model_dense = load_model(directory / snap["model_dense"])
                session.rng_state = snap["rng_state"]
                start = k
        for entry in entries[start:]:
            session.replay_entry(entry)
        live = LiveSession(meta["session_id"], meta["topic_id"], meta["created_at"],
                           session, directory, meta.get("overrides", {}))
        if session.is_exhausted():
            live.state = "exhausted"
        self.sessions[live.session_id] = live

    def shutdown(self) -> None:
        for live in self.sessions.values():
            with live.lock:
                live.snapshot()
                live.close_files()
