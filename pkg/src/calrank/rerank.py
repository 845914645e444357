"""Second-stage reranking of the top-k first-stage candidates.

The neural scorer itself lives behind an HTTP boundary (or an offline scores
file); this module builds the exact scorer input strings, transports the
request, and folds the returned scores back into the ranking, optionally
summing them with min-max-normalized first-stage scores.

Scorer HTTP contract: POST JSON
    {topic_id, query, candidates: [{doc_id, input}], history: [{doc_id, label}]}
    -> {scores: [{doc_id, score}]}
Offline scores file: ``topic_id<TAB>iteration<TAB>doc_id<TAB>score`` per line.
"""

from __future__ import annotations

import json
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Optional


class RerankError(ValueError):
    pass


class ScorerTimeoutError(RerankError):
    pass


class ScorerProtocolError(RerankError):
    pass


class ScorerCoverageError(RerankError):
    pass


@dataclass(frozen=True)
class ScorerEndpoint:
    """Where and how to get rerank scores.

    Exactly one of url / offline_path / identity should be set. Truncation
    budgets are whitespace-token counts; the real subword truncation belongs
    to the scorer side, which sees the full budgeted text.
    """

    url: Optional[str] = None
    offline_path: Optional[str] = None
    identity: bool = False
    template: str = "monobert"  # monobert | monot5
    timeout_s: float = 10.0
    query_tokens: int = 64
    doc_tokens: int = 445
    stateless: bool = False

    def __post_init__(self):
        if self.template not in ("monobert", "monot5"):
            raise ValueError(f"unknown scorer template {self.template!r}")


@dataclass(frozen=True)
class RerankPolicy:
    k: int = 10
    fuse_sum: bool = False
    scorer: ScorerEndpoint = ScorerEndpoint(identity=True)
    normalization: Optional[str] = None  # none | minmax_within_k; defaulted below

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.normalization not in (None, "none", "minmax_within_k"):
            raise ValueError(f"unknown normalization {self.normalization!r}")

    @property
    def effective_normalization(self) -> str:
        if self.normalization is not None:
            return self.normalization
        return "minmax_within_k" if self.fuse_sum else "none"


def _truncate(text: str, budget: int) -> str:
    return " ".join(text.split()[:budget])


def build_monobert_input(query: str, doc_text: str,
                         query_tokens: int = 64, doc_tokens: int = 445) -> str:
    q = _truncate(query, query_tokens)
    d = _truncate(doc_text, doc_tokens)
    return f"[CLS] {q} [SEP] {d} [SEP]"


def build_monot5_input(query: str, doc_text: str,
                       query_tokens: int = 64, doc_tokens: int = 445) -> str:
    q = _truncate(query, query_tokens)
    d = _truncate(doc_text, doc_tokens)
    return f"Query: {q} Document: {d} Relevant: "


def build_scorer_input(endpoint: ScorerEndpoint, query: str, doc_text: str) -> str:
    builder = build_monobert_input if endpoint.template == "monobert" else build_monot5_input
    return builder(query, doc_text, endpoint.query_tokens, endpoint.doc_tokens)


def _minmax(values: list[float]) -> list[float]:
    lo, hi = min(values), max(values)
    span = hi - lo
    if span == 0.0:
        return [0.0] * len(values)
    return [(v - lo) / span for v in values]


def apply_rerank(first_stage: list[tuple[str, float]], policy: RerankPolicy,
                 response: dict[str, float]) -> list[tuple[str, float]]:
    """Reorder the top-k of a ranked list by scorer output.

    first_stage must already be in rank order. Documents below rank k keep
    their order, strictly after the reranked block. Sorts are stable, so score
    ties preserve first-stage order.
    """
    k = min(policy.k, len(first_stage))
    top = first_stage[:k]
    missing = [doc_id for doc_id, _ in top if doc_id not in response]
    if missing:
        raise ScorerCoverageError(f"rerank response missing doc {missing[0]!r}")
    if policy.fuse_sum:
        fs = [s for _, s in top]
        rr = [response[doc_id] for doc_id, _ in top]
        if policy.effective_normalization == "minmax_within_k":
            fs, rr = _minmax(fs), _minmax(rr)
        fused = [(doc_id, f + r) for (doc_id, _), f, r in zip(top, fs, rr)]
        reordered = sorted(fused, key=lambda pair: -pair[1])
    else:
        scored = [(doc_id, float(response[doc_id])) for doc_id, _ in top]
        reordered = sorted(scored, key=lambda pair: -pair[1])
    return reordered + list(first_stage[k:])


@dataclass(frozen=True)
class RerankRequest:
    topic_id: str
    query: str
    candidates: list[tuple[str, str]]  # (doc_id, prepared input)
    history: list[tuple[str, str]]     # (doc_id, "relevant"|"nonrelevant")
    iteration: int = 0


class ScorerClient:
    """Transport for one scorer endpoint, with a (doc, scorer-state) score cache.

    A stateful scorer (one that fine-tunes on the judgment history) yields a
    new state version per judgment; stateless endpoints reuse version 0, so
    repeated candidates are never re-requested.
    """

    def __init__(self, endpoint: ScorerEndpoint):
        self.endpoint = endpoint
        self._cache: dict[tuple[str, int], float] = {}
        self._offline: dict[tuple[str, int, str], float] | None = None

    def score(self, topic_id: str, query: str, candidates: list[tuple[str, str]],
              history: list[tuple[str, str]], iteration: int) -> dict[str, float]:
        request = RerankRequest(topic_id, query, candidates, history, iteration)
        version = 0 if self.endpoint.stateless else len(history)
        wanted = [c for c in candidates if (c[0], version) not in self._cache]
        if wanted:
            fetched = self._fetch(replace_candidates(request, wanted))
            for doc_id, score in fetched.items():
                self._cache[(doc_id, version)] = score
        out = {}
        for doc_id, _ in candidates:
            out[doc_id] = self._cache[(doc_id, version)]
        return out

    def _fetch(self, request: RerankRequest) -> dict[str, float]:
        if self.endpoint.identity:
            raise RerankError("identity scorer resolves scores in the engine, not here")
        if self.endpoint.offline_path is not None:
            return self._fetch_offline(request)
        if self.endpoint.url is not None:
            return self._fetch_http(request)
        raise RerankError("scorer endpoint has neither url nor offline_path")

    def _fetch_offline(self, request: RerankRequest) -> dict[str, float]:
        if self._offline is None:
            self._offline = _load_offline_scores(self.endpoint.offline_path)
        out = {}
        for doc_id, _ in request.candidates:
            key = (request.topic_id, request.iteration, doc_id)
            if key not in self._offline:
                raise ScorerCoverageError(
                    f"offline scores missing doc {doc_id!r} "
                    f"(topic {request.topic_id}, iteration {request.iteration})")
            out[doc_id] = self._offline[key]
        return out

    def _fetch_http(self, request: RerankRequest) -> dict[str, float]:
        payload = json.dumps({
            "topic_id": request.topic_id,
            "query": request.query,
            "candidates": [{"doc_id": d, "input": inp} for d, inp in request.candidates],
            "history": [{"doc_id": d, "label": lab} for d, lab in request.history],
        }).encode("utf-8")
        req = urllib.request.Request(self.endpoint.url, data=payload,
                                     headers={"Content-Type": "application/json"})
        body = None
        for attempt in (1, 2):  # one retry on timeout / connection failure
            try:
                with urllib.request.urlopen(req, timeout=self.endpoint.timeout_s) as resp:
                    body = resp.read()
                break
            except TimeoutError as exc:
                if attempt == 2:
                    raise ScorerTimeoutError(
                        f"scorer timeout (topic {request.topic_id}, "
                        f"iteration {request.iteration})") from exc
            except urllib.error.URLError as exc:
                if isinstance(exc.reason, TimeoutError) or "timed out" in str(exc.reason):
                    if attempt == 2:
                        raise ScorerTimeoutError(
                            f"scorer timeout (topic {request.topic_id}, "
                            f"iteration {request.iteration})") from exc
                else:
                    if attempt == 2:
                        raise ScorerProtocolError(
                            f"scorer unreachable: {exc.reason} "
                            f"(topic {request.topic_id}, iteration {request.iteration})") from exc
        try:
            parsed = json.loads(body)
            scores = {item["doc_id"]: float(item["score"]) for item in parsed["scores"]}
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ScorerProtocolError(
                f"malformed scorer response (topic {request.topic_id}, "
                f"iteration {request.iteration}): {exc}") from None
        requested = {d for d, _ in request.candidates}
        missing = requested - scores.keys()
        if missing:
            raise ScorerCoverageError(
                f"scorer response missing doc {sorted(missing)[0]!r} "
                f"(topic {request.topic_id}, iteration {request.iteration})")
        extra = scores.keys() - requested
        if extra:
            raise ScorerProtocolError(
                f"scorer response covers unrequested doc {sorted(extra)[0]!r}")
        for doc_id, score in scores.items():
            if not _finite(score):
                raise ScorerProtocolError(f"non-finite score for doc {doc_id!r}")
        return scores


def replace_candidates(request: RerankRequest, candidates) -> RerankRequest:
    return RerankRequest(request.topic_id, request.query, list(candidates),
                         request.history, request.iteration)


def _finite(x: float) -> bool:
    return x == x and x not in (float("inf"), float("-inf"))


def _load_offline_scores(path: str | Path) -> dict[tuple[str, int, str], float]:
    table: dict[tuple[str, int, str], float] = {}
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ScorerProtocolError(f"{path}:{lineno}: expected 4 fields")
            topic_id, iteration, doc_id, score = parts
            table[(topic_id, int(iteration), doc_id)] = float(score)
    return table


def call_external_scorer(request: RerankRequest, endpoint: ScorerEndpoint) -> dict[str, float]:
    """One-shot transport (no cache); see ScorerClient for the session path."""
    return ScorerClient(endpoint).score(request.topic_id, request.query,
                                        request.candidates, request.history,
                                        request.iteration)
