"""Request/response models for the review service API."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class CreateSessionRequest(BaseModel):
    topic_id: str
    config: dict = Field(default_factory=dict)


class SessionHandle(BaseModel):
    session_id: str
    topic_id: str
    created_at: str
    state: str  # active | exhausted | closed
    iteration: int


class NextDocument(BaseModel):
    state: str
    doc_id: Optional[str] = None
    text: Optional[str] = None
    score: Optional[float] = None
    iteration: Optional[int] = None


class JudgmentRequest(BaseModel):
    doc_id: str
    judgment: str  # relevant | nonrelevant


class JudgmentAck(BaseModel):
    accepted: bool
    next_iteration: int


class SessionMetrics(BaseModel):
    topic_id: str
    iteration: int
    shown: int
    relevant_found: int
    p_at: dict[str, float]
    r_at: Optional[dict[str, float]] = None
    recall_at_4r_1000: Optional[float] = None
    r_t: Optional[int] = None
    curve_kind: str  # recall | relevant_found
    gain_curve: list[tuple[int, float]]


class HealthResponse(BaseModel):
    status: str
