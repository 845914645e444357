"""HTTP review service: live CAL sessions for human reviewers.

Judgments are journaled before they are acknowledged; retraining finishes
before the next candidate is served. Set AUTH_TOKEN to require a static
bearer token on the session endpoints (/healthz and /ui stay open).
"""

from __future__ import annotations

from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles

from .. import evaluation
from ..runlog import RunLogEntry
from .schemas import (CreateSessionRequest, HealthResponse, JudgmentAck,
                      JudgmentRequest, NextDocument, SessionHandle, SessionMetrics)
from .state import ConfigFieldError, LiveSession, ServiceState, UnknownTopicError

UI_DIR = Path(__file__).resolve().parents[3] / "frontend" / "dist"


def create_app(state: ServiceState | None = None, ui_dir: Path | None = None) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        if app.state.service is not None:
            app.state.service.shutdown()

    app = FastAPI(title="calrank review service", lifespan=lifespan)
    app.state.service = state

    def service() -> ServiceState:
        if app.state.service is None:
            raise HTTPException(status_code=503, detail="manifest not loaded")
        return app.state.service

    def authorize(request: Request) -> None:
        st = service()
        if not st.auth_token:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {st.auth_token}":
            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    def live_session(session_id: str) -> LiveSession:
        live = service().get(session_id)
        if live is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return live

    def handle_of(live: LiveSession) -> SessionHandle:
        return SessionHandle(session_id=live.session_id, topic_id=live.topic_id,
                             created_at=live.created_at, state=live.state,
                             iteration=live.session.iteration)

    @app.get("/healthz", response_model=HealthResponse)
    def healthz():
        if app.state.service is None:
            raise HTTPException(status_code=503, detail="manifest not loaded")
        return HealthResponse(status="ok")

    @app.post("/sessions", response_model=SessionHandle, status_code=201)
    def create_session(body: CreateSessionRequest, request: Request):
        authorize(request)
        try:
            live = service().create_session(body.topic_id, body.config)
        except UnknownTopicError:
            raise HTTPException(status_code=404,
                                detail=f"unknown topic {body.topic_id!r}") from None
        except ConfigFieldError as exc:
            raise HTTPException(status_code=400,
                                detail={"field": exc.field, "message": str(exc)}) from None
        return handle_of(live)

    @app.get("/sessions/{session_id}", response_model=SessionHandle)
    def get_session(session_id: str, request: Request):
        authorize(request)
        return handle_of(live_session(session_id))

    @app.get("/sessions/{session_id}/next", response_model=NextDocument)
    def next_document(session_id: str, request: Request):
        authorize(request)
        live = live_session(session_id)
        with live.lock:
            if live.state == "closed":
                raise HTTPException(status_code=409, detail="session is closed")
            batch = live.session.next_candidates()
            if not batch:
                live.state = "exhausted"
                return NextDocument(state="exhausted")
            doc_id, score = batch[0]
            return NextDocument(state="active", doc_id=doc_id,
                                text=live.session.corpus.get(doc_id).text,
                                score=score, iteration=live.session.iteration + 1)

    @app.post("/sessions/{session_id}/judgments", response_model=JudgmentAck)
    def judge(session_id: str, body: JudgmentRequest, request: Request):
        authorize(request)
        if body.judgment not in ("relevant", "nonrelevant"):
            raise HTTPException(status_code=400,
                                detail="judgment must be relevant or nonrelevant")
        live = live_session(session_id)
        with live.lock:
            if live.state == "closed":
                raise HTTPException(status_code=409, detail="session is closed")
            session = live.session
            if body.doc_id in session.judged or body.doc_id not in session.offered:
                raise HTTPException(
                    status_code=409,
                    detail=f"doc {body.doc_id!r} is not the offered document")
            relevant = body.judgment == "relevant"
            first_stage, final = session.offered[body.doc_id]
            live.journal_append(RunLogEntry(session.iteration + 1, body.doc_id,
                                            first_stage, final, relevant))
            session.record_judgment(body.doc_id, relevant)
            if session.iteration % app.state.service.snapshot_every == 0:
                live.snapshot()
            return JudgmentAck(accepted=True, next_iteration=session.iteration + 1)

    @app.get("/sessions/{session_id}/metrics", response_model=SessionMetrics)
    def metrics(session_id: str, request: Request):
        authorize(request)
        live = live_session(session_id)
        st = service()
        with live.lock:
            session = live.session
            log = session.shown_log
            relevant_found = sum(1 for e in log if e.relevant)
            r_t = None
            if st.oracle is not None and st.oracle.has_topic(live.topic_id):
                r_t = st.oracle.relevant_count(live.topic_id)
            p_at = {str(k): evaluation.precision_at(log, k) for k in st.eval_ks}
            if r_t is not None:
                report = evaluation.build_report(live.topic_id, log, r_t, st.eval_ks)
                return SessionMetrics(
                    topic_id=live.topic_id, iteration=session.iteration,
                    shown=len(log), relevant_found=relevant_found, p_at=p_at,
                    r_at={str(k): v for k, v in report.r_at.items()},
                    recall_at_4r_1000=report.recall_at_4r_1000, r_t=r_t,
                    curve_kind="recall", gain_curve=report.gain_curve)
            found = 0
            curve = []
            for e in log:
                if e.relevant:
                    found += 1
                curve.append((e.iteration, float(found)))
            return SessionMetrics(
                topic_id=live.topic_id, iteration=session.iteration,
                shown=len(log), relevant_found=relevant_found, p_at=p_at,
                curve_kind="relevant_found", gain_curve=curve)

    @app.get("/sessions/{session_id}/export")
    def export(session_id: str, request: Request):
        authorize(request)
        live = live_session(session_id)
        with live.lock:
            lines = [f"{e.iteration}\t{e.doc_id}\t{e.first_stage_score!r}"
                     f"\t{e.final_score!r}\t{1 if e.relevant else 0}\n"
                     for e in live.session.shown_log]
        return PlainTextResponse(
            "".join(lines),
            headers={"Content-Disposition":
                     f'attachment; filename="{live.topic_id}-runlog.tsv"'})

    @app.delete("/sessions/{session_id}", response_model=SessionHandle)
    def close_session(session_id: str, request: Request):
        authorize(request)
        live = live_session(session_id)
        with live.lock:
            live.snapshot()
            live.close_files()
            live.state = "closed"
        return handle_of(live)

    mount_dir = ui_dir if ui_dir is not None else UI_DIR
    if mount_dir.is_dir():
        app.mount("/ui", StaticFiles(directory=str(mount_dir), html=True), name="ui")

    return app
