"""Webhook-friendly HTTP service.

A FastAPI app exposes the pipeline and services over JSON, persists
through the file store, records pseudonymized analytics, and pushes
signed webhook deliveries to registered callbacks. Every response the
companion UI renders originates here; the UI holds no logic of its own.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import threading
import time
from collections import OrderedDict
from typing import Optional

import numpy as np
from fastapi import Depends, FastAPI, Header, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .config import AppConfig
from .conversation import Conversation, append_turn
from .embedding import create_provider
from .errors import ConfigError, NotFoundError, TutorkitError
from .ingest import FileFixtureLms, CanvasLms, sync_course
from .llm import create_llm
from .pipeline import (
    AnswerEnvelope,
    AssistantSettings,
    classify_query,
    envelope_to_dict,
    fulfill_intent,
)
from .services import (
    EchoExecutor,
    ItemKind,
    RemoteExecutor,
    code_assist,
    generate_exam_questions,
    generate_flashcards,
    generate_quiz,
    grade_submission,
    load_grading_key,
    load_submission,
    report_to_dict,
    summarize_topic,
)
from .store import EventKind, FileStore, aggregate_events, record_event


class QueryEmbeddingCache:
    """Size-bounded LRU for query embeddings, keyed (provider, text)."""

    def __init__(self, capacity: int = 1024):
        self.capacity = capacity
        self._entries: "OrderedDict[tuple[str, str], np.ndarray]" = OrderedDict()
        self._lock = threading.Lock()

    def get_or_embed(self, provider, text: str) -> np.ndarray:
        key = (provider.name, text)
        with self._lock:
            if key in self._entries:
                self._entries.move_to_end(key)
                return self._entries[key]
        vector = provider.embed(text)
        with self._lock:
            self._entries[key] = vector
            self._entries.move_to_end(key)
            while len(self._entries) > self.capacity:
                self._entries.popitem(last=False)
        return vector


class CachingEmbedder:
    """Provider wrapper routing single-text embeds through the LRU cache."""

    def __init__(self, provider, cache: QueryEmbeddingCache):
        self._provider = provider
        self._cache = cache
        self.name = provider.name
        self.dim = provider.dim

    def embed(self, text: str):
        return self._cache.get_or_embed(self._provider, text)

    def embed_batch(self, texts):
        return self._provider.embed_batch(texts)


def sign_payload(secret: str, body: bytes) -> str:
    return "sha256=" + hmac.new(secret.encode("utf-8"), body, hashlib.sha256).hexdigest()


class WebhookDispatcher:
    """At-least-once delivery with bounded retry and a dead-letter log."""

    def __init__(self, store: FileStore, attempts: int = 3,
                 backoff_base_s: float = 0.5, timeout_s: float = 5.0):
        self.store = store
        self.attempts = attempts
        self.backoff_base_s = backoff_base_s
        self.timeout_s = timeout_s

    def dispatch(self, payload: dict) -> None:
        registrations = [r for r in self.store.load_webhooks() if not r.get("flagged")]
        if not registrations:
            return
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        for registration in registrations:
            self._deliver(registration, body)

    def _deliver(self, registration: dict, body: bytes) -> None:
        import httpx

        headers = {
            "Content-Type": "application/json",
            "X-Tutorkit-Signature": sign_payload(registration["secret"], body),
        }
        for attempt in range(self.attempts):
            try:
                response = httpx.post(
                    registration["url"], content=body, headers=headers,
                    timeout=self.timeout_s,
                )
            except Exception:
                response = None
            if response is not None and response.status_code < 300:
                return
            if response is not None and 400 <= response.status_code < 500:
                # Permanent failure: flag the registration, do not retry.
                self.store.flag_webhook(registration["id"])
                return
            if attempt < self.attempts - 1:
                time.sleep(self.backoff_base_s * (2**attempt))
        self.store.append_dead_letter(
            {"url": registration["url"], "reason": "retries exhausted",
             "attempts": self.attempts, "timestamp": time.time()}
        )


class AppState:
    def __init__(self, config: AppConfig):
        self.config = config
        self.store = FileStore(config.store_path)
        cache = QueryEmbeddingCache(1024)
        self.embedder = CachingEmbedder(create_provider(config.embedding), cache)
        self.llm = create_llm(config.llm)
        executor_cfg = dict(config.executor)
        kind = executor_cfg.get("provider", "echo")
        if kind == "echo":
            self.executor = EchoExecutor()
        elif kind == "remote":
            self.executor = RemoteExecutor(executor_cfg.get("endpoint", ""))
        else:
            raise ConfigError(f"unknown executor provider {kind!r}")
        self.settings = AssistantSettings(
            search=config.retrieval,
            homework_threshold=config.homework_threshold,
            autonomous_mode=config.autonomous_mode,
            context_budget_chars=config.context_budget_chars,
        )
        self.dispatcher = WebhookDispatcher(
            self.store,
            attempts=config.webhook.attempts,
            backoff_base_s=config.webhook.backoff_base_s,
            timeout_s=config.webhook.timeout_s,
        )
        self._sync_locks: dict[str, threading.Lock] = {}
        self._conversation_locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def sync_lock(self, course_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._sync_locks.setdefault(course_id, threading.Lock())

    def conversation_lock(self, conversation_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._conversation_locks.setdefault(conversation_id, threading.Lock())

    def load_index(self, course_id: str):
        index = self.store.load_course_index(course_id)
        if index is None:
            raise NotFoundError(f"course {course_id!r} has no index; ingest it first")
        return index


class QueryRequest(BaseModel):
    text: str = Field(min_length=1)
    conversationId: Optional[str] = None
    studentId: str = "anonymous"


class TopicCountRequest(BaseModel):
    topic: str = Field(min_length=1)
    count: int = Field(default=3, ge=1, le=50)
    kinds: Optional[list[str]] = None


class SummarizeRequest(BaseModel):
    topic: str = Field(min_length=1)
    lengthHint: str = "short"


class GradeRequest(BaseModel):
    key: dict
    submission: dict


class QuestionsRequest(BaseModel):
    topic: str = Field(min_length=1)
    count: int = Field(default=5, ge=1, le=50)
    kind: str = "MultipleChoice"


class ResourcePatch(BaseModel):
    enabled: Optional[bool] = None
    protected: Optional[bool] = None


class WebhookRegistration(BaseModel):
    url: str
    secret: str


class SyncRequest(BaseModel):
    source: Optional[str] = None  # fixture dir; LMS URL needs lmsToken
    lmsToken: Optional[str] = None


class ExecuteRequest(BaseModel):
    language: str
    code: str


def create_app(config: AppConfig) -> FastAPI:
    state = AppState(config)
    app = FastAPI(title="tutorkit", version=__version__)
    app.state.tutorkit = state
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def role_from_header(authorization: Optional[str] = Header(default=None)) -> str:
        token = None
        if authorization and authorization.lower().startswith("bearer "):
            token = authorization[7:]
        role = state.config.auth.role_of(token)
        if role is None:
            raise HTTPException(status_code=401, detail="missing or unknown token")
        return role

    def require_instructor(role: str = Depends(role_from_header)) -> str:
        if role != "instructor":
            raise HTTPException(status_code=403, detail="instructor role required")
        return role

    @app.exception_handler(NotFoundError)
    async def not_found_handler(request: Request, exc: NotFoundError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(TutorkitError)
    async def domain_error_handler(request: Request, exc: TutorkitError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/healthz")
    def healthz():
        return {
            "status": "ok",
            "version": __version__,
            "providers": {
                "embedding": state.embedder.name,
                "llm": state.llm.name,
                "executor": state.executor.name,
            },
        }

    @app.post("/courses/{course_id}/query")
    def query_course(course_id: str, body: QueryRequest,
                     role: str = Depends(role_from_header)):
        started = time.perf_counter()
        index = state.load_index(course_id)
        conversation_id = body.conversationId or Conversation.new(course_id).id
        with state.conversation_lock(conversation_id):
            conversation = state.store.load_conversation(course_id, conversation_id)
            if conversation is None:
                conversation = Conversation.new(
                    course_id, student_id=body.studentId,
                    token_budget=state.config.token_budget,
                    conversation_id=conversation_id,
                )
            classified = classify_query(body.text, conversation)
            append_turn(conversation, "student", body.text, state.llm)
            result = fulfill_intent(
                index, state.embedder, state.llm, classified, body.text,
                conversation=conversation, settings=state.settings,
            )
            envelope, attachment = _result_to_envelope(result)
            append_turn(conversation, "assistant", envelope.text or "(no reply)",
                        state.llm)
            state.store.save_conversation(conversation)

        latency_ms = (time.perf_counter() - started) * 1000.0
        event_kind = EventKind.QUERY
        if envelope.abstained:
            event_kind = EventKind.ABSTENTION
        elif envelope.homework_blocked:
            event_kind = EventKind.HOMEWORK_BLOCK
        event = record_event(
            state.store, course_id, body.studentId, state.config.analytics_salt,
            event_kind, intent=classified.intent.value, latency_ms=latency_ms,
        )
        payload = envelope_to_dict(envelope)
        payload["conversationId"] = conversation_id
        payload["intent"] = classified.intent.value
        if attachment is not None:
            payload["attachment"] = attachment
        state.dispatcher.dispatch(
            {
                "event": {
                    "kind": event.event_kind.value,
                    "courseId": course_id,
                    "intent": event.intent,
                    "timestamp": event.timestamp,
                },
                "payload": payload,
            }
        )
        return payload

    @app.post("/courses/{course_id}/quiz")
    def quiz(course_id: str, body: TopicCountRequest,
             role: str = Depends(role_from_header)):
        index = state.load_index(course_id)
        kinds = [ItemKind(k) for k in body.kinds] if body.kinds else None
        result = generate_quiz(
            index, state.embedder, state.llm, body.topic, body.count,
            kinds=kinds or (ItemKind.TRUE_FALSE, ItemKind.OPEN_ENDED),
            params=state.settings.search,
            context_budget=state.settings.context_budget_chars,
        )
        record_event(state.store, course_id, "anonymous", state.config.analytics_salt,
                     EventKind.QUIZ, intent="QuizRequest")
        return _generation_to_dict(result)

    @app.post("/courses/{course_id}/flashcards")
    def flashcards(course_id: str, body: TopicCountRequest,
                   role: str = Depends(role_from_header)):
        index = state.load_index(course_id)
        result = generate_flashcards(
            index, state.embedder, state.llm, body.topic, body.count,
            params=state.settings.search,
            context_budget=state.settings.context_budget_chars,
        )
        record_event(state.store, course_id, "anonymous", state.config.analytics_salt,
                     EventKind.FLASHCARDS, intent="FlashcardRequest")
        return _generation_to_dict(result)

    @app.post("/courses/{course_id}/summarize")
    def summarize(course_id: str, body: SummarizeRequest,
                  role: str = Depends(role_from_header)):
        index = state.load_index(course_id)
        result = summarize_topic(
            index, state.embedder, state.llm, body.topic, body.lengthHint,
            params=state.settings.search,
            context_budget=state.settings.context_budget_chars,
        )
        record_event(state.store, course_id, "anonymous", state.config.analytics_salt,
                     EventKind.SUMMARY, intent="Summarize")
        return {
            "text": result.text,
            "sources": _sources_to_dicts(result.sources),
            "disclaimer": result.disclaimer,
            "notice": result.notice,
        }

    @app.post("/courses/{course_id}/grade")
    def grade(course_id: str, body: GradeRequest,
              role: str = Depends(require_instructor)):
        try:
            items = load_grading_key(body.key)
            student, answers = load_submission(body.submission)
            report = grade_submission(items, answers, state.llm)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        record_event(state.store, course_id, student, state.config.analytics_salt,
                     EventKind.GRADE, intent="GradeRequest")
        payload = report_to_dict(report)
        payload["student"] = student
        state.dispatcher.dispatch(
            {"event": {"kind": "Grade", "courseId": course_id}, "payload": payload}
        )
        return payload

    @app.post("/courses/{course_id}/questions")
    def questions(course_id: str, body: QuestionsRequest,
                  role: str = Depends(require_instructor)):
        index = state.load_index(course_id)
        try:
            kind = ItemKind(body.kind)
        except ValueError:
            raise HTTPException(status_code=422, detail=f"unknown kind {body.kind!r}")
        result = generate_exam_questions(
            index, state.embedder, state.llm, body.topic, body.count, kind,
            params=state.settings.search,
            context_budget=state.settings.context_budget_chars,
        )
        return _generation_to_dict(result)

    @app.get("/courses/{course_id}/resources")
    def list_resources(course_id: str, role: str = Depends(require_instructor)):
        resources = state.store.load_resources(course_id)
        return {
            "resources": [
                {
                    "id": r.id,
                    "kind": r.kind.value,
                    "title": r.title,
                    "enabled": r.enabled,
                    "protected": r.protected,
                    "priorityTier": r.priority_tier,
                    "updatedAt": r.updated_at,
                }
                for r in sorted(resources.values(), key=lambda r: r.id)
            ]
        }

    @app.patch("/courses/{course_id}/resources/{resource_id}")
    def patch_resource(course_id: str, resource_id: str, body: ResourcePatch,
                       role: str = Depends(require_instructor)):
        resource = state.store.set_resource_flags(
            course_id, resource_id, enabled=body.enabled, protected=body.protected
        )
        return {
            "id": resource.id,
            "enabled": resource.enabled,
            "protected": resource.protected,
        }

    @app.get("/courses/{course_id}/analytics")
    def analytics(course_id: str, role: str = Depends(require_instructor),
                  start: float = 0.0, end: float = float("inf")):
        if not state.store.has_course(course_id):
            raise NotFoundError(f"course {course_id!r} not found")
        return aggregate_events(state.store.load_events(course_id, start, end))

    @app.post("/courses/{course_id}/sync")
    def sync(course_id: str, body: SyncRequest,
             role: str = Depends(require_instructor)):
        if body.source is None:
            raise HTTPException(status_code=422, detail="sync requires a source")
        if body.source.startswith(("http://", "https://")):
            lms = CanvasLms(body.source, body.lmsToken or "")
        else:
            lms = FileFixtureLms(body.source)
        lock = state.sync_lock(course_id)
        if not lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="sync already running")
        try:
            report = sync_course(lms, course_id, state.store, state.embedder)
        finally:
            lock.release()
        return report.to_dict()

    @app.post("/webhooks")
    def register_webhook(body: WebhookRegistration,
                         role: str = Depends(role_from_header)):
        registration = state.store.register_webhook(body.url, body.secret)
        return {"id": registration["id"], "url": registration["url"]}

    @app.post("/execute")
    def execute(body: ExecuteRequest, role: str = Depends(role_from_header)):
        payload = code_assist(
            f"```{body.language}\n{body.code}\n```",
            allowlist=state.config.executor_allowlist,
        )
        if not payload.runnable:
            raise HTTPException(
                status_code=422,
                detail=f"language {payload.detected_language!r} is not executable here",
            )
        try:
            return state.executor.execute(payload.detected_language, payload.code)
        except Exception as exc:
            raise HTTPException(status_code=502, detail=f"executor failed: {exc}")

    return app


def _sources_to_dicts(sources) -> list[dict]:
    return [
        {"resourceId": s.resource_id, "title": s.title, "score": s.score}
        for s in sources
    ]


def _generation_to_dict(result) -> dict:
    return {
        "cards": [
            {
                "front": c.front,
                "back": c.back,
                "reasoning": c.reasoning,
                "kind": c.kind.value,
                "sourceResourceIds": c.source_resource_ids,
            }
            for c in result.cards
        ],
        "items": [
            {
                "kind": i.kind.value,
                "question": i.question,
                "options": i.options,
                "answer": i.answer,
                "explanation": i.explanation,
                "topic": i.topic,
                "sourceResourceIds": i.source_resource_ids,
            }
            for i in result.items
        ],
        "sources": _sources_to_dicts(result.sources),
        "notice": result.notice,
    }


def _result_to_envelope(result) -> tuple[AnswerEnvelope, Optional[dict]]:
    """Flatten a dispatch result onto the envelope wire shape."""
    if result.envelope is not None:
        return result.envelope, None
    if result.generation is not None:
        generation = result.generation
        if generation.notice:
            return AnswerEnvelope(text=generation.notice, abstained=True,
                                  disclaimer=generation.notice), None
        if result.kind == "flashcards":
            text = f"Here are {len(generation.cards)} flashcards."
        elif result.kind == "questions":
            text = f"Here are {len(generation.items)} questions."
        else:
            text = f"Here is a {len(generation.items)}-question quiz."
        envelope = AnswerEnvelope(
            text=text,
            confidence_pct=100.0 * max(0.0, generation.sources[0].score)
            if generation.sources else 0.0,
            sources=generation.sources,
        )
        return envelope, _generation_to_dict(generation)
    if result.summary is not None:
        summary = result.summary
        if summary.notice:
            return AnswerEnvelope(text=summary.notice, abstained=True,
                                  disclaimer=summary.notice), None
        envelope = AnswerEnvelope(
            text=summary.text,
            confidence_pct=100.0 * max(0.0, summary.sources[0].score)
            if summary.sources else 0.0,
            sources=summary.sources,
            disclaimer=summary.disclaimer,
        )
        return envelope, None
    if result.code is not None:
        payload = result.code
        text = (
            f"I detected {payload.detected_language} code."
            if payload.code
            else "I couldn't find a code block in your message."
        )
        envelope = AnswerEnvelope(text=text, confidence_pct=0.0)
        return envelope, {
            "detectedLanguage": payload.detected_language,
            "code": payload.code,
            "runnable": payload.runnable,
            "executorHint": payload.executor_hint,
        }
    return AnswerEnvelope(text="(empty result)"), None


def serve(config: AppConfig) -> None:
    """Run the HTTP service until interrupted."""
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host="0.0.0.0", port=config.port, log_level="info")
