"""The multistage query flow.

A query is classified, gated against protected assignments, matched to
course context, and only then answered. Hallucination control is a
context-only generation directive plus the abstention path: when nothing
clears the retrieval threshold the assistant either says it is not sure
or, in autonomous mode, answers with an explicit consult-an-expert
advisory instead of pretending to know.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .conversation import Conversation, build_context_window
from .embedding import EmbeddingProvider, cosine_similarity, is_degenerate
from .llm import LLMProvider, load_directive
from .retrieval import (
    CourseIndex,
    RetrievalHit,
    SearchParams,
    SourceRef,
    context_pack,
    search,
)
from . import services
from .services import GenerationResult, ItemKind, SummaryResult

UNCERTAIN_MESSAGE = (
    "I'm not sure. I couldn't find course material that answers this, and I'd "
    "rather say so than guess."
)
EXPERT_ADVISORY = (
    "This answer was generated without matching course documents. For matters "
    "of significant importance, please consult an expert."
)
PROVIDER_ERROR_DISCLAIMER = (
    "The answer service is temporarily unavailable, so I can't answer right now."
)
DEFAULT_HOMEWORK_THRESHOLD = 0.82


class Intent(str, Enum):
    ANSWER_QUESTION = "AnswerQuestion"
    SUMMARIZE = "Summarize"
    QUIZ_REQUEST = "QuizRequest"
    FLASHCARD_REQUEST = "FlashcardRequest"
    GENERATE_QUESTIONS = "GenerateQuestions"
    ESSAY_OUTLINE = "EssayOutline"
    CODE_HELP = "CodeHelp"
    GRADE_REQUEST = "GradeRequest"
    ADMIN_INFO = "AdminInfo"
    SMALL_TALK = "SmallTalk"


@dataclass(frozen=True)
class QueryIntent:
    intent: Intent
    confidence: float
    emotional_distress: bool = False


@dataclass
class AnswerEnvelope:
    text: str
    confidence_pct: float = 0.0
    sources: list[SourceRef] = field(default_factory=list)
    abstained: bool = False
    autonomous: bool = False
    homework_blocked: bool = False
    disclaimer: str = ""

    def state(self) -> str:
        """Exactly one of the four envelope states."""
        flags = [self.abstained, self.autonomous, self.homework_blocked]
        if sum(flags) > 1:
            raise ValueError("envelope flags are mutually exclusive")
        if self.abstained:
            return "abstained"
        if self.autonomous:
            return "autonomous"
        if self.homework_blocked:
            return "blocked"
        return "answer"


def envelope_to_dict(envelope: AnswerEnvelope) -> dict:
    return {
        "text": envelope.text,
        "confidencePct": envelope.confidence_pct,
        "sources": [
            {"resourceId": s.resource_id, "title": s.title, "score": s.score}
            for s in envelope.sources
        ],
        "abstained": envelope.abstained,
        "autonomous": envelope.autonomous,
        "homeworkBlocked": envelope.homework_blocked,
        "disclaimer": envelope.disclaimer,
    }


def envelope_from_dict(data: dict) -> AnswerEnvelope:
    return AnswerEnvelope(
        text=data["text"],
        confidence_pct=data["confidencePct"],
        sources=[
            SourceRef(s["resourceId"], s["title"], s["score"]) for s in data["sources"]
        ],
        abstained=data["abstained"],
        autonomous=data["autonomous"],
        homework_blocked=data["homeworkBlocked"],
        disclaimer=data["disclaimer"],
    )


@dataclass(frozen=True)
class AssistantSettings:
    search: SearchParams = SearchParams()
    homework_threshold: float = DEFAULT_HOMEWORK_THRESHOLD
    autonomous_mode: bool = False
    context_budget_chars: int = 4000


# Rule table for the offline-first classifier. Patterns are checked in
# order; the first hit wins.
_DISTRESS_RE = re.compile(
    r"\b(stressed|stress|struggling|overwhelmed|anxious|anxiety|depressed|"
    r"hopeless|panick?ing|panick?ed|crying|scared|burn(?:ed|t)\s*out|"
    r"giving up|can't cope|falling behind)\b",
    re.IGNORECASE,
)
_CODE_FENCE_RE = re.compile(r"```")
_CODE_LANGUAGE_RE = re.compile(
    r"\b(python|matlab|javascript|typescript|java|c\+\+|sql|code snippet|my code|"
    r"this code|run code|debug)\b",
    re.IGNORECASE,
)
_GENERATE_QUESTIONS_RE = re.compile(
    r"\b(generate|write|create|make)\b.{0,24}\bquestions\b", re.IGNORECASE | re.DOTALL
)
_ADMIN_RE = re.compile(
    r"\b(when is|when's|when are|what time|what day|due date|deadline|"
    r"office hours|how many points|exam date|midterm date|syllabus|"
    r"late policy|where is class|where do we)\b",
    re.IGNORECASE,
)
_SMALL_TALK_RE = re.compile(
    r"^\s*(hi|hello|hey|yo|good (morning|afternoon|evening)|thanks|thank you|"
    r"how are you|what's up|bye|goodbye)\b[\s!,.?]*",
    re.IGNORECASE,
)

_RULES: list[tuple[Intent, re.Pattern]] = [
    (Intent.GENERATE_QUESTIONS, _GENERATE_QUESTIONS_RE),
    (Intent.QUIZ_REQUEST, re.compile(r"\bquiz(?:zes)?\b", re.IGNORECASE)),
    (Intent.FLASHCARD_REQUEST, re.compile(r"\bflash\s?cards?\b", re.IGNORECASE)),
    (Intent.SUMMARIZE, re.compile(r"\b(summarize|summarise|summary|sum up)\b", re.IGNORECASE)),
    (Intent.ESSAY_OUTLINE, re.compile(r"\boutline\b", re.IGNORECASE)),
    (Intent.GRADE_REQUEST, re.compile(r"\bgrade\b|\bgrading\b", re.IGNORECASE)),
]


def classify_query(text: str, conversation: Optional[Conversation] = None,
                   llm: Optional[LLMProvider] = None) -> QueryIntent:
    """Total, deterministic rule-table classification.

    An optional provider refines queries no rule matched; without one the
    fallback is AnswerQuestion. The distress flag is independent of the
    chosen intent.
    """
    if not text or not text.strip():
        raise ValueError("query text must be nonempty")
    distress = bool(_DISTRESS_RE.search(text))

    for intent, pattern in _RULES:
        if pattern.search(text):
            return QueryIntent(intent, 1.0, distress)
    if _CODE_FENCE_RE.search(text) or _CODE_LANGUAGE_RE.search(text):
        return QueryIntent(Intent.CODE_HELP, 1.0, distress)
    if _ADMIN_RE.search(text):
        return QueryIntent(Intent.ADMIN_INFO, 1.0, distress)
    if _SMALL_TALK_RE.match(text):
        return QueryIntent(Intent.SMALL_TALK, 1.0, distress)

    if llm is not None:
        label = llm.complete(
            load_directive("classify"), "", text,
            {"task": "classify", "candidates": [i.value for i in Intent]},
        ).strip()
        try:
            return QueryIntent(Intent(label), 0.75, distress)
        except ValueError:
            pass
    return QueryIntent(Intent.ANSWER_QUESTION, 0.5, distress)


def confidence_of(hits: list[RetrievalHit]) -> float:
    """Confidence percentage: 100 x the top hit's cosine, floored at 0."""
    if not hits:
        return 0.0
    return 100.0 * max(0.0, hits[0].score)


@dataclass
class GateDecision:
    blocked: bool
    resource_id: str = ""
    resource_title: str = ""
    score: float = 0.0
    guidance: str = ""
    suggestions: list[SourceRef] = field(default_factory=list)


def homework_gate(index: CourseIndex, query_vector: np.ndarray,
                  settings: AssistantSettings = AssistantSettings()) -> GateDecision:
    """Block queries that target instructor-protected assignments.

    Checks the query against every protected resource's chunks; a cosine
    at or above the homework threshold blocks the query, and the guidance
    points at the best-matching non-protected resources instead of the
    assignment content.
    """
    if is_degenerate(np.asarray(query_vector, dtype=np.float64)):
        return GateDecision(blocked=False)
    best_score = -2.0
    best_entry = None
    for entry in index.entries:
        if not entry.protected:
            continue
        score = cosine_similarity(entry.vector, query_vector)
        if score > best_score:
            best_score = score
            best_entry = entry
    if best_entry is None or best_score < settings.homework_threshold:
        return GateDecision(blocked=False)

    non_protected = [e for e in index.entries if not e.protected]
    related_hits = search(
        CourseIndex(index.course_id, index.dim, index.provider_name, non_protected),
        query_vector,
        SearchParams(top_k=3, threshold=-1.0, tie_epsilon=settings.search.tie_epsilon),
    )
    seen: dict[str, SourceRef] = {}
    for hit in related_hits:
        if hit.resource_id not in seen:
            seen[hit.resource_id] = SourceRef(hit.resource_id, hit.resource_title, hit.score)
    suggestions = list(seen.values())
    if suggestions:
        titles = ", ".join(s.title for s in suggestions)
        guidance = (
            "This looks like a question from a protected assignment, so I can't "
            "give you the answer directly. To work it out yourself, review: "
            f"{titles}."
        )
    else:
        guidance = (
            "This looks like a question from a protected assignment, so I can't "
            "give you the answer directly. Please review the course materials or "
            "ask your instructor for guidance."
        )
    return GateDecision(
        blocked=True,
        resource_id=best_entry.chunk.resource_id,
        resource_title=best_entry.resource_title,
        score=best_score,
        guidance=guidance,
        suggestions=suggestions,
    )


def answer_query(
    index: CourseIndex,
    embedder: EmbeddingProvider,
    llm: LLMProvider,
    query_text: str,
    conversation: Optional[Conversation] = None,
    settings: AssistantSettings = AssistantSettings(),
    distress: bool = False,
) -> AnswerEnvelope:
    """Embed, gate, retrieve, and answer; abstain when context is empty."""
    query_vector = embedder.embed(query_text)

    gate = homework_gate(index, query_vector, settings)
    if gate.blocked:
        return AnswerEnvelope(
            text=gate.guidance,
            confidence_pct=0.0,
            sources=gate.suggestions,
            homework_blocked=True,
            disclaimer="Direct answers to this assignment are disabled by the instructor.",
        )

    hits = search(index, query_vector, settings.search)
    pack = context_pack(index, hits, settings.context_budget_chars)

    if not pack.text:
        if settings.autonomous_mode:
            try:
                text = llm.complete(
                    load_directive("answer"),
                    "",
                    query_text,
                    {"task": "autonomous_answer",
                     "conversation_window": _window(conversation, distress)},
                ) or (
                    "I couldn't find matching course material, so this is a "
                    "general answer attempted on my own: based on the question, "
                    "review the closest course topics and verify independently."
                )
            except Exception:
                return AnswerEnvelope(
                    text=UNCERTAIN_MESSAGE, abstained=True,
                    disclaimer=PROVIDER_ERROR_DISCLAIMER,
                )
            return AnswerEnvelope(
                text=text,
                confidence_pct=0.0,
                autonomous=True,
                disclaimer=EXPERT_ADVISORY,
            )
        return AnswerEnvelope(
            text=UNCERTAIN_MESSAGE,
            abstained=True,
            disclaimer="No course material matched this question closely enough.",
        )

    # The conversation window rides in params so the context stays pure
    # course material; providers weave the two together themselves.
    try:
        text = llm.complete(
            load_directive("answer"), pack.text, query_text,
            {"task": "answer", "conversation_window": _window(conversation, distress)},
        )
    except Exception:
        return AnswerEnvelope(
            text=UNCERTAIN_MESSAGE, abstained=True, disclaimer=PROVIDER_ERROR_DISCLAIMER
        )
    confidence = confidence_of(hits)
    titles = ", ".join(s.title for s in pack.sources)
    return AnswerEnvelope(
        text=text,
        confidence_pct=confidence,
        sources=pack.sources,
        disclaimer=f"Confidence: {confidence:.0f}%. Sources: {titles}.",
    )


def _window(conversation: Optional[Conversation], distress: bool) -> str:
    if conversation is None:
        return ""
    return build_context_window(conversation, distress)


@dataclass
class DispatchResult:
    """Outcome of intent fulfillment; every dispatch carries provenance."""

    kind: str
    envelope: Optional[AnswerEnvelope] = None
    generation: Optional[GenerationResult] = None
    summary: Optional[SummaryResult] = None
    code: Optional[services.CodeAssistPayload] = None
    sources: list[SourceRef] = field(default_factory=list)


_TOPIC_STOP_RE = re.compile(
    r"\b(make|me|a|an|the|please|quiz|quizzes|flashcards?|flash|cards?|about|on|"
    r"of|for|generate|create|write|some|summar(?:y|ize|ise)|questions?|outline|"
    r"essay|give|can|you|could)\b",
    re.IGNORECASE,
)


def extract_topic(query_text: str) -> str:
    """Strip request words so the remainder can drive topic retrieval."""
    topic = _TOPIC_STOP_RE.sub(" ", query_text)
    topic = re.sub(r"[^\w\s]", " ", topic)
    topic = " ".join(topic.split())
    return topic or query_text


def fulfill_intent(
    index: CourseIndex,
    embedder: EmbeddingProvider,
    llm: LLMProvider,
    classified: QueryIntent,
    query_text: str,
    conversation: Optional[Conversation] = None,
    settings: AssistantSettings = AssistantSettings(),
) -> DispatchResult:
    """Route a classified query to the matching service."""
    intent = classified.intent
    topic = extract_topic(query_text)

    if intent is Intent.QUIZ_REQUEST:
        result = services.generate_quiz(
            index, embedder, llm, topic, count=5,
            params=settings.search, context_budget=settings.context_budget_chars,
        )
        return DispatchResult(kind="quiz", generation=result, sources=result.sources)
    if intent is Intent.FLASHCARD_REQUEST:
        result = services.generate_flashcards(
            index, embedder, llm, topic, count=3,
            params=settings.search, context_budget=settings.context_budget_chars,
        )
        return DispatchResult(kind="flashcards", generation=result, sources=result.sources)
    if intent is Intent.GENERATE_QUESTIONS:
        count_match = re.search(r"\b(\d{1,2})\b", query_text)
        count = int(count_match.group(1)) if count_match else 5
        result = services.generate_exam_questions(
            index, embedder, llm, topic, count=max(1, count), kind=ItemKind.OPEN_ENDED,
            params=settings.search, context_budget=settings.context_budget_chars,
        )
        return DispatchResult(kind="questions", generation=result, sources=result.sources)
    if intent is Intent.SUMMARIZE:
        result = services.summarize_topic(
            index, embedder, llm, topic,
            params=settings.search, context_budget=settings.context_budget_chars,
        )
        return DispatchResult(kind="summary", summary=result, sources=result.sources)
    if intent is Intent.CODE_HELP:
        payload = services.code_assist(query_text)
        return DispatchResult(kind="code", code=payload)
    if intent is Intent.ESSAY_OUTLINE:
        envelope = _outline_envelope(index, embedder, llm, topic, settings)
        return DispatchResult(kind="outline", envelope=envelope, sources=envelope.sources)
    if intent is Intent.SMALL_TALK:
        if classified.emotional_distress:
            text = llm.complete(
                load_directive("empathy"), _window(conversation, True), query_text,
                {"task": "empathy"},
            )
        else:
            text = (
                "Hi! I can answer questions about the course, quiz you, make "
                "flashcards, or summarize topics. What would you like to do?"
            )
        envelope = AnswerEnvelope(text=text, confidence_pct=0.0)
        return DispatchResult(kind="smalltalk", envelope=envelope)
    if intent is Intent.GRADE_REQUEST:
        envelope = AnswerEnvelope(
            text=(
                "Grading runs through the instructor tools: upload a key and a "
                "submission on the grading endpoint or dashboard to get a "
                "question-by-question report."
            ),
            confidence_pct=0.0,
        )
        return DispatchResult(kind="grade-info", envelope=envelope)

    # AnswerQuestion, AdminInfo, and any unknown intent fall back to retrieval QA.
    envelope = answer_query(
        index, embedder, llm, query_text, conversation, settings,
        distress=classified.emotional_distress,
    )
    return DispatchResult(kind="answer", envelope=envelope, sources=envelope.sources)


def _outline_envelope(index, embedder, llm, topic, settings) -> AnswerEnvelope:
    hits = search(index, embedder.embed(topic), settings.search)
    pack = context_pack(index, hits, settings.context_budget_chars)
    if not pack.text:
        return AnswerEnvelope(text=UNCERTAIN_MESSAGE, abstained=True,
                              disclaimer="No course material matched this topic.")
    text = llm.complete(load_directive("outline"), pack.text, topic, {"task": "outline"})
    confidence = confidence_of(hits)
    return AnswerEnvelope(
        text=text,
        confidence_pct=confidence,
        sources=pack.sources,
        disclaimer=f"Confidence: {confidence:.0f}%.",
    )
