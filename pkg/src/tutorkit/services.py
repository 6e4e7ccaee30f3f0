"""Student- and instructor-facing intelligent services.

Generation is always retrieval-constrained: topic context is assembled
from the course index first, and an empty context yields a no-material
notice instead of fabricated content. Grading shares one engine between
the student quiz flow and the instructor auto-evaluator: exact matching
for closed questions, the completion provider for open-ended ones, with
scores banded red/yellow/green for visual review.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from .embedding import EmbeddingProvider
from .errors import ProviderError
from .llm import LLMProvider, load_directive
from .retrieval import ContextPack, CourseIndex, SearchParams, SourceRef, context_pack, search

NO_MATERIAL_NOTICE = (
    "I couldn't find course material on that topic, so I can't generate "
    "anything for it. Try a topic covered by the course resources."
)


class ItemKind(str, Enum):
    TRUE_FALSE = "TrueFalse"
    MULTIPLE_CHOICE = "MultipleChoice"
    OPEN_ENDED = "OpenEnded"


class Band(str, Enum):
    RED = "Red"
    YELLOW = "Yellow"
    GREEN = "Green"


def band_of(score: int) -> Band:
    """Color band for a 0..10 question score: <=2 red, <=5 yellow, >5 green."""
    if not isinstance(score, int) or not 0 <= score <= 10:
        raise ValueError(f"score must be an integer in 0..10, got {score!r}")
    if score <= 2:
        return Band.RED
    if score <= 5:
        return Band.YELLOW
    return Band.GREEN


@dataclass
class AssessmentItem:
    kind: ItemKind
    question: str
    answer: str
    explanation: str
    options: list[str] = field(default_factory=list)
    topic: str = ""
    source_resource_ids: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.kind = ItemKind(self.kind)
        if self.kind is ItemKind.MULTIPLE_CHOICE:
            if len(self.options) < 3:
                raise ValueError("multiple-choice items need at least 3 options")
            if self.answer not in self.options:
                raise ValueError("multiple-choice answer must be among the options")
        if self.kind is ItemKind.TRUE_FALSE and self.answer not in ("True", "False"):
            raise ValueError('true/false answer must be "True" or "False"')
        if not self.explanation:
            raise ValueError("explanation must be nonempty")


@dataclass
class Flashcard:
    front: str
    back: str
    reasoning: str
    kind: ItemKind
    source_resource_ids: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.kind = ItemKind(self.kind)
        if not (self.front and self.back and self.reasoning):
            raise ValueError("flashcard front/back/reasoning must be nonempty")


@dataclass
class GradeEntry:
    question: str
    student_answer: str
    score: int
    explanation: str
    band: Band
    retriable: bool = False


@dataclass
class GradeReport:
    entries: list[GradeEntry]
    total: int
    max_total: int


@dataclass
class GenerationResult:
    """Cards or items plus the provenance they were generated from."""

    cards: list[Flashcard] = field(default_factory=list)
    items: list[AssessmentItem] = field(default_factory=list)
    sources: list[SourceRef] = field(default_factory=list)
    notice: Optional[str] = None


@dataclass
class SummaryResult:
    text: str
    sources: list[SourceRef] = field(default_factory=list)
    disclaimer: str = ""
    notice: Optional[str] = None


def _topic_context(index: CourseIndex, embedder: EmbeddingProvider, topic: str,
                   params: SearchParams, context_budget: int) -> ContextPack:
    hits = search(index, embedder.embed(topic), params)
    return context_pack(index, hits, context_budget)


def _parse_json_list(raw: str) -> list[dict]:
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ProviderError(f"provider returned unparsable JSON: {exc}") from exc
    if not isinstance(data, list):
        raise ProviderError("provider JSON was not a list")
    return data


def generate_flashcards(
    index: CourseIndex,
    embedder: EmbeddingProvider,
    llm: LLMProvider,
    topic: str,
    count: int,
    params: SearchParams = SearchParams(),
    context_budget: int = 4000,
) -> GenerationResult:
    """Flashcards on a topic, constrained to retrieved course material."""
    if count < 1:
        raise ValueError("count must be >= 1")
    pack = _topic_context(index, embedder, topic, params, context_budget)
    if not pack.text:
        return GenerationResult(notice=NO_MATERIAL_NOTICE)
    raw = llm.complete(
        load_directive("flashcards"), pack.text, topic, {"task": "flashcards", "count": count}
    )
    source_ids = [s.resource_id for s in pack.sources]
    cards = [
        Flashcard(
            front=obj["front"],
            back=obj["back"],
            reasoning=obj["reasoning"],
            kind=obj.get("kind", "OpenEnded"),
            source_resource_ids=source_ids,
        )
        for obj in _parse_json_list(raw)
    ]
    return GenerationResult(cards=cards, sources=pack.sources)


_DEFAULT_QUIZ_KINDS = (ItemKind.TRUE_FALSE, ItemKind.OPEN_ENDED)


def _generate_items(
    index: CourseIndex,
    embedder: EmbeddingProvider,
    llm: LLMProvider,
    topic: str,
    count: int,
    kinds: Sequence[ItemKind],
    params: SearchParams,
    context_budget: int,
) -> GenerationResult:
    pack = _topic_context(index, embedder, topic, params, context_budget)
    if not pack.text:
        return GenerationResult(notice=NO_MATERIAL_NOTICE)
    wanted = [ItemKind(k).value for k in kinds]
    source_ids = [s.resource_id for s in pack.sources]

    def build(raw: str) -> list[AssessmentItem]:
        return [
            AssessmentItem(
                kind=obj.get("kind", "OpenEnded"),
                question=obj["question"],
                answer=obj["answer"],
                explanation=obj["explanation"],
                options=list(obj.get("options", [])),
                topic=topic,
                source_resource_ids=source_ids,
            )
            for obj in _parse_json_list(raw)
            if obj.get("kind") in wanted
        ]

    request = {"task": "quiz", "count": count, "kinds": wanted}
    try:
        items = build(llm.complete(load_directive("quiz"), pack.text, topic, request))
    except (ValueError, ProviderError):
        # One regeneration attempt for invariant-violating provider output.
        items = build(llm.complete(load_directive("quiz"), pack.text, topic, request))
    return GenerationResult(items=items[:count], sources=pack.sources)


def generate_quiz(
    index: CourseIndex,
    embedder: EmbeddingProvider,
    llm: LLMProvider,
    topic: str,
    count: int,
    kinds: Sequence[ItemKind] = _DEFAULT_QUIZ_KINDS,
    params: SearchParams = SearchParams(),
    context_budget: int = 4000,
) -> GenerationResult:
    """Quiz items on a topic; ``kinds`` restricts the emitted item kinds."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return _generate_items(index, embedder, llm, topic, count, kinds, params, context_budget)


def generate_exam_questions(
    index: CourseIndex,
    embedder: EmbeddingProvider,
    llm: LLMProvider,
    topic: str,
    count: int,
    kind: ItemKind,
    params: SearchParams = SearchParams(),
    context_budget: int = 4000,
) -> GenerationResult:
    """Instructor variant of quiz generation: one mandated item kind."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return _generate_items(
        index, embedder, llm, topic, count, [ItemKind(kind)], params, context_budget
    )


_SCORE_RE = re.compile(r"(?:score\s*[:=]?\s*)?(\d{1,2})\s*/\s*10", re.IGNORECASE)


def _parse_grader_score(raw: str) -> Optional[int]:
    match = _SCORE_RE.search(raw)
    if not match:
        return None
    score = int(match.group(1))
    return score if 0 <= score <= 10 else None


def grade_submission(
    items: Sequence[AssessmentItem],
    student_answers: Sequence[str],
    grader: LLMProvider,
) -> GradeReport:
    """Score a submission question by question.

    Closed questions (true/false, multiple choice) are graded by
    case-insensitive exact match. Open-ended answers go to the grader
    provider, which must yield an integer 0..10 with an explanation;
    unparsable grader output scores 0 and is flagged retriable.
    """
    if len(student_answers) != len(items):
        raise ValueError(
            f"answer count {len(student_answers)} != question count {len(items)}"
        )
    entries: list[GradeEntry] = []
    for item, answer in zip(items, student_answers):
        if item.kind in (ItemKind.TRUE_FALSE, ItemKind.MULTIPLE_CHOICE):
            correct = answer.strip().lower() == item.answer.strip().lower()
            score = 10 if correct else 0
            explanation = (
                f"Correct: the expected answer is {item.answer!r}."
                if correct
                else f"Incorrect: the expected answer is {item.answer!r}. {item.explanation}"
            )
            entries.append(
                GradeEntry(item.question, answer, score, explanation, band_of(score))
            )
            continue
        try:
            raw = grader.complete(
                load_directive("grade"),
                "",
                f"Key answer: {item.answer}\nStudent answer: {answer}",
                {"task": "grade", "key_answer": item.answer, "student_answer": answer},
            )
        except Exception as exc:
            entries.append(
                GradeEntry(item.question, answer, 0,
                           f"Grader error: {exc}", band_of(0), retriable=True)
            )
            continue
        score = _parse_grader_score(raw)
        if score is None:
            entries.append(
                GradeEntry(item.question, answer, 0,
                           f"Grader returned an unparsable score: {raw!r}",
                           band_of(0), retriable=True)
            )
        else:
            entries.append(GradeEntry(item.question, answer, score, raw, band_of(score)))
    total = sum(e.score for e in entries)
    return GradeReport(entries=entries, total=total, max_total=10 * len(entries))


_KIND_CODES = {"TF": ItemKind.TRUE_FALSE, "MC": ItemKind.MULTIPLE_CHOICE, "OPEN": ItemKind.OPEN_ENDED}


def load_grading_key(data: dict) -> list[AssessmentItem]:
    """Key JSON: {"questions": [{"q", "answer", "kind": "TF|MC|OPEN"}, ...]}."""
    items = []
    for entry in data.get("questions", []):
        kind = _KIND_CODES.get(entry.get("kind", "OPEN"))
        if kind is None:
            raise ValueError(f"unknown question kind {entry.get('kind')!r}")
        items.append(
            AssessmentItem(
                kind=kind,
                question=entry["q"],
                answer=entry["answer"],
                explanation=entry.get("explanation", "Key answer provided by instructor."),
                options=list(entry.get("options", [])) or (
                    [entry["answer"], "", ""] if kind is ItemKind.MULTIPLE_CHOICE else []
                ),
            )
        )
    return items


def load_submission(data: dict) -> tuple[str, list[str]]:
    """Submission JSON: {"student": id, "answers": [text, ...]}."""
    return str(data.get("student", "anonymous")), [str(a) for a in data.get("answers", [])]


def report_to_dict(report: GradeReport) -> dict:
    return {
        "entries": [
            {
                "question": e.question,
                "studentAnswer": e.student_answer,
                "score": e.score,
                "explanation": e.explanation,
                "band": e.band.value.lower(),
                "retriable": e.retriable,
            }
            for e in report.entries
        ],
        "total": report.total,
        "maxTotal": report.max_total,
    }


def summarize_topic(
    index: CourseIndex,
    embedder: EmbeddingProvider,
    llm: LLMProvider,
    topic: str,
    length_hint: str = "short",
    params: SearchParams = SearchParams(),
    context_budget: int = 4000,
) -> SummaryResult:
    """Retrieval-constrained summary with a confidence-and-source disclaimer."""
    pack = _topic_context(index, embedder, topic, params, context_budget)
    if not pack.text:
        return SummaryResult(text="", notice=NO_MATERIAL_NOTICE)
    try:
        text = llm.complete(
            load_directive("summarize"), pack.text, topic,
            {"task": "summarize", "length_hint": length_hint},
        )
    except Exception as exc:
        return SummaryResult(text="", notice=f"Summary unavailable: provider error ({exc}).")
    confidence_pct = 100.0 * max(0.0, pack.sources[0].score) if pack.sources else 0.0
    titles = ", ".join(s.title for s in pack.sources)
    disclaimer = (
        f"Confidence: {confidence_pct:.0f}%. Sources: {titles}. Summaries are brief "
        "overviews; consult the full material for important matters."
    )
    return SummaryResult(text=text, sources=pack.sources, disclaimer=disclaimer)


# Code assist: ordered detection heuristics over the query text.

@dataclass
class CodeAssistPayload:
    detected_language: str
    code: str
    runnable: bool
    executor_hint: str


DEFAULT_EXECUTOR_ALLOWLIST = frozenset({"python", "javascript"})

_FENCE_RE = re.compile(r"```([A-Za-z0-9+#_.-]*)\n(.*?)```", re.DOTALL)

_KEYWORD_SIGNATURES = [
    ("python", re.compile(r"\bdef \w+\s*\(|\bimport \w+|print\(")),
    ("matlab", re.compile(r"\bfunction\b.*=.*\(|\bdisp\(|\bfprintf\(|\bend\b\s*$", re.MULTILINE)),
    ("javascript", re.compile(r"\bconst \w+|\blet \w+|console\.log\(|=>")),
    ("java", re.compile(r"public\s+(static\s+)?\w+\s+\w+\s*\(|System\.out\.println")),
    ("c", re.compile(r"#include\s*<|\bint main\s*\(")),
    ("sql", re.compile(r"\bSELECT\b.+\bFROM\b", re.IGNORECASE | re.DOTALL)),
]

_EXTENSION_MENTIONS = [
    ("python", re.compile(r"\.py\b")),
    ("matlab", re.compile(r"\.m\b")),
    ("javascript", re.compile(r"\.js\b")),
    ("java", re.compile(r"\.java\b")),
    ("c", re.compile(r"\.c\b")),
    ("sql", re.compile(r"\.sql\b")),
]

_LANGUAGE_ALIASES = {"py": "python", "js": "javascript", "octave": "matlab"}


def code_assist(query_text: str,
                allowlist: frozenset[str] = DEFAULT_EXECUTOR_ALLOWLIST) -> CodeAssistPayload:
    """Detect language and extract code for the sandbox flow.

    Ordered heuristics: fence info-string first, then keyword
    signatures, then file-extension mentions; "unknown" is a valid
    outcome. Execution itself is delegated to the executor endpoint;
    ``runnable`` is true only for allowlisted languages with code.
    """
    language = "unknown"
    code = ""
    fence = _FENCE_RE.search(query_text)
    if fence:
        code = fence.group(2).strip()
        info = fence.group(1).strip().lower()
        if info:
            language = _LANGUAGE_ALIASES.get(info, info)
    if language == "unknown":
        probe = code or query_text
        for name, pattern in _KEYWORD_SIGNATURES:
            if pattern.search(probe):
                language = name
                break
    if language == "unknown":
        for name, pattern in _EXTENSION_MENTIONS:
            if pattern.search(query_text):
                language = name
                break
    runnable = bool(code) and language in allowlist
    return CodeAssistPayload(
        detected_language=language,
        code=code,
        runnable=runnable,
        executor_hint=language if runnable else "",
    )


class EchoExecutor:
    """Bundled mock for the executor wire contract: echoes the code."""

    name = "echo"

    def execute(self, language: str, code: str) -> dict:
        return {"stdout": code, "stderr": "", "exitCode": 0}


class RemoteExecutor:
    """POST {"language", "code"} -> {"stdout", "stderr", "exitCode"}."""

    name = "remote"

    def __init__(self, endpoint: str, timeout: float = 30.0):
        self.endpoint = endpoint
        self.timeout = timeout

    def execute(self, language: str, code: str) -> dict:
        import httpx

        response = httpx.post(
            self.endpoint, json={"language": language, "code": code}, timeout=self.timeout
        )
        if response.status_code != 200:
            raise ProviderError(f"executor returned HTTP {response.status_code}")
        return response.json()
