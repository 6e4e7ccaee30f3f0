"""Per-student conversation state with a token budget.

History is kept under a budget by rotating the oldest turns into a
rolling summary (rewrite-then-drop): the rotated turn's lead sentence is
folded into the summary, the raw turn is removed, and the summary itself
is capped at 20% of the budget. The newest turn always survives raw.

Budget accounting reserves a fixed allowance for the persona header and
one token per turn for its role label, so a rendered context window
never exceeds budget + summary allowance.
"""

from __future__ import annotations

import re
import time
import uuid
from dataclasses import dataclass, field
from typing import Optional

DEFAULT_TOKEN_BUDGET = 3000
SUMMARY_FRACTION = 0.2
HEADER_RESERVE_TOKENS = 32
LABEL_OVERHEAD_TOKENS = 1
TRUNCATION_MARKER = "[truncated]"

STANDARD_PERSONA = (
    "persona: You are an uplifting, helpful, and empathetic course assistant. "
    "Be clear, accurate, and encouraging."
)
EMPATHETIC_PERSONA = (
    "persona: You are a caring and patient course assistant. Acknowledge the "
    "student's feelings first, offer reassurance, then help step by step."
)

_PUNCT_BEFORE_WS = re.compile(r"[^\sA-Za-z0-9]+(?=\s)")
_TOKEN = re.compile(r"[A-Za-z0-9]+|[^\sA-Za-z0-9]")
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")


def count_tokens(text: str) -> int:
    """Deterministic token count.

    Alphanumeric runs count as one token each; punctuation characters
    count individually except when a punctuation run immediately
    precedes whitespace, where it acts as a separator. Pluggable: pass a
    provider-accurate counter to the conversation operations to replace
    it.
    """
    return len(_TOKEN.findall(_PUNCT_BEFORE_WS.sub("", text)))


@dataclass
class Turn:
    role: str  # "student" | "assistant"
    text: str
    token_count: int
    timestamp: float


@dataclass
class Conversation:
    id: str
    course_id: str
    student_id: str
    turns: list[Turn] = field(default_factory=list)
    rolling_summary: str = ""
    token_budget: int = DEFAULT_TOKEN_BUDGET

    @classmethod
    def new(cls, course_id: str, student_id: str = "anonymous",
            token_budget: int = DEFAULT_TOKEN_BUDGET,
            conversation_id: Optional[str] = None) -> "Conversation":
        if token_budget < 1:
            raise ValueError("token budget must be positive")
        return cls(
            id=conversation_id or uuid.uuid4().hex,
            course_id=course_id,
            student_id=student_id,
            token_budget=token_budget,
        )


def _first_sentence(text: str) -> str:
    parts = _SENTENCE_SPLIT.split(text.strip(), maxsplit=1)
    return parts[0] if parts and parts[0] else text.strip()


def _summary_cap(budget: int) -> int:
    return max(1, int(budget * SUMMARY_FRACTION))


def _retained_budget(budget: int) -> int:
    return max(1, budget - HEADER_RESERVE_TOKENS)


def _effective_cost(turn: Turn) -> int:
    return turn.token_count + LABEL_OVERHEAD_TOKENS


def _truncate_to_budget(text: str, max_tokens: int) -> str:
    """Word-trim text until it fits, appending a truncation marker."""
    words = text.split()
    while words:
        candidate = " ".join(words) + " " + TRUNCATION_MARKER
        if count_tokens(candidate) <= max_tokens:
            return candidate
        words.pop()
    if count_tokens(TRUNCATION_MARKER) <= max_tokens:
        return TRUNCATION_MARKER
    return "…"


def _trim_summary(summary: str, cap: int) -> str:
    """Drop oldest summary sentences until the labeled block fits the cap."""
    sentences = [s for s in _SENTENCE_SPLIT.split(summary) if s]
    while sentences and count_tokens("summary: " + " ".join(sentences)) > cap:
        if len(sentences) == 1:
            sentences[0] = _truncate_to_budget(sentences[0], max(1, cap - 1))
            break
        sentences.pop(0)
    return " ".join(sentences)


def _summarize_turn(turn: Turn, llm=None) -> str:
    if llm is not None:
        folded = llm.complete(
            "Condense the following conversation turn into one sentence.",
            "",
            turn.text,
            {"task": "rotate_summary"},
        ).strip()
        if folded:
            return folded
    return _first_sentence(turn.text)


def append_turn(conv: Conversation, role: str, text: str, llm=None) -> Conversation:
    """Append a turn, rotating oldest turns into the summary as needed.

    A single turn larger than the usable budget is truncated with a
    marker rather than rejected. Mutates and returns ``conv``.
    """
    if role not in ("student", "assistant"):
        raise ValueError(f"unknown role: {role!r}")
    if not text:
        raise ValueError("turn text must be nonempty")

    usable = _retained_budget(conv.token_budget)
    single_cap = max(1, usable - LABEL_OVERHEAD_TOKENS)
    if count_tokens(text) > single_cap:
        text = _truncate_to_budget(text, single_cap)

    last_ts = conv.turns[-1].timestamp if conv.turns else 0.0
    timestamp = max(time.time(), last_ts + 1e-6)
    conv.turns.append(Turn(role=role, text=text, token_count=count_tokens(text),
                           timestamp=timestamp))

    while len(conv.turns) > 1 and sum(_effective_cost(t) for t in conv.turns) > usable:
        rotated = conv.turns.pop(0)
        folded = _summarize_turn(rotated, llm)
        conv.rolling_summary = (
            conv.rolling_summary + " " + folded if conv.rolling_summary else folded
        )
        conv.rolling_summary = _trim_summary(
            conv.rolling_summary, _summary_cap(conv.token_budget)
        )
    return conv


def build_context_window(conv: Conversation, distress: bool = False) -> str:
    """Render the provider-facing window: persona header, summary, turns."""
    header = EMPATHETIC_PERSONA if distress else STANDARD_PERSONA
    parts = [header]
    if conv.rolling_summary:
        parts.append("summary: " + conv.rolling_summary)
    for turn in conv.turns:
        parts.append(f"{turn.role}: {turn.text}")
    return "\n".join(parts)


def conversation_to_dict(conv: Conversation) -> dict:
    return {
        "id": conv.id,
        "courseId": conv.course_id,
        "studentId": conv.student_id,
        "tokenBudget": conv.token_budget,
        "rollingSummary": conv.rolling_summary,
        "turns": [
            {
                "role": t.role,
                "text": t.text,
                "tokenCount": t.token_count,
                "timestamp": t.timestamp,
            }
            for t in conv.turns
        ],
    }


def conversation_from_dict(data: dict) -> Conversation:
    conv = Conversation(
        id=data["id"],
        course_id=data["courseId"],
        student_id=data.get("studentId", "anonymous"),
        token_budget=data.get("tokenBudget", DEFAULT_TOKEN_BUDGET),
        rolling_summary=data.get("rollingSummary", ""),
    )
    for t in data.get("turns", []):
        conv.turns.append(
            Turn(role=t["role"], text=t["text"], token_count=t["tokenCount"],
                 timestamp=t["timestamp"])
        )
    return conv
