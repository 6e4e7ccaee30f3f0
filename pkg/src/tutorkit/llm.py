"""Completion provider abstraction and the bundled deterministic mock.

The mock provider is pure: identical inputs always produce identical
output, and everything it generates is stitched from sentences of the
context it was given, never invented. That property is what the
no-fabrication tests lean on.
"""

from __future__ import annotations

import json
import re
from importlib import resources
from typing import Mapping, Optional, Protocol

from .errors import ConfigError


class LLMProvider(Protocol):
    name: str

    def complete(self, directive: str, context: str, user_text: str,
                 params: Optional[Mapping] = None) -> str: ...


def load_directive(key: str) -> str:
    """Directive templates ship as editable text files keyed by intent."""
    try:
        return (
            resources.files("tutorkit").joinpath(f"directives/{key}.txt").read_text("utf-8")
        )
    except FileNotFoundError:
        raise ConfigError(f"no directive template for {key!r}")


_SENTENCE_RE = re.compile(r"[^.!?\n]+[.!?]?")
_ATTRIBUTION_RE = re.compile(r"^\[[^\]]*\]\s*")


def context_sentences(context: str) -> list[str]:
    """Sentences of a context pack, attribution prefixes stripped."""
    sentences = []
    for line in context.split("\n"):
        line = _ATTRIBUTION_RE.sub("", line.strip())
        for match in _SENTENCE_RE.finditer(line):
            sentence = match.group().strip()
            if sentence:
                sentences.append(sentence)
    return sentences


def _head_words(text: str, n: int = 8) -> str:
    words = text.split()
    head = " ".join(words[:n])
    return head


_WORD_RE = re.compile(r"[a-z0-9]+")


def _overlap_score(key_answer: str, student_answer: str) -> int:
    """Key-point overlap on a 0..10 scale, half-up rounding."""
    key_tokens = set(_WORD_RE.findall(key_answer.lower()))
    student_tokens = set(_WORD_RE.findall(student_answer.lower()))
    if not key_tokens:
        return 0
    ratio = len(key_tokens & student_tokens) / len(key_tokens)
    return min(10, int(ratio * 10 + 0.5))


class MockLLM:
    """Template-stitching stand-in for a real completion model.

    Structured tasks (flashcards, quiz items, grading) are selected via
    ``params["task"]``; a real provider would act on the directive text
    instead. Output text is assembled only from context sentences and
    fixed templates.
    """

    name = "mock"

    def complete(self, directive: str, context: str, user_text: str,
                 params: Optional[Mapping] = None) -> str:
        params = dict(params or {})
        task = params.get("task", "answer")
        handler = getattr(self, f"_task_{task}", None)
        if handler is None:
            return self._task_answer(directive, context, user_text, params)
        return handler(directive, context, user_text, params)

    def _task_answer(self, directive, context, user_text, params) -> str:
        sentences = context_sentences(context)
        if not sentences:
            return ""
        return " ".join(sentences[:3])

    def _task_autonomous_answer(self, directive, context, user_text, params) -> str:
        return (
            "No course material matched, so I'm answering on my own: "
            f"for \"{user_text.strip()}\", start from the general definition and "
            "work toward the specifics, then verify against a trusted reference."
        )

    def _task_summarize(self, directive, context, user_text, params) -> str:
        sentences = context_sentences(context)
        return " ".join(sentences[:4])

    def _task_outline(self, directive, context, user_text, params) -> str:
        sentences = context_sentences(context)
        lines = [f"{i}. {s}" for i, s in enumerate(sentences[:5], start=1)]
        return "\n".join(lines)

    def _task_empathy(self, directive, context, user_text, params) -> str:
        return (
            "I hear you, and what you're feeling is completely understandable. "
            "You're not alone in this, and I'm here whenever you want to work "
            "through the material together. Let's take it one small step at a time."
        )

    def _task_rotate_summary(self, directive, context, user_text, params) -> str:
        match = _SENTENCE_RE.search(user_text.strip())
        return match.group().strip() if match else user_text.strip()

    def _task_classify(self, directive, context, user_text, params) -> str:
        return "AnswerQuestion"

    def _task_grade(self, directive, context, user_text, params) -> str:
        key_answer = params.get("key_answer", "")
        student_answer = params.get("student_answer", user_text)
        score = _overlap_score(key_answer, student_answer)
        return (
            f"Score: {score}/10. The student answer covers {score} of 10 "
            f"key points from the expected answer."
        )

    def _task_flashcards(self, directive, context, user_text, params) -> str:
        sentences = context_sentences(context)
        count = int(params.get("count", 3))
        cards = []
        for i in range(min(count, len(sentences))):
            sentence = sentences[i]
            if i % 2 == 0:
                cards.append(
                    {
                        "front": f"True or False: {sentence}",
                        "back": "True",
                        "reasoning": sentence,
                        "kind": "TrueFalse",
                    }
                )
            else:
                cards.append(
                    {
                        "front": f'Explain what the course material means by: "{_head_words(sentence)}"',
                        "back": sentence,
                        "reasoning": sentence,
                        "kind": "OpenEnded",
                    }
                )
        return json.dumps(cards)

    def _task_quiz(self, directive, context, user_text, params) -> str:
        sentences = context_sentences(context)
        count = int(params.get("count", 5))
        kinds = list(params.get("kinds", ["TrueFalse", "OpenEnded"]))
        items = []
        for i in range(min(count, len(sentences))):
            sentence = sentences[i]
            kind = kinds[i % len(kinds)]
            if kind == "TrueFalse":
                items.append(
                    {
                        "question": f"True or False: {sentence}",
                        "options": [],
                        "answer": "True",
                        "explanation": sentence,
                        "kind": "TrueFalse",
                    }
                )
            elif kind == "MultipleChoice":
                distractors = [s for s in sentences if s != sentence][:3]
                while len(distractors) < 3:
                    distractors.append("This statement does not appear in the material.")
                items.append(
                    {
                        "question": "Which statement appears in the course material?",
                        "options": [sentence] + distractors,
                        "answer": sentence,
                        "explanation": sentence,
                        "kind": "MultipleChoice",
                    }
                )
            else:
                items.append(
                    {
                        "question": f'Explain what the course material means by: "{_head_words(sentence)}"',
                        "options": [],
                        "answer": sentence,
                        "explanation": sentence,
                        "kind": "OpenEnded",
                    }
                )
        return json.dumps(items)


_LLM_REGISTRY = {
    "mock": lambda cfg: MockLLM(),
}


def create_llm(config: dict) -> LLMProvider:
    name = config.get("provider", "mock")
    factory = _LLM_REGISTRY.get(name)
    if factory is None:
        raise ConfigError(f"unknown llm provider {name!r}; known: {sorted(_LLM_REGISTRY)}")
    return factory(config)


def register_llm(name: str, factory) -> None:
    _LLM_REGISTRY[name] = factory
