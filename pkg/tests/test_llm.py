import json

import pytest

from tutorkit.embedding import HashEmbedder
from tutorkit.errors import ConfigError, ProviderError
from tutorkit.llm import MockLLM, context_sentences, create_llm, load_directive
from tutorkit.retrieval import CourseIndex, SearchParams
from tutorkit.services import ItemKind, generate_quiz

from .test_services import INDEX, TOPIC_PARAMS


class TestDirectives:
    def test_templates_load_for_every_task(self):
        for key in ["answer", "summarize", "flashcards", "quiz", "grade",
                    "outline", "empathy", "classify", "rotate_summary"]:
            text = load_directive(key)
            assert text.strip()

    def test_unknown_directive_rejected(self):
        with pytest.raises(ConfigError):
            load_directive("nonexistent")


class TestMockLLM:
    def test_pure_identical_inputs_identical_output(self):
        llm = MockLLM()
        args = (load_directive("answer"), "[T] One fact. Another fact.", "q",
                {"task": "answer"})
        assert llm.complete(*args) == llm.complete(*args)

    def test_answer_echoes_context_sentences_only(self):
        llm = MockLLM()
        context = "[Lecture] Energy flows uphill never. Decomposers recycle nutrients."
        out = llm.complete("d", context, "q", {"task": "answer"})
        for sentence in context_sentences(out):
            assert sentence in context

    def test_context_sentences_strip_attributions(self):
        sentences = context_sentences("[Lecture One] First point. Second point.")
        assert sentences == ["First point.", "Second point."]

    def test_registry(self):
        assert create_llm({"provider": "mock"}).name == "mock"
        with pytest.raises(ConfigError):
            create_llm({"provider": "gpt-real"})

    def test_quiz_json_parses(self):
        llm = MockLLM()
        raw = llm.complete("d", "[T] A fact about soil. Another about water.", "topic",
                           {"task": "quiz", "count": 2,
                            "kinds": ["TrueFalse", "OpenEnded"]})
        items = json.loads(raw)
        assert len(items) == 2
        assert items[0]["kind"] == "TrueFalse"


class _FlakyThenGoodLLM:
    """First quiz call returns an invariant-violating item, second is valid."""

    name = "flaky-json"

    def __init__(self):
        self.calls = 0
        self._good = MockLLM()

    def complete(self, directive, context, user_text, params=None):
        params = params or {}
        if params.get("task") == "quiz":
            self.calls += 1
            if self.calls == 1:
                return json.dumps(
                    [{"question": "q", "options": ["a", "b", "c"],
                      "answer": "not-an-option", "explanation": "e",
                      "kind": "MultipleChoice"}]
                )
        return self._good.complete(directive, context, user_text, params)


class TestGenerationRetry:
    def test_invariant_violation_regenerated_once(self):
        llm = _FlakyThenGoodLLM()
        embedder = HashEmbedder(dim=64)
        result = generate_quiz(
            INDEX, embedder, llm, "photosynthesis chlorophyll light energy", 2,
            kinds=[ItemKind.MULTIPLE_CHOICE], params=TOPIC_PARAMS,
        )
        assert llm.calls == 2
        assert result.items
        for item in result.items:
            assert item.answer in item.options
